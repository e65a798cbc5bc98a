#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dapt/sequence.hpp"

namespace dapt {

struct VocabConfig {
  int d_tok = 32;
  std::uint64_t seed = 0;
};

/// Deterministic word embedding: the token for a word is a unit-norm vector
/// drawn from a Gaussian stream seeded by (seed, lowercase(word)). Same word
/// and config always produce the same vector; no table is stored anywhere.
/// Throws InvalidWordError for empty input or input containing whitespace.
TokenVec embed_text(std::string_view word, const VocabConfig& cfg);

/// Splits a name on whitespace and embeds each word. Single-word names give
/// one token; multi-word names contribute one token per word.
std::vector<TokenVec> word_tokens(std::string_view name, const VocabConfig& cfg);

/// The embedded words of the fixed template prefix "a photo of a".
std::vector<TokenVec> template_words(const VocabConfig& cfg);

/// Fixed natural-language prompt "a photo of a <class> <domain>", embedded
/// word by word and zero-padded to l_max. Throws ShapeError if the content
/// does not fit.
TokenSeq handcrafted_prompt(std::string_view class_name, std::string_view domain_label,
                            const VocabConfig& cfg, int l_max);

}  // namespace dapt
