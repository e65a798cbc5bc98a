#include "dapt/vocab.hpp"

#include <algorithm>
#include <cctype>

#include "dapt/errors.hpp"
#include "dapt/rng.hpp"

namespace dapt {

namespace {

std::string trim_lower(std::string_view word) {
  size_t b = 0;
  size_t e = word.size();
  while (b < e && std::isspace(static_cast<unsigned char>(word[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(word[e - 1]))) --e;
  std::string out(word.substr(b, e - b));
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

TokenVec embed_text(std::string_view word, const VocabConfig& cfg) {
  const std::string key = trim_lower(word);
  if (key.empty()) throw InvalidWordError("cannot embed empty word");
  for (char c : key) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      throw InvalidWordError("embed_text expects a single word, got: '" + key + "'");
    }
  }
  Rng rng(splitmix64(cfg.seed ^ fnv1a64(key)));
  TokenVec v(cfg.d_tok);
  for (double& x : v) x = rng.normal();
  normalize(v);
  return v;
}

std::vector<TokenVec> word_tokens(std::string_view name, const VocabConfig& cfg) {
  std::vector<TokenVec> out;
  size_t i = 0;
  while (i < name.size()) {
    while (i < name.size() && std::isspace(static_cast<unsigned char>(name[i]))) ++i;
    size_t j = i;
    while (j < name.size() && !std::isspace(static_cast<unsigned char>(name[j]))) ++j;
    if (j > i) out.push_back(embed_text(name.substr(i, j - i), cfg));
    i = j;
  }
  if (out.empty()) throw InvalidWordError("cannot tokenize empty name");
  return out;
}

std::vector<TokenVec> template_words(const VocabConfig& cfg) {
  std::vector<TokenVec> toks;
  for (const char* w : {"a", "photo", "of", "a"}) toks.push_back(embed_text(w, cfg));
  return toks;
}

TokenSeq handcrafted_prompt(std::string_view class_name, std::string_view domain_label,
                            const VocabConfig& cfg, int l_max) {
  std::vector<TokenVec> toks = template_words(cfg);
  for (auto& t : word_tokens(class_name, cfg)) toks.push_back(std::move(t));
  for (auto& t : word_tokens(domain_label, cfg)) toks.push_back(std::move(t));

  const int n = static_cast<int>(toks.size());
  if (n > l_max) {
    throw ShapeError("prompt content length " + std::to_string(n) + " exceeds l_max " +
                     std::to_string(l_max));
  }
  TokenSeq seq;
  seq.tokens = Matrix(l_max, cfg.d_tok);
  seq.content_len = n;
  for (int l = 0; l < n; ++l) {
    std::copy(toks[l].begin(), toks[l].end(), seq.tokens.row(l));
  }
  return seq;
}

}  // namespace dapt
