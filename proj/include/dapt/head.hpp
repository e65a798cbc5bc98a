#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dapt/encoder.hpp"
#include "dapt/prompt.hpp"
#include "dapt/vocab.hpp"

namespace dapt {

struct HeadConfig {
  double temp = 0.07;            // softmax temperature over cosines, fixed
  double conf_threshold = 0.8;   // pseudo-label confidence gate
};

/// Which classifiers participate in the softmax denominator.
enum class DomainSet { SourceOnly, TargetOnly, Both };

/// One K x d_emb block of class embeddings per domain, rows unit norm.
struct DomainClassEmbeddings {
  Matrix source;
  Matrix target;

  int K() const { return source.rows; }
  int d_emb() const { return source.cols; }
  const Matrix& of(DomainTag d) const { return d == DomainTag::Source ? source : target; }
};

/// Everything needed to (re)build the class embeddings from the prompt
/// parameters and to push gradients back through encoder and prompt.
/// domain_tokens_* may be empty for layouts without a trailing domain token.
struct HeadPipeline {
  const PromptParams* params = nullptr;
  const FrozenEncoder* enc = nullptr;
  std::vector<std::vector<TokenVec>> class_tokens;  // K entries, one or more tokens each
  std::vector<TokenVec> domain_tokens_source;
  std::vector<TokenVec> domain_tokens_target;

  int K() const { return static_cast<int>(class_tokens.size()); }
  TokenSeq sequence(DomainTag d, int class_idx) const;
  DomainClassEmbeddings build() const;

  /// grads += d(upstream . embedding(d, class_idx)) / d params
  void backward_into(PromptParams& grads, DomainTag d, int class_idx,
                     std::span<const double> upstream) const;
};

DomainClassEmbeddings build_head(const HeadPipeline& pipeline);

/// Softmax over cosine(feature, row)/temp for the support selected by D:
/// SourceOnly and TargetOnly use their K rows, Both concatenates source rows
/// (indices 0..K-1) then target rows (K..2K-1).
Vec support_probs(std::span<const double> feature, const DomainClassEmbeddings& heads,
                  DomainSet D, const HeadConfig& cfg);

/// The K probabilities of domain d's classes under the D-denominator softmax.
/// Sums to 1 when D names a single domain; under Both the full 2K vector sums
/// to 1 and this slice sums to less. Throws DomainMismatchError when D
/// excludes d.
Vec class_probs(std::span<const double> feature, const DomainClassEmbeddings& heads, DomainTag d,
                DomainSet D, const HeadConfig& cfg);

/// K-way softmax over cosine/temp against fixed rows (no domain structure).
Vec zero_shot_probs(std::span<const double> feature, const Matrix& rows, double temp);

/// Argmax of zero_shot_probs with ties resolved to the lowest class index.
/// Returns (class index, confidence).
std::pair<int, double> pseudo_label(std::span<const double> feature, const Matrix& rows,
                                    double temp);

/// K x d_emb matrix of encoded fixed-template prompts for one domain label.
Matrix build_handcrafted_head(std::span<const std::string> class_names,
                              std::string_view domain_label, const VocabConfig& vocab,
                              const FrozenEncoder& enc);

}  // namespace dapt
