#include "dapt/head.hpp"

#include <algorithm>
#include <cmath>

#include "dapt/errors.hpp"

namespace dapt {

TokenSeq HeadPipeline::sequence(DomainTag d, int class_idx) const {
  const auto& dl = (d == DomainTag::Source) ? domain_tokens_source : domain_tokens_target;
  return assemble(*params, class_tokens[class_idx], d, dl, enc->l_max);
}

DomainClassEmbeddings HeadPipeline::build() const {
  const int k = K();
  if (k < 1) throw ShapeError("head needs at least one class");
  DomainClassEmbeddings heads;
  heads.source = Matrix(k, enc->d_emb);
  heads.target = Matrix(k, enc->d_emb);
  for (int i = 0; i < k; ++i) {
    EmbeddingVec zs = encode(*enc, sequence(DomainTag::Source, i));
    EmbeddingVec zt = encode(*enc, sequence(DomainTag::Target, i));
    std::copy(zs.begin(), zs.end(), heads.source.row(i));
    std::copy(zt.begin(), zt.end(), heads.target.row(i));
  }
  return heads;
}

void HeadPipeline::backward_into(PromptParams& grads, DomainTag d, int class_idx,
                                 std::span<const double> upstream) const {
  Matrix seq_grads = encode_backward(*enc, sequence(d, class_idx), upstream);
  scatter_grads_into(grads, seq_grads, d);
}

DomainClassEmbeddings build_head(const HeadPipeline& pipeline) { return pipeline.build(); }

namespace {

// stable softmax of cosines/temp, written into probs
void softmax_logits(Vec& logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : logits) v /= sum;
}

void append_cosines(Vec& logits, std::span<const double> feature, const Matrix& rows,
                    double temp) {
  for (int i = 0; i < rows.rows; ++i) {
    logits.push_back(cosine(feature, rows.row_span(i)) / temp);
  }
}

}  // namespace

Vec support_probs(std::span<const double> feature, const DomainClassEmbeddings& heads,
                  DomainSet D, const HeadConfig& cfg) {
  if (cfg.temp <= 0.0) throw ConfigError("temperature must be positive");
  if (static_cast<int>(feature.size()) != heads.d_emb()) {
    throw ShapeError("feature dim does not match head embeddings");
  }
  Vec logits;
  logits.reserve(2 * static_cast<size_t>(heads.K()));
  if (D == DomainSet::SourceOnly || D == DomainSet::Both) {
    append_cosines(logits, feature, heads.source, cfg.temp);
  }
  if (D == DomainSet::TargetOnly || D == DomainSet::Both) {
    append_cosines(logits, feature, heads.target, cfg.temp);
  }
  softmax_logits(logits);
  return logits;
}

Vec class_probs(std::span<const double> feature, const DomainClassEmbeddings& heads, DomainTag d,
                DomainSet D, const HeadConfig& cfg) {
  if ((D == DomainSet::SourceOnly && d == DomainTag::Target) ||
      (D == DomainSet::TargetOnly && d == DomainTag::Source)) {
    throw DomainMismatchError("domain set excludes the requested domain");
  }
  Vec p = support_probs(feature, heads, D, cfg);
  const int k = heads.K();
  const int offset = (D == DomainSet::Both && d == DomainTag::Target) ? k : 0;
  return Vec(p.begin() + offset, p.begin() + offset + k);
}

Vec zero_shot_probs(std::span<const double> feature, const Matrix& rows, double temp) {
  if (temp <= 0.0) throw ConfigError("temperature must be positive");
  if (static_cast<int>(feature.size()) != rows.cols) {
    throw ShapeError("feature dim does not match head rows");
  }
  Vec logits;
  logits.reserve(rows.rows);
  append_cosines(logits, feature, rows, temp);
  softmax_logits(logits);
  return logits;
}

std::pair<int, double> pseudo_label(std::span<const double> feature, const Matrix& rows,
                                    double temp) {
  Vec p = zero_shot_probs(feature, rows, temp);
  int best = 0;
  for (int i = 1; i < static_cast<int>(p.size()); ++i) {
    if (p[i] > p[best]) best = i;
  }
  return {best, p[best]};
}

Matrix build_handcrafted_head(std::span<const std::string> class_names,
                              std::string_view domain_label, const VocabConfig& vocab,
                              const FrozenEncoder& enc) {
  const int k = static_cast<int>(class_names.size());
  if (k < 1) throw ShapeError("head needs at least one class");
  Matrix head(k, enc.d_emb);
  for (int i = 0; i < k; ++i) {
    EmbeddingVec z = encode(enc, handcrafted_prompt(class_names[i], domain_label, vocab, enc.l_max));
    std::copy(z.begin(), z.end(), head.row(i));
  }
  return head;
}

}  // namespace dapt
