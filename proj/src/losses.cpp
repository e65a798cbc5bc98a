#include "dapt/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dapt/errors.hpp"

namespace dapt {

LossReport LossReport::zero(const PromptParams& like) {
  LossReport rep;
  rep.grads = zeros_like(like);
  return rep;
}

namespace {

// gradient w.r.t. the support logits, accumulated across regions and terms,
// then routed to the per-(domain, class) embedding upstream vectors
struct UpstreamAcc {
  Matrix src, tgt;
  std::vector<char> touched_src, touched_tgt;

  UpstreamAcc(int K, int d_emb)
      : src(K, d_emb), tgt(K, d_emb), touched_src(K, 0), touched_tgt(K, 0) {}

  void add(DomainSet D, int K, int support_idx, double g_logit, double temp,
           std::span<const double> feature) {
    DomainTag dom;
    int cls;
    if (D == DomainSet::SourceOnly) {
      dom = DomainTag::Source;
      cls = support_idx;
    } else if (D == DomainSet::TargetOnly) {
      dom = DomainTag::Target;
      cls = support_idx;
    } else {
      dom = support_idx < K ? DomainTag::Source : DomainTag::Target;
      cls = support_idx < K ? support_idx : support_idx - K;
    }
    Matrix& block = (dom == DomainTag::Source) ? src : tgt;
    auto& touched = (dom == DomainTag::Source) ? touched_src : touched_tgt;
    touched[cls] = 1;
    axpy(g_logit / temp, feature, block.row_span(cls));
  }

  void backward(const HeadPipeline& pipe, PromptParams& grads) const {
    for (int i = 0; i < src.rows; ++i) {
      if (touched_src[i]) pipe.backward_into(grads, DomainTag::Source, i, src.row_span(i));
      if (touched_tgt[i]) pipe.backward_into(grads, DomainTag::Target, i, tgt.row_span(i));
    }
  }
};

Matrix normalized_features(const RegionBatch& batch) {
  Matrix F = batch.features;
  for (int j = 0; j < F.rows; ++j) normalize(F.row_span(j));
  return F;
}

// cross-entropy of one region against a hard label at support index `num`;
// returns the unweighted value and adds weighted logit gradients to acc
double ce_hard(const Vec& probs, int num, DomainSet D, int K, double w, double temp,
               std::span<const double> feature, UpstreamAcc& acc) {
  for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
    const double g = w * (probs[i] - (i == num ? 1.0 : 0.0));
    acc.add(D, K, i, g, temp, feature);
  }
  return -std::log(probs[num]);
}

// cross-entropy against a soft K-way target distribution occupying support
// slots [offset, offset + K)
double ce_soft(const Vec& probs, const Vec& q, int offset, DomainSet D, int K, double w,
               double temp, std::span<const double> feature, UpstreamAcc& acc) {
  double value = 0.0;
  for (int k = 0; k < K; ++k) value -= q[k] * std::log(probs[offset + k]);
  for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
    const double qi = (i >= offset && i < offset + K) ? q[i - offset] : 0.0;
    acc.add(D, K, i, w * (probs[i] - qi), temp, feature);
  }
  return value;
}

void validate_batch(const RegionBatch& batch, const DomainClassEmbeddings& heads) {
  if (batch.size() < 1) throw ShapeError("empty region batch");
  if (batch.features.cols != heads.d_emb()) {
    throw ShapeError("feature dim does not match head embeddings");
  }
}

}  // namespace

LossReport loss_source(const RegionBatch& batch, const HeadPipeline& pipeline,
                       const DomainClassEmbeddings& heads, const LossOptions& opt) {
  validate_batch(batch, heads);
  if (batch.domain != DomainTag::Source) {
    throw DomainMismatchError("loss_source expects a source batch");
  }
  if (!batch.labels) throw LabelsRequiredError("source batch must be labeled");

  const int K = heads.K();
  const int nr = batch.size();
  if (static_cast<int>(batch.labels->size()) != nr) {
    throw ShapeError("label count does not match batch size");
  }
  for (int y : *batch.labels) {
    if (y < 0 || y >= K) throw ShapeError("label out of range");
  }

  LossReport rep = LossReport::zero(*pipeline.params);
  UpstreamAcc acc(K, heads.d_emb());
  const Matrix F = normalized_features(batch);
  const double temp = opt.head.temp;
  const double w = 1.0 / nr;

  double v_own = 0.0, v_cross = 0.0, v_both = 0.0;
  for (int j = 0; j < nr; ++j) {
    const auto f = F.row_span(j);
    const int y = (*batch.labels)[j];
    if (opt.flags.source_own) {
      Vec p = support_probs(f, heads, DomainSet::SourceOnly, opt.head);
      v_own += w * ce_hard(p, y, DomainSet::SourceOnly, K, w, temp, f, acc);
    }
    if (opt.flags.source_cross) {
      Vec p = support_probs(f, heads, DomainSet::TargetOnly, opt.head);
      v_cross += w * ce_hard(p, y, DomainSet::TargetOnly, K, w, temp, f, acc);
    }
    if (opt.flags.source_both) {
      Vec p = support_probs(f, heads, DomainSet::Both, opt.head);
      v_both += w * ce_hard(p, y, DomainSet::Both, K, w, temp, f, acc);
    }
  }
  acc.backward(pipeline, rep.grads);

  if (opt.flags.source_own) rep.components["L_s_ss"] = v_own;
  if (opt.flags.source_cross) rep.components["L_s_t"] = v_cross;
  if (opt.flags.source_both) rep.components["L_s_st"] = v_both;
  if (opt.flags.source_own || opt.flags.source_cross) {
    rep.components["L_s_inv"] = v_own + v_cross;
  }
  if (opt.flags.source_both) rep.components["L_s_spc"] = v_both;
  rep.total = v_own + v_cross + v_both;
  return rep;
}

LossReport loss_target(const RegionBatch& batch, const HeadPipeline& pipeline,
                       const DomainClassEmbeddings& heads, const Matrix& handcrafted_target,
                       const LossOptions& opt) {
  validate_batch(batch, heads);
  if (batch.domain != DomainTag::Target) {
    throw DomainMismatchError("loss_target expects a target batch");
  }
  if (handcrafted_target.rows != heads.K() || handcrafted_target.cols != heads.d_emb()) {
    throw ShapeError("fixed-template head shape does not match live head");
  }

  const int K = heads.K();
  const int nr = batch.size();
  const bool soft = opt.pseudo == PseudoLabelMode::Soft;

  LossReport rep = LossReport::zero(*pipeline.params);
  UpstreamAcc acc(K, heads.d_emb());
  const Matrix F = normalized_features(batch);
  const double temp = opt.head.temp;
  const double w = 1.0 / nr;

  double v_own = 0.0, v_both = 0.0, v_ent = 0.0, v_probe = 0.0;
  for (int j = 0; j < nr; ++j) {
    const auto f = F.row_span(j);
    Vec q = zero_shot_probs(f, handcrafted_target, temp);
    int y = 0;
    for (int k = 1; k < K; ++k) {
      if (q[k] > q[y]) y = k;
    }
    rep.pseudo_conf_mean += q[y] / nr;

    // the gate reads the live target head, the label comes from the fixed
    // template; soft mode keeps every region
    Vec p_tt = support_probs(f, heads, DomainSet::TargetOnly, opt.head);
    rep.gate_prob_mean += p_tt[y] / nr;
    const bool gated = soft || p_tt[y] >= opt.head.conf_threshold;
    if (!gated) continue;
    rep.n_gated += 1;

    if (opt.flags.target_own) {
      if (soft) {
        v_own += w * ce_soft(p_tt, q, 0, DomainSet::TargetOnly, K, w, temp, f, acc);
      } else {
        v_own += w * ce_hard(p_tt, y, DomainSet::TargetOnly, K, w, temp, f, acc);
      }
    }
    if (opt.flags.target_both) {
      Vec p = support_probs(f, heads, DomainSet::Both, opt.head);
      if (soft) {
        v_both += w * ce_soft(p, q, K, DomainSet::Both, K, w, temp, f, acc);
      } else {
        v_both += w * ce_hard(p, K + y, DomainSet::Both, K, w, temp, f, acc);
      }
    }
    if (opt.flags.target_source_probe) {
      Vec p = support_probs(f, heads, DomainSet::SourceOnly, opt.head);
      if (soft) {
        v_probe += w * ce_soft(p, q, 0, DomainSet::SourceOnly, K, w, temp, f, acc);
      } else {
        v_probe += w * ce_hard(p, y, DomainSet::SourceOnly, K, w, temp, f, acc);
      }
    }
    if (opt.flags.target_entropy) {
      if (opt.entropy == EntropyMode::FullDistribution) {
        double H = 0.0;
        for (double pk : p_tt) H -= pk * std::log(pk);
        v_ent += w * H;
        for (int i = 0; i < K; ++i) {
          const double g = -p_tt[i] * (std::log(p_tt[i]) + H);
          acc.add(DomainSet::TargetOnly, K, i, w * g, temp, f);
        }
      } else {
        const double py = p_tt[y];
        v_ent += w * (-py * std::log(py));
        const double c = -(1.0 + std::log(py)) * py;
        for (int i = 0; i < K; ++i) {
          const double g = c * ((i == y ? 1.0 : 0.0) - p_tt[i]);
          acc.add(DomainSet::TargetOnly, K, i, w * g, temp, f);
        }
      }
    }
  }
  acc.backward(pipeline, rep.grads);

  if (opt.flags.target_own) rep.components["L_t_tt"] = v_own;
  if (opt.flags.target_both) rep.components["L_t_st"] = v_both;
  if (opt.flags.target_entropy) rep.components["L_ent"] = v_ent;
  if (opt.flags.target_source_probe) rep.components["L_t_ss"] = v_probe;
  rep.total = v_own + v_both + v_ent + v_probe;
  return rep;
}

LossReport total_loss(const LossReport& source, const LossReport& target, double lambda) {
  if (!source.grads.same_shape(target.grads)) {
    throw ShapeError("source and target gradient shapes differ");
  }
  LossReport rep;
  rep.total = source.total + lambda * target.total;
  rep.grads = source.grads;
  rep.grads.add_scaled(target.grads, lambda);
  rep.components = source.components;
  for (const auto& [k, v] : target.components) rep.components[k] = v;
  rep.components["L_s"] = source.total;
  rep.components["L_t"] = target.total;
  rep.n_gated = target.n_gated;
  rep.pseudo_conf_mean = target.pseudo_conf_mean;
  rep.gate_prob_mean = target.gate_prob_mean;
  return rep;
}

}  // namespace dapt
