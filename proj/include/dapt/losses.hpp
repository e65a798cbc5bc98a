#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dapt/head.hpp"

namespace dapt {

/// A batch of region features from one domain. Rows should be unit norm;
/// anything else is normalized internally before use. Labels are required for
/// source batches and absent for unlabeled target batches.
struct RegionBatch {
  Matrix features;  // N_r x d_emb
  std::optional<std::vector<int>> labels;
  DomainTag domain = DomainTag::Source;

  int size() const { return features.rows; }
};

/// Which loss terms are active. Names follow the data/head structure:
/// source_own      source data, source-only head
/// source_cross    source data, target-only head
/// source_both     source data, joint two-domain head
/// target_own      target data, target-only head (gated)
/// target_both     target data, joint two-domain head (gated)
/// target_entropy  prediction entropy on gated target regions
/// target_source_probe  target data, source-only head; known-harmful probe,
///                      off everywhere except explicit ablation runs
struct LossFlags {
  bool source_own = true;
  bool source_cross = true;
  bool source_both = true;
  bool target_own = true;
  bool target_both = true;
  bool target_entropy = true;
  bool target_source_probe = false;

  bool any_source() const { return source_own || source_cross || source_both; }
  bool any_target() const {
    return target_own || target_both || target_entropy || target_source_probe;
  }
};

enum class EntropyMode {
  FullDistribution,  // Shannon entropy of the full K-way target-head prediction
  PseudoClassOnly,   // only the -p log p term of the pseudo-label class
};

enum class PseudoLabelMode {
  Hard,  // argmax of the fixed-template head, confidence-gated
  Soft,  // full fixed-template distribution as the target, ungated
};

struct LossOptions {
  HeadConfig head;
  EntropyMode entropy = EntropyMode::PseudoClassOnly;
  PseudoLabelMode pseudo = PseudoLabelMode::Hard;
  LossFlags flags;
};

struct LossReport {
  double total = 0.0;
  std::map<std::string, double> components;
  PromptParams grads;
  int n_gated = 0;
  double pseudo_conf_mean = 0.0;  // mean fixed-template confidence over the batch
  double gate_prob_mean = 0.0;    // mean live target-head probability of the pseudo class

  static LossReport zero(const PromptParams& like);
};

/// Labeled source terms. Every enabled term is a batch-mean cross-entropy;
/// gradients flow through the head pipeline into the prompt parameters.
/// Throws LabelsRequiredError when the batch has no labels.
LossReport loss_source(const RegionBatch& batch, const HeadPipeline& pipeline,
                       const DomainClassEmbeddings& heads, const LossOptions& opt);

/// Unlabeled target terms. Pseudo-labels come from the fixed-template head
/// rows (handcrafted_target); a region contributes only when the live
/// target-head probability of its pseudo class clears conf_threshold. All
/// terms divide by the full batch size, so an all-rejected batch is exactly 0.
LossReport loss_target(const RegionBatch& batch, const HeadPipeline& pipeline,
                       const DomainClassEmbeddings& heads, const Matrix& handcrafted_target,
                       const LossOptions& opt);

/// total = source.total + lambda * target.total, gradients combined the same
/// way; target-side diagnostics (n_gated, means) carry through.
LossReport total_loss(const LossReport& source, const LossReport& target, double lambda);

}  // namespace dapt
