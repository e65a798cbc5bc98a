#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dapt/losses.hpp"
#include "dapt/optim.hpp"
#include "dapt/serialize.hpp"
#include "dapt/synthdata.hpp"

namespace dapt {

/// Prompt layouts under study. "dl" is the trailing frozen domain-label token.
///   handcrafted       fixed template only, nothing trained
///   invariant_only    [shared | class]
///   invariant_plus_dl [shared | class | dl]
///   specific_plus_dl  [per-domain | class | dl]
///   full              [shared | per-domain | class | dl]
///   full_no_dl        [shared | per-domain | class]
enum class PromptVariant {
  Handcrafted,
  InvariantOnly,
  InvariantPlusDl,
  SpecificPlusDl,
  Full,
  FullNoDl,
};

std::string variant_name(PromptVariant v);
PromptVariant variant_from_name(const std::string& name);
bool variant_uses_domain_token(PromptVariant v);

/// Run-level loss switches. own_domain and joint each drive the matching
/// source and target terms together; forbidden_probe turns on the
/// known-harmful target-data/source-head term for ablation runs only.
struct RunLossFlags {
  bool own_domain = true;
  bool cross_domain = true;
  bool joint = true;
  bool entropy = true;
  bool forbidden_probe = false;

  LossFlags to_loss_flags() const;
  bool any() const {
    return own_domain || cross_domain || joint || entropy || forbidden_probe;
  }
};

/// How learnable rows start out. Gaussian is the plain small-noise
/// convention; Template solves for row values whose pooled encoder input
/// reproduces the fixed-template prompt's, plus Gaussian jitter, so training
/// starts at zero-shot accuracy instead of at an uninformative point.
enum class InitMode { Gaussian, Template };

struct RunConfig {
  PromptVariant variant = PromptVariant::Full;
  int M = 8;
  int N = 8;
  InitMode init = InitMode::Gaussian;
  double init_scale = 0.02;
  double lambda = 1.0;
  HeadConfig head;
  EntropyMode entropy_mode = EntropyMode::PseudoClassOnly;
  PseudoLabelMode pseudo_mode = PseudoLabelMode::Hard;
  RunLossFlags loss;
  bool ema = true;  // evaluate with the parameter ensemble instead of the live params
  OptimConfig optim;
  long max_iters = 2000;
  int batch_per_domain = 2;
  int eval_every = 100;
  std::uint64_t seed = 0;
  std::string dataset_path;
};

void validate_run_config(const RunConfig& cfg);
RunConfig run_config_from_json(const json& j, const std::string& ctx);
json run_config_to_json(const RunConfig& cfg);

struct MetricsRow {
  long iter = 0;
  double lr = 0, ema_alpha = 0;
  double loss_total = 0;
  double l_s_ss = 0, l_s_t = 0, l_s_st = 0;
  double l_t_tt = 0, l_t_st = 0, l_ent = 0, l_t_ss = 0;
  int n_gated = 0;
  double pseudo_conf_mean = 0, gate_prob_mean = 0;
  double acc_source = 0, acc_target = 0, acc_zero_shot = 0;
};

std::string metrics_csv_header();
std::string metrics_to_csv(const std::vector<MetricsRow>& rows);

struct Checkpoint {
  RunConfig cfg;
  long iter = 0;
  // frozen geometry copied from the training dataset
  int d_tok = 0, d_emb = 0, l_max = 0;
  std::uint64_t vocab_seed = 0, encoder_seed = 0;
  std::vector<std::string> class_names, domain_labels;
  PromptParams params;
  EmaBuffer ema;
  SgdState momentum;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct TrainResult {
  Checkpoint ckpt;
  std::vector<MetricsRow> metrics;
};

/// Full training loop. The EMA buffer is always maintained (it only matters
/// at evaluation); cfg.ema selects which parameters the in-loop accuracy
/// metrics read. Deterministic for a fixed (config, dataset) pair.
TrainResult train(const RunConfig& cfg, const Dataset& ds);

struct EvalReport {
  double source_acc = 0, target_acc = 0, zero_shot_acc = 0;
  std::vector<double> per_class_source, per_class_target;
};

EvalReport evaluate(const Checkpoint& ckpt, const Dataset& ds, bool use_ema);

struct AblateCell {
  std::string name;
  json overrides;  // applied on top of the grid base config
  std::optional<double> reference;
};

struct AblateGrid {
  GenSpec dataset;                          // used when dataset_path is empty
  std::string dataset_path;
  std::vector<std::uint64_t> seeds;
  json base;                                // RunConfig JSON fragment
  std::vector<AblateCell> cells;
};

AblateGrid grid_from_json(const json& j, const std::string& ctx);

struct AblateRow {
  std::string name;
  RunConfig cfg;
  std::vector<double> target_accs;  // one per seed, grid order
  double median_target_acc = 0;
  std::optional<double> reference;
};

std::vector<AblateRow> ablate(const AblateGrid& grid);
std::string ablate_to_csv(const AblateGrid& grid, const std::vector<AblateRow>& rows);

struct GradCheckReport {
  struct Term {
    std::string name;
    double max_rel_err = 0;
  };
  std::vector<Term> terms;
  double max_rel_err = 0;
  int n_configs = 0;
  bool passed(double tol = 1e-4) const { return max_rel_err < tol; }
};

/// Compares every analytic loss gradient against central finite differences
/// (step 1e-5) over randomized small configurations: each individual term,
/// plus the lambda-weighted total.
GradCheckReport run_gradcheck(std::uint64_t seed, int n_configs = 100);

/// max over entries of |a - n| / max(|a|, |n|, 1e-6); shared with tests.
double max_guarded_rel_err(const PromptParams& analytic, const PromptParams& numeric);

}  // namespace dapt
