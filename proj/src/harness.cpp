#include "dapt/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <string>

#include "dapt/errors.hpp"
#include "dapt/rng.hpp"

namespace dapt {

std::string variant_name(PromptVariant v) {
  switch (v) {
    case PromptVariant::Handcrafted: return "handcrafted";
    case PromptVariant::InvariantOnly: return "invariant_only";
    case PromptVariant::InvariantPlusDl: return "invariant_plus_dl";
    case PromptVariant::SpecificPlusDl: return "specific_plus_dl";
    case PromptVariant::Full: return "full";
    case PromptVariant::FullNoDl: return "full_no_dl";
  }
  throw ConfigError("unknown variant enum value");
}

PromptVariant variant_from_name(const std::string& name) {
  for (PromptVariant v : {PromptVariant::Handcrafted, PromptVariant::InvariantOnly,
                          PromptVariant::InvariantPlusDl, PromptVariant::SpecificPlusDl,
                          PromptVariant::Full, PromptVariant::FullNoDl}) {
    if (variant_name(v) == name) return v;
  }
  throw ConfigError("unknown prompt variant: '" + name + "'");
}

bool variant_uses_domain_token(PromptVariant v) {
  return v == PromptVariant::InvariantPlusDl || v == PromptVariant::SpecificPlusDl ||
         v == PromptVariant::Full;
}

LossFlags RunLossFlags::to_loss_flags() const {
  LossFlags f;
  f.source_own = own_domain;
  f.target_own = own_domain;
  f.source_cross = cross_domain;
  f.source_both = joint;
  f.target_both = joint;
  f.target_entropy = entropy;
  f.target_source_probe = forbidden_probe;
  return f;
}

void validate_run_config(const RunConfig& cfg) {
  if (cfg.M < 0 || cfg.N < 0) throw ConfigError("prompt block sizes must be >= 0");
  switch (cfg.variant) {
    case PromptVariant::Handcrafted:
      if (cfg.M != 0 || cfg.N != 0) {
        throw ConfigError("handcrafted variant has no learnable tokens; M and N must be 0");
      }
      if (cfg.loss.any()) throw ConfigError("handcrafted variant accepts no loss terms");
      if (cfg.max_iters != 0) throw ConfigError("handcrafted variant does not train");
      break;
    case PromptVariant::InvariantOnly:
    case PromptVariant::InvariantPlusDl:
      if (cfg.N != 0) throw ConfigError(variant_name(cfg.variant) + " requires N = 0");
      if (cfg.M < 1) throw ConfigError(variant_name(cfg.variant) + " requires M >= 1");
      break;
    case PromptVariant::SpecificPlusDl:
      if (cfg.M != 0) throw ConfigError("specific_plus_dl requires M = 0");
      if (cfg.N < 1) throw ConfigError("specific_plus_dl requires N >= 1");
      break;
    case PromptVariant::Full:
    case PromptVariant::FullNoDl:
      if (cfg.M + cfg.N < 1) throw ConfigError("at least one learnable token row is required");
      break;
  }
  if (cfg.init_scale < 0.0) throw ConfigError("init_scale must be >= 0");
  if (cfg.lambda < 0.0) throw ConfigError("lambda must be >= 0");
  if (cfg.head.temp <= 0.0) throw ConfigError("temperature must be positive");
  if (cfg.head.conf_threshold < 0.0) throw ConfigError("conf_threshold must be >= 0");
  if (cfg.max_iters < 0) throw ConfigError("max_iters must be >= 0");
  if (cfg.batch_per_domain < 1) throw ConfigError("batch_per_domain must be >= 1");
  if (cfg.eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (cfg.optim.base_lr <= 0.0) throw ConfigError("base_lr must be positive");
  if (cfg.optim.warmup_iters < 1) throw ConfigError("warmup_iters must be >= 1");
  if (cfg.optim.momentum < 0.0 || cfg.optim.momentum >= 1.0) {
    throw ConfigError("momentum must be in [0, 1)");
  }
}

namespace {

// A misspelled knob that silently falls back to its default is the worst
// failure mode a config file can have, so every object is checked strictly.
void reject_unknown_keys(const json& j, std::initializer_list<const char*> allowed,
                         const std::string& ctx) {
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError(ctx + ": unknown key '" + item.key() + "'");
  }
}

}  // namespace

RunConfig run_config_from_json(const json& j, const std::string& ctx) {
  reject_unknown_keys(j,
                      {"variant", "M", "N", "init", "init_scale", "lambda", "temp",
                       "conf_threshold", "entropy_mode", "pseudo_labels", "loss", "ema",
                       "optim", "max_iters", "batch_per_domain", "eval_every", "seed",
                       "dataset"},
                      ctx);
  RunConfig cfg;
  cfg.variant = variant_from_name(field_or<std::string>(j, "variant", "full", ctx));
  const bool handcrafted = cfg.variant == PromptVariant::Handcrafted;
  if (!handcrafted) {
    cfg.M = field_or<int>(j, "M", cfg.M, ctx);
    cfg.N = field_or<int>(j, "N", cfg.N, ctx);
    // single-block layouts default the absent block to zero rows
    if ((cfg.variant == PromptVariant::InvariantOnly ||
         cfg.variant == PromptVariant::InvariantPlusDl) &&
        !j.contains("N")) {
      cfg.N = 0;
    }
    if (cfg.variant == PromptVariant::SpecificPlusDl && !j.contains("M")) cfg.M = 0;
  }
  const std::string init = field_or<std::string>(j, "init", "gaussian", ctx);
  if (init == "gaussian") {
    cfg.init = InitMode::Gaussian;
  } else if (init == "template") {
    cfg.init = InitMode::Template;
  } else {
    throw ConfigError(ctx + ": init must be 'gaussian' or 'template'");
  }
  cfg.init_scale = field_or<double>(j, "init_scale", cfg.init_scale, ctx);
  cfg.lambda = field_or<double>(j, "lambda", cfg.lambda, ctx);
  cfg.head.temp = field_or<double>(j, "temp", cfg.head.temp, ctx);
  cfg.head.conf_threshold = field_or<double>(j, "conf_threshold", cfg.head.conf_threshold, ctx);

  const std::string ent_default =
      cfg.entropy_mode == EntropyMode::PseudoClassOnly ? "pseudo_class_only" : "full";
  const std::string ent = field_or<std::string>(j, "entropy_mode", ent_default, ctx);
  if (ent == "full") {
    cfg.entropy_mode = EntropyMode::FullDistribution;
  } else if (ent == "pseudo_class_only") {
    cfg.entropy_mode = EntropyMode::PseudoClassOnly;
  } else {
    throw ConfigError(ctx + ": entropy_mode must be 'full' or 'pseudo_class_only'");
  }
  const std::string pl = field_or<std::string>(j, "pseudo_labels", "hard", ctx);
  if (pl == "hard") {
    cfg.pseudo_mode = PseudoLabelMode::Hard;
  } else if (pl == "soft") {
    cfg.pseudo_mode = PseudoLabelMode::Soft;
  } else {
    throw ConfigError(ctx + ": pseudo_labels must be 'hard' or 'soft'");
  }

  if (!handcrafted && j.contains("loss")) {
    const json lj = require_field<json>(j, "loss", ctx);
    reject_unknown_keys(
        lj, {"own_domain", "cross_domain", "joint", "entropy_term", "forbidden_probe"},
        ctx + ".loss");
    cfg.loss.own_domain = field_or<bool>(lj, "own_domain", cfg.loss.own_domain, ctx);
    cfg.loss.cross_domain = field_or<bool>(lj, "cross_domain", cfg.loss.cross_domain, ctx);
    cfg.loss.joint = field_or<bool>(lj, "joint", cfg.loss.joint, ctx);
    cfg.loss.entropy = field_or<bool>(lj, "entropy_term", cfg.loss.entropy, ctx);
    cfg.loss.forbidden_probe =
        field_or<bool>(lj, "forbidden_probe", cfg.loss.forbidden_probe, ctx);
  }

  cfg.ema = field_or<bool>(j, "ema", cfg.ema, ctx);
  if (j.contains("optim")) {
    const json oj = require_field<json>(j, "optim", ctx);
    reject_unknown_keys(oj, {"base_lr", "warmup_iters", "momentum"}, ctx + ".optim");
    cfg.optim.base_lr = field_or<double>(oj, "base_lr", cfg.optim.base_lr, ctx);
    cfg.optim.warmup_iters = field_or<int>(oj, "warmup_iters", cfg.optim.warmup_iters, ctx);
    cfg.optim.momentum = field_or<double>(oj, "momentum", cfg.optim.momentum, ctx);
  }
  cfg.max_iters = field_or<long>(j, "max_iters", cfg.max_iters, ctx);
  cfg.batch_per_domain = field_or<int>(j, "batch_per_domain", cfg.batch_per_domain, ctx);
  cfg.eval_every = field_or<int>(j, "eval_every", cfg.eval_every, ctx);
  cfg.seed = field_or<std::uint64_t>(j, "seed", cfg.seed, ctx);
  cfg.dataset_path = field_or<std::string>(j, "dataset", cfg.dataset_path, ctx);

  if (handcrafted) {
    // the fixed template ignores training knobs entirely
    cfg.M = 0;
    cfg.N = 0;
    cfg.loss = RunLossFlags{false, false, false, false, false};
    cfg.max_iters = 0;
  }
  validate_run_config(cfg);
  return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
  return json{
      {"variant", variant_name(cfg.variant)},
      {"M", cfg.M},
      {"N", cfg.N},
      {"init", cfg.init == InitMode::Gaussian ? "gaussian" : "template"},
      {"init_scale", cfg.init_scale},
      {"lambda", cfg.lambda},
      {"temp", cfg.head.temp},
      {"conf_threshold", cfg.head.conf_threshold},
      {"entropy_mode",
       cfg.entropy_mode == EntropyMode::FullDistribution ? "full" : "pseudo_class_only"},
      {"pseudo_labels", cfg.pseudo_mode == PseudoLabelMode::Hard ? "hard" : "soft"},
      {"loss",
       {{"own_domain", cfg.loss.own_domain},
        {"cross_domain", cfg.loss.cross_domain},
        {"joint", cfg.loss.joint},
        {"entropy_term", cfg.loss.entropy},
        {"forbidden_probe", cfg.loss.forbidden_probe}}},
      {"ema", cfg.ema},
      {"optim",
       {{"base_lr", cfg.optim.base_lr},
        {"warmup_iters", cfg.optim.warmup_iters},
        {"momentum", cfg.optim.momentum}}},
      {"max_iters", cfg.max_iters},
      {"batch_per_domain", cfg.batch_per_domain},
      {"eval_every", cfg.eval_every},
      {"seed", cfg.seed},
      {"dataset", cfg.dataset_path},
  };
}

namespace {

std::string g17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string metrics_csv_header() {
  return "iter,lr,ema_alpha,loss_total,L_s_ss,L_s_t,L_s_st,L_t_tt,L_t_st,L_ent,L_t_ss,"
         "n_gated,pseudo_conf_mean,gate_prob_mean,acc_source,acc_target,acc_zero_shot";
}

std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
  std::string out = metrics_csv_header() + "\n";
  for (const MetricsRow& r : rows) {
    out += std::to_string(r.iter);
    for (double v : {r.lr, r.ema_alpha, r.loss_total, r.l_s_ss, r.l_s_t, r.l_s_st, r.l_t_tt,
                     r.l_t_st, r.l_ent, r.l_t_ss}) {
      out += ',';
      out += g17(v);
    }
    out += ',';
    out += std::to_string(r.n_gated);
    for (double v : {r.pseudo_conf_mean, r.gate_prob_mean, r.acc_source, r.acc_target,
                     r.acc_zero_shot}) {
      out += ',';
      out += g17(v);
    }
    out += '\n';
  }
  return out;
}

namespace {

// frozen pieces every run rebuilds deterministically from recorded seeds
struct Frozen {
  VocabConfig vocab;
  FrozenEncoder enc;
  Matrix hc_source;  // fixed-template head rows per domain
  Matrix hc_target;
  std::vector<std::vector<TokenVec>> class_tokens;
  std::vector<TokenVec> dl_source, dl_target;
};

Frozen build_frozen(PromptVariant variant, int d_tok, int d_emb, int l_max,
                    std::uint64_t vocab_seed, std::uint64_t encoder_seed,
                    const std::vector<std::string>& class_names,
                    const std::vector<std::string>& domain_labels) {
  Frozen fz;
  fz.vocab = VocabConfig{d_tok, vocab_seed};
  fz.enc = make_encoder(l_max, d_tok, d_emb, encoder_seed);
  fz.hc_source = build_handcrafted_head(class_names, domain_labels[0], fz.vocab, fz.enc);
  fz.hc_target = build_handcrafted_head(class_names, domain_labels[1], fz.vocab, fz.enc);
  for (const std::string& name : class_names) {
    fz.class_tokens.push_back(word_tokens(name, fz.vocab));
  }
  if (variant_uses_domain_token(variant)) {
    fz.dl_source = word_tokens(domain_labels[0], fz.vocab);
    fz.dl_target = word_tokens(domain_labels[1], fz.vocab);
  }
  return fz;
}

void check_content_fits(const RunConfig& cfg, const Frozen& fz, int l_max) {
  size_t max_class = 0;
  for (const auto& ct : fz.class_tokens) max_class = std::max(max_class, ct.size());
  const size_t dl = std::max(fz.dl_source.size(), fz.dl_target.size());
  const size_t content = static_cast<size_t>(cfg.M) + cfg.N + max_class + dl;
  if (content > static_cast<size_t>(l_max)) {
    throw ConfigError("prompt content length " + std::to_string(content) +
                      " exceeds the dataset's l_max " + std::to_string(l_max) +
                      "; regenerate the dataset with a larger l_max or shrink M+N");
  }
}

double accuracy_rows(const Matrix& features, const std::vector<int>& labels, const Matrix& rows,
                     double temp, std::vector<double>* per_class) {
  if (features.rows != static_cast<int>(labels.size())) {
    throw ShapeError("feature/label count mismatch in accuracy computation");
  }
  const int K = rows.rows;
  std::vector<int> correct(K, 0), count(K, 0);
  int total_correct = 0;
  for (int j = 0; j < features.rows; ++j) {
    const Vec p = zero_shot_probs(features.row_span(j), rows, temp);
    int best = 0;
    for (int k = 1; k < K; ++k) {
      if (p[k] > p[best]) best = k;
    }
    const int y = labels[j];
    count[y] += 1;
    if (best == y) {
      correct[y] += 1;
      total_correct += 1;
    }
  }
  if (per_class) {
    per_class->assign(K, 0.0);
    for (int k = 0; k < K; ++k) {
      (*per_class)[k] = count[k] > 0 ? static_cast<double>(correct[k]) / count[k] : 0.0;
    }
  }
  return static_cast<double>(total_correct) / features.rows;
}

PromptParams empty_params(int d_tok) {
  PromptParams p;
  p.Vc = Matrix(0, d_tok);
  p.Vs = Matrix(0, d_tok);
  p.Vt = Matrix(0, d_tok);
  return p;
}

double component_or_zero(const LossReport& rep, const char* key) {
  auto it = rep.components.find(key);
  return it == rep.components.end() ? 0.0 : it->second;
}

}  // namespace

TrainResult train(const RunConfig& cfg, const Dataset& ds) {
  validate_run_config(cfg);
  Frozen fz = build_frozen(cfg.variant, ds.d_tok, ds.spec.d_emb, ds.l_max, ds.vocab_seed,
                           ds.encoder_seed, ds.spec.class_names, ds.spec.domain_labels);

  TrainResult out;
  out.ckpt.cfg = cfg;
  out.ckpt.d_tok = ds.d_tok;
  out.ckpt.d_emb = ds.spec.d_emb;
  out.ckpt.l_max = ds.l_max;
  out.ckpt.vocab_seed = ds.vocab_seed;
  out.ckpt.encoder_seed = ds.encoder_seed;
  out.ckpt.class_names = ds.spec.class_names;
  out.ckpt.domain_labels = ds.spec.domain_labels;

  if (cfg.variant == PromptVariant::Handcrafted) {
    out.ckpt.params = empty_params(ds.d_tok);
    out.ckpt.ema = EmaBuffer{empty_params(ds.d_tok), 0};
    out.ckpt.momentum = SgdState{empty_params(ds.d_tok)};
    out.ckpt.iter = 0;
    return out;
  }

  check_content_fits(cfg, fz, ds.l_max);
  PromptParams params =
      init_params(PromptConfig{cfg.M, cfg.N, ds.d_tok, cfg.init_scale, cfg.seed});
  if (cfg.init == InitMode::Template) {
    // Choose row values so that the assembled prompt's class-independent
    // pooled encoder input equals that of the fixed-template prompt. The
    // encoder pools (token + positional) rows, so naive copies of template
    // words land at a different operating point; matching the pooled sum
    // reproduces the fixed template's class ranking at iteration zero (up to
    // the smaller per-class delta of the longer sequence). The Gaussian draw
    // above remains as symmetry-breaking jitter. Class 0's token count is the
    // reference when class-name lengths differ.
    auto class_indep_sum = [&](const TokenSeq& seq) {
      TokenVec s(static_cast<size_t>(ds.d_tok), 0.0);
      for (int l = 0; l < seq.content_len; ++l) {
        for (int c = 0; c < ds.d_tok; ++c) s[c] += seq.tokens.at(l, c) + fz.enc.pos.at(l, c);
      }
      for (const TokenVec& w : fz.class_tokens[0]) {
        for (int c = 0; c < ds.d_tok; ++c) s[c] -= w[c];
      }
      return s;
    };
    const PromptParams zero = zeros_like(params);
    std::array<TokenVec, 2> want;  // per-domain row-block sums R_d
    for (DomainTag d : {DomainTag::Source, DomainTag::Target}) {
      const bool src = d == DomainTag::Source;
      const TokenSeq hc = handcrafted_prompt(ds.spec.class_names[0],
                                             ds.spec.domain_labels[src ? 0 : 1], fz.vocab,
                                             ds.l_max);
      const TokenSeq bare = assemble(zero, fz.class_tokens[0], d,
                                     src ? fz.dl_source : fz.dl_target, ds.l_max);
      const TokenVec a = class_indep_sum(hc);
      const TokenVec b = class_indep_sum(bare);
      const double ratio = static_cast<double>(bare.content_len) / hc.content_len;
      TokenVec& r = want[src ? 0 : 1];
      r.resize(static_cast<size_t>(ds.d_tok));
      for (int c = 0; c < ds.d_tok; ++c) {
        r[c] = ratio * a[c] - b[c];
      }
    }
    const int rows_per_head = cfg.M + cfg.N;
    for (int c = 0; c < ds.d_tok; ++c) {
      const double mean_sum = 0.5 * (want[0][c] + want[1][c]);
      const double shared = cfg.M > 0 ? mean_sum * cfg.M / rows_per_head : 0.0;
      for (int r = 0; r < cfg.M; ++r) params.Vc.at(r, c) += shared / cfg.M;
      if (cfg.N > 0) {
        for (int r = 0; r < cfg.N; ++r) {
          params.Vs.at(r, c) += (want[0][c] - shared) / cfg.N;
          params.Vt.at(r, c) += (want[1][c] - shared) / cfg.N;
        }
      }
    }
  }
  EmaBuffer buf{params, 0};  // ensemble starts at the initial parameters
  SgdState st{zeros_like(params)};

  HeadPipeline pipe{&params, &fz.enc, fz.class_tokens, fz.dl_source, fz.dl_target};
  HeadPipeline pipe_ema = pipe;
  pipe_ema.params = &buf.params;

  LossOptions opt;
  opt.head = cfg.head;
  opt.entropy = cfg.entropy_mode;
  opt.pseudo = cfg.pseudo_mode;
  opt.flags = cfg.loss.to_loss_flags();

  Rng batch_rng(derive_seed(cfg.seed, "batch"));
  const double zero_shot_acc = accuracy_rows(ds.target_eval.features, ds.target_eval.labels,
                                             fz.hc_target, cfg.head.temp, nullptr);

  const int bpd = cfg.batch_per_domain;
  const int d_emb = ds.spec.d_emb;
  double acc_source = 0.0, acc_target = 0.0;
  out.metrics.reserve(static_cast<size_t>(cfg.max_iters));

  for (long iter = 0; iter < cfg.max_iters; ++iter) {
    RegionBatch sb;
    sb.domain = DomainTag::Source;
    sb.features = Matrix(bpd, d_emb);
    sb.labels = std::vector<int>(bpd);
    for (int b = 0; b < bpd; ++b) {
      const int idx = batch_rng.uniform_int(ds.spec.n_source);
      std::copy(ds.source.features.row(idx), ds.source.features.row(idx) + d_emb,
                sb.features.row(b));
      (*sb.labels)[b] = ds.source.labels[idx];
    }
    RegionBatch tb;
    tb.domain = DomainTag::Target;
    tb.features = Matrix(bpd, d_emb);
    for (int b = 0; b < bpd; ++b) {
      const int idx = batch_rng.uniform_int(ds.spec.n_target);
      std::copy(ds.target_train.features.row(idx), ds.target_train.features.row(idx) + d_emb,
                tb.features.row(b));
    }

    const DomainClassEmbeddings heads = pipe.build();
    const LossReport s_rep = opt.flags.any_source() ? loss_source(sb, pipe, heads, opt)
                                                    : LossReport::zero(params);
    const LossReport t_rep = opt.flags.any_target()
                                 ? loss_target(tb, pipe, heads, fz.hc_target, opt)
                                 : LossReport::zero(params);
    const LossReport tot = total_loss(s_rep, t_rep, cfg.lambda);

    sgd_step(params, tot.grads, st, cfg.optim, iter);
    buf.iter += 1;
    ema_update(buf, params);

    MetricsRow row;
    row.iter = iter;
    row.lr = lr_at(cfg.optim, iter);
    row.ema_alpha = ema_alpha(buf.iter);
    row.loss_total = tot.total;
    row.l_s_ss = component_or_zero(tot, "L_s_ss");
    row.l_s_t = component_or_zero(tot, "L_s_t");
    row.l_s_st = component_or_zero(tot, "L_s_st");
    row.l_t_tt = component_or_zero(tot, "L_t_tt");
    row.l_t_st = component_or_zero(tot, "L_t_st");
    row.l_ent = component_or_zero(tot, "L_ent");
    row.l_t_ss = component_or_zero(tot, "L_t_ss");
    row.n_gated = tot.n_gated;
    row.pseudo_conf_mean = tot.pseudo_conf_mean;
    row.gate_prob_mean = tot.gate_prob_mean;

    if (iter % cfg.eval_every == 0 || iter == cfg.max_iters - 1) {
      const DomainClassEmbeddings eval_heads = (cfg.ema ? pipe_ema : pipe).build();
      acc_source = accuracy_rows(ds.source.features, ds.source.labels, eval_heads.source,
                                 cfg.head.temp, nullptr);
      acc_target = accuracy_rows(ds.target_eval.features, ds.target_eval.labels,
                                 eval_heads.target, cfg.head.temp, nullptr);
    }
    row.acc_source = acc_source;
    row.acc_target = acc_target;
    row.acc_zero_shot = zero_shot_acc;
    out.metrics.push_back(row);
  }

  out.ckpt.iter = cfg.max_iters;
  out.ckpt.params = std::move(params);
  out.ckpt.ema = std::move(buf);
  out.ckpt.momentum = std::move(st);
  return out;
}

EvalReport evaluate(const Checkpoint& ckpt, const Dataset& ds, bool use_ema) {
  if (ckpt.d_tok != ds.d_tok || ckpt.d_emb != ds.spec.d_emb || ckpt.l_max != ds.l_max ||
      ckpt.vocab_seed != ds.vocab_seed || ckpt.encoder_seed != ds.encoder_seed ||
      ckpt.class_names != ds.spec.class_names || ckpt.domain_labels != ds.spec.domain_labels) {
    throw ConfigError("checkpoint and dataset disagree on frozen geometry or label sets");
  }
  Frozen fz = build_frozen(ckpt.cfg.variant, ckpt.d_tok, ckpt.d_emb, ckpt.l_max, ckpt.vocab_seed,
                           ckpt.encoder_seed, ckpt.class_names, ckpt.domain_labels);

  Matrix src_rows, tgt_rows;
  if (ckpt.cfg.variant == PromptVariant::Handcrafted) {
    src_rows = fz.hc_source;
    tgt_rows = fz.hc_target;
  } else {
    const PromptParams& p = use_ema ? ckpt.ema.params : ckpt.params;
    HeadPipeline pipe{&p, &fz.enc, fz.class_tokens, fz.dl_source, fz.dl_target};
    DomainClassEmbeddings heads = pipe.build();
    src_rows = std::move(heads.source);
    tgt_rows = std::move(heads.target);
  }

  EvalReport rep;
  rep.source_acc = accuracy_rows(ds.source.features, ds.source.labels, src_rows,
                                 ckpt.cfg.head.temp, &rep.per_class_source);
  rep.target_acc = accuracy_rows(ds.target_eval.features, ds.target_eval.labels, tgt_rows,
                                 ckpt.cfg.head.temp, &rep.per_class_target);
  rep.zero_shot_acc = accuracy_rows(ds.target_eval.features, ds.target_eval.labels, fz.hc_target,
                                    ckpt.cfg.head.temp, nullptr);
  return rep;
}

namespace {

json ema_to_json(const EmaBuffer& buf) {
  return json{{"iter", buf.iter}, {"params", params_to_json(buf.params)}};
}

EmaBuffer ema_from_json(const json& j, const std::string& ctx) {
  EmaBuffer buf;
  buf.iter = require_field<long>(j, "iter", ctx);
  buf.params = params_from_json(require_field<json>(j, "params", ctx), ctx + ".params");
  return buf;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  json j{
      {"format", "dapt-checkpoint"},
      {"version", 1},
      {"run_config", run_config_to_json(ckpt.cfg)},
      {"iter", ckpt.iter},
      {"geometry",
       {{"d_tok", ckpt.d_tok},
        {"d_emb", ckpt.d_emb},
        {"l_max", ckpt.l_max},
        {"vocab_seed", ckpt.vocab_seed},
        {"encoder_seed", ckpt.encoder_seed}}},
      {"class_names", ckpt.class_names},
      {"domain_labels", ckpt.domain_labels},
      {"params", params_to_json(ckpt.params)},
      {"ema", ema_to_json(ckpt.ema)},
      {"momentum", {{"velocity", params_to_json(ckpt.momentum.velocity)}}},
  };
  write_text_file(path, j.dump());
}

Checkpoint load_checkpoint(const std::string& path) {
  const json j = parse_json_file(path);
  const std::string ctx = path;
  if (field_or<std::string>(j, "format", "", ctx) != "dapt-checkpoint") {
    throw ParseError(ctx + ": not a checkpoint file");
  }
  Checkpoint ckpt;
  ckpt.cfg = run_config_from_json(require_field<json>(j, "run_config", ctx), ctx + ".run_config");
  ckpt.iter = require_field<long>(j, "iter", ctx);
  const json g = require_field<json>(j, "geometry", ctx);
  ckpt.d_tok = require_field<int>(g, "d_tok", ctx + ".geometry");
  ckpt.d_emb = require_field<int>(g, "d_emb", ctx + ".geometry");
  ckpt.l_max = require_field<int>(g, "l_max", ctx + ".geometry");
  ckpt.vocab_seed = require_field<std::uint64_t>(g, "vocab_seed", ctx + ".geometry");
  ckpt.encoder_seed = require_field<std::uint64_t>(g, "encoder_seed", ctx + ".geometry");
  ckpt.class_names = require_field<std::vector<std::string>>(j, "class_names", ctx);
  ckpt.domain_labels = require_field<std::vector<std::string>>(j, "domain_labels", ctx);
  ckpt.params = params_from_json(require_field<json>(j, "params", ctx), ctx + ".params");
  ckpt.ema = ema_from_json(require_field<json>(j, "ema", ctx), ctx + ".ema");
  ckpt.momentum.velocity = params_from_json(
      require_field<json>(require_field<json>(j, "momentum", ctx), "velocity", ctx),
      ctx + ".momentum");
  if (ckpt.params.M() != ckpt.cfg.M || ckpt.params.N() != ckpt.cfg.N ||
      !ckpt.params.same_shape(ckpt.ema.params) ||
      !ckpt.params.same_shape(ckpt.momentum.velocity)) {
    throw ParseError(ctx + ": parameter shapes do not match the stored run config");
  }
  return ckpt;
}

}  // namespace dapt
