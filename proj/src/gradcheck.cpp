#include "dapt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "dapt/rng.hpp"

namespace dapt {

double max_guarded_rel_err(const PromptParams& analytic, const PromptParams& numeric) {
  if (!analytic.same_shape(numeric)) throw ShapeError("gradient shapes differ");
  double worst = 0.0;
  const int n = analytic.param_count();
  for (int i = 0; i < n; ++i) {
    const double a = analytic.param(i);
    const double b = numeric.param(i);
    const double err = std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
    worst = std::max(worst, err);
  }
  return worst;
}

namespace {

LossFlags no_flags() {
  LossFlags f;
  f.source_own = f.source_cross = f.source_both = false;
  f.target_own = f.target_both = f.target_entropy = false;
  f.target_source_probe = false;
  return f;
}

TokenVec random_unit(Rng& rng, int d) {
  TokenVec v(d);
  for (double& x : v) x = rng.normal();
  normalize(v);
  return v;
}

// Chooses a confidence threshold separated from every gate probability, so a
// finite-difference nudge of any parameter cannot flip a region in or out of
// the pseudo-label gate.
double pick_threshold(std::vector<double> gate_probs, Rng& rng) {
  std::sort(gate_probs.begin(), gate_probs.end());
  std::vector<double> candidates;
  if (gate_probs.front() > 0.012) candidates.push_back(gate_probs.front() - 0.01);
  for (size_t i = 0; i + 1 < gate_probs.size(); ++i) {
    if (gate_probs[i + 1] - gate_probs[i] >= 4e-3) {
      candidates.push_back(0.5 * (gate_probs[i] + gate_probs[i + 1]));
    }
  }
  candidates.push_back(std::min(gate_probs.back() + 0.01, 0.5 * (1.0 + gate_probs.back())));
  return candidates[rng.uniform_int(static_cast<int>(candidates.size()))];
}

}  // namespace

GradCheckReport run_gradcheck(std::uint64_t seed, int n_configs) {
  Rng rng(derive_seed(seed, "gradcheck"));
  const double h = 1e-5;

  struct TermSpec {
    const char* name;
    LossFlags flags;
    bool scaled_by_lambda;
  };
  std::vector<TermSpec> specs;
  {
    LossFlags f = no_flags();
    f.source_own = true;
    specs.push_back({"L_s_ss", f, false});
    f = no_flags();
    f.source_cross = true;
    specs.push_back({"L_s_t", f, false});
    f = no_flags();
    f.source_both = true;
    specs.push_back({"L_s_st", f, false});
    f = no_flags();
    f.target_own = true;
    specs.push_back({"L_t_tt", f, false});
    f = no_flags();
    f.target_both = true;
    specs.push_back({"L_t_st", f, false});
    f = no_flags();
    f.target_entropy = true;
    specs.push_back({"L_ent", f, false});
    f = no_flags();
    f.target_source_probe = true;
    specs.push_back({"L_t_ss", f, false});
    f = LossFlags{};  // every standard term on, probe off
    specs.push_back({"total", f, true});
  }

  std::map<std::string, double> worst;
  for (const TermSpec& s : specs) worst[s.name] = 0.0;

  for (int c = 0; c < n_configs; ++c) {
    const int d_tok = 8 + rng.uniform_int(9);
    const int d_emb = 8 + rng.uniform_int(9);
    const int K = 2 + rng.uniform_int(3);
    int M = rng.uniform_int(4);
    int N = rng.uniform_int(4);
    if (M + N == 0) M = 1;
    const bool use_dl = c % 2 == 0;
    const int l_max = M + N + 1 + (use_dl ? 1 : 0) + 1;

    const FrozenEncoder enc = make_encoder(l_max, d_tok, d_emb, rng.next_u64());
    PromptParams params = init_params(PromptConfig{M, N, d_tok, 0.2, rng.next_u64()});

    std::vector<std::vector<TokenVec>> class_tokens;
    for (int k = 0; k < K; ++k) class_tokens.push_back({random_unit(rng, d_tok)});
    std::vector<TokenVec> dl_source, dl_target;
    if (use_dl) {
      dl_source.push_back(random_unit(rng, d_tok));
      dl_target.push_back(random_unit(rng, d_tok));
    }
    const HeadPipeline pipe{&params, &enc, class_tokens, dl_source, dl_target};

    Matrix hc_target(K, d_emb);
    for (int k = 0; k < K; ++k) {
      TokenVec row = random_unit(rng, d_emb);
      std::copy(row.begin(), row.end(), hc_target.row(k));
    }

    const int nr_s = 1 + rng.uniform_int(3);
    const int nr_t = 1 + rng.uniform_int(3);
    RegionBatch sb;
    sb.domain = DomainTag::Source;
    sb.features = Matrix(nr_s, d_emb);
    sb.labels = std::vector<int>(nr_s);
    for (int r = 0; r < nr_s; ++r) {
      const TokenVec f = random_unit(rng, d_emb);
      std::copy(f.begin(), f.end(), sb.features.row(r));
      (*sb.labels)[r] = rng.uniform_int(K);
    }
    RegionBatch tb;
    tb.domain = DomainTag::Target;
    tb.features = Matrix(nr_t, d_emb);
    for (int r = 0; r < nr_t; ++r) {
      const TokenVec f = random_unit(rng, d_emb);
      std::copy(f.begin(), f.end(), tb.features.row(r));
    }

    LossOptions opt;
    opt.head.temp = 0.07 + 0.13 * rng.uniform();
    opt.entropy = c % 3 == 1 ? EntropyMode::PseudoClassOnly : EntropyMode::FullDistribution;
    opt.pseudo = c % 5 == 4 ? PseudoLabelMode::Soft : PseudoLabelMode::Hard;

    {
      const DomainClassEmbeddings heads = pipe.build();
      std::vector<double> gate_probs;
      for (int r = 0; r < nr_t; ++r) {
        const Vec q = zero_shot_probs(tb.features.row_span(r), hc_target, opt.head.temp);
        const int y = static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
        const Vec p_tt =
            support_probs(tb.features.row_span(r), heads, DomainSet::TargetOnly, opt.head);
        gate_probs.push_back(p_tt[y]);
      }
      opt.head.conf_threshold = pick_threshold(gate_probs, rng);
    }

    const double lambda = 0.25 + 2.0 * rng.uniform();

    for (const TermSpec& spec : specs) {
      LossOptions term_opt = opt;
      term_opt.flags = spec.flags;
      const double lam = spec.scaled_by_lambda ? lambda : 1.0;

      const auto eval_loss = [&]() -> LossReport {
        const DomainClassEmbeddings heads = pipe.build();
        const LossReport sr = term_opt.flags.any_source()
                                  ? loss_source(sb, pipe, heads, term_opt)
                                  : LossReport::zero(params);
        const LossReport tr = term_opt.flags.any_target()
                                  ? loss_target(tb, pipe, heads, hc_target, term_opt)
                                  : LossReport::zero(params);
        return total_loss(sr, tr, lam);
      };

      const PromptParams analytic = eval_loss().grads;
      PromptParams numeric = zeros_like(params);
      const int n_params = params.param_count();
      for (int i = 0; i < n_params; ++i) {
        const double saved = params.param(i);
        params.param(i) = saved + h;
        const double up = eval_loss().total;
        params.param(i) = saved - h;
        const double dn = eval_loss().total;
        params.param(i) = saved;
        numeric.param(i) = (up - dn) / (2.0 * h);
      }
      const double err = max_guarded_rel_err(analytic, numeric);
      worst[spec.name] = std::max(worst[spec.name], err);
    }
  }

  GradCheckReport report;
  report.n_configs = n_configs;
  for (const TermSpec& s : specs) {
    report.terms.push_back({s.name, worst[s.name]});
    report.max_rel_err = std::max(report.max_rel_err, worst[s.name]);
  }
  return report;
}

}  // namespace dapt
