#include "dapt/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dapt/errors.hpp"
#include "dapt/head.hpp"
#include "dapt/rng.hpp"
#include "dapt/serialize.hpp"

namespace dapt {

namespace {

void validate_spec(const DatasetSpec& spec) {
  if (spec.K < 2) throw ConfigError("dataset needs at least two classes");
  if (static_cast<int>(spec.class_names.size()) != spec.K) {
    throw ConfigError("class_names size must equal K");
  }
  if (spec.domain_labels.size() != 2) throw ConfigError("exactly two domain labels required");
  if (spec.d_emb < 2) throw ConfigError("d_emb must be >= 2");
  if (spec.n_source < 1 || spec.n_target < 1 || spec.n_eval < 1) {
    throw ConfigError("split sizes must be >= 1");
  }
  if (spec.beta < 0.0 || spec.beta > 1.0) throw ConfigError("beta must be in [0, 1]");
  if (spec.noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
  if (spec.shift_mag < 0.0) throw ConfigError("shift_mag must be >= 0");
}

Split make_split(int n, int K, int d_emb, const Matrix& anchors, const Vec& delta,
                 const DatasetSpec& spec, Rng& rng, bool labeled) {
  Split split;
  split.features = Matrix(n, d_emb);
  if (labeled) split.labels.reserve(n);
  Vec u(d_emb), eps(d_emb);
  for (int idx = 0; idx < n; ++idx) {
    const int cls = idx % K;
    for (double& v : u) v = rng.normal();
    normalize(u);
    for (double& v : eps) v = rng.normal();
    normalize(eps);  // noise_sigma is the norm of the noise component, not a per-axis sd

    double* f = split.features.row(idx);
    const double* z = anchors.row(cls);
    for (int e = 0; e < d_emb; ++e) {
      f[e] = spec.beta * z[e] + (1.0 - spec.beta) * u[e] + spec.shift_mag * delta[e] +
             spec.noise_sigma * eps[e];
    }
    normalize(split.features.row_span(idx));
    if (labeled) split.labels.push_back(cls);
  }
  return split;
}

}  // namespace

Dataset generate(const DatasetSpec& spec, const FrozenEncoder& enc, const VocabConfig& vocab) {
  validate_spec(spec);
  if (enc.d_emb != spec.d_emb) throw ShapeError("encoder d_emb does not match dataset spec");
  if (enc.d_tok != vocab.d_tok) throw ShapeError("encoder d_tok does not match vocab");

  Matrix anchors_s = build_handcrafted_head(spec.class_names, spec.domain_labels[0], vocab, enc);
  Matrix anchors_t = build_handcrafted_head(spec.class_names, spec.domain_labels[1], vocab, enc);

  Rng rng(derive_seed(spec.seed, "data"));
  Vec delta_t(spec.d_emb);
  for (double& v : delta_t) v = rng.normal();
  normalize(delta_t);
  const Vec delta_s(spec.d_emb, 0.0);

  Dataset ds;
  ds.spec = spec;
  ds.d_tok = enc.d_tok;
  ds.l_max = enc.l_max;
  ds.vocab_seed = vocab.seed;
  ds.encoder_seed = enc.seed;
  ds.source = make_split(spec.n_source, spec.K, spec.d_emb, anchors_s, delta_s, spec, rng, true);
  ds.target_train =
      make_split(spec.n_target, spec.K, spec.d_emb, anchors_t, delta_t, spec, rng, false);
  ds.target_eval =
      make_split(spec.n_eval, spec.K, spec.d_emb, anchors_t, delta_t, spec, rng, true);
  return ds;
}

GenSpec default_genspec(std::uint64_t seed) {
  GenSpec gs;
  gs.spec.seed = seed;
  gs.vocab_seed = derive_seed(seed, "vocab");
  gs.encoder_seed = derive_seed(seed, "encoder");
  return gs;
}

Dataset generate(const GenSpec& gs) {
  const VocabConfig vocab{gs.d_tok, gs.vocab_seed};
  const FrozenEncoder enc = make_encoder(gs.l_max, gs.d_tok, gs.spec.d_emb, gs.encoder_seed);
  return generate(gs.spec, enc, vocab);
}

GenSpec genspec_from_json(const json& j, const std::string& ctx) {
  GenSpec gs;
  gs.spec.seed = field_or<std::uint64_t>(j, "seed", 0, ctx);
  GenSpec defaults = default_genspec(gs.spec.seed);
  gs.spec.K = field_or<int>(j, "K", gs.spec.K, ctx);
  gs.spec.d_emb = field_or<int>(j, "d_emb", gs.spec.d_emb, ctx);
  gs.spec.n_source = field_or<int>(j, "n_source", gs.spec.n_source, ctx);
  gs.spec.n_target = field_or<int>(j, "n_target", gs.spec.n_target, ctx);
  gs.spec.n_eval = field_or<int>(j, "n_eval", gs.spec.n_eval, ctx);
  gs.spec.beta = field_or<double>(j, "beta", gs.spec.beta, ctx);
  gs.spec.noise_sigma = field_or<double>(j, "noise_sigma", gs.spec.noise_sigma, ctx);
  gs.spec.shift_mag = field_or<double>(j, "shift_mag", gs.spec.shift_mag, ctx);
  gs.spec.class_names =
      field_or<std::vector<std::string>>(j, "class_names", gs.spec.class_names, ctx);
  gs.spec.domain_labels =
      field_or<std::vector<std::string>>(j, "domain_labels", gs.spec.domain_labels, ctx);
  if (j.contains("class_names") && !j.contains("K")) {
    gs.spec.K = static_cast<int>(gs.spec.class_names.size());
  }
  gs.d_tok = field_or<int>(j, "d_tok", gs.d_tok, ctx);
  gs.l_max = field_or<int>(j, "l_max", gs.l_max, ctx);
  gs.vocab_seed = field_or<std::uint64_t>(j, "vocab_seed", defaults.vocab_seed, ctx);
  gs.encoder_seed = field_or<std::uint64_t>(j, "encoder_seed", defaults.encoder_seed, ctx);
  return gs;
}

json genspec_to_json(const GenSpec& gs) {
  return json{{"seed", gs.spec.seed},
              {"K", gs.spec.K},
              {"d_emb", gs.spec.d_emb},
              {"n_source", gs.spec.n_source},
              {"n_target", gs.spec.n_target},
              {"n_eval", gs.spec.n_eval},
              {"beta", gs.spec.beta},
              {"noise_sigma", gs.spec.noise_sigma},
              {"shift_mag", gs.spec.shift_mag},
              {"class_names", gs.spec.class_names},
              {"domain_labels", gs.spec.domain_labels},
              {"d_tok", gs.d_tok},
              {"l_max", gs.l_max},
              {"vocab_seed", gs.vocab_seed},
              {"encoder_seed", gs.encoder_seed}};
}

namespace {

json split_to_json(const Split& s, bool labeled) {
  json features = json::array();
  for (int i = 0; i < s.features.rows; ++i) {
    features.push_back(std::vector<double>(s.features.row(i), s.features.row(i) + s.features.cols));
  }
  json j{{"features", std::move(features)}};
  if (labeled) j["labels"] = s.labels;
  return j;
}

Split split_from_json(const json& j, int d_emb, int K, bool labeled, const std::string& ctx) {
  auto rows = require_field<std::vector<std::vector<double>>>(j, "features", ctx);
  Split s;
  s.features = Matrix(static_cast<int>(rows.size()), d_emb);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<int>(rows[i].size()) != d_emb) {
      throw ParseError(ctx + ": feature row " + std::to_string(i) + " has wrong dimension");
    }
    std::copy(rows[i].begin(), rows[i].end(), s.features.row(static_cast<int>(i)));
    const double nrm = l2_norm(s.features.row_span(static_cast<int>(i)));
    if (std::abs(nrm - 1.0) > 1e-6) {
      throw ParseError(ctx + ": feature row " + std::to_string(i) + " is not unit norm");
    }
  }
  if (labeled) {
    s.labels = require_field<std::vector<int>>(j, "labels", ctx);
    if (s.labels.size() != rows.size()) {
      throw ParseError(ctx + ": label count does not match feature count");
    }
    for (int y : s.labels) {
      if (y < 0 || y >= K) throw ParseError(ctx + ": label out of range");
    }
  }
  return s;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  json j{
      {"format", "dapt-dataset"},
      {"version", 1},
      {"spec",
       {{"K", ds.spec.K},
        {"d_emb", ds.spec.d_emb},
        {"n_source", ds.spec.n_source},
        {"n_target", ds.spec.n_target},
        {"n_eval", ds.spec.n_eval},
        {"beta", ds.spec.beta},
        {"noise_sigma", ds.spec.noise_sigma},
        {"shift_mag", ds.spec.shift_mag},
        {"class_names", ds.spec.class_names},
        {"domain_labels", ds.spec.domain_labels},
        {"seed", ds.spec.seed}}},
      {"vocab", {{"seed", ds.vocab_seed}, {"d_tok", ds.d_tok}}},
      {"encoder",
       {{"seed", ds.encoder_seed}, {"d_tok", ds.d_tok}, {"d_emb", ds.spec.d_emb},
        {"l_max", ds.l_max}}},
      {"source", split_to_json(ds.source, true)},
      {"target_train", split_to_json(ds.target_train, false)},
      {"target_eval", split_to_json(ds.target_eval, true)},
  };
  write_text_file(path, j.dump());
}

Dataset load_dataset(const std::string& path) {
  const json j = parse_json_file(path);
  const std::string ctx = path;
  if (field_or<std::string>(j, "format", "", ctx) != "dapt-dataset") {
    throw ParseError(ctx + ": not a dataset file");
  }
  const json spec_j = require_field<json>(j, "spec", ctx);
  Dataset ds;
  ds.spec.K = require_field<int>(spec_j, "K", ctx + ".spec");
  ds.spec.d_emb = require_field<int>(spec_j, "d_emb", ctx + ".spec");
  ds.spec.n_source = require_field<int>(spec_j, "n_source", ctx + ".spec");
  ds.spec.n_target = require_field<int>(spec_j, "n_target", ctx + ".spec");
  ds.spec.n_eval = require_field<int>(spec_j, "n_eval", ctx + ".spec");
  ds.spec.beta = require_field<double>(spec_j, "beta", ctx + ".spec");
  ds.spec.noise_sigma = require_field<double>(spec_j, "noise_sigma", ctx + ".spec");
  ds.spec.shift_mag = require_field<double>(spec_j, "shift_mag", ctx + ".spec");
  ds.spec.class_names = require_field<std::vector<std::string>>(spec_j, "class_names", ctx + ".spec");
  ds.spec.domain_labels =
      require_field<std::vector<std::string>>(spec_j, "domain_labels", ctx + ".spec");
  ds.spec.seed = require_field<std::uint64_t>(spec_j, "seed", ctx + ".spec");
  validate_spec(ds.spec);

  const json vocab_j = require_field<json>(j, "vocab", ctx);
  ds.vocab_seed = require_field<std::uint64_t>(vocab_j, "seed", ctx + ".vocab");
  ds.d_tok = require_field<int>(vocab_j, "d_tok", ctx + ".vocab");

  const json enc_j = require_field<json>(j, "encoder", ctx);
  ds.encoder_seed = require_field<std::uint64_t>(enc_j, "seed", ctx + ".encoder");
  ds.l_max = require_field<int>(enc_j, "l_max", ctx + ".encoder");
  if (require_field<int>(enc_j, "d_tok", ctx + ".encoder") != ds.d_tok) {
    throw ParseError(ctx + ": encoder and vocab disagree on d_tok");
  }
  if (require_field<int>(enc_j, "d_emb", ctx + ".encoder") != ds.spec.d_emb) {
    throw ParseError(ctx + ": encoder d_emb does not match spec");
  }

  ds.source = split_from_json(require_field<json>(j, "source", ctx), ds.spec.d_emb, ds.spec.K,
                              true, ctx + ".source");
  ds.target_train = split_from_json(require_field<json>(j, "target_train", ctx), ds.spec.d_emb,
                                    ds.spec.K, false, ctx + ".target_train");
  ds.target_eval = split_from_json(require_field<json>(j, "target_eval", ctx), ds.spec.d_emb,
                                   ds.spec.K, true, ctx + ".target_eval");
  if (ds.source.features.rows != ds.spec.n_source ||
      ds.target_train.features.rows != ds.spec.n_target ||
      ds.target_eval.features.rows != ds.spec.n_eval) {
    throw ParseError(ctx + ": split sizes do not match spec");
  }
  return ds;
}

}  // namespace dapt
