// Command-line front end: synthetic data generation, training, evaluation,
// ablation grids, and the finite-difference gradient audit.
#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "dapt/harness.hpp"
#include "dapt/rng.hpp"

namespace {

int cmd_gen_data(const std::string& spec_path, const std::string& out_path,
                 std::uint64_t* seed_override) {
  dapt::GenSpec gs;
  if (!spec_path.empty()) {
    gs = dapt::genspec_from_json(dapt::parse_json_file(spec_path), spec_path);
  } else {
    gs = dapt::default_genspec(41);
  }
  if (seed_override) {
    gs.spec.seed = *seed_override;
    gs.vocab_seed = dapt::derive_seed(*seed_override, "vocab");
    gs.encoder_seed = dapt::derive_seed(*seed_override, "encoder");
  }
  const dapt::Dataset ds = dapt::generate(gs);
  dapt::save_dataset(ds, out_path);
  std::printf("wrote %s: K=%d d_emb=%d source=%d target_train=%d target_eval=%d\n",
              out_path.c_str(), ds.spec.K, ds.spec.d_emb, ds.spec.n_source, ds.spec.n_target,
              ds.spec.n_eval);
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_path, const std::string& metrics_path, bool allow_probe) {
  dapt::RunConfig cfg = dapt::run_config_from_json(dapt::parse_json_file(config_path),
                                                   config_path);
  if (!data_path.empty()) cfg.dataset_path = data_path;
  if (cfg.dataset_path.empty()) {
    std::fprintf(stderr, "no dataset: set \"dataset\" in the config or pass --data\n");
    return 1;
  }
  if (cfg.loss.forbidden_probe && !allow_probe) {
    std::fprintf(stderr,
                 "config enables the probe loss, which trains the source-domain classifier on "
                 "pseudo-labeled target regions and is expected to hurt accuracy; pass "
                 "--probe-forbidden-loss to run it anyway\n");
    return 1;
  }
  const dapt::Dataset ds = dapt::load_dataset(cfg.dataset_path);
  const dapt::TrainResult result = dapt::train(cfg, ds);
  dapt::save_checkpoint(result.ckpt, out_path);
  if (!metrics_path.empty()) {
    dapt::write_text_file(metrics_path, dapt::metrics_to_csv(result.metrics));
  }
  const dapt::EvalReport ev = dapt::evaluate(result.ckpt, ds, cfg.ema);
  std::printf("trained %ld iters: source_acc=%.4f target_acc=%.4f zero_shot=%.4f%s\n",
              result.ckpt.iter, ev.source_acc, ev.target_acc, ev.zero_shot_acc,
              cfg.ema ? " (ensemble head)" : "");
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path, bool no_ema,
             bool as_json) {
  const dapt::Checkpoint ckpt = dapt::load_checkpoint(ckpt_path);
  const dapt::Dataset ds = dapt::load_dataset(data_path);
  const bool use_ema = !no_ema && ckpt.cfg.ema;
  const dapt::EvalReport ev = dapt::evaluate(ckpt, ds, use_ema);
  if (as_json) {
    dapt::json j{{"source_acc", ev.source_acc},
                 {"target_acc", ev.target_acc},
                 {"zero_shot_acc", ev.zero_shot_acc},
                 {"ema", use_ema},
                 {"per_class_source", ev.per_class_source},
                 {"per_class_target", ev.per_class_target}};
    std::printf("%s\n", j.dump(2).c_str());
    return 0;
  }
  std::printf("source_acc=%.4f target_acc=%.4f zero_shot=%.4f%s\n", ev.source_acc, ev.target_acc,
              ev.zero_shot_acc, use_ema ? " (ensemble head)" : "");
  for (size_t k = 0; k < ckpt.class_names.size(); ++k) {
    std::printf("  %-12s source=%.4f target=%.4f\n", ckpt.class_names[k].c_str(),
                ev.per_class_source[k], ev.per_class_target[k]);
  }
  return 0;
}

int cmd_ablate(const std::string& grid_path, const std::string& out_path) {
  const dapt::AblateGrid grid =
      dapt::grid_from_json(dapt::parse_json_file(grid_path), grid_path);
  const std::vector<dapt::AblateRow> rows = dapt::ablate(grid);
  dapt::write_text_file(out_path, dapt::ablate_to_csv(grid, rows));
  for (const dapt::AblateRow& r : rows) {
    std::printf("%-28s median_target_acc=%.4f", r.name.c_str(), r.median_target_acc);
    if (r.reference) std::printf(" reference=%.4f", *r.reference);
    std::printf("\n");
  }
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, int configs) {
  const dapt::GradCheckReport report = dapt::run_gradcheck(seed, configs);
  for (const auto& term : report.terms) {
    std::printf("%-8s max_rel_err=%.3e\n", term.name.c_str(), term.max_rel_err);
  }
  std::printf("%s: max_rel_err=%.3e over %d configs (tol 1e-4)\n",
              report.passed() ? "PASS" : "FAIL", report.max_rel_err, report.n_configs);
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"domain-adaptive prompt tuning on synthetic region features"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic two-domain dataset");
  std::string gen_spec, gen_out = "data.json";
  std::uint64_t gen_seed = 0;
  bool gen_seed_set = false;
  gen->add_option("--spec", gen_spec, "dataset spec JSON (defaults when omitted)");
  gen->add_option("--out", gen_out, "output path");
  gen->add_option("--seed", gen_seed, "derive all seeds from this root instead")
      ->each([&](const std::string&) { gen_seed_set = true; });

  auto* train = app.add_subcommand("train", "train prompts on a generated dataset");
  std::string train_config, train_data, train_out = "ckpt.json", train_metrics;
  bool allow_probe = false;
  train->add_option("--config", train_config, "run config JSON")->required();
  train->add_option("--data", train_data, "dataset path (overrides config)");
  train->add_option("--out", train_out, "checkpoint output path");
  train->add_option("--metrics", train_metrics, "per-iteration metrics CSV output path");
  train->add_flag("--probe-forbidden-loss", allow_probe,
                  "allow the diagnostic cross-domain probe loss");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string eval_ckpt, eval_data;
  bool no_ema = false, eval_json = false;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint path")->required();
  eval->add_option("--data", eval_data, "dataset path")->required();
  eval->add_flag("--no-ema", no_ema, "evaluate the live parameters even if the run used the ensemble");
  eval->add_flag("--json", eval_json, "print a JSON report");

  auto* abl = app.add_subcommand("ablate", "run an ablation grid and write a CSV table");
  std::string grid_path, abl_out = "ablation.csv";
  abl->add_option("--grid", grid_path, "grid JSON")->required();
  abl->add_option("--out", abl_out, "output CSV path");

  auto* gc = app.add_subcommand("gradcheck", "finite-difference audit of every loss gradient");
  std::uint64_t gc_seed = 1234;
  int gc_configs = 100;
  gc->add_option("--seed", gc_seed, "root seed for the randomized configs");
  gc->add_option("--configs", gc_configs, "number of randomized configs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen_data(gen_spec, gen_out, gen_seed_set ? &gen_seed : nullptr);
    if (train->parsed()) {
      return cmd_train(train_config, train_data, train_out, train_metrics, allow_probe);
    }
    if (eval->parsed()) return cmd_eval(eval_ckpt, eval_data, no_ema, eval_json);
    if (abl->parsed()) return cmd_ablate(grid_path, abl_out);
    if (gc->parsed()) return cmd_gradcheck(gc_seed, gc_configs);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
