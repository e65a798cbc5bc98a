#include "dapt/harness.hpp"

#include <algorithm>
#include <cstdio>

#include "dapt/errors.hpp"

namespace dapt {

namespace {

// Mirrors the strict key check used for run configs: a typo must fail loudly,
// never silently fall back to a default.
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

AblateGrid grid_from_json(const json& j, const std::string& ctx) {
  reject_unknown_keys(j, {"dataset_path", "dataset", "seeds", "base", "cells"}, ctx);
  AblateGrid grid;
  grid.dataset_path = field_or<std::string>(j, "dataset_path", "", ctx);
  if (j.contains("dataset")) {
    grid.dataset = genspec_from_json(require_field<json>(j, "dataset", ctx), ctx + ".dataset");
  } else if (grid.dataset_path.empty()) {
    grid.dataset = default_genspec(41);
  }
  grid.seeds =
      field_or<std::vector<std::uint64_t>>(j, "seeds", {11, 12, 13, 14, 15}, ctx);
  if (grid.seeds.empty()) throw ConfigError(ctx + ": seeds must be non-empty");
  grid.base = field_or<json>(j, "base", json::object(), ctx);
  if (!grid.base.is_object()) throw ConfigError(ctx + ": base must be a JSON object");

  const json cells = require_field<json>(j, "cells", ctx);
  if (!cells.is_array() || cells.empty()) {
    throw ConfigError(ctx + ": cells must be a non-empty array");
  }
  for (size_t i = 0; i < cells.size(); ++i) {
    const std::string cctx = ctx + ".cells[" + std::to_string(i) + "]";
    reject_unknown_keys(cells[i], {"name", "overrides", "reference"}, cctx);
    AblateCell cell;
    cell.name = require_field<std::string>(cells[i], "name", cctx);
    cell.overrides = field_or<json>(cells[i], "overrides", json::object(), cctx);
    if (!cell.overrides.is_object()) throw ConfigError(cctx + ": overrides must be an object");
    if (cells[i].contains("reference")) {
      cell.reference = require_field<double>(cells[i], "reference", cctx);
    }
    grid.cells.push_back(std::move(cell));
  }
  return grid;
}

namespace {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string g17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<AblateRow> ablate(const AblateGrid& grid) {
  const Dataset ds =
      grid.dataset_path.empty() ? generate(grid.dataset) : load_dataset(grid.dataset_path);

  std::vector<AblateRow> rows;
  for (const AblateCell& cell : grid.cells) {
    json cfg_json = grid.base;
    cfg_json.merge_patch(cell.overrides);

    AblateRow row;
    row.name = cell.name;
    row.reference = cell.reference;
    for (std::uint64_t seed : grid.seeds) {
      json run_json = cfg_json;
      run_json["seed"] = seed;
      const RunConfig cfg = run_config_from_json(run_json, "cell '" + cell.name + "'");
      const TrainResult tr = train(cfg, ds);
      const EvalReport ev = evaluate(tr.ckpt, ds, cfg.ema);
      row.target_accs.push_back(ev.target_acc);
      row.cfg = cfg;
    }
    row.median_target_acc = median(row.target_accs);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string ablate_to_csv(const AblateGrid& grid, const std::vector<AblateRow>& rows) {
  std::string out = "cell,variant,M,N,ema,lambda,pseudo_labels,own_domain,cross_domain,joint,"
                    "entropy_term,forbidden_probe,median_target_acc,reference";
  for (std::uint64_t seed : grid.seeds) {
    out += ",acc_seed_" + std::to_string(seed);
  }
  out += '\n';
  for (const AblateRow& r : rows) {
    out += r.name;
    out += ',' + variant_name(r.cfg.variant);
    out += ',' + std::to_string(r.cfg.M);
    out += ',' + std::to_string(r.cfg.N);
    out += ',' + std::string(r.cfg.ema ? "true" : "false");
    out += ',' + g17(r.cfg.lambda);
    out += ',' + std::string(r.cfg.pseudo_mode == PseudoLabelMode::Hard ? "hard" : "soft");
    for (bool b : {r.cfg.loss.own_domain, r.cfg.loss.cross_domain, r.cfg.loss.joint,
                   r.cfg.loss.entropy, r.cfg.loss.forbidden_probe}) {
      out += ',' + std::string(b ? "true" : "false");
    }
    out += ',' + g17(r.median_target_acc);
    out += ',';
    if (r.reference) out += g17(*r.reference);
    for (double a : r.target_accs) out += ',' + g17(a);
    out += '\n';
  }
  return out;
}

}  // namespace dapt
