#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dapt/encoder.hpp"
#include "dapt/serialize.hpp"
#include "dapt/vocab.hpp"

namespace dapt {

/// Two-domain region-feature benchmark. Features for class i in domain d are
/// built around the encoded fixed-template prompt anchor z[d][i]:
///
///   f = normalize(beta * z[d][i] + (1 - beta) * u + shift_mag * delta_d
///                 + noise_sigma * eps)
///
/// with u a unit-norm random direction, eps raw Gaussian noise, delta_source
/// = 0, and delta_target a seeded unit vector shared by all target regions.
struct DatasetSpec {
  int K = 8;
  int d_emb = 32;
  int n_source = 2048;
  int n_target = 2048;
  int n_eval = 1024;
  double beta = 0.7;
  double noise_sigma = 0.35;
  double shift_mag = 0.5;
  std::vector<std::string> class_names = {"person",  "rider", "car",        "truck",
                                          "bus",     "train", "motorcycle", "bicycle"};
  std::vector<std::string> domain_labels = {"clear", "foggy"};
  std::uint64_t seed = 0;
};

struct Split {
  Matrix features;          // n x d_emb, unit rows
  std::vector<int> labels;  // empty for the unlabeled target training split
};

struct Dataset {
  DatasetSpec spec;
  // geometry echo so training can rebuild the exact same frozen pieces
  int d_tok = 0;
  int l_max = 0;
  std::uint64_t vocab_seed = 0;
  std::uint64_t encoder_seed = 0;
  Split source;        // labeled
  Split target_train;  // unlabeled
  Split target_eval;   // labeled
};

/// Deterministic generation: anchors from (vocab, enc), then one stream
/// derived from spec.seed drives delta_target and the regions in order
/// source, target_train, target_eval. Class of region idx is idx mod K.
Dataset generate(const DatasetSpec& spec, const FrozenEncoder& enc, const VocabConfig& vocab);

/// Generation recipe bundling the data spec with the frozen geometry it is
/// anchored to. Unset seeds default to streams derived from spec.seed.
struct GenSpec {
  DatasetSpec spec;
  int d_tok = 32;
  int l_max = 18;
  std::uint64_t vocab_seed = 0;
  std::uint64_t encoder_seed = 0;
};

GenSpec default_genspec(std::uint64_t seed);
Dataset generate(const GenSpec& gs);

/// Reads a generation recipe from JSON; every field is optional and defaults
/// as above (missing seeds are derived from spec.seed).
GenSpec genspec_from_json(const json& j, const std::string& ctx);
json genspec_to_json(const GenSpec& gs);

/// JSON round-trip; every float survives save/load bit-exactly.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace dapt
