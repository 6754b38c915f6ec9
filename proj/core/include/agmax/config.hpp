#pragma once

#include <map>
#include <string>

#include <json.hpp>

#include "agmax/dataset.hpp"
#include "agmax/train.hpp"

namespace agmax::cli {

/**
 * A run configuration is a single JSON object with flat dotted keys, e.g.
 *   { "data.kind": "synth", "train.epochs": 30, "augment.mix": "cutmix" }
 * Sorted-map storage keeps serialized manifests diff-able. Unknown keys are
 * config errors, as are values of the wrong type.
 */
using ConfigMap = std::map<std::string, nlohmann::json>;

ConfigMap parse_config_text(const std::string& text, const std::string& origin);

/// Reads a config file; also accepts a run manifest (re-running a manifest
/// reproduces the run), unwrapping its "config" object.
ConfigMap load_config_file(const std::string& path);

/// Resolve a --config argument: a literal path, a path with ".json" added,
/// or a preset name looked up under the configs/ roots.
std::string resolve_config_path(const std::string& name_or_path);

/// Apply one --set override, "key=value"; the value parses as JSON when
/// possible and falls back to a plain string.
void apply_override(ConfigMap& config, const std::string& key_value);

/// Everything a run needs, with dataset-dependent pieces still symbolic
/// (normalization stats, mean cutout fill, encoder input dims).
struct RunSpec {
  train::TrainConfig train_config;

  std::string data_kind = "synth";  // "synth" | "cifar10"
  data::SynthSpec synth;
  std::string cifar_train_path;
  std::string cifar_test_path;

  bool normalize_from_dataset = true;
  bool cutout_fill_mean = true;
  int cutout_size = 0;
  std::size_t pad_crop = 0;
  double hflip_probability = 0.0;
  std::string policy_path;
  double policy_probability = 1.0;

  std::string run_name = "run";
  std::string timing = "none";  // "none" keeps the metrics CSV bit-reproducible

  ConfigMap echo;  // the validated flat config, for the manifest
};

/// Validate the flat config field by field and assemble a RunSpec.
/// Violations raise ConfigError naming the key.
RunSpec build_run_spec(const ConfigMap& config);

/// Fully resolved inputs for a training run.
struct PreparedRun {
  train::TrainConfig config;
  data::Dataset train_set;
  data::Dataset test_set;
  data::ChannelStats stats;
};

/// Load/generate datasets, compute train-split statistics, and finish the
/// recipe and encoder shapes. `data_dir` is the dataset root fallback
/// (normally the AGMAX_DATA_DIR environment variable).
PreparedRun prepare_run(const RunSpec& spec, const std::string& data_dir);

}  // namespace agmax::cli
