#include "agmax/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "agmax/policy.hpp"

namespace agmax::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "run.name",
      "data.kind",
      "data.synth.classes",
      "data.synth.train_per_class",
      "data.synth.test_per_class",
      "data.synth.image_size",
      "data.synth.channels",
      "data.synth.noise_sigma",
      "data.synth.amplitude",
      "data.synth.phase_jitter",
      "data.synth.seed",
      "data.cifar.train",
      "data.cifar.test",
      "model.kind",
      "model.hidden",
      "model.channels",
      "model.init",
      "model.init_gain",
      "model.init_sigma",
      "train.epochs",
      "train.batch_size",
      "train.lr",
      "train.momentum",
      "train.weight_decay",
      "train.decay_biases",
      "train.schedule",
      "train.milestones",
      "train.factor",
      "train.label_smoothing",
      "train.seed",
      "train.precision",
      "augment.pad_crop",
      "augment.hflip",
      "augment.cutout",
      "augment.cutout_fill",
      "augment.policy",
      "augment.policy_prob",
      "augment.normalize",
      "augment.mix",
      "augment.mix_alpha",
      "augment.mix_prob",
      "augment.mix_shared_across_views",
      "agmax.enabled",
      "agmax.kind",
      "agmax.weight",
      "agmax.raw_lambda",
      "report.timing",
      "report.heldout_pairs",
  };
  return keys;
}

class Reader {
public:
  explicit Reader(const ConfigMap& config) : config_(config) {}

  bool has(const std::string& key) const { return config_.contains(key); }

  template <typename T>
  T get(const std::string& key, T fallback) const {
    auto it = config_.find(key);
    if (it == config_.end()) return fallback;
    try {
      return it->second.get<T>();
    } catch (const json::exception&) {
      throw ConfigError("config key '" + key + "': wrong type, got " +
                        it->second.dump());
    }
  }

  std::string get_enum(const std::string& key, const std::string& fallback,
                       std::initializer_list<const char*> allowed) const {
    const std::string value = get<std::string>(key, fallback);
    for (const char* a : allowed) {
      if (value == a) return value;
    }
    std::ostringstream os;
    os << "config key '" << key << "': '" << value << "' not one of {";
    bool first = true;
    for (const char* a : allowed) {
      if (!first) os << ", ";
      os << a;
      first = false;
    }
    os << "}";
    throw ConfigError(os.str());
  }

private:
  const ConfigMap& config_;
};

}  // namespace

ConfigMap parse_config_text(const std::string& text, const std::string& origin) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + origin + ": " + e.what());
  }
  if (doc.is_object() && doc.contains("config") && doc["config"].is_object() &&
      doc.contains("artifacts")) {
    doc = doc["config"];  // a run manifest; rerun its config
  }
  if (!doc.is_object()) {
    throw ConfigError("config " + origin + ": expected a JSON object");
  }
  ConfigMap config;
  for (const auto& [key, value] : doc.items()) {
    if (!known_keys().contains(key)) {
      throw ConfigError("config " + origin + ": unknown key '" + key + "'");
    }
    config[key] = value;
  }
  return config;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file not found: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

std::string resolve_config_path(const std::string& name_or_path) {
  const auto candidates = [&]() -> std::vector<fs::path> {
    std::vector<fs::path> roots = {fs::path{}};
    if (const char* env = std::getenv("AGMAX_CONFIG_DIR")) {
      roots.emplace_back(env);
    }
    roots.emplace_back("configs");
    std::vector<fs::path> out;
    for (const auto& root : roots) {
      out.push_back(root / name_or_path);
      out.push_back(root / (name_or_path + ".json"));
    }
    return out;
  }();
  for (const auto& candidate : candidates) {
    if (fs::exists(candidate) && fs::is_regular_file(candidate)) {
      return candidate.string();
    }
  }
  throw ConfigError("config not found: '" + name_or_path +
                    "' (tried literal path, .json suffix, and configs/)");
}

void apply_override(ConfigMap& config, const std::string& key_value) {
  const auto eq = key_value.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("--set expects key=value, got '" + key_value + "'");
  }
  const std::string key = key_value.substr(0, eq);
  const std::string raw = key_value.substr(eq + 1);
  if (!known_keys().contains(key)) {
    throw ConfigError("--set: unknown key '" + key + "'");
  }
  json value;
  try {
    value = json::parse(raw);
  } catch (const json::parse_error&) {
    value = raw;  // plain string
  }
  config[key] = value;
}

RunSpec build_run_spec(const ConfigMap& config) {
  const Reader r(config);
  RunSpec spec;
  spec.echo = config;
  spec.run_name = r.get<std::string>("run.name", "run");

  // dataset
  spec.data_kind = r.get_enum("data.kind", "synth", {"synth", "cifar10"});
  spec.synth.num_classes = r.get<std::size_t>("data.synth.classes", 4);
  spec.synth.train_per_class =
      r.get<std::size_t>("data.synth.train_per_class", 500);
  spec.synth.test_per_class =
      r.get<std::size_t>("data.synth.test_per_class", 125);
  spec.synth.image_size = r.get<std::size_t>("data.synth.image_size", 24);
  spec.synth.channels = r.get<std::size_t>("data.synth.channels", 3);
  spec.synth.noise_sigma = r.get<double>("data.synth.noise_sigma", 0.06);
  spec.synth.amplitude = r.get<double>("data.synth.amplitude", 0.35);
  spec.synth.phase_jitter = r.get<double>("data.synth.phase_jitter", 0.35);
  spec.synth.seed = r.get<std::uint64_t>("data.synth.seed", 7);
  spec.synth.validate();
  spec.cifar_train_path = r.get<std::string>("data.cifar.train", "");
  spec.cifar_test_path = r.get<std::string>("data.cifar.test", "");

  // model
  auto& encoder = spec.train_config.encoder;
  encoder.kind = r.get_enum("model.kind", "cnn", {"mlp", "cnn"});
  encoder.hidden = r.get<std::vector<std::size_t>>("model.hidden", {64});
  encoder.channel_plan =
      r.get<std::vector<std::size_t>>("model.channels", {8, 16});
  const std::string init =
      r.get_enum("model.init", "fan_in", {"fan_in", "gaussian"});
  encoder.init = init == "fan_in" ? model::InitScheme::fan_in_gaussian
                                  : model::InitScheme::plain_gaussian;
  encoder.init_gain = r.get<double>("model.init_gain", std::sqrt(2.0));
  encoder.init_sigma = r.get<double>("model.init_sigma", 0.1);
  if (encoder.init_gain <= 0.0 || encoder.init_sigma <= 0.0) {
    throw ConfigError("model.init_gain and model.init_sigma must be positive");
  }

  // optimizer and loop
  auto& train = spec.train_config;
  train.epochs = r.get<std::size_t>("train.epochs", 30);
  train.batch_size = r.get<std::size_t>("train.batch_size", 32);
  train.base_lr = r.get<double>("train.lr", 0.05);
  train.momentum = r.get<double>("train.momentum", 0.9);
  train.weight_decay = r.get<double>("train.weight_decay", 5e-4);
  train.decay_biases = r.get<bool>("train.decay_biases", true);
  const std::string schedule =
      r.get_enum("train.schedule", "cosine", {"cosine", "step"});
  if (schedule == "cosine") {
    train.schedule = train::CosineSchedule{};
  } else {
    train::StepSchedule step;
    step.milestones =
        r.get<std::vector<std::size_t>>("train.milestones", {30, 60, 80});
    step.factor = r.get<double>("train.factor", 0.1);
    train.schedule = step;
  }
  train.label_smoothing = r.get<double>("train.label_smoothing", 0.0);
  train.seed = r.get<std::uint64_t>("train.seed", 1);
  train.precision =
      r.get_enum("train.precision", "f64", {"f32", "f64"}) == "f64"
          ? train::Precision::f64
          : train::Precision::f32;
  train.heldout_pairs = r.get<std::size_t>("report.heldout_pairs", 256);

  // augmentation (canonical stage order: pad_crop, hflip, policy, cutout,
  // normalize; the mix stage runs at batch level)
  spec.pad_crop = r.get<std::size_t>("augment.pad_crop", 0);
  spec.hflip_probability = r.get<double>("augment.hflip", 0.0);
  spec.cutout_size = r.get<int>("augment.cutout", 0);
  if (spec.cutout_size < 0) {
    throw ConfigError("config key 'augment.cutout': size must be >= 0");
  }
  const json fill = r.has("augment.cutout_fill")
                        ? config.at("augment.cutout_fill")
                        : json("mean");
  if (fill.is_string() && fill.get<std::string>() == "mean") {
    spec.cutout_fill_mean = true;
  } else if (fill.is_number()) {
    spec.cutout_fill_mean = false;
  } else {
    throw ConfigError(
        "config key 'augment.cutout_fill': expected \"mean\" or a number");
  }
  spec.policy_path = r.get<std::string>("augment.policy", "");
  spec.policy_probability = r.get<double>("augment.policy_prob", 1.0);
  const std::string normalize =
      r.get_enum("augment.normalize", "dataset", {"dataset", "none"});
  spec.normalize_from_dataset = normalize == "dataset";

  auto& recipe = train.recipe;
  const std::string mix =
      r.get_enum("augment.mix", "none", {"none", "mixup", "cutmix"});
  recipe.mix = mix == "none"
                   ? aug::BatchMix::none
                   : (mix == "mixup" ? aug::BatchMix::mixup : aug::BatchMix::cutmix);
  recipe.mix_alpha = r.get<double>("augment.mix_alpha", 1.0);
  recipe.mix_probability = r.get<double>("augment.mix_prob",
                                         recipe.mix == aug::BatchMix::cutmix
                                             ? 0.5
                                             : 1.0);
  train.mix_shared_across_views =
      r.get<bool>("augment.mix_shared_across_views", true);

  // agreement
  train.agreement.enabled = r.get<bool>("agmax.enabled", false);
  train.agreement.kind.kind =
      agree::kind_from_name(r.get_enum("agmax.kind", "mi",
                                       {"mi", "mse", "kl", "ce"}));
  train.agreement.kind.weight = r.get<double>("agmax.weight", 1.0);
  if (r.has("agmax.raw_lambda") && !config.at("agmax.raw_lambda").is_null()) {
    train.agreement.raw_lambda = r.get<double>("agmax.raw_lambda", 0.0);
  }
  if (train.agreement.enabled) train.agreement.kind.validate();

  spec.timing = r.get_enum("report.timing", "none", {"none", "wall"});
  return spec;
}

namespace {

fs::path resolve_data_path(const std::string& path, const std::string& data_dir) {
  fs::path p(path);
  if (p.is_absolute() || fs::exists(p) || data_dir.empty()) return p;
  return fs::path(data_dir) / p;
}

}  // namespace

PreparedRun prepare_run(const RunSpec& spec, const std::string& data_dir) {
  PreparedRun run;
  run.config = spec.train_config;

  if (spec.data_kind == "synth") {
    std::tie(run.train_set, run.test_set) = data::generate_synth(spec.synth);
  } else {
    if (spec.cifar_train_path.empty() || spec.cifar_test_path.empty()) {
      throw ConfigError(
          "data.kind cifar10 requires data.cifar.train and data.cifar.test");
    }
    run.train_set = data::load_cifar10(
        resolve_data_path(spec.cifar_train_path, data_dir).string(), "train");
    run.test_set = data::load_cifar10(
        resolve_data_path(spec.cifar_test_path, data_dir).string(), "test");
  }
  run.stats = data::channel_stats(run.train_set);

  // finish the recipe in canonical order
  auto& recipe = run.config.recipe;
  std::vector<aug::Stage> stages;
  if (spec.pad_crop > 0) stages.push_back(aug::PadCropStage{spec.pad_crop});
  if (spec.hflip_probability > 0.0) {
    stages.push_back(aug::HFlipStage{spec.hflip_probability});
  }
  if (!spec.policy_path.empty()) {
    const std::string path =
        resolve_data_path(spec.policy_path, data_dir).string();
    stages.push_back(
        aug::PolicyStage{aug::load_policy_file(path), spec.policy_probability});
  }
  if (spec.cutout_size > 0) {
    aug::CutoutStage cut;
    cut.size = spec.cutout_size;
    if (spec.cutout_fill_mean) {
      cut.fill = run.stats.mean;
    } else {
      cut.fill = {spec.echo.at("augment.cutout_fill").get<double>()};
    }
    stages.push_back(std::move(cut));
  }
  if (spec.normalize_from_dataset) {
    stages.push_back(aug::NormalizeStage{run.stats.mean, run.stats.stddev});
  }
  recipe.stages = std::move(stages);

  // encoder input shape comes from the data
  const aug::Image& sample = run.train_set.images.front();
  run.config.encoder.in_channels = sample.channels;
  run.config.encoder.in_height = sample.height;
  run.config.encoder.in_width = sample.width;
  run.config.encoder.num_classes = run.train_set.num_classes;

  run.config.validate();
  return run;
}

}  // namespace agmax::cli
