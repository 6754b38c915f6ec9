#pragma once

#include <chrono>
#include <functional>
#include <optional>
#include <span>

#include "agmax/agreement.hpp"
#include "agmax/augment.hpp"
#include "agmax/dataset.hpp"
#include "agmax/encoder.hpp"
#include "agmax/losses.hpp"
#include "agmax/sgd.hpp"

namespace agmax::train {

enum class Precision { f32, f64 };

/// Two-view agreement settings. When disabled the loop is a standard
/// single-view supervised loop.
struct AgreementConfig {
  bool enabled = false;
  agree::AgreementKind kind;
  // Literal Eq.-1 multiplier; overrides `kind.weight` when set. The default
  // path uses weight >= 0 on the agreement loss (-I for MI), which maximizes
  // agreement; raw_lambda = -1 reproduces the paper's stated constant
  // verbatim (which minimizes I).
  std::optional<double> raw_lambda;

  double effective_multiplier() const {
    return raw_lambda ? *raw_lambda : kind.weight;
  }
};

/// Full declarative description of one experiment.
struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double base_lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool decay_biases = true;
  Schedule schedule = CosineSchedule{};

  aug::AugmentRecipe recipe;
  // Same mix (lambda, permutation, box) for both views, keeping the views
  // label-consistent; off = independent per-view draws.
  bool mix_shared_across_views = true;

  AgreementConfig agreement;
  double label_smoothing = 0.0;

  std::uint64_t seed = 1;
  Precision precision = Precision::f64;

  model::EncoderConfig encoder;

  std::size_t heldout_pairs = 256;  // test items for the per-epoch MI metric

  void validate() const {
    if (epochs == 0) throw ConfigError("train: epochs must be >= 1");
    if (batch_size == 0) throw ConfigError("train: batch size must be >= 1");
    if (base_lr <= 0.0) throw ConfigError("train: learning rate must be > 0");
    if (momentum < 0.0 || momentum >= 1.0) {
      throw ConfigError("train: momentum must lie in [0,1)");
    }
    if (weight_decay < 0.0) {
      throw ConfigError("train: weight decay must be >= 0");
    }
    if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
      throw ConfigError("train: label smoothing must lie in [0,1)");
    }
    train::validate(schedule);
    aug::validate(recipe);
    if (agreement.enabled) agreement.kind.validate();
    encoder.validate();
  }
};

/// Per-epoch reporting surface. `seconds` is measured wall time; whether it
/// reaches the metrics CSV is a reporting decision (see manifest).
struct MetricsRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  double loss = 0.0;
  double ce = 0.0;
  double agree = 0.0;
  double mi = 0.0;
  double top1 = 0.0;
  double top5 = 0.0;
  double seconds = 0.0;
};

struct LossTerms {
  double total = 0.0;
  double ce = 0.0;
  double agree = 0.0;
};

/// (N,C,H,W) tensor from images of equal extent, cast to the scalar type.
template <typename T>
diff::Tensor<T> batch_to_tensor(std::span<const aug::Image> images) {
  if (images.empty()) throw Error("batch_to_tensor: empty batch");
  const aug::Image& first = images.front();
  diff::Tensor<T> out(
      {images.size(), first.channels, first.height, first.width});
  const std::size_t stride = first.pixels.size();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (!images[i].same_extent(first)) {
      throw Error("batch_to_tensor: images differ in extent");
    }
    for (std::size_t k = 0; k < stride; ++k) {
      out[i * stride + k] = static_cast<T>(images[i].pixels[k]);
    }
  }
  return out;
}

/// Rank of the true class under the documented tie-break (lower index wins);
/// the item counts as a top-k hit when fewer than k classes outrank it.
template <typename T>
bool in_top_k(const diff::Tensor<T>& logits, std::size_t row, int label,
              std::size_t k) {
  const std::size_t c = logits.dim(1);
  const auto truth = logits.at(row, static_cast<std::size_t>(label));
  std::size_t outranked = 0;
  for (std::size_t j = 0; j < c; ++j) {
    if (static_cast<int>(j) == label) continue;
    if (logits.at(row, j) > truth ||
        (logits.at(row, j) == truth && static_cast<int>(j) < label)) {
      ++outranked;
    }
  }
  return outranked < k;
}

/**
 * Single-view accuracy over a dataset: normalization only (taken from the
 * recipe when present), batched forward, documented tie-break. Returns
 * (top-1, top-k).
 */
template <typename T>
std::pair<double, double> evaluate(const model::Encoder<T>& encoder,
                                   const data::Dataset& dataset,
                                   const aug::NormalizeStage* normalize,
                                   std::size_t top_k, std::size_t batch_size) {
  if (dataset.size() == 0) throw Error("evaluate: empty dataset");
  if (top_k == 0 || top_k > dataset.num_classes) {
    throw ConfigError("evaluate: top-" + std::to_string(top_k) +
                      " invalid for " + std::to_string(dataset.num_classes) +
                      " classes");
  }
  std::size_t hits1 = 0, hitsk = 0;
  std::vector<aug::Image> chunk;
  for (std::size_t start = 0; start < dataset.size(); start += batch_size) {
    const std::size_t end = std::min(dataset.size(), start + batch_size);
    chunk.clear();
    for (std::size_t i = start; i < end; ++i) {
      chunk.push_back(normalize ? aug::normalize(dataset.images[i],
                                                 normalize->mean,
                                                 normalize->stddev)
                                : dataset.images[i]);
    }
    auto logits =
        encoder.forward(diff::constant(batch_to_tensor<T>(chunk)))->value;
    const auto top1 = model::predict(logits);
    for (std::size_t i = start; i < end; ++i) {
      const int label = dataset.labels[i];
      if (top1[i - start] == label) ++hits1;
      if (in_top_k(logits, i - start, label, top_k)) ++hitsk;
    }
  }
  const double n = static_cast<double>(dataset.size());
  return {static_cast<double>(hits1) / n, static_cast<double>(hitsk) / n};
}

/**
 * Agreement metric on held-out data: builds positive pairs from up to
 * `max_items` test images with the recipe's per-image stages, forwards both
 * views, and returns the mutual information of the batch joint matrix.
 */
template <typename T>
double heldout_mutual_information(const model::Encoder<T>& encoder,
                                  const data::Dataset& dataset,
                                  const aug::AugmentRecipe& recipe,
                                  std::size_t max_items, RngStream rng) {
  const std::size_t n = std::min(max_items, dataset.size());
  if (n == 0) throw Error("heldout_mutual_information: empty dataset");
  const auto order = rng.split(0).permutation(dataset.size());
  std::vector<aug::Image> view1, view2;
  view1.reserve(n);
  view2.reserve(n);
  RngStream pair_rng = rng.split(1);
  for (std::size_t i = 0; i < n; ++i) {
    auto [a, b] =
        aug::positive_pair(dataset.images[order[i]], recipe, pair_rng.split(i));
    view1.push_back(std::move(a));
    view2.push_back(std::move(b));
  }
  auto z1 = encoder.forward(diff::constant(batch_to_tensor<T>(view1)));
  auto z2 = encoder.forward(diff::constant(batch_to_tensor<T>(view2)));
  auto p1 = diff::softmax(z1)->value;
  auto p2 = diff::softmax(z2)->value;
  diff::Tensor<double> d1(p1.shape()), d2(p2.shape());
  for (std::size_t i = 0; i < p1.numel(); ++i) {
    d1[i] = static_cast<double>(p1[i]);
    d2[i] = static_cast<double>(p2[i]);
  }
  return agree::mutual_information(agree::joint_matrix(d1, d2));
}

/**
 * Two-view training loop. Per step: positive pairs through the per-image
 * stages, one shared (or per-view) batch mix, both views through the single
 * shared ParameterStore, CE averaged over both views, agreement over
 * (z1, z2), backward, SGD. With agreement disabled this is a standard
 * single-view supervised loop over the same recipe.
 */
template <typename T>
class Trainer {
public:
  Trainer(TrainConfig config, const data::Dataset& train_set,
          const data::Dataset& test_set)
      : config_(std::move(config)),
        train_set_(train_set),
        test_set_(test_set),
        root_rng_(config_.seed),
        init_rng_(root_rng_.split(0)),
        encoder_(config_.encoder, init_rng_),
        optimizer_(config_.momentum, config_.weight_decay,
                   config_.decay_biases) {
    config_.validate();
    train_set_.validate();
    test_set_.validate();
    if (train_set_.size() < config_.batch_size) {
      throw ConfigError("train: dataset smaller than one batch");
    }
    for (const aug::Stage& stage : config_.recipe.stages) {
      if (const auto* nm = std::get_if<aug::NormalizeStage>(&stage)) {
        normalize_ = *nm;
      }
    }
  }

  model::Encoder<T>& encoder() { return encoder_; }
  const TrainConfig& config() const { return config_; }
  const aug::NormalizeStage* normalize_stage() const {
    return normalize_ ? &*normalize_ : nullptr;
  }

  /// One optimization step on a raw (un-augmented) batch.
  LossTerms train_step(const aug::LabeledBatch& batch, RngStream& rng,
                       double lr) {
    const bool two_view = config_.agreement.enabled;
    const std::size_t n = batch.size();

    std::vector<aug::Image> view1(n), view2;
    if (two_view) view2.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      RngStream item_rng = rng.split(2 + 2 * i);
      if (two_view) {
        auto pair = aug::positive_pair(batch.images[i], config_.recipe, item_rng);
        view1[i] = std::move(pair.first);
        view2[i] = std::move(pair.second);
      } else {
        view1[i] = aug::standard_augment(batch.images[i], config_.recipe, item_rng);
      }
    }

    std::vector<aug::MixedLabels> mixed1, mixed2;
    const bool mixing = config_.recipe.mix != aug::BatchMix::none;
    if (mixing) {
      aug::LabeledBatch b1{std::move(view1), batch.labels, batch.num_classes};
      RngStream mix_rng = rng.split(0);
      const aug::MixDraw draw = make_mix_draw(b1, mix_rng);
      std::tie(b1, mixed1) = apply_mix(b1, draw);
      view1 = std::move(b1.images);
      if (two_view) {
        aug::LabeledBatch b2{std::move(view2), batch.labels, batch.num_classes};
        if (config_.mix_shared_across_views) {
          std::tie(b2, mixed2) = apply_mix(b2, draw);
        } else {
          RngStream mix2_rng = rng.split(1);
          std::tie(b2, mixed2) = apply_mix(b2, make_mix_draw(b2, mix2_rng));
        }
        view2 = std::move(b2.images);
      }
    }

    auto z1 = encoder_.forward(diff::constant(batch_to_tensor<T>(view1)));
    diff::NodePtr<T> ce_node;
    diff::NodePtr<T> z2;
    if (two_view) {
      z2 = encoder_.forward(diff::constant(batch_to_tensor<T>(view2)));
      // CE averaged over both views == CE of the concatenated batch.
      auto z = diff::concat<T>({z1, z2}, 0);
      if (mixing) {
        std::vector<aug::MixedLabels> both = mixed1;
        both.insert(both.end(), mixed2.begin(), mixed2.end());
        ce_node = mixed_cross_entropy(z, both, config_.label_smoothing);
      } else {
        std::vector<int> both = batch.labels;
        both.insert(both.end(), batch.labels.begin(), batch.labels.end());
        ce_node = cross_entropy(z, both, config_.label_smoothing);
      }
    } else {
      ce_node = mixing
                    ? mixed_cross_entropy(z1, mixed1, config_.label_smoothing)
                    : cross_entropy(z1, batch.labels, config_.label_smoothing);
    }

    LossTerms terms;
    diff::NodePtr<T> total = ce_node;
    if (two_view) {
      auto agree_node = agree::agreement_loss(z1, z2, config_.agreement.kind.kind);
      terms.agree = static_cast<double>(agree_node->value[0]);
      total = agree::total_loss(
          ce_node, agree_node,
          static_cast<T>(config_.agreement.effective_multiplier()));
    }
    terms.ce = static_cast<double>(ce_node->value[0]);
    terms.total = static_cast<double>(total->value[0]);
    if (!std::isfinite(terms.total)) {
      throw NumericError("train_step: non-finite loss");
    }

    diff::backward(total);
    optimizer_.step(encoder_.parameters(), lr);
    return terms;
  }

  /// Full run; invokes the callback once per epoch with the metrics record.
  void run(const std::function<void(const MetricsRecord&)>& on_epoch) {
    const std::size_t batches = train_set_.size() / config_.batch_size;
    RngStream epochs_rng = root_rng_.split(1);
    RngStream heldout_rng = root_rng_.split(2);
    for (std::size_t epoch = 0; epoch < config_.epochs; ++epoch) {
      const auto start = std::chrono::steady_clock::now();
      const double lr =
          lr_at(config_.schedule, config_.base_lr, epoch, config_.epochs);
      RngStream epoch_rng = epochs_rng.split(epoch);
      const auto order = epoch_rng.split(0).permutation(train_set_.size());

      double loss_sum = 0.0, ce_sum = 0.0, agree_sum = 0.0;
      for (std::size_t b = 0; b < batches; ++b) {
        aug::LabeledBatch batch;
        batch.num_classes = train_set_.num_classes;
        for (std::size_t i = 0; i < config_.batch_size; ++i) {
          const std::size_t idx = order[b * config_.batch_size + i];
          batch.images.push_back(train_set_.images[idx]);
          batch.labels.push_back(train_set_.labels[idx]);
        }
        RngStream batch_rng = epoch_rng.split(b + 1);
        LossTerms terms;
        try {
          terms = train_step(batch, batch_rng, lr);
        } catch (const NumericError& e) {
          throw NumericError("epoch " + std::to_string(epoch) + " step " +
                             std::to_string(b) + ": " + e.what());
        }
        loss_sum += terms.total;
        ce_sum += terms.ce;
        agree_sum += terms.agree;
      }

      MetricsRecord record;
      record.epoch = epoch;
      record.lr = lr;
      record.loss = loss_sum / static_cast<double>(batches);
      record.ce = ce_sum / static_cast<double>(batches);
      record.agree = agree_sum / static_cast<double>(batches);
      if (test_set_.size() > 0) {
        const std::size_t top_k = std::min<std::size_t>(5, test_set_.num_classes);
        auto [top1, topk] = evaluate(encoder_, test_set_, normalize_stage(),
                                     top_k, config_.batch_size);
        record.top1 = top1;
        record.top5 = topk;
        record.mi = heldout_mutual_information(encoder_, test_set_,
                                               config_.recipe,
                                               config_.heldout_pairs,
                                               heldout_rng.split(epoch));
      }
      record.seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
              .count();
      on_epoch(record);
    }
  }

private:
  aug::MixDraw make_mix_draw(const aug::LabeledBatch& batch, RngStream& rng) {
    const aug::Image& first = batch.images.front();
    if (config_.recipe.mix == aug::BatchMix::mixup) {
      return aug::draw_mixup(batch.size(), config_.recipe.mix_alpha, rng);
    }
    return aug::draw_cutmix(batch.size(), first.height, first.width,
                            config_.recipe.mix_alpha,
                            config_.recipe.mix_probability, rng);
  }

  std::pair<aug::LabeledBatch, std::vector<aug::MixedLabels>> apply_mix(
      const aug::LabeledBatch& batch, const aug::MixDraw& draw) {
    if (config_.recipe.mix == aug::BatchMix::mixup) {
      return aug::apply_mixup(batch, draw);
    }
    return aug::apply_cutmix(batch, draw);
  }

  TrainConfig config_;
  data::Dataset train_set_;
  data::Dataset test_set_;
  RngStream root_rng_;
  RngStream init_rng_;
  model::Encoder<T> encoder_;
  SgdOptimizer<T> optimizer_;
  std::optional<aug::NormalizeStage> normalize_;
};

}  // namespace agmax::train
