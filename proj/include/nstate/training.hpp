#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nstate/data.hpp"
#include "nstate/models.hpp"

namespace nstate {

inline constexpr double kProbClip = 1e-7;

struct BceResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d prediction
};

// Mean binary cross-entropy with predictions clipped to [1e-7, 1-1e-7].
BceResult bce_loss(std::span<const double> predictions, std::span<const int> labels);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-7;
};

template <typename T>
struct AdamState {
  AdamConfig cfg;
  std::size_t step = 0;
  std::vector<std::vector<T>> m, v;
};

// One Adam update of every trainable parameter from its accumulated grad:
// m <- b1 m + (1-b1) g, v <- b2 v + (1-b2) g^2, theta -= lr mhat/(sqrt(vhat)+eps).
// Throws NumericError on a non-finite gradient.
template <typename T>
void adam_step(const std::vector<Param<T>*>& params, AdamState<T>& state);

// adam_step followed by layer constraints (depthwise max-norm).
template <typename T>
void optimizer_step(Sequential<T>& model, AdamState<T>& state);

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0, train_acc = 0.0, val_loss = 0.0, val_acc = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> records;
  std::size_t epochs = 0;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;

  // One JSON object per line: epoch, train_loss, train_acc, val_loss, val_acc.
  std::string to_ndjson() const;
  static TrainHistory from_ndjson(const std::string& text);
};

struct TrainOptions {
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  std::function<void(const EpochRecord&)> on_epoch;
};

// Mini-batch Adam on BCE. Training data is reshuffled every epoch from the
// seed; validation runs in infer mode after every epoch. The model keeps its
// final weights.
TrainHistory train(Sequential<float>& model, const EpochSet& train_set, const EpochSet& val_set,
                   const TrainOptions& opts);

struct Predictions {
  std::vector<double> probabilities;
  std::vector<int> labels;
};

// Infer-mode probabilities; label = 1 iff probability >= threshold.
Predictions predict(Sequential<float>& model, const EpochSet& set, double threshold = 0.5);

}  // namespace nstate
