#pragma once

// Finite-difference verification of a layer's input and parameter gradients.
// The scalar probe is f(x) = sum(r * layer(x)) with a fixed random r, so the
// analytic input gradient is layer.backward(r).

#include <functional>
#include <string>
#include <vector>

#include "nstate/gradcheck.hpp"
#include "nstate/layers.hpp"
#include "nstate/rng.hpp"

namespace nstate::testing {

struct GradCheckReport {
  double input_error = 0.0;
  double param_error = 0.0;  // max over all parameters
  std::string worst_param;

  double max_error() const { return std::max(input_error, param_error); }
};

inline TensorD random_tensor(const Shape& shape, Rng& rng, double scale = 1.0) {
  TensorD t(shape);
  for (auto& v : t.storage()) v = scale * rng.uniform(-1.0, 1.0);
  return t;
}

// `batch_shape` includes the leading batch axis. Stochastic layers are
// reseeded before every evaluation so the mask is fixed.
inline GradCheckReport check_layer_gradients(Layer<double>& layer, const Shape& batch_shape,
                                             std::uint64_t seed, Mode mode = Mode::kTrain) {
  Rng rng(seed, 99);
  layer.init_params(rng);
  // perturb every parameter so zero-initialized biases and unit gammas are
  // exercised away from their special values
  for (auto* p : layer.parameters())
    for (auto& v : p->value.storage()) v += 0.3 * rng.uniform(-1.0, 1.0);
  const TensorD x = random_tensor(batch_shape, rng);

  auto run = [&](const TensorD& in) {
    layer.reseed(seed, 7);
    return layer.forward(in, mode);
  };
  const TensorD y0 = run(x);
  const TensorD r = random_tensor(y0.shape(), rng);
  auto probe = [&](const TensorD& in) {
    const TensorD y = run(in);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += r[i] * y[i];
    return s;
  };

  layer.zero_grad();
  run(x);
  const TensorD gx = layer.backward(r);
  GradCheckReport rep;
  rep.input_error = max_rel_error(gx, finite_diff_grad(probe, x));

  for (auto* p : layer.parameters()) {
    if (!p->trainable) continue;
    const TensorD analytic = p->grad;
    const TensorD saved = p->value;
    auto f = [&](const TensorD& v) {
      p->value = v;
      const double out = probe(x);
      p->value = saved;
      return out;
    };
    const double e = max_rel_error(analytic, finite_diff_grad(f, saved));
    if (e >= rep.param_error) {
      rep.param_error = e;
      rep.worst_param = p->name;
    }
  }
  return rep;
}

struct LayerCase {
  std::string name;
  std::function<LayerPtr<double>()> make;
  Shape batch_shape;
  Mode mode = Mode::kTrain;
};

// One small instance of every layer kind that carries a gradient.
inline std::vector<LayerCase> gradient_cases() {
  std::vector<LayerCase> cases = {
      {"conv1d", [] { return std::make_unique<Conv1D<double>>(3, 4, 3, 2); }, {2, 3, 9}},
      {"conv1d_stride1", [] { return std::make_unique<Conv1D<double>>(2, 3, 5, 1); }, {2, 2, 7}},
      {"conv2d_temporal",
       [] { return std::make_unique<Conv2DTemporal<double>>(2, 3, 4, true); },
       {2, 2, 3, 7}},
      {"depthwise_conv2d",
       [] { return std::make_unique<DepthwiseConv2D<double>>(2, 4, 2, 10.0); },
       {2, 2, 4, 5}},
      {"separable_conv2d",
       [] { return std::make_unique<SeparableConv2D<double>>(3, 4, 3); },
       {2, 3, 1, 8}},
      {"avg_pool2d", [] { return std::make_unique<AvgPool2D<double>>(2); }, {2, 3, 1, 7}},
      {"batchnorm_train", [] { return std::make_unique<BatchNorm<double>>(3); }, {4, 3, 5}},
      {"batchnorm_infer", [] { return std::make_unique<BatchNorm<double>>(3); }, {4, 3, 5},
       Mode::kInfer},
      {"dense", [] { return std::make_unique<Dense<double>>(5, 3); }, {3, 5}},
      {"dropout", [] { return std::make_unique<Dropout<double>>(0.4); }, {3, 6}},
      {"spatial_dropout1d", [] { return std::make_unique<SpatialDropout1D<double>>(0.3); },
       {3, 5, 4}},
      {"lstm_forward",
       [] { return std::make_unique<LSTM<double>>(3, 4, Direction::kForward); },
       {2, 3, 5}},
      {"lstm_backward",
       [] { return std::make_unique<LSTM<double>>(3, 4, Direction::kBackward); },
       {2, 3, 5}},
      {"bilstm", [] { return std::make_unique<Bidirectional<double>>(3, 4); }, {2, 3, 5}},
      {"flatten", [] { return std::make_unique<Flatten<double>>(); }, {2, 3, 4}},
      {"time_distributed_flatten",
       [] { return std::make_unique<TimeDistributedFlatten<double>>(); },
       {2, 2, 3, 4}},
  };
  const std::vector<std::pair<std::string, Activation>> acts = {
      {"leaky_relu", Activation::leaky_relu()}, {"elu", Activation::elu()},
      {"relu", Activation::relu()},             {"sigmoid", Activation::sigmoid()},
      {"tanh", Activation::tanh()}};
  for (const auto& [n, a] : acts)
    cases.push_back({"activation_" + n,
                     [a = a] { return std::make_unique<ActivationLayer<double>>(a); },
                     {3, 7}});
  return cases;
}

}  // namespace nstate::testing
