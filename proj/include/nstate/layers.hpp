#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"
#include "nstate/rng.hpp"
#include "nstate/tensor.hpp"

namespace nstate {

enum class Mode { kTrain, kInfer };

enum class LayerKind {
  kConv1D,
  kConv2D,
  kDepthwiseConv2D,
  kSeparableConv2D,
  kAvgPool2D,
  kBatchNorm,
  kDense,
  kDropout,
  kSpatialDropout1D,
  kLSTM,
  kBidirectional,
  kFlatten,
  kTimeDistributedFlatten,
  kActivation,
};

std::string to_string(LayerKind kind);

enum class ActivationKind { kLeakyReLU, kELU, kReLU, kSigmoid, kTanh };

struct Activation {
  ActivationKind kind = ActivationKind::kReLU;
  // LeakyReLU slope or ELU alpha; unused otherwise.
  double coef = 0.0;

  static Activation leaky_relu(double slope = 0.3);
  static Activation elu(double alpha = 1.0);
  static Activation relu() { return {ActivationKind::kReLU, 0.0}; }
  static Activation sigmoid() { return {ActivationKind::kSigmoid, 0.0}; }
  static Activation tanh() { return {ActivationKind::kTanh, 0.0}; }
};

std::string to_string(const Activation& a);
Activation activation_from_string(const std::string& s);

double activate(const Activation& a, double x);
// Derivative given the pre-activation x and the output y = activate(a, x).
double activate_grad(const Activation& a, double x, double y);

// Output length and left pad of a "same" convolution: out = ceil(T/stride),
// total pad = max((out-1)*stride + K - T, 0), left = floor(total/2).
struct SamePadding {
  std::size_t out = 0;
  std::size_t left = 0;
  std::size_t total = 0;
};
SamePadding same_padding(std::size_t length, std::size_t kernel,
                         std::size_t stride);

template <typename T>
struct Param {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
  bool trainable = true;
};

// A layer consumes and produces batched tensors [N, per-sample shape...].
// forward() caches whatever backward() needs; backward() accumulates
// parameter gradients and returns the input gradient.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerKind kind() const = 0;
  virtual Shape output_shape(const Shape& input) const = 0;
  virtual Tensor<T> forward(const Tensor<T>& x, Mode mode) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual nlohmann::json hyper() const = 0;

  virtual void init_params(Rng& /*rng*/) {}
  virtual void apply_constraints() {}
  // Stochastic layers draw masks from their own stream.
  virtual void reseed(std::uint64_t /*seed*/, std::uint64_t /*stream*/) {}

  virtual std::vector<Param<T>*> parameters();

  std::size_t count_params();
  void zero_grad();

  const std::string& name() const { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }

 protected:
  Param<T>& add_param(std::string name, Shape shape, bool trainable = true);

  std::vector<Param<T>> params_;
  std::string name_;
};

template <typename T>
using LayerPtr = std::unique_ptr<Layer<T>>;

// Conv1D over [C_in, T] with same padding.
template <typename T>
class Conv1D final : public Layer<T> {
 public:
  Conv1D(std::size_t in_channels, std::size_t filters, std::size_t kernel,
         std::size_t stride, bool use_bias = true);
  LayerKind kind() const override { return LayerKind::kConv1D; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  nlohmann::json hyper() const override;
  void init_params(Rng& rng) override;

 private:
  std::size_t in_channels_, filters_, kernel_, stride_;
  bool use_bias_;
  Shape in_shape_;
  std::vector<T> cols_;  // [N, C_in*K, out] im2col cache
};

// Conv2D with a (1, K) kernel over [C_f, H, W], same padding, stride 1.
template <typename T>
class Conv2DTemporal final : public Layer<T> {
 public:
  Conv2DTemporal(std::size_t in_channels, std::size_t filters,
                 std::size_t kernel, bool use_bias = false);
  LayerKind kind() const override { return LayerKind::kConv2D; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  nlohmann::json hyper() const override;
  void init_params(Rng& rng) override;

 private:
  std::size_t in_channels_, filters_, kernel_;
  bool use_bias_;
  Tensor<T> input_;
};

// Depthwise Conv2D with a (C, 1) kernel: [F1, C, W] -> [F1*D, 1, W].
// Output channel f*D + d holds spatial filter d of input feature f.
template <typename T>
class DepthwiseConv2D final : public Layer<T> {
 public:
  DepthwiseConv2D(std::size_t in_features, std::size_t height,
                  std::size_t depth_multiplier, double max_norm = 1.0);
  LayerKind kind() const override { return LayerKind::kDepthwiseConv2D; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  nlohmann::json hyper() const override;
  void init_params(Rng& rng) override;
  // Rescale each spatial filter whose L2 norm exceeds max_norm.
  void apply_constraints() override;

 private:
  std::size_t in_features_, height_, depth_;
  double max_norm_;
  Tensor<T> input_;
};

// Per-channel (1, K) convolution followed by 1x1 mixing: [C_f, 1, W] -> [F2, 1, W].
template <typename T>
class SeparableConv2D final : public Layer<T> {
 public:
  SeparableConv2D(std::size_t in_features, std::size_t filters,
                  std::size_t kernel);
  LayerKind kind() const override { return LayerKind::kSeparableConv2D; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  nlohmann::json hyper() const override;
  void init_params(Rng& rng) override;

 private:
  std::size_t in_features_, filters_, kernel_;
  Tensor<T> input_;
  std::vector<T> mid_;
};

// Non-overlapping (1, P) mean pooling on [C_f, H, W]; remainder dropped.
template <typename T>
class AvgPool2D final : public Layer<T> {
 public:
  explicit AvgPool2D(std::size_t pool);
  LayerKind kind() const override { return LayerKind::kAvgPool2D; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  nlohmann::json hyper() const override;

 private:
  std::size_t pool_;
  Shape in_shape_;
};

// Normalizes per feature (axis 0 of the per-sample shape) over the batch and
// all remaining axes. gamma/beta are trained; moving mean/variance are
// tracked and counted as parameters.
template <typename T>
class BatchNorm final : public Layer<T> {
 public:
  explicit BatchNorm(std::size_t features, double momentum = 0.99,
                     double eps = 1e-3);
  LayerKind kind() const override { return LayerKind::kBatchNorm; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  nlohmann::json hyper() const override;
  void init_params(Rng& rng) override;

 private:
  std::size_t features_;
  double momentum_, eps_;
  Mode mode_ = Mode::kInfer;
  Shape in_shape_;
  std::vector<T> xhat_;
  std::vector<double> inv_std_;
};

template <typename T>
class Dense final : public Layer<T> {
 public:
  Dense(std::size_t in, std::size_t out, bool use_bias = true);
  LayerKind kind() const override { return LayerKind::kDense; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  nlohmann::json hyper() const override;
  void init_params(Rng& rng) override;

 private:
  std::size_t in_, out_;
  bool use_bias_;
  Tensor<T> input_;
};

// Inverted dropout: survivors scaled by 1/(1-rate) in train mode, identity
// in infer mode.
template <typename T>
class Dropout final : public Layer<T> {
 public:
  explicit Dropout(double rate);
  LayerKind kind() const override { return LayerKind::kDropout; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  nlohmann::json hyper() const override;
  void reseed(std::uint64_t seed, std::uint64_t stream) override {
    rng_ = Rng(seed, stream);
  }

 private:
  double rate_;
  Rng rng_;
  std::vector<T> mask_;
};

// Drops whole feature rows of a [C_f, T] sample.
template <typename T>
class SpatialDropout1D final : public Layer<T> {
 public:
  explicit SpatialDropout1D(double rate);
  LayerKind kind() const override { return LayerKind::kSpatialDropout1D; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  nlohmann::json hyper() const override;
  void reseed(std::uint64_t seed, std::uint64_t stream) override {
    rng_ = Rng(seed, stream);
  }

 private:
  double rate_;
  Rng rng_;
  Shape in_shape_;
  std::vector<T> mask_;  // [N, C_f]
};

enum class Direction { kForward, kBackward };

// Single-direction LSTM over a [F, T] sample (features x time), returning
// the final hidden state [H]. Gate order in the packed kernels: i, f, g, o.
template <typename T>
class LSTM final : public Layer<T> {
 public:
  LSTM(std::size_t input_size, std::size_t units,
       Direction direction = Direction::kForward);
  LayerKind kind() const override { return LayerKind::kLSTM; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  nlohmann::json hyper() const override;
  void init_params(Rng& rng) override;

  Param<T>& kernel() { return this->params_[0]; }
  Param<T>& recurrent_kernel() { return this->params_[1]; }
  Param<T>& bias() { return this->params_[2]; }

 private:
  std::size_t input_size_, units_;
  Direction direction_;
  std::size_t batch_ = 0, steps_ = 0;
  std::vector<T> xs_;     // [N, T, F] inputs in processing order
  std::vector<T> gates_;  // [N, T, 4H] post-activation gates
  std::vector<T> cells_;  // [N, T+1, H]
  std::vector<T> hidden_; // [N, T+1, H]
};

// Forward and backward LSTMs; output [h_fwd_final ; h_bwd_final].
template <typename T>
class Bidirectional final : public Layer<T> {
 public:
  Bidirectional(std::size_t input_size, std::size_t units);
  LayerKind kind() const override { return LayerKind::kBidirectional; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  nlohmann::json hyper() const override;
  void init_params(Rng& rng) override;
  std::vector<Param<T>*> parameters() override;

  LSTM<T>& forward_layer() { return fwd_; }
  LSTM<T>& backward_layer() { return bwd_; }

 private:
  std::size_t units_;
  LSTM<T> fwd_, bwd_;
};

template <typename T>
class Flatten final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::kFlatten; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  nlohmann::json hyper() const override { return nlohmann::json::object(); }

 private:
  Shape in_shape_;
};

// Keeps the trailing time axis and flattens everything before it, so a
// [F..., T] feature map becomes a T-step sequence of flat vectors.
template <typename T>
class TimeDistributedFlatten final : public Layer<T> {
 public:
  LayerKind kind() const override { return LayerKind::kTimeDistributedFlatten; }
  Shape output_shape(const Shape& input) const override;
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  nlohmann::json hyper() const override { return nlohmann::json::object(); }

 private:
  Shape in_shape_;
};

template <typename T>
class ActivationLayer final : public Layer<T> {
 public:
  explicit ActivationLayer(Activation a) : act_(a) {}
  LayerKind kind() const override { return LayerKind::kActivation; }
  Shape output_shape(const Shape& input) const override { return input; }
  Tensor<T> forward(const Tensor<T>& x, Mode mode) override;
  Tensor<T> backward(const Tensor<T>& grad_out) override;
  nlohmann::json hyper() const override;
  const Activation& activation() const { return act_; }

 private:
  Activation act_;
  Tensor<T> input_, output_;
};

// Applies an activation elementwise (no layer state).
template <typename T>
Tensor<T> activation_apply(const Activation& a, const Tensor<T>& x);

}  // namespace nstate
