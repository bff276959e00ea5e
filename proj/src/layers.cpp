#include "nstate/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace nstate {

using nlohmann::json;

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv1D: return "Conv1D";
    case LayerKind::kConv2D: return "Conv2D";
    case LayerKind::kDepthwiseConv2D: return "DepthwiseConv2D";
    case LayerKind::kSeparableConv2D: return "SeparableConv2D";
    case LayerKind::kAvgPool2D: return "AvgPool2D";
    case LayerKind::kBatchNorm: return "BatchNorm";
    case LayerKind::kDense: return "Dense";
    case LayerKind::kDropout: return "Dropout";
    case LayerKind::kSpatialDropout1D: return "SpatialDropout1D";
    case LayerKind::kLSTM: return "LSTM";
    case LayerKind::kBidirectional: return "Bidirectional";
    case LayerKind::kFlatten: return "Flatten";
    case LayerKind::kTimeDistributedFlatten: return "TimeDistributedFlatten";
    case LayerKind::kActivation: return "Activation";
  }
  return "?";
}

Activation Activation::leaky_relu(double slope) {
  require(slope > 0.0 && slope < 1.0, "LeakyReLU slope must be in (0,1)");
  return {ActivationKind::kLeakyReLU, slope};
}

Activation Activation::elu(double alpha) {
  require(alpha > 0.0, "ELU alpha must be positive");
  return {ActivationKind::kELU, alpha};
}

std::string to_string(const Activation& a) {
  switch (a.kind) {
    case ActivationKind::kLeakyReLU: return "leaky_relu";
    case ActivationKind::kELU: return "elu";
    case ActivationKind::kReLU: return "relu";
    case ActivationKind::kSigmoid: return "sigmoid";
    case ActivationKind::kTanh: return "tanh";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "leaky_relu") return Activation::leaky_relu();
  if (s == "elu") return Activation::elu();
  if (s == "relu") return Activation::relu();
  if (s == "sigmoid") return Activation::sigmoid();
  if (s == "tanh") return Activation::tanh();
  throw ContractError("unknown activation '" + s + "'");
}

namespace {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

template <typename T>
void glorot_uniform(Tensor<T>& w, Rng& rng, double fan_in, double fan_out) {
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : w.values()) v = static_cast<T>(rng.uniform(-limit, limit));
}

// y[i] += a * x[i]
template <typename T>
inline void axpy(T* __restrict y, T a, const T* __restrict x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

template <typename T>
inline T dot(const T* __restrict a, const T* __restrict b, std::size_t n) {
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

Shape sample_shape(const Shape& batched) {
  require(batched.size() >= 2, "batched tensor needs a leading batch axis");
  return Shape(batched.begin() + 1, batched.end());
}

Shape with_batch(std::size_t n, const Shape& s) {
  Shape out{n};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

}  // namespace

double activate(const Activation& a, double x) {
  switch (a.kind) {
    case ActivationKind::kLeakyReLU: return x > 0.0 ? x : a.coef * x;
    case ActivationKind::kELU: return x > 0.0 ? x : a.coef * std::expm1(x);
    case ActivationKind::kReLU: return x > 0.0 ? x : 0.0;
    case ActivationKind::kSigmoid: return sigmoid(x);
    case ActivationKind::kTanh: return std::tanh(x);
  }
  return x;
}

double activate_grad(const Activation& a, double x, double y) {
  switch (a.kind) {
    case ActivationKind::kLeakyReLU: return x > 0.0 ? 1.0 : a.coef;
    case ActivationKind::kELU: return x > 0.0 ? 1.0 : y + a.coef;
    case ActivationKind::kReLU: return x > 0.0 ? 1.0 : 0.0;
    case ActivationKind::kSigmoid: return y * (1.0 - y);
    case ActivationKind::kTanh: return 1.0 - y * y;
  }
  return 1.0;
}

SamePadding same_padding(std::size_t length, std::size_t kernel,
                         std::size_t stride) {
  require(kernel >= 1 && stride >= 1, "kernel and stride must be >= 1");
  require(length >= 1, "sequence length must be >= 1");
  SamePadding p;
  p.out = (length + stride - 1) / stride;
  const std::size_t needed = (p.out - 1) * stride + kernel;
  p.total = needed > length ? needed - length : 0;
  p.left = p.total / 2;
  return p;
}

// ---------------------------------------------------------------- Layer

template <typename T>
std::vector<Param<T>*> Layer<T>::parameters() {
  std::vector<Param<T>*> out;
  for (auto& p : params_) out.push_back(&p);
  return out;
}

template <typename T>
std::size_t Layer<T>::count_params() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += p->value.size();
  return n;
}

template <typename T>
void Layer<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.fill(T{0});
}

template <typename T>
Param<T>& Layer<T>::add_param(std::string name, Shape shape, bool trainable) {
  Param<T> p;
  p.name = std::move(name);
  p.value = Tensor<T>(shape);
  p.grad = Tensor<T>(shape);
  p.trainable = trainable;
  params_.push_back(std::move(p));
  return params_.back();
}

// ---------------------------------------------------------------- Conv1D

template <typename T>
Conv1D<T>::Conv1D(std::size_t in_channels, std::size_t filters,
                  std::size_t kernel, std::size_t stride, bool use_bias)
    : in_channels_(in_channels),
      filters_(filters),
      kernel_(kernel),
      stride_(stride),
      use_bias_(use_bias) {
  require(in_channels >= 1 && filters >= 1, "Conv1D: empty channel/filter count");
  require(kernel >= 1 && stride >= 1, "Conv1D: kernel and stride must be >= 1");
  this->add_param("kernel", {filters, in_channels, kernel});
  if (use_bias) this->add_param("bias", {filters});
}

template <typename T>
Shape Conv1D<T>::output_shape(const Shape& input) const {
  require(input.size() == 2 && input[0] == in_channels_,
          "Conv1D: expected [" + std::to_string(in_channels_) + " x T], got " +
              shape_str(input));
  return {filters_, same_padding(input[1], kernel_, stride_).out};
}

template <typename T>
Tensor<T> Conv1D<T>::forward(const Tensor<T>& x, Mode) {
  in_shape_ = x.shape();
  const Shape out_s = output_shape(sample_shape(in_shape_));
  const std::size_t n = in_shape_[0], len = in_shape_[2];
  const auto pad = same_padding(len, kernel_, stride_);
  const std::size_t out_len = pad.out, ck = in_channels_ * kernel_;
  cols_.assign(n * ck * out_len, T{0});
  Tensor<T> y(with_batch(n, out_s));
  const T* w = this->params_[0].value.data();
  for (std::size_t b = 0; b < n; ++b) {
    T* col = cols_.data() + b * ck * out_len;
    const T* xb = x.data() + b * in_channels_ * len;
    for (std::size_t c = 0; c < in_channels_; ++c)
      for (std::size_t k = 0; k < kernel_; ++k) {
        T* row = col + (c * kernel_ + k) * out_len;
        for (std::size_t t = 0; t < out_len; ++t) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride_ + k) -
                                     static_cast<std::ptrdiff_t>(pad.left);
          if (src >= 0 && src < static_cast<std::ptrdiff_t>(len))
            row[t] = xb[c * len + static_cast<std::size_t>(src)];
        }
      }
    T* yb = y.data() + b * filters_ * out_len;
    for (std::size_t f = 0; f < filters_; ++f) {
      T* yrow = yb + f * out_len;
      if (use_bias_) std::fill(yrow, yrow + out_len, this->params_[1].value[f]);
      for (std::size_t j = 0; j < ck; ++j)
        axpy(yrow, w[f * ck + j], col + j * out_len, out_len);
    }
  }
  return y;
}

template <typename T>
Tensor<T> Conv1D<T>::backward(const Tensor<T>& g) {
  const std::size_t n = in_shape_[0], len = in_shape_[2];
  const auto pad = same_padding(len, kernel_, stride_);
  const std::size_t out_len = pad.out, ck = in_channels_ * kernel_;
  require(g.shape() == with_batch(n, {filters_, out_len}), "Conv1D: bad grad shape");
  Tensor<T> dx(in_shape_);
  const T* w = this->params_[0].value.data();
  T* dw = this->params_[0].grad.data();
  std::vector<T> col_t(out_len * ck), dcol(ck * out_len);
  for (std::size_t b = 0; b < n; ++b) {
    const T* col = cols_.data() + b * ck * out_len;
    const T* gb = g.data() + b * filters_ * out_len;
    for (std::size_t j = 0; j < ck; ++j)
      for (std::size_t t = 0; t < out_len; ++t) col_t[t * ck + j] = col[j * out_len + t];
    for (std::size_t f = 0; f < filters_; ++f) {
      const T* grow = gb + f * out_len;
      T* dwf = dw + f * ck;
      for (std::size_t t = 0; t < out_len; ++t) axpy(dwf, grow[t], col_t.data() + t * ck, ck);
      if (use_bias_) {
        T s = 0;
        for (std::size_t t = 0; t < out_len; ++t) s += grow[t];
        this->params_[1].grad[f] += s;
      }
    }
    std::fill(dcol.begin(), dcol.end(), T{0});
    for (std::size_t f = 0; f < filters_; ++f)
      for (std::size_t j = 0; j < ck; ++j)
        axpy(dcol.data() + j * out_len, w[f * ck + j], gb + f * out_len, out_len);
    T* dxb = dx.data() + b * in_channels_ * len;
    for (std::size_t c = 0; c < in_channels_; ++c)
      for (std::size_t k = 0; k < kernel_; ++k) {
        const T* row = dcol.data() + (c * kernel_ + k) * out_len;
        for (std::size_t t = 0; t < out_len; ++t) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t * stride_ + k) -
                                     static_cast<std::ptrdiff_t>(pad.left);
          if (src >= 0 && src < static_cast<std::ptrdiff_t>(len))
            dxb[c * len + static_cast<std::size_t>(src)] += row[t];
        }
      }
  }
  return dx;
}

template <typename T>
json Conv1D<T>::hyper() const {
  return {{"in_channels", in_channels_}, {"filters", filters_}, {"kernel", kernel_},
          {"stride", stride_}, {"padding", "same"}, {"use_bias", use_bias_}};
}

template <typename T>
void Conv1D<T>::init_params(Rng& rng) {
  glorot_uniform(this->params_[0].value, rng, double(in_channels_ * kernel_),
                 double(filters_ * kernel_));
  if (use_bias_) this->params_[1].value.fill(T{0});
}

// ---------------------------------------------------------------- Conv2DTemporal

template <typename T>
Conv2DTemporal<T>::Conv2DTemporal(std::size_t in_channels, std::size_t filters,
                                  std::size_t kernel, bool use_bias)
    : in_channels_(in_channels), filters_(filters), kernel_(kernel), use_bias_(use_bias) {
  require(in_channels >= 1 && filters >= 1 && kernel >= 1, "Conv2D: bad hyperparameters");
  this->add_param("kernel", {filters, in_channels, 1, kernel});
  if (use_bias) this->add_param("bias", {filters});
}

template <typename T>
Shape Conv2DTemporal<T>::output_shape(const Shape& input) const {
  require(input.size() == 3 && input[0] == in_channels_,
          "Conv2D: expected [" + std::to_string(in_channels_) + " x H x W], got " +
              shape_str(input));
  return {filters_, input[1], input[2]};
}

template <typename T>
Tensor<T> Conv2DTemporal<T>::forward(const Tensor<T>& x, Mode) {
  const Shape out_s = output_shape(sample_shape(x.shape()));
  input_ = x;
  const std::size_t n = x.dim(0), h = x.dim(2), len = x.dim(3);
  const auto pad = same_padding(len, kernel_, 1);
  const std::size_t ck = in_channels_ * kernel_;
  std::vector<T> col(ck * len);
  Tensor<T> y(with_batch(n, out_s));
  const T* w = this->params_[0].value.data();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t r = 0; r < h; ++r) {
      std::fill(col.begin(), col.end(), T{0});
      for (std::size_t c = 0; c < in_channels_; ++c) {
        const T* xr = x.data() + ((b * in_channels_ + c) * h + r) * len;
        for (std::size_t k = 0; k < kernel_; ++k) {
          T* row = col.data() + (c * kernel_ + k) * len;
          // output t reads input t + k - left
          const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) -
                                       static_cast<std::ptrdiff_t>(pad.left);
          const std::size_t t0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
          const std::size_t t1 =
              shift > 0 ? (len > static_cast<std::size_t>(shift) ? len - shift : 0) : len;
          for (std::size_t t = t0; t < t1; ++t) row[t] = xr[t + shift];
        }
      }
      for (std::size_t f = 0; f < filters_; ++f) {
        T* yrow = y.data() + ((b * filters_ + f) * h + r) * len;
        if (use_bias_) std::fill(yrow, yrow + len, this->params_[1].value[f]);
        for (std::size_t j = 0; j < ck; ++j) axpy(yrow, w[f * ck + j], col.data() + j * len, len);
      }
    }
  return y;
}

template <typename T>
Tensor<T> Conv2DTemporal<T>::backward(const Tensor<T>& g) {
  const std::size_t n = input_.dim(0), h = input_.dim(2), len = input_.dim(3);
  require(g.shape() == with_batch(n, {filters_, h, len}), "Conv2D: bad grad shape");
  const auto pad = same_padding(len, kernel_, 1);
  Tensor<T> dx(input_.shape());
  const T* w = this->params_[0].value.data();
  T* dw = this->params_[0].grad.data();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t f = 0; f < filters_; ++f) {
        const T* grow = g.data() + ((b * filters_ + f) * h + r) * len;
        if (use_bias_) {
          T s = 0;
          for (std::size_t t = 0; t < len; ++t) s += grow[t];
          this->params_[1].grad[f] += s;
        }
        for (std::size_t c = 0; c < in_channels_; ++c) {
          const T* xr = input_.data() + ((b * in_channels_ + c) * h + r) * len;
          T* dxr = dx.data() + ((b * in_channels_ + c) * h + r) * len;
          for (std::size_t k = 0; k < kernel_; ++k) {
            const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(k) -
                                         static_cast<std::ptrdiff_t>(pad.left);
            const std::size_t t0 = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
            const std::size_t t1 =
                shift > 0 ? (len > static_cast<std::size_t>(shift) ? len - shift : 0) : len;
            if (t1 <= t0) continue;
            const std::size_t idx = (f * in_channels_ + c) * kernel_ + k;
            dw[idx] += dot(grow + t0, xr + t0 + shift, t1 - t0);
            axpy(dxr + t0 + shift, w[idx], grow + t0, t1 - t0);
          }
        }
      }
  return dx;
}

template <typename T>
json Conv2DTemporal<T>::hyper() const {
  return {{"in_channels", in_channels_}, {"filters", filters_},
          {"kernel", {1, kernel_}}, {"padding", "same"}, {"use_bias", use_bias_}};
}

template <typename T>
void Conv2DTemporal<T>::init_params(Rng& rng) {
  glorot_uniform(this->params_[0].value, rng, double(in_channels_ * kernel_),
                 double(filters_ * kernel_));
  if (use_bias_) this->params_[1].value.fill(T{0});
}

// ---------------------------------------------------------------- DepthwiseConv2D

template <typename T>
DepthwiseConv2D<T>::DepthwiseConv2D(std::size_t in_features, std::size_t height,
                                    std::size_t depth_multiplier, double max_norm)
    : in_features_(in_features), height_(height), depth_(depth_multiplier), max_norm_(max_norm) {
  require(in_features >= 1 && height >= 1 && depth_multiplier >= 1,
          "DepthwiseConv2D: bad hyperparameters");
  this->add_param("depthwise_kernel", {in_features, depth_multiplier, height, 1});
}

template <typename T>
Shape DepthwiseConv2D<T>::output_shape(const Shape& input) const {
  require(input.size() == 3 && input[0] == in_features_,
          "DepthwiseConv2D: expected " + std::to_string(in_features_) + " input features, got " +
              shape_str(input));
  if (input[1] != height_)
    throw ContractError("DepthwiseConv2D: channel axis " + std::to_string(input[1]) +
                        " does not match kernel height " + std::to_string(height_));
  return {in_features_ * depth_, 1, input[2]};
}

template <typename T>
Tensor<T> DepthwiseConv2D<T>::forward(const Tensor<T>& x, Mode) {
  const Shape out_s = output_shape(sample_shape(x.shape()));
  input_ = x;
  const std::size_t n = x.dim(0), len = x.dim(3);
  Tensor<T> y(with_batch(n, out_s));
  const T* k = this->params_[0].value.data();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t f = 0; f < in_features_; ++f)
      for (std::size_t d = 0; d < depth_; ++d) {
        T* yrow = y.data() + (b * in_features_ * depth_ + f * depth_ + d) * len;
        for (std::size_t c = 0; c < height_; ++c)
          axpy(yrow, k[(f * depth_ + d) * height_ + c],
               x.data() + ((b * in_features_ + f) * height_ + c) * len, len);
      }
  return y;
}

template <typename T>
Tensor<T> DepthwiseConv2D<T>::backward(const Tensor<T>& g) {
  const std::size_t n = input_.dim(0), len = input_.dim(3);
  require(g.shape() == with_batch(n, {in_features_ * depth_, 1, len}),
          "DepthwiseConv2D: bad grad shape");
  Tensor<T> dx(input_.shape());
  const T* k = this->params_[0].value.data();
  T* dk = this->params_[0].grad.data();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t f = 0; f < in_features_; ++f)
      for (std::size_t d = 0; d < depth_; ++d) {
        const T* grow = g.data() + (b * in_features_ * depth_ + f * depth_ + d) * len;
        for (std::size_t c = 0; c < height_; ++c) {
          const std::size_t off = ((b * in_features_ + f) * height_ + c) * len;
          const std::size_t ki = (f * depth_ + d) * height_ + c;
          dk[ki] += dot(grow, input_.data() + off, len);
          axpy(dx.data() + off, k[ki], grow, len);
        }
      }
  return dx;
}

template <typename T>
void DepthwiseConv2D<T>::apply_constraints() {
  T* k = this->params_[0].value.data();
  for (std::size_t fd = 0; fd < in_features_ * depth_; ++fd) {
    double sq = 0.0;
    for (std::size_t c = 0; c < height_; ++c) sq += double(k[fd * height_ + c]) * k[fd * height_ + c];
    const double norm = std::sqrt(sq);
    if (norm > max_norm_) {
      const double s = max_norm_ / norm;
      for (std::size_t c = 0; c < height_; ++c)
        k[fd * height_ + c] = static_cast<T>(k[fd * height_ + c] * s);
    }
  }
}

template <typename T>
json DepthwiseConv2D<T>::hyper() const {
  return {{"in_features", in_features_}, {"kernel", {height_, 1}},
          {"depth_multiplier", depth_}, {"max_norm", max_norm_}, {"use_bias", false}};
}

template <typename T>
void DepthwiseConv2D<T>::init_params(Rng& rng) {
  // fans follow the 4-D kernel convention (C, 1, F1, D)
  glorot_uniform(this->params_[0].value, rng, double(height_ * in_features_),
                 double(height_ * depth_));
}

// ---------------------------------------------------------------- SeparableConv2D

template <typename T>
SeparableConv2D<T>::SeparableConv2D(std::size_t in_features, std::size_t filters,
                                    std::size_t kernel)
    : in_features_(in_features), filters_(filters), kernel_(kernel) {
  require(in_features >= 1 && filters >= 1 && kernel >= 1, "SeparableConv2D: bad hyperparameters");
  this->add_param("depthwise_kernel", {in_features, kernel});
  this->add_param("pointwise_kernel", {filters, in_features});
}

template <typename T>
Shape SeparableConv2D<T>::output_shape(const Shape& input) const {
  require(input.size() == 3 && input[0] == in_features_ && input[1] == 1,
          "SeparableConv2D: expected [" + std::to_string(in_features_) + " x 1 x W], got " +
              shape_str(input));
  return {filters_, 1, input[2]};
}

template <typename T>
Tensor<T> SeparableConv2D<T>::forward(const Tensor<T>& x, Mode) {
  const Shape out_s = output_shape(sample_shape(x.shape()));
  input_ = x;
  const std::size_t n = x.dim(0), len = x.dim(3);
  const auto pad = same_padding(len, kernel_, 1);
  mid_.assign(n * in_features_ * len, T{0});
  const T* dk = this->params_[0].value.data();
  const T* pk = this->params_[1].value.data();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t c = 0; c < in_features_; ++c) {
      const T* xr = x.data() + (b * in_features_ + c) * len;
      T* mr = mid_.data() + (b * in_features_ + c) * len;
      for (std::size_t t = 0; t < len; ++t) {
        T s = 0;
        for (std::size_t k = 0; k < kernel_; ++k) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) -
                                     static_cast<std::ptrdiff_t>(pad.left);
          if (src >= 0 && src < static_cast<std::ptrdiff_t>(len))
            s += dk[c * kernel_ + k] * xr[src];
        }
        mr[t] = s;
      }
    }
  Tensor<T> y(with_batch(n, out_s));
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t f = 0; f < filters_; ++f) {
      T* yrow = y.data() + (b * filters_ + f) * len;
      for (std::size_t c = 0; c < in_features_; ++c)
        axpy(yrow, pk[f * in_features_ + c], mid_.data() + (b * in_features_ + c) * len, len);
    }
  return y;
}

template <typename T>
Tensor<T> SeparableConv2D<T>::backward(const Tensor<T>& g) {
  const std::size_t n = input_.dim(0), len = input_.dim(3);
  require(g.shape() == with_batch(n, {filters_, 1, len}), "SeparableConv2D: bad grad shape");
  const auto pad = same_padding(len, kernel_, 1);
  const T* dk = this->params_[0].value.data();
  const T* pk = this->params_[1].value.data();
  T* gdk = this->params_[0].grad.data();
  T* gpk = this->params_[1].grad.data();
  std::vector<T> dmid(in_features_ * len);
  Tensor<T> dx(input_.shape());
  for (std::size_t b = 0; b < n; ++b) {
    std::fill(dmid.begin(), dmid.end(), T{0});
    for (std::size_t f = 0; f < filters_; ++f) {
      const T* grow = g.data() + (b * filters_ + f) * len;
      for (std::size_t c = 0; c < in_features_; ++c) {
        const T* mr = mid_.data() + (b * in_features_ + c) * len;
        gpk[f * in_features_ + c] += dot(grow, mr, len);
        axpy(dmid.data() + c * len, pk[f * in_features_ + c], grow, len);
      }
    }
    for (std::size_t c = 0; c < in_features_; ++c) {
      const T* xr = input_.data() + (b * in_features_ + c) * len;
      T* dxr = dx.data() + (b * in_features_ + c) * len;
      const T* dm = dmid.data() + c * len;
      for (std::size_t t = 0; t < len; ++t)
        for (std::size_t k = 0; k < kernel_; ++k) {
          const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + k) -
                                     static_cast<std::ptrdiff_t>(pad.left);
          if (src >= 0 && src < static_cast<std::ptrdiff_t>(len)) {
            gdk[c * kernel_ + k] += dm[t] * xr[src];
            dxr[src] += dm[t] * dk[c * kernel_ + k];
          }
        }
    }
  }
  return dx;
}

template <typename T>
json SeparableConv2D<T>::hyper() const {
  return {{"in_features", in_features_}, {"filters", filters_},
          {"kernel", {1, kernel_}}, {"padding", "same"}, {"use_bias", false}};
}

template <typename T>
void SeparableConv2D<T>::init_params(Rng& rng) {
  glorot_uniform(this->params_[0].value, rng, double(kernel_), double(kernel_));
  glorot_uniform(this->params_[1].value, rng, double(in_features_), double(filters_));
}

// ---------------------------------------------------------------- AvgPool2D

template <typename T>
AvgPool2D<T>::AvgPool2D(std::size_t pool) : pool_(pool) {
  require(pool >= 1, "AvgPool2D: pool must be >= 1");
}

template <typename T>
Shape AvgPool2D<T>::output_shape(const Shape& input) const {
  require(input.size() == 3, "AvgPool2D: expected [C x H x W], got " + shape_str(input));
  require(input[2] >= pool_, "AvgPool2D: width smaller than pool");
  return {input[0], input[1], input[2] / pool_};
}

template <typename T>
Tensor<T> AvgPool2D<T>::forward(const Tensor<T>& x, Mode) {
  in_shape_ = x.shape();
  const Shape out_s = output_shape(sample_shape(in_shape_));
  const std::size_t rows = x.size() / in_shape_.back(), len = in_shape_.back(), ol = out_s[2];
  Tensor<T> y(with_batch(x.dim(0), out_s));
  const T inv = T{1} / static_cast<T>(pool_);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < ol; ++o) {
      T s = 0;
      for (std::size_t p = 0; p < pool_; ++p) s += x[r * len + o * pool_ + p];
      y[r * ol + o] = s * inv;
    }
  return y;
}

template <typename T>
Tensor<T> AvgPool2D<T>::backward(const Tensor<T>& g) {
  const std::size_t len = in_shape_.back(), rows = shape_size(in_shape_) / len;
  const std::size_t ol = len / pool_;
  require(g.size() == rows * ol, "AvgPool2D: bad grad shape");
  Tensor<T> dx(in_shape_);
  const T inv = T{1} / static_cast<T>(pool_);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < ol; ++o)
      for (std::size_t p = 0; p < pool_; ++p) dx[r * len + o * pool_ + p] = g[r * ol + o] * inv;
  return dx;
}

template <typename T>
json AvgPool2D<T>::hyper() const {
  return {{"pool", {1, pool_}}};
}

// ---------------------------------------------------------------- BatchNorm

template <typename T>
BatchNorm<T>::BatchNorm(std::size_t features, double momentum, double eps)
    : features_(features), momentum_(momentum), eps_(eps) {
  require(features >= 1, "BatchNorm: no features");
  require(eps > 0.0, "BatchNorm: eps must be positive");
  this->add_param("gamma", {features});
  this->add_param("beta", {features});
  this->add_param("moving_mean", {features}, false);
  this->add_param("moving_variance", {features}, false);
  this->params_[0].value.fill(T{1});
  this->params_[3].value.fill(T{1});
}

template <typename T>
void BatchNorm<T>::init_params(Rng&) {
  this->params_[0].value.fill(T{1});
  this->params_[1].value.fill(T{0});
  this->params_[2].value.fill(T{0});
  this->params_[3].value.fill(T{1});
}

template <typename T>
Tensor<T> BatchNorm<T>::forward(const Tensor<T>& x, Mode mode) {
  in_shape_ = x.shape();
  const Shape s = sample_shape(in_shape_);
  require(s[0] == features_, "BatchNorm: expected " + std::to_string(features_) +
                                 " features, got " + shape_str(s));
  mode_ = mode;
  const std::size_t n = in_shape_[0];
  if (n == 0) throw ContractError("BatchNorm: zero-size batch");
  const std::size_t inner = shape_size(s) / features_;
  const double count = double(n * inner);
  const T* gamma = this->params_[0].value.data();
  const T* beta = this->params_[1].value.data();
  T* mm = this->params_[2].value.data();
  T* mv = this->params_[3].value.data();
  Tensor<T> y(in_shape_);
  xhat_.assign(x.size(), T{0});
  inv_std_.assign(features_, 0.0);
  for (std::size_t f = 0; f < features_; ++f) {
    double mean = 0.0, var = 0.0;
    if (mode == Mode::kTrain) {
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = x.data() + (b * features_ + f) * inner;
        for (std::size_t i = 0; i < inner; ++i) mean += p[i];
      }
      mean /= count;
      for (std::size_t b = 0; b < n; ++b) {
        const T* p = x.data() + (b * features_ + f) * inner;
        for (std::size_t i = 0; i < inner; ++i) var += (p[i] - mean) * (p[i] - mean);
      }
      var /= count;
      mm[f] = static_cast<T>(momentum_ * mm[f] + (1.0 - momentum_) * mean);
      mv[f] = static_cast<T>(momentum_ * mv[f] + (1.0 - momentum_) * var);
    } else {
      mean = mm[f];
      var = mv[f];
    }
    const double inv = 1.0 / std::sqrt(var + eps_);
    inv_std_[f] = inv;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * features_ + f) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const T xh = static_cast<T>((x[off + i] - mean) * inv);
        xhat_[off + i] = xh;
        y[off + i] = gamma[f] * xh + beta[f];
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> BatchNorm<T>::backward(const Tensor<T>& g) {
  require(g.shape() == in_shape_, "BatchNorm: bad grad shape");
  const std::size_t n = in_shape_[0];
  const std::size_t inner = shape_size(in_shape_) / (n * features_);
  const double count = double(n * inner);
  const T* gamma = this->params_[0].value.data();
  T* dgamma = this->params_[0].grad.data();
  T* dbeta = this->params_[1].grad.data();
  Tensor<T> dx(in_shape_);
  for (std::size_t f = 0; f < features_; ++f) {
    double sg = 0.0, sgx = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * features_ + f) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        sg += g[off + i];
        sgx += double(g[off + i]) * xhat_[off + i];
      }
    }
    dgamma[f] += static_cast<T>(sgx);
    dbeta[f] += static_cast<T>(sg);
    const double gi = gamma[f] * inv_std_[f];
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * features_ + f) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        if (mode_ == Mode::kTrain)
          dx[off + i] = static_cast<T>(gi * (g[off + i] - sg / count - xhat_[off + i] * sgx / count));
        else
          dx[off + i] = static_cast<T>(gi * g[off + i]);
      }
    }
  }
  return dx;
}

template <typename T>
json BatchNorm<T>::hyper() const {
  return {{"features", features_}, {"momentum", momentum_}, {"eps", eps_}};
}

// ---------------------------------------------------------------- Dense

template <typename T>
Dense<T>::Dense(std::size_t in, std::size_t out, bool use_bias)
    : in_(in), out_(out), use_bias_(use_bias) {
  require(in >= 1 && out >= 1, "Dense: empty shape");
  this->add_param("kernel", {in, out});
  if (use_bias) this->add_param("bias", {out});
}

template <typename T>
Shape Dense<T>::output_shape(const Shape& input) const {
  require(input.size() == 1 && input[0] == in_,
          "Dense: expected [" + std::to_string(in_) + "], got " + shape_str(input));
  return {out_};
}

template <typename T>
Tensor<T> Dense<T>::forward(const Tensor<T>& x, Mode) {
  output_shape(sample_shape(x.shape()));
  input_ = x;
  const std::size_t n = x.dim(0);
  Tensor<T> y({n, out_});
  const T* w = this->params_[0].value.data();
  for (std::size_t b = 0; b < n; ++b) {
    T* yr = y.data() + b * out_;
    if (use_bias_) std::copy_n(this->params_[1].value.data(), out_, yr);
    const T* xr = x.data() + b * in_;
    for (std::size_t i = 0; i < in_; ++i) axpy(yr, xr[i], w + i * out_, out_);
  }
  return y;
}

template <typename T>
Tensor<T> Dense<T>::backward(const Tensor<T>& g) {
  const std::size_t n = input_.dim(0);
  require(g.shape() == Shape({n, out_}), "Dense: bad grad shape");
  const T* w = this->params_[0].value.data();
  T* dw = this->params_[0].grad.data();
  Tensor<T> dx({n, in_});
  for (std::size_t b = 0; b < n; ++b) {
    const T* gr = g.data() + b * out_;
    const T* xr = input_.data() + b * in_;
    for (std::size_t i = 0; i < in_; ++i) {
      axpy(dw + i * out_, xr[i], gr, out_);
      dx[b * in_ + i] = dot(w + i * out_, gr, out_);
    }
    if (use_bias_) axpy(this->params_[1].grad.data(), T{1}, gr, out_);
  }
  return dx;
}

template <typename T>
json Dense<T>::hyper() const {
  return {{"in", in_}, {"out", out_}, {"use_bias", use_bias_}};
}

template <typename T>
void Dense<T>::init_params(Rng& rng) {
  glorot_uniform(this->params_[0].value, rng, double(in_), double(out_));
  if (use_bias_) this->params_[1].value.fill(T{0});
}

// ---------------------------------------------------------------- Dropout

template <typename T>
Dropout<T>::Dropout(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ContractError("dropout rate must be in [0, 1)");
}

template <typename T>
Tensor<T> Dropout<T>::forward(const Tensor<T>& x, Mode mode) {
  if (mode == Mode::kInfer || rate_ == 0.0) {
    mask_.clear();
    return x;
  }
  const T scale = static_cast<T>(1.0 / (1.0 - rate_));
  mask_.resize(x.size());
  Tensor<T> y = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mask_[i] = rng_.uniform() < rate_ ? T{0} : scale;
    y[i] *= mask_[i];
  }
  return y;
}

template <typename T>
Tensor<T> Dropout<T>::backward(const Tensor<T>& g) {
  if (mask_.empty()) return g;
  require(g.size() == mask_.size(), "Dropout: bad grad shape");
  Tensor<T> dx = g;
  for (std::size_t i = 0; i < g.size(); ++i) dx[i] *= mask_[i];
  return dx;
}

template <typename T>
json Dropout<T>::hyper() const {
  return {{"rate", rate_}};
}

// ---------------------------------------------------------------- SpatialDropout1D

template <typename T>
SpatialDropout1D<T>::SpatialDropout1D(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) throw ContractError("dropout rate must be in [0, 1)");
}

template <typename T>
Tensor<T> SpatialDropout1D<T>::forward(const Tensor<T>& x, Mode mode) {
  in_shape_ = x.shape();
  require(in_shape_.size() == 3, "SpatialDropout1D: expected [C x T] samples");
  if (mode == Mode::kInfer || rate_ == 0.0) {
    mask_.clear();
    return x;
  }
  const std::size_t rows = in_shape_[0] * in_shape_[1], len = in_shape_[2];
  const T scale = static_cast<T>(1.0 / (1.0 - rate_));
  mask_.resize(rows);
  Tensor<T> y = x;
  for (std::size_t r = 0; r < rows; ++r) {
    mask_[r] = rng_.uniform() < rate_ ? T{0} : scale;
    for (std::size_t t = 0; t < len; ++t) y[r * len + t] *= mask_[r];
  }
  return y;
}

template <typename T>
Tensor<T> SpatialDropout1D<T>::backward(const Tensor<T>& g) {
  if (mask_.empty()) return g;
  require(g.shape() == in_shape_, "SpatialDropout1D: bad grad shape");
  const std::size_t len = in_shape_[2];
  Tensor<T> dx = g;
  for (std::size_t r = 0; r < mask_.size(); ++r)
    for (std::size_t t = 0; t < len; ++t) dx[r * len + t] *= mask_[r];
  return dx;
}

template <typename T>
json SpatialDropout1D<T>::hyper() const {
  return {{"rate", rate_}};
}

// ---------------------------------------------------------------- LSTM

template <typename T>
LSTM<T>::LSTM(std::size_t input_size, std::size_t units, Direction direction)
    : input_size_(input_size), units_(units), direction_(direction) {
  require(input_size >= 1 && units >= 1, "LSTM: empty shape");
  this->add_param("kernel", {input_size, 4 * units});
  this->add_param("recurrent_kernel", {units, 4 * units});
  this->add_param("bias", {4 * units});
}

template <typename T>
Shape LSTM<T>::output_shape(const Shape& input) const {
  require(input.size() == 2 && input[0] == input_size_,
          "LSTM: expected [" + std::to_string(input_size_) + " x T], got " + shape_str(input));
  if (input[1] == 0) throw ContractError("LSTM: empty sequence");
  return {units_};
}

template <typename T>
Tensor<T> LSTM<T>::forward(const Tensor<T>& x, Mode) {
  output_shape(sample_shape(x.shape()));
  const std::size_t n = x.dim(0), steps = x.dim(2), nf = input_size_, h = units_, g4 = 4 * h;
  batch_ = n;
  steps_ = steps;
  xs_.assign(n * steps * nf, T{0});
  gates_.assign(n * steps * g4, T{0});
  cells_.assign(n * (steps + 1) * h, T{0});
  hidden_.assign(n * (steps + 1) * h, T{0});
  const T* w = this->params_[0].value.data();
  const T* u = this->params_[1].value.data();
  const T* bias = this->params_[2].value.data();
  std::vector<T> z(g4);
  Tensor<T> y({n, h});
  for (std::size_t b = 0; b < n; ++b) {
    // reorder to [T, F] in processing order
    for (std::size_t s = 0; s < steps; ++s) {
      const std::size_t t = direction_ == Direction::kForward ? s : steps - 1 - s;
      for (std::size_t f = 0; f < nf; ++f)
        xs_[(b * steps + s) * nf + f] = x[(b * nf + f) * steps + t];
    }
    for (std::size_t s = 0; s < steps; ++s) {
      const T* xt = xs_.data() + (b * steps + s) * nf;
      const T* hp = hidden_.data() + (b * (steps + 1) + s) * h;
      const T* cp = cells_.data() + (b * (steps + 1) + s) * h;
      T* hn = hidden_.data() + (b * (steps + 1) + s + 1) * h;
      T* cn = cells_.data() + (b * (steps + 1) + s + 1) * h;
      std::copy_n(bias, g4, z.data());
      for (std::size_t f = 0; f < nf; ++f) axpy(z.data(), xt[f], w + f * g4, g4);
      for (std::size_t k = 0; k < h; ++k) axpy(z.data(), hp[k], u + k * g4, g4);
      T* gt = gates_.data() + (b * steps + s) * g4;
      for (std::size_t k = 0; k < h; ++k) {
        const T ig = static_cast<T>(sigmoid(z[k]));
        const T fg = static_cast<T>(sigmoid(z[h + k]));
        const T gg = static_cast<T>(std::tanh(z[2 * h + k]));
        const T og = static_cast<T>(sigmoid(z[3 * h + k]));
        gt[k] = ig;
        gt[h + k] = fg;
        gt[2 * h + k] = gg;
        gt[3 * h + k] = og;
        cn[k] = fg * cp[k] + ig * gg;
        hn[k] = og * static_cast<T>(std::tanh(cn[k]));
      }
    }
    std::copy_n(hidden_.data() + (b * (steps + 1) + steps) * h, h, y.data() + b * h);
  }
  return y;
}

template <typename T>
Tensor<T> LSTM<T>::backward(const Tensor<T>& g) {
  const std::size_t n = batch_, steps = steps_, nf = input_size_, h = units_, g4 = 4 * h;
  require(g.shape() == Shape({n, h}), "LSTM: bad grad shape");
  const T* w = this->params_[0].value.data();
  const T* u = this->params_[1].value.data();
  T* dw = this->params_[0].grad.data();
  T* du = this->params_[1].grad.data();
  T* db = this->params_[2].grad.data();
  Tensor<T> dx({n, nf, steps});
  std::vector<T> dh(h), dc(h), dz(g4), dh_prev(h);
  for (std::size_t b = 0; b < n; ++b) {
    std::copy_n(g.data() + b * h, h, dh.data());
    std::fill(dc.begin(), dc.end(), T{0});
    for (std::size_t s = steps; s-- > 0;) {
      const T* gt = gates_.data() + (b * steps + s) * g4;
      const T* cp = cells_.data() + (b * (steps + 1) + s) * h;
      const T* cn = cells_.data() + (b * (steps + 1) + s + 1) * h;
      const T* hp = hidden_.data() + (b * (steps + 1) + s) * h;
      const T* xt = xs_.data() + (b * steps + s) * nf;
      for (std::size_t k = 0; k < h; ++k) {
        const T ig = gt[k], fg = gt[h + k], gg = gt[2 * h + k], og = gt[3 * h + k];
        const T tc = static_cast<T>(std::tanh(cn[k]));
        const T d_o = dh[k] * tc;
        const T dck = dc[k] + dh[k] * og * (T{1} - tc * tc);
        dz[k] = dck * gg * ig * (T{1} - ig);
        dz[h + k] = dck * cp[k] * fg * (T{1} - fg);
        dz[2 * h + k] = dck * ig * (T{1} - gg * gg);
        dz[3 * h + k] = d_o * og * (T{1} - og);
        dc[k] = dck * fg;
      }
      axpy(db, T{1}, dz.data(), g4);
      for (std::size_t f = 0; f < nf; ++f) axpy(dw + f * g4, xt[f], dz.data(), g4);
      for (std::size_t k = 0; k < h; ++k) axpy(du + k * g4, hp[k], dz.data(), g4);
      const std::size_t t = direction_ == Direction::kForward ? s : steps - 1 - s;
      for (std::size_t f = 0; f < nf; ++f)
        dx[(b * nf + f) * steps + t] = dot(w + f * g4, dz.data(), g4);
      for (std::size_t k = 0; k < h; ++k) dh_prev[k] = dot(u + k * g4, dz.data(), g4);
      std::swap(dh, dh_prev);
    }
  }
  return dx;
}

template <typename T>
json LSTM<T>::hyper() const {
  return {{"input_size", input_size_}, {"units", units_},
          {"direction", direction_ == Direction::kForward ? "forward" : "backward"}};
}

template <typename T>
void LSTM<T>::init_params(Rng& rng) {
  glorot_uniform(this->params_[0].value, rng, double(input_size_), double(4 * units_));
  glorot_uniform(this->params_[1].value, rng, double(units_), double(4 * units_));
  auto& b = this->params_[2].value;
  b.fill(T{0});
  for (std::size_t k = units_; k < 2 * units_; ++k) b[k] = T{1};
}

// ---------------------------------------------------------------- Bidirectional

template <typename T>
Bidirectional<T>::Bidirectional(std::size_t input_size, std::size_t units)
    : units_(units),
      fwd_(input_size, units, Direction::kForward),
      bwd_(input_size, units, Direction::kBackward) {
  fwd_.set_name("forward");
  bwd_.set_name("backward");
  for (auto* p : fwd_.parameters()) p->name = "forward_" + p->name;
  for (auto* p : bwd_.parameters()) p->name = "backward_" + p->name;
}

template <typename T>
Shape Bidirectional<T>::output_shape(const Shape& input) const {
  fwd_.output_shape(input);
  return {2 * units_};
}

template <typename T>
Tensor<T> Bidirectional<T>::forward(const Tensor<T>& x, Mode mode) {
  const Tensor<T> a = fwd_.forward(x, mode);
  const Tensor<T> b = bwd_.forward(x, mode);
  const std::size_t n = x.dim(0);
  Tensor<T> y({n, 2 * units_});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(a.data() + i * units_, units_, y.data() + i * 2 * units_);
    std::copy_n(b.data() + i * units_, units_, y.data() + i * 2 * units_ + units_);
  }
  return y;
}

template <typename T>
Tensor<T> Bidirectional<T>::backward(const Tensor<T>& g) {
  const std::size_t n = g.dim(0);
  Tensor<T> ga({n, units_}), gb({n, units_});
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(g.data() + i * 2 * units_, units_, ga.data() + i * units_);
    std::copy_n(g.data() + i * 2 * units_ + units_, units_, gb.data() + i * units_);
  }
  Tensor<T> dx = fwd_.backward(ga);
  const Tensor<T> dxb = bwd_.backward(gb);
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dxb[i];
  return dx;
}

template <typename T>
json Bidirectional<T>::hyper() const {
  return {{"units", units_}, {"merge", "concat"}, {"layer", fwd_.hyper()}};
}

template <typename T>
void Bidirectional<T>::init_params(Rng& rng) {
  fwd_.init_params(rng);
  bwd_.init_params(rng);
}

template <typename T>
std::vector<Param<T>*> Bidirectional<T>::parameters() {
  auto out = fwd_.parameters();
  for (auto* p : bwd_.parameters()) out.push_back(p);
  return out;
}

// ---------------------------------------------------------------- Flatten

template <typename T>
Shape Flatten<T>::output_shape(const Shape& input) const {
  return {shape_size(input)};
}

template <typename T>
Tensor<T> Flatten<T>::forward(const Tensor<T>& x, Mode) {
  in_shape_ = x.shape();
  return x.reshaped({x.dim(0), x.size() / x.dim(0)});
}

template <typename T>
Tensor<T> Flatten<T>::backward(const Tensor<T>& g) {
  return g.reshaped(in_shape_);
}

template <typename T>
Shape TimeDistributedFlatten<T>::output_shape(const Shape& input) const {
  require(input.size() >= 2, "TimeDistributedFlatten: need [features... x T]");
  return {shape_size(input) / input.back(), input.back()};
}

template <typename T>
Tensor<T> TimeDistributedFlatten<T>::forward(const Tensor<T>& x, Mode) {
  in_shape_ = x.shape();
  return x.reshaped(with_batch(x.dim(0), output_shape(sample_shape(in_shape_))));
}

template <typename T>
Tensor<T> TimeDistributedFlatten<T>::backward(const Tensor<T>& g) {
  return g.reshaped(in_shape_);
}

// ---------------------------------------------------------------- Activation

template <typename T>
Tensor<T> activation_apply(const Activation& a, const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.values()) v = static_cast<T>(activate(a, v));
  return y;
}

template <typename T>
Tensor<T> ActivationLayer<T>::forward(const Tensor<T>& x, Mode) {
  input_ = x;
  output_ = activation_apply(act_, x);
  return output_;
}

template <typename T>
Tensor<T> ActivationLayer<T>::backward(const Tensor<T>& g) {
  require(g.shape() == input_.shape(), "Activation: bad grad shape");
  Tensor<T> dx = g;
  for (std::size_t i = 0; i < g.size(); ++i)
    dx[i] = static_cast<T>(g[i] * activate_grad(act_, input_[i], output_[i]));
  return dx;
}

template <typename T>
json ActivationLayer<T>::hyper() const {
  json j = {{"activation", to_string(act_)}};
  if (act_.kind == ActivationKind::kLeakyReLU) j["slope"] = act_.coef;
  if (act_.kind == ActivationKind::kELU) j["alpha"] = act_.coef;
  return j;
}

#define NSTATE_INSTANTIATE(T)                                        \
  template class Layer<T>;                                           \
  template class Conv1D<T>;                                          \
  template class Conv2DTemporal<T>;                                  \
  template class DepthwiseConv2D<T>;                                 \
  template class SeparableConv2D<T>;                                 \
  template class AvgPool2D<T>;                                       \
  template class BatchNorm<T>;                                       \
  template class Dense<T>;                                           \
  template class Dropout<T>;                                         \
  template class SpatialDropout1D<T>;                                \
  template class LSTM<T>;                                            \
  template class Bidirectional<T>;                                   \
  template class Flatten<T>;                                         \
  template class TimeDistributedFlatten<T>;                          \
  template class ActivationLayer<T>;                                 \
  template Tensor<T> activation_apply<T>(const Activation&, const Tensor<T>&);

NSTATE_INSTANTIATE(float)
NSTATE_INSTANTIATE(double)

#undef NSTATE_INSTANTIATE

}  // namespace nstate
