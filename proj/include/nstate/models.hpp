#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nstate/layers.hpp"

namespace nstate {

enum class Architecture { kEEGNet, kBiLSTMNet, kCnn1D, kCnnLstm };

// CLI names: eegnet, lstm, cnn1d, cnnlstm.
std::string to_string(Architecture a);
Architecture architecture_from_string(const std::string& s);

struct EEGNetConfig {
  std::size_t f1 = 8;        // temporal filters
  std::size_t f2 = 16;       // pointwise filters
  std::size_t kernel = 125;  // temporal kernel length
  std::size_t depth = 2;     // spatial filters per temporal filter
  double dropout = 0.5;
  double max_norm = 1.0;

  bool canonical() const {
    return f1 == 8 && f2 == 16 && kernel == 125 && depth == 2;
  }
};

struct ModelSpec {
  Architecture arch = Architecture::kCnn1D;
  std::size_t channels = 26;
  std::size_t timesteps = 250;
  double learning_rate = 1e-3;
  EEGNetConfig eegnet;
  Activation hidden = Activation::relu();

  // Channel counts for which reported totals exist.
  bool canonical() const;
  nlohmann::json to_json() const;
  static ModelSpec from_json(const nlohmann::json& j);
};

// Default spec for an architecture: learning rate 1e-3 for EEGNet and the
// BiLSTM net, 1e-5 for the two convolutional models.
ModelSpec make_spec(Architecture arch, std::size_t channels,
                    std::size_t timesteps = 250);

// Ordered layer stack. Input samples have shape input_shape(); a batch
// [N, ...] whose per-sample size matches is viewed in that shape.
template <typename T>
class Sequential {
 public:
  Sequential() = default;
  Sequential(std::string name, Shape input_shape);

  Layer<T>& add(LayerPtr<T> layer);

  Tensor<T> forward(const Tensor<T>& x, Mode mode);
  Tensor<T> backward(const Tensor<T>& grad_out);

  std::vector<Param<T>*> parameters();
  std::size_t count_params();
  void zero_grad();
  void apply_constraints();
  void init_params(std::uint64_t seed);
  void reseed_stochastic(std::uint64_t seed);

  const std::string& name() const { return name_; }
  const Shape& input_shape() const { return input_shape_; }
  std::size_t size() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_.at(i); }
  // Per-sample output shape after layer i.
  Shape output_shape(std::size_t i) const;

 private:
  std::string name_;
  Shape input_shape_;
  std::vector<LayerPtr<T>> layers_;
  std::vector<Shape> shapes_;
};

template <typename T>
Sequential<T> build_eegnet(std::size_t channels, std::size_t timesteps = 250,
                           const EEGNetConfig& cfg = {});
template <typename T>
Sequential<T> build_bilstm(std::size_t channels, std::size_t timesteps = 250,
                           Activation hidden = Activation::relu());
template <typename T>
Sequential<T> build_cnn1d(std::size_t channels, std::size_t timesteps = 250,
                          Activation hidden = Activation::relu());
template <typename T>
Sequential<T> build_cnn_lstm(std::size_t channels, std::size_t timesteps = 250,
                             Activation hidden = Activation::relu());

template <typename T>
Sequential<T> build_model(const ModelSpec& spec);

// Reported totals for the canonical channel counts (26, 256).
std::optional<std::size_t> reference_total(Architecture arch, std::size_t channels);

struct AuditRow {
  std::string layer;
  std::string kind;
  Shape output_shape;
  std::size_t params = 0;
};

struct ParamAudit {
  std::string model;
  std::size_t channels = 0;
  std::vector<AuditRow> rows;
  std::size_t total = 0;
  std::optional<std::size_t> reference;
  std::optional<long long> delta;  // reference - total
  std::vector<std::string> notes;

  std::string render() const;
  nlohmann::json to_json() const;
};

template <typename T>
ParamAudit param_audit(Sequential<T>& model);

ParamAudit param_audit(const ModelSpec& spec);

}  // namespace nstate
