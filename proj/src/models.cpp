#include "nstate/models.hpp"

#include <cstdio>
#include <sstream>

namespace nstate {

using nlohmann::json;

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::kEEGNet: return "eegnet";
    case Architecture::kBiLSTMNet: return "lstm";
    case Architecture::kCnn1D: return "cnn1d";
    case Architecture::kCnnLstm: return "cnnlstm";
  }
  return "?";
}

Architecture architecture_from_string(const std::string& s) {
  if (s == "eegnet") return Architecture::kEEGNet;
  if (s == "lstm" || s == "bilstm") return Architecture::kBiLSTMNet;
  if (s == "cnn1d") return Architecture::kCnn1D;
  if (s == "cnnlstm" || s == "cnn-lstm") return Architecture::kCnnLstm;
  throw ContractError("unknown model '" + s + "' (expected eegnet, lstm, cnn1d, cnnlstm)");
}

bool ModelSpec::canonical() const {
  if (timesteps != 250 || (channels != 26 && channels != 256)) return false;
  return arch != Architecture::kEEGNet || eegnet.canonical();
}

json ModelSpec::to_json() const {
  json j = {{"architecture", to_string(arch)},
            {"channels", channels},
            {"timesteps", timesteps},
            {"learning_rate", learning_rate},
            {"hidden_activation", nstate::to_string(hidden)}};
  if (arch == Architecture::kEEGNet)
    j["eegnet"] = {{"F1", eegnet.f1}, {"F2", eegnet.f2}, {"kernel", eegnet.kernel},
                   {"D", eegnet.depth}, {"dropout", eegnet.dropout},
                   {"max_norm", eegnet.max_norm}};
  return j;
}

ModelSpec ModelSpec::from_json(const json& j) {
  ModelSpec s = make_spec(architecture_from_string(j.at("architecture").get<std::string>()),
                          j.at("channels").get<std::size_t>(),
                          j.at("timesteps").get<std::size_t>());
  s.learning_rate = j.at("learning_rate").get<double>();
  s.hidden = activation_from_string(j.value("hidden_activation", std::string("relu")));
  if (j.contains("eegnet")) {
    const auto& e = j["eegnet"];
    s.eegnet.f1 = e.at("F1");
    s.eegnet.f2 = e.at("F2");
    s.eegnet.kernel = e.at("kernel");
    s.eegnet.depth = e.at("D");
    s.eegnet.dropout = e.at("dropout");
    s.eegnet.max_norm = e.at("max_norm");
  }
  return s;
}

ModelSpec make_spec(Architecture arch, std::size_t channels, std::size_t timesteps) {
  require(channels >= 1, "model needs at least one channel");
  require(timesteps >= 1, "model needs at least one timestep");
  ModelSpec s;
  s.arch = arch;
  s.channels = channels;
  s.timesteps = timesteps;
  s.learning_rate =
      (arch == Architecture::kEEGNet || arch == Architecture::kBiLSTMNet) ? 1e-3 : 1e-5;
  return s;
}

// ---------------------------------------------------------------- Sequential

template <typename T>
Sequential<T>::Sequential(std::string name, Shape input_shape)
    : name_(std::move(name)), input_shape_(std::move(input_shape)) {
  require(!input_shape_.empty(), "model input shape is empty");
}

template <typename T>
Layer<T>& Sequential<T>::add(LayerPtr<T> layer) {
  const Shape in = shapes_.empty() ? input_shape_ : shapes_.back();
  shapes_.push_back(layer->output_shape(in));
  if (layer->name().empty()) {
    std::size_t same = 1;
    for (const auto& l : layers_)
      if (l->kind() == layer->kind()) ++same;
    std::string base = to_string(layer->kind());
    for (auto& c : base) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    layer->set_name(base + "_" + std::to_string(same));
  }
  layers_.push_back(std::move(layer));
  return *layers_.back();
}

template <typename T>
Shape Sequential<T>::output_shape(std::size_t i) const {
  return shapes_.at(i);
}

template <typename T>
Tensor<T> Sequential<T>::forward(const Tensor<T>& x, Mode mode) {
  require(x.rank() >= 1, "model input must be batched");
  const std::size_t n = x.dim(0);
  if (x.size() != n * shape_size(input_shape_))
    throw ContractError(name_ + ": input " + shape_str(x.shape()) +
                        " incompatible with per-sample shape " + shape_str(input_shape_));
  Shape batched{n};
  batched.insert(batched.end(), input_shape_.begin(), input_shape_.end());
  Tensor<T> h = x.reshaped(batched);
  for (auto& l : layers_) h = l->forward(h, mode);
  return h;
}

template <typename T>
Tensor<T> Sequential<T>::backward(const Tensor<T>& grad_out) {
  Tensor<T> g = grad_out;
  for (std::size_t i = layers_.size(); i-- > 0;) g = layers_[i]->backward(g);
  return g;
}

template <typename T>
std::vector<Param<T>*> Sequential<T>::parameters() {
  std::vector<Param<T>*> out;
  for (auto& l : layers_)
    for (auto* p : l->parameters()) out.push_back(p);
  return out;
}

template <typename T>
std::size_t Sequential<T>::count_params() {
  std::size_t n = 0;
  for (auto& l : layers_) n += l->count_params();
  return n;
}

template <typename T>
void Sequential<T>::zero_grad() {
  for (auto& l : layers_) l->zero_grad();
}

template <typename T>
void Sequential<T>::apply_constraints() {
  for (auto& l : layers_) l->apply_constraints();
}

template <typename T>
void Sequential<T>::init_params(std::uint64_t seed) {
  Rng rng(seed, streams::kInit);
  for (auto& l : layers_) l->init_params(rng);
}

template <typename T>
void Sequential<T>::reseed_stochastic(std::uint64_t seed) {
  for (std::size_t i = 0; i < layers_.size(); ++i)
    layers_[i]->reseed(seed, streams::kDropout + 16 * (i + 1));
}

// ---------------------------------------------------------------- builders

template <typename T>
Sequential<T> build_eegnet(std::size_t channels, std::size_t timesteps, const EEGNetConfig& cfg) {
  if (cfg.kernel > timesteps)
    throw ContractError("EEGNet kernel length " + std::to_string(cfg.kernel) +
                        " exceeds timesteps " + std::to_string(timesteps));
  const std::size_t fd = cfg.f1 * cfg.depth;
  Sequential<T> m("EEGNet", {1, channels, timesteps});
  m.add(std::make_unique<Conv2DTemporal<T>>(1, cfg.f1, cfg.kernel, false));
  m.add(std::make_unique<BatchNorm<T>>(cfg.f1));
  m.add(std::make_unique<DepthwiseConv2D<T>>(cfg.f1, channels, cfg.depth, cfg.max_norm));
  m.add(std::make_unique<BatchNorm<T>>(fd));
  m.add(std::make_unique<ActivationLayer<T>>(Activation::elu(1.0)));
  m.add(std::make_unique<AvgPool2D<T>>(4));
  m.add(std::make_unique<Dropout<T>>(cfg.dropout));
  m.add(std::make_unique<SeparableConv2D<T>>(fd, cfg.f2, 16));
  m.add(std::make_unique<BatchNorm<T>>(cfg.f2));
  m.add(std::make_unique<ActivationLayer<T>>(Activation::elu(1.0)));
  m.add(std::make_unique<AvgPool2D<T>>(8));
  m.add(std::make_unique<Dropout<T>>(cfg.dropout));
  m.add(std::make_unique<Flatten<T>>());
  const std::size_t flat = shape_size(m.output_shape(m.size() - 1));
  m.add(std::make_unique<Dense<T>>(flat, 1));
  m.add(std::make_unique<ActivationLayer<T>>(Activation::sigmoid()));
  return m;
}

template <typename T>
Sequential<T> build_bilstm(std::size_t channels, std::size_t timesteps, Activation hidden) {
  Sequential<T> m("BiLSTMNet", {channels, timesteps});
  m.add(std::make_unique<Bidirectional<T>>(channels, 64));
  m.add(std::make_unique<Dense<T>>(128, 32));
  m.add(std::make_unique<ActivationLayer<T>>(hidden));
  m.add(std::make_unique<Dropout<T>>(0.5));
  m.add(std::make_unique<Dense<T>>(32, 1));
  m.add(std::make_unique<ActivationLayer<T>>(Activation::sigmoid()));
  return m;
}

namespace {

// Four strided conv blocks shared by the 1D-CNN and the hybrid; the third
// block has no batch norm because spatial dropout precedes it.
template <typename T>
void add_conv_stack(Sequential<T>& m, std::size_t channels) {
  const auto leaky = Activation::leaky_relu(0.3);
  m.add(std::make_unique<Conv1D<T>>(channels, 16, 3, 2));
  m.add(std::make_unique<BatchNorm<T>>(16));
  m.add(std::make_unique<ActivationLayer<T>>(leaky));
  m.add(std::make_unique<Conv1D<T>>(16, 32, 3, 2));
  m.add(std::make_unique<BatchNorm<T>>(32));
  m.add(std::make_unique<ActivationLayer<T>>(leaky));
  m.add(std::make_unique<SpatialDropout1D<T>>(0.25));
  m.add(std::make_unique<Conv1D<T>>(32, 64, 3, 2));
  m.add(std::make_unique<ActivationLayer<T>>(leaky));
  m.add(std::make_unique<Conv1D<T>>(64, 128, 3, 2));
  m.add(std::make_unique<BatchNorm<T>>(128));
  m.add(std::make_unique<ActivationLayer<T>>(leaky));
}

}  // namespace

template <typename T>
Sequential<T> build_cnn1d(std::size_t channels, std::size_t timesteps, Activation hidden) {
  Sequential<T> m("Cnn1D", {channels, timesteps});
  add_conv_stack(m, channels);
  m.add(std::make_unique<Flatten<T>>());
  const std::size_t flat = shape_size(m.output_shape(m.size() - 1));
  m.add(std::make_unique<Dense<T>>(flat, 64));
  m.add(std::make_unique<ActivationLayer<T>>(hidden));
  m.add(std::make_unique<Dropout<T>>(0.5));
  m.add(std::make_unique<Dense<T>>(64, 1));
  m.add(std::make_unique<ActivationLayer<T>>(Activation::sigmoid()));
  return m;
}

template <typename T>
Sequential<T> build_cnn_lstm(std::size_t channels, std::size_t timesteps, Activation hidden) {
  Sequential<T> m("CnnLstm", {channels, timesteps});
  add_conv_stack(m, channels);
  m.add(std::make_unique<TimeDistributedFlatten<T>>());
  const std::size_t features = m.output_shape(m.size() - 1)[0];
  m.add(std::make_unique<Bidirectional<T>>(features, 32));
  m.add(std::make_unique<Dense<T>>(64, 32));
  m.add(std::make_unique<ActivationLayer<T>>(hidden));
  m.add(std::make_unique<Dropout<T>>(0.5));
  m.add(std::make_unique<Dense<T>>(32, 1));
  m.add(std::make_unique<ActivationLayer<T>>(Activation::sigmoid()));
  return m;
}

template <typename T>
Sequential<T> build_model(const ModelSpec& spec) {
  switch (spec.arch) {
    case Architecture::kEEGNet: return build_eegnet<T>(spec.channels, spec.timesteps, spec.eegnet);
    case Architecture::kBiLSTMNet: return build_bilstm<T>(spec.channels, spec.timesteps, spec.hidden);
    case Architecture::kCnn1D: return build_cnn1d<T>(spec.channels, spec.timesteps, spec.hidden);
    case Architecture::kCnnLstm: return build_cnn_lstm<T>(spec.channels, spec.timesteps, spec.hidden);
  }
  throw ContractError("unknown architecture");
}

// ---------------------------------------------------------------- audit

std::optional<std::size_t> reference_total(Architecture arch, std::size_t channels) {
  if (channels != 26 && channels != 256) return std::nullopt;
  const bool small = channels == 26;
  switch (arch) {
    case Architecture::kEEGNet: return small ? 2153 : 6753;
    case Architecture::kBiLSTMNet: return small ? 50753 : 168513;
    case Architecture::kCnn1D: return small ? 165649 : 176689;
    case Architecture::kCnnLstm: return small ? 77777 : 88817;
  }
  return std::nullopt;
}

template <typename T>
ParamAudit param_audit(Sequential<T>& model) {
  ParamAudit a;
  a.model = model.name();
  for (std::size_t i = 0; i < model.size(); ++i) {
    auto& l = model.layer(i);
    AuditRow r{l.name(), to_string(l.kind()), model.output_shape(i), l.count_params()};
    a.total += r.params;
    a.rows.push_back(std::move(r));
  }
  return a;
}

ParamAudit param_audit(const ModelSpec& spec) {
  auto model = build_model<float>(spec);
  ParamAudit a = param_audit(model);
  a.channels = spec.channels;
  if (spec.canonical()) {
    a.reference = reference_total(spec.arch, spec.channels);
    a.delta = static_cast<long long>(*a.reference) - static_cast<long long>(a.total);
  } else {
    a.notes.push_back("non-canonical configuration: no reported total to compare against");
  }
  switch (spec.arch) {
    case Architecture::kEEGNet:
      a.notes.push_back(
          "canonical EEGNet stack (F1=8, D=2, F2=16, k=125) totals 1785 + 16*C; the reported "
          "totals imply 20 parameters per channel and a constant of 1633, which the published "
          "stack does not produce, so the delta is expected");
      break;
    case Architecture::kCnn1D:
      a.notes.push_back(
          "reconstructed: conv filters 16/32/64/128, kernel 3, stride 2, dense 64 (fits both "
          "reported totals exactly)");
      break;
    case Architecture::kCnnLstm:
      a.notes.push_back(
          "reconstructed: conv stack as Cnn1D, BiLSTM 32 units per direction, dense 32 (fits "
          "both reported totals exactly)");
      break;
    case Architecture::kBiLSTMNet:
      break;
  }
  return a;
}

std::string ParamAudit::render() const {
  std::ostringstream os;
  char buf[160];
  os << "model: " << model << "  channels: " << channels << "\n";
  std::snprintf(buf, sizeof buf, "%-28s %-24s %-18s %10s\n", "layer", "kind", "output", "params");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-28s %-24s %-18s %10zu\n", r.layer.c_str(), r.kind.c_str(),
                  shape_str(r.output_shape).c_str(), r.params);
    os << buf;
  }
  os << "total: " << total << "\n";
  if (reference) {
    os << "reference: " << *reference << "\n";
    os << "delta: " << (*delta > 0 ? "+" : "") << *delta << "\n";
  } else {
    os << "reference: none\n";
  }
  for (const auto& n : notes) os << "note: " << n << "\n";
  return os.str();
}

json ParamAudit::to_json() const {
  json rows_j = json::array();
  for (const auto& r : rows)
    rows_j.push_back({{"layer", r.layer}, {"kind", r.kind}, {"output_shape", r.output_shape},
                      {"params", r.params}});
  json j = {{"model", model}, {"channels", channels}, {"rows", rows_j}, {"total", total},
            {"notes", notes}};
  j["reference"] = reference ? json(*reference) : json(nullptr);
  j["delta"] = delta ? json(*delta) : json(nullptr);
  return j;
}

#define NSTATE_INSTANTIATE(T)                                                           \
  template class Sequential<T>;                                                         \
  template Sequential<T> build_eegnet<T>(std::size_t, std::size_t, const EEGNetConfig&); \
  template Sequential<T> build_bilstm<T>(std::size_t, std::size_t, Activation);          \
  template Sequential<T> build_cnn1d<T>(std::size_t, std::size_t, Activation);           \
  template Sequential<T> build_cnn_lstm<T>(std::size_t, std::size_t, Activation);        \
  template Sequential<T> build_model<T>(const ModelSpec&);                              \
  template ParamAudit param_audit<T>(Sequential<T>&);

NSTATE_INSTANTIATE(float)
NSTATE_INSTANTIATE(double)

#undef NSTATE_INSTANTIATE

}  // namespace nstate
