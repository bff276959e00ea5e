#include "nstate/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace nstate {

using nlohmann::json;

BceResult bce_loss(std::span<const double> p, std::span<const int> y) {
  if (p.empty()) throw ContractError("bce_loss: empty batch");
  require(p.size() == y.size(), "bce_loss: predictions and labels differ in length");
  BceResult r;
  r.grad.resize(p.size());
  const double n = double(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], kProbClip, 1.0 - kProbClip);
    const double t = y[i];
    r.loss -= t * std::log(pc) + (1.0 - t) * std::log(1.0 - pc);
    r.grad[i] = (-(t / pc) + (1.0 - t) / (1.0 - pc)) / n;
  }
  r.loss /= n;
  return r;
}

template <typename T>
void adam_step(const std::vector<Param<T>*>& params, AdamState<T>& s) {
  if (s.m.empty()) {
    for (auto* p : params) {
      s.m.emplace_back(p->value.size(), T{0});
      s.v.emplace_back(p->value.size(), T{0});
    }
  }
  require(s.m.size() == params.size(), "adam_step: parameter list changed");
  for (auto* p : params)
    if (p->trainable && !p->grad.all_finite())
      throw NumericError("adam_step: non-finite gradient in parameter '" + p->name +
                         "' at step " + std::to_string(s.step + 1));
  ++s.step;
  const auto& c = s.cfg;
  const double bc1 = 1.0 - std::pow(c.beta1, double(s.step));
  const double bc2 = 1.0 - std::pow(c.beta2, double(s.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto* p = params[k];
    if (!p->trainable) continue;
    require(s.m[k].size() == p->value.size(), "adam_step: parameter shape changed");
    T* w = p->value.data();
    const T* g = p->grad.data();
    T* m = s.m[k].data();
    T* v = s.v[k].data();
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      m[i] = static_cast<T>(c.beta1 * m[i] + (1.0 - c.beta1) * g[i]);
      v[i] = static_cast<T>(c.beta2 * v[i] + (1.0 - c.beta2) * double(g[i]) * g[i]);
      const double mh = m[i] / bc1, vh = v[i] / bc2;
      w[i] = static_cast<T>(w[i] - c.lr * mh / (std::sqrt(vh) + c.eps));
    }
  }
}

template <typename T>
void optimizer_step(Sequential<T>& model, AdamState<T>& state) {
  adam_step(model.parameters(), state);
  model.apply_constraints();
}

std::string TrainHistory::to_ndjson() const {
  std::ostringstream os;
  for (const auto& r : records)
    os << json{{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"train_acc", r.train_acc},
               {"val_loss", r.val_loss}, {"val_acc", r.val_acc}}
              .dump()
       << '\n';
  return os.str();
}

TrainHistory TrainHistory::from_ndjson(const std::string& text) {
  TrainHistory h;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    h.records.push_back({j.at("epoch"), j.at("train_loss"), j.at("train_acc"), j.at("val_loss"),
                         j.at("val_acc")});
  }
  h.epochs = h.records.size();
  return h;
}

namespace {

void check_compatible(Sequential<float>& model, const EpochSet& set) {
  if (set.size() == 0) return;
  if (set.n_channels() * set.n_samples() != shape_size(model.input_shape()))
    throw ContractError("epochs with " + std::to_string(set.n_channels()) + " channels x " +
                        std::to_string(set.n_samples()) + " samples do not fit model input " +
                        shape_str(model.input_shape()));
}

TensorF gather(const EpochSet& set, std::span<const std::size_t> idx) {
  const std::size_t stride = set.n_channels() * set.n_samples();
  TensorF x({idx.size(), set.n_channels(), set.n_samples()});
  for (std::size_t i = 0; i < idx.size(); ++i)
    std::copy_n(set.epochs.data() + idx[i] * stride, stride, x.data() + i * stride);
  return x;
}

struct Eval {
  double loss = 0.0, acc = 0.0;
};

Eval evaluate(Sequential<float>& model, const EpochSet& set) {
  if (set.size() == 0) return {};
  const auto pred = predict(model, set);
  const auto bce = bce_loss(pred.probabilities, set.labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < set.size(); ++i) correct += pred.labels[i] == set.labels[i];
  return {bce.loss, double(correct) / double(set.size())};
}

}  // namespace

Predictions predict(Sequential<float>& model, const EpochSet& set, double threshold) {
  check_compatible(model, set);
  Predictions out;
  constexpr std::size_t kChunk = 256;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < set.size(); start += kChunk) {
    idx.clear();
    for (std::size_t i = start; i < std::min(set.size(), start + kChunk); ++i) idx.push_back(i);
    const TensorF y = model.forward(gather(set, idx), Mode::kInfer);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const double p = y[i];
      out.probabilities.push_back(p);
      out.labels.push_back(p >= threshold ? 1 : 0);
    }
  }
  return out;
}

TrainHistory train(Sequential<float>& model, const EpochSet& train_set, const EpochSet& val_set,
                   const TrainOptions& opts) {
  require(opts.batch_size >= 1, "train: batch size must be >= 1");
  check_compatible(model, train_set);
  check_compatible(model, val_set);
  TrainHistory h;
  h.epochs = opts.epochs;
  h.batch_size = opts.batch_size;
  h.seed = opts.seed;
  if (opts.epochs == 0) return h;
  require(train_set.size() > 0, "train: empty training set");

  Rng shuffle_rng(opts.seed, streams::kShuffle);
  model.reseed_stochastic(opts.seed);
  AdamState<float> adam;
  adam.cfg.lr = opts.learning_rate;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<int> batch_labels;
  std::vector<double> probs;
  for (std::size_t ep = 1; ep <= opts.epochs; ++ep) {
    shuffle_rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t end = std::min(order.size(), start + opts.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, end - start);
      batch_labels.clear();
      for (auto i : idx) batch_labels.push_back(train_set.labels[i]);
      model.zero_grad();
      const TensorF y = model.forward(gather(train_set, idx), Mode::kTrain);
      probs.assign(y.values().begin(), y.values().end());
      const auto bce = bce_loss(probs, batch_labels);
      if (!std::isfinite(bce.loss))
        throw NumericError("train: non-finite loss at epoch " + std::to_string(ep));
      loss_sum += bce.loss * double(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i)
        correct += (probs[i] >= 0.5 ? 1 : 0) == batch_labels[i];
      TensorF g(y.shape());
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = static_cast<float>(bce.grad[i]);
      model.backward(g);
      optimizer_step(model, adam);
    }
    EpochRecord r;
    r.epoch = ep;
    r.train_loss = loss_sum / double(order.size());
    r.train_acc = double(correct) / double(order.size());
    const Eval v = evaluate(model, val_set);
    r.val_loss = v.loss;
    r.val_acc = v.acc;
    h.records.push_back(r);
    if (opts.on_epoch) opts.on_epoch(r);
  }
  return h;
}

template void adam_step<float>(const std::vector<Param<float>*>&, AdamState<float>&);
template void adam_step<double>(const std::vector<Param<double>*>&, AdamState<double>&);
template void optimizer_step<float>(Sequential<float>&, AdamState<float>&);
template void optimizer_step<double>(Sequential<double>&, AdamState<double>&);

}  // namespace nstate
