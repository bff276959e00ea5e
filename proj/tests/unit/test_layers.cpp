#include <doctest.h>

#include <cmath>

#include "nstate/layers.hpp"
#include "support/layer_gradcheck.hpp"

using namespace nstate;
using nstate::testing::random_tensor;

namespace {

void set_values(Param<double>& p, std::vector<double> v) { p.value = TensorD(p.value.shape(), v); }

Param<double>& param(Layer<double>& l, const std::string& name) {
  for (auto* p : l.parameters())
    if (p->name == name) return *p;
  throw std::runtime_error("no param " + name);
}

}  // namespace

TEST_CASE("same padding length law") {
  for (std::size_t k : {1, 3, 5, 125})
    for (std::size_t s : {1, 2, 4})
      for (std::size_t t = 1; t <= 300; ++t) {
        Conv1D<double> c(1, 1, k, s);
        REQUIRE(c.output_shape({1, t}) == Shape{1, (t + s - 1) / s});
        const auto sp = same_padding(t, k, s);
        const std::size_t need = (sp.out - 1) * s + k;
        REQUIRE(sp.total == (need > t ? need - t : 0));
        REQUIRE(sp.left == sp.total / 2);
      }
}

TEST_CASE("conv1d oracles") {
  Conv1D<double> c(1, 1, 3, 1);
  set_values(param(c, "kernel"), {1, 1, 1});
  const TensorD y = c.forward(TensorD({1, 1, 4}, std::vector<double>{1, 2, 3, 4}), Mode::kInfer);
  CHECK(y.storage() == std::vector<double>{3, 6, 9, 7});

  Conv1D<double> id(1, 1, 1, 1);
  set_values(param(id, "kernel"), {1});
  const TensorD x({1, 1, 5}, std::vector<double>{0.5, -2, 3, 7, 1});
  CHECK(id.forward(x, Mode::kInfer).storage() == x.storage());

  Conv1D<double> c26(26, 16, 3, 2), c256(256, 16, 3, 2);
  CHECK(c26.count_params() == 1264);
  CHECK(c256.count_params() == 12304);
  CHECK(c256.count_params() - c26.count_params() == 11040);
}

TEST_CASE("conv2d temporal matches a nested-loop oracle") {
  Rng rng(5, 0);
  Conv2DTemporal<double> c(2, 2, 3);
  c.init_params(rng);
  const TensorD x = random_tensor({1, 2, 4, 6}, rng);
  const TensorD y = c.forward(x, Mode::kInfer);
  const TensorD& w = param(c, "kernel").value;
  double worst = 0.0;
  for (std::size_t f = 0; f < 2; ++f)
    for (std::size_t h = 0; h < 4; ++h)
      for (std::size_t t = 0; t < 6; ++t) {
        double s = 0.0;
        for (std::size_t ch = 0; ch < 2; ++ch)
          for (std::size_t k = 0; k < 3; ++k) {
            const long src = long(t) + long(k) - 1;
            if (src >= 0 && src < 6) s += w.at(f, ch, 0, k) * x.at(0, ch, h, std::size_t(src));
          }
        worst = std::max(worst, std::abs(s - y.at(0, f, h, t)) / std::max(1.0, std::abs(s)));
      }
  CHECK(worst <= 1e-12);

  CHECK(Conv2DTemporal<double>(1, 8, 125).count_params() == 1000);
  Conv2DTemporal<double> id(1, 1, 1);
  set_values(param(id, "kernel"), {1});
  const TensorD z = random_tensor({1, 1, 2, 5}, rng);
  CHECK(id.forward(z, Mode::kInfer).storage() == z.storage());
}

TEST_CASE("depthwise conv2d") {
  CHECK(DepthwiseConv2D<double>(8, 26, 2).count_params() == 416);
  DepthwiseConv2D<double> d(1, 3, 1);
  set_values(param(d, "depthwise_kernel"), {0, 1, 0});
  Rng rng(2, 0);
  const TensorD x = random_tensor({1, 1, 3, 4}, rng);
  const TensorD y = d.forward(x, Mode::kInfer);
  CHECK(y.shape() == Shape{1, 1, 1, 4});
  for (std::size_t t = 0; t < 4; ++t) CHECK(y[t] == x.at(0, 0, 1, t));
  CHECK(d.forward(TensorD({1, 1, 3, 4}), Mode::kInfer).storage() ==
        std::vector<double>(4, 0.0));
}

TEST_CASE("depthwise max-norm constraint") {
  DepthwiseConv2D<double> d(2, 3, 1, 1.0);
  // filter 0 norm 5 (rescaled), filter 1 norm 0.5 (kept)
  set_values(param(d, "depthwise_kernel"), {3, 4, 0, 0.3, 0.4, 0});
  d.apply_constraints();
  const auto& w = param(d, "depthwise_kernel").value.storage();
  CHECK(std::sqrt(w[0] * w[0] + w[1] * w[1] + w[2] * w[2]) == doctest::Approx(1.0));
  CHECK(w[3] == 0.3);
  CHECK(w[4] == 0.4);
}

TEST_CASE("separable conv2d") {
  CHECK(SeparableConv2D<double>(16, 16, 16).count_params() == 512);

  SeparableConv2D<double> id(2, 2, 3);
  set_values(param(id, "depthwise_kernel"), {0, 1, 0, 0, 1, 0});
  set_values(param(id, "pointwise_kernel"), {1, 0, 0, 1});
  Rng rng(3, 0);
  const TensorD x = random_tensor({1, 2, 1, 6}, rng);
  CHECK(id.forward(x, Mode::kInfer).storage() == x.storage());

  SeparableConv2D<double> s(3, 2, 3);
  s.init_params(rng);
  const TensorD z = random_tensor({1, 3, 1, 5}, rng);
  const TensorD y = s.forward(z, Mode::kInfer);
  const TensorD& dk = param(s, "depthwise_kernel").value;
  const TensorD& pk = param(s, "pointwise_kernel").value;
  double worst = 0.0;
  for (std::size_t f = 0; f < 2; ++f)
    for (std::size_t t = 0; t < 5; ++t) {
      double acc = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        double mid = 0.0;
        for (std::size_t k = 0; k < 3; ++k) {
          const long src = long(t) + long(k) - 1;
          if (src >= 0 && src < 5) mid += dk.at(c, k) * z.at(0, c, 0, std::size_t(src));
        }
        acc += pk.at(f, c) * mid;
      }
      worst = std::max(worst, std::abs(acc - y.at(0, f, 0, t)) / std::max(1.0, std::abs(acc)));
    }
  CHECK(worst <= 1e-12);
}

TEST_CASE("avg pool") {
  AvgPool2D<double> p2(2);
  CHECK(p2.forward(TensorD({1, 1, 1, 4}, std::vector<double>{1, 2, 3, 4}), Mode::kInfer)
            .storage() == std::vector<double>{1.5, 3.5});
  AvgPool2D<double> p4(4), p8(8);
  CHECK(p4.output_shape({16, 1, 250}) == Shape{16, 1, 62});
  CHECK(p8.output_shape({16, 1, 62}) == Shape{16, 1, 7});
  const TensorD c({1, 2, 1, 9}, 2.5);
  const TensorD pooled = p4.forward(c, Mode::kInfer);
  for (double v : pooled.values()) CHECK(v == 2.5);
  CHECK(p4.count_params() == 0);
}

TEST_CASE("batchnorm") {
  CHECK(BatchNorm<double>(16).count_params() == 64);
  Rng rng(4, 0);
  BatchNorm<double> bn(3);
  bn.init_params(rng);
  TensorD x = random_tensor({8, 3, 10}, rng, 10.0);
  const TensorD y = bn.forward(x, Mode::kTrain);
  for (std::size_t f = 0; f < 3; ++f) {
    double m = 0.0, v = 0.0;
    for (std::size_t n = 0; n < 8; ++n)
      for (std::size_t t = 0; t < 10; ++t) m += y.at(n, f, t);
    m /= 80.0;
    for (std::size_t n = 0; n < 8; ++n)
      for (std::size_t t = 0; t < 10; ++t) v += (y.at(n, f, t) - m) * (y.at(n, f, t) - m);
    v /= 80.0;
    CHECK(std::abs(m) <= 1e-6);
    CHECK(std::abs(v - 1.0) <= 1e-4);  // eps = 1e-3 against variance ~33
  }
  set_values(param(bn, "gamma"), {2, 2, 2});
  set_values(param(bn, "beta"), {3, 3, 3});
  const TensorD z = bn.forward(x, Mode::kTrain);
  double m = 0.0, v = 0.0;
  for (double e : z.values()) m += e;
  m /= double(z.size());
  for (double e : z.values()) v += (e - m) * (e - m);
  CHECK(m == doctest::Approx(3.0).epsilon(1e-9));
  CHECK(std::sqrt(v / double(z.size())) == doctest::Approx(2.0).epsilon(1e-4));
}

TEST_CASE("batchnorm tracks moving statistics and uses them in infer mode") {
  BatchNorm<double> bn(1, 0.5, 1e-3);
  Rng rng(1, 0);
  bn.init_params(rng);
  const TensorD x({4, 1, 1}, std::vector<double>{1, 2, 3, 6});  // mean 3, var 3.5
  bn.forward(x, Mode::kTrain);
  const auto& mm = param(bn, "moving_mean").value;
  const auto& mv = param(bn, "moving_variance").value;
  CHECK(mm[0] == doctest::Approx(0.5 * 0.0 + 0.5 * 3.0));
  CHECK(mv[0] == doctest::Approx(0.5 * 1.0 + 0.5 * 3.5));
  const TensorD y = bn.forward(x, Mode::kInfer);
  CHECK(y[0] == doctest::Approx((1.0 - 1.5) / std::sqrt(2.25 + 1e-3)));
}

TEST_CASE("dense") {
  CHECK(Dense<double>(128, 32).count_params() == 4128);
  CHECK(Dense<double>(2048, 64).count_params() == 131136);
  Dense<double> d(3, 3);
  set_values(param(d, "kernel"), {1, 0, 0, 0, 1, 0, 0, 0, 1});
  const TensorD x({2, 3}, std::vector<double>{1, 2, 3, -4, 5, 6});
  CHECK(d.forward(x, Mode::kInfer).storage() == x.storage());
}

TEST_CASE("dropout") {
  Rng rng(6, 0);
  const TensorD x = random_tensor({1, 100000}, rng);
  Dropout<double> d(0.5);
  d.reseed(1, 2);
  CHECK(d.forward(x, Mode::kInfer).storage() == x.storage());
  CHECK(d.count_params() == 0);
  Dropout<double> none(0.0);
  CHECK(none.forward(x, Mode::kTrain).storage() == x.storage());
  CHECK_THROWS_AS(Dropout<double>(1.0), ContractError);

  const TensorD ones({1, 100000}, 1.0);
  const TensorD y = d.forward(ones, Mode::kTrain);
  std::size_t kept = 0;
  double sum = 0.0;
  for (double v : y.values()) {
    kept += v != 0.0;
    sum += v;
  }
  CHECK(double(kept) / 1e5 == doctest::Approx(0.5).epsilon(0.02));
  CHECK(sum / 1e5 == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("spatial dropout") {
  SpatialDropout1D<double> d(0.25);
  d.reseed(3, 4);
  Rng rng(7, 0);
  const TensorD x = random_tensor({2, 64, 10}, rng);
  CHECK(d.forward(x, Mode::kInfer).storage() == x.storage());
  const TensorD y = d.forward(x, Mode::kTrain);
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t c = 0; c < 64; ++c) {
      const bool dropped = y.at(n, c, 0) == 0.0;
      for (std::size_t t = 0; t < 10; ++t) CHECK((y.at(n, c, t) == 0.0) == dropped);
    }

  std::size_t dropped = 0, rows = 0;
  const TensorD ones({1, 64, 1}, 1.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const TensorD z = d.forward(ones, Mode::kTrain);
    for (double v : z.values()) dropped += v == 0.0;
    rows += 64;
  }
  CHECK(std::abs(double(dropped) / double(rows) - 0.25) <= 0.02);
}

TEST_CASE("lstm") {
  CHECK(LSTM<double>(26, 64).count_params() == 23296);
  CHECK(LSTM<double>(128, 32).count_params() == 20608);
  LSTM<double> zero(3, 4);
  Rng rng(8, 0);
  const TensorD y = zero.forward(random_tensor({2, 3, 6}, rng), Mode::kInfer);
  CHECK(y.shape() == Shape{2, 4});
  for (double v : y.values()) CHECK(v == 0.0);
}

TEST_CASE("bidirectional lstm") {
  CHECK(Bidirectional<double>(256, 64).count_params() == 164352);
  CHECK(Bidirectional<double>(26, 64).count_params() == 46592);

  Bidirectional<double> b(3, 4);
  Rng rng(9, 0);
  b.init_params(rng);
  auto& f = b.forward_layer();
  auto& r = b.backward_layer();
  r.kernel().value = f.kernel().value;
  r.recurrent_kernel().value = f.recurrent_kernel().value;
  r.bias().value = f.bias().value;
  TensorD x({1, 3, 5});
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t t = 0; t < 5; ++t) x.at(0, c, t) = 0.3 * double(c) - 0.2;
  const TensorD y = b.forward(x, Mode::kInfer);
  for (std::size_t i = 0; i < 4; ++i) CHECK(y[i] == doctest::Approx(y[4 + i]).epsilon(1e-12));
}

TEST_CASE("activations") {
  CHECK(activate(Activation::sigmoid(), 0.0) == 0.5);
  CHECK(activate(Activation::leaky_relu(), -1.0) == doctest::Approx(-0.3));
  CHECK(activate(Activation::elu(), 0.0) == 0.0);
  const double h = 1e-7;
  CHECK((activate(Activation::elu(), h) - activate(Activation::elu(), 0.0)) / h ==
        doctest::Approx(1.0));
  CHECK(activate_grad(Activation::elu(), 1e-12, activate(Activation::elu(), 1e-12)) == 1.0);
  for (const auto& a : {Activation::leaky_relu(), Activation::elu(), Activation::relu(),
                        Activation::sigmoid(), Activation::tanh()})
    CHECK(to_string(activation_from_string(to_string(a))) == to_string(a));
}

TEST_CASE("infer mode is deterministic for stochastic layers") {
  Rng rng(10, 0);
  const TensorD x = random_tensor({4, 3, 5}, rng);
  Dropout<double> d(0.5);
  SpatialDropout1D<double> s(0.5);
  BatchNorm<double> bn(3);
  bn.init_params(rng);
  for (Layer<double>* l : std::vector<Layer<double>*>{&d, &s, &bn})
    CHECK(l->forward(x, Mode::kInfer).storage() == l->forward(x, Mode::kInfer).storage());
}

TEST_CASE("parameter-count closed forms over random hyperparameters") {
  Rng rng(11, 0);
  for (int i = 0; i < 50; ++i) {
    const std::size_t a = 1 + rng.below(40), b = 1 + rng.below(40), k = 1 + rng.below(9);
    CHECK(Conv1D<double>(a, b, k, 1 + rng.below(3)).count_params() == b * a * k + b);
    CHECK(Conv1D<double>(a, b, k, 1, false).count_params() == b * a * k);
    CHECK(Conv2DTemporal<double>(a, b, k).count_params() == b * a * k);
    CHECK(DepthwiseConv2D<double>(a, b, k).count_params() == a * b * k);
    CHECK(SeparableConv2D<double>(a, b, k).count_params() == a * k + a * b);
    CHECK(BatchNorm<double>(a).count_params() == 4 * a);
    CHECK(Dense<double>(a, b).count_params() == a * b + b);
    CHECK(LSTM<double>(a, b).count_params() == 4 * (b * (a + b) + b));
    CHECK(Bidirectional<double>(a, b).count_params() == 8 * (b * (a + b) + b));
  }
}

TEST_CASE("gradient checks for every layer kind") {
  for (const auto& c : nstate::testing::gradient_cases()) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto layer = c.make();
      const auto rep = nstate::testing::check_layer_gradients(*layer, c.batch_shape, seed, c.mode);
      INFO(c.name << " seed " << seed << " worst param " << rep.worst_param);
      CHECK(rep.input_error <= 1e-4);
      CHECK(rep.param_error <= 1e-4);
    }
  }
}
