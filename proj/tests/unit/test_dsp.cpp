#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

#include "nstate/dsp.hpp"
#include "nstate/rng.hpp"

using namespace nstate;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> sine(double hz, std::size_t n, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * kPi * hz * double(i) / 250.0 + phase);
  return x;
}

double rms(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / double(x.size()));
}

double variance(std::span<const double> x) {
  const double m = std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / double(x.size());
}

// Direct-form reference: odd reflection pad, causal FIR with zero state
// forward, then again on the reversed signal, crop.
std::vector<double> filtfilt_oracle(const std::vector<double>& x, const std::vector<double>& h) {
  const std::size_t n = x.size(), pad = h.size();
  std::vector<double> ext(n + 2 * pad);
  for (std::size_t i = 0; i < pad; ++i) {
    ext[i] = 2.0 * x[0] - x[pad - i];
    ext[n + pad + i] = 2.0 * x[n - 1] - x[n - 2 - i];
  }
  std::copy(x.begin(), x.end(), ext.begin() + long(pad));
  auto lfilter = [&](const std::vector<double>& in) {
    std::vector<double> out(in.size(), 0.0);
    for (std::size_t i = 0; i < in.size(); ++i)
      for (std::size_t k = 0; k < h.size() && k <= i; ++k) out[i] += h[k] * in[i - k];
    return out;
  };
  auto y = lfilter(ext);
  std::reverse(y.begin(), y.end());
  y = lfilter(y);
  std::reverse(y.begin(), y.end());
  return {y.begin() + long(pad), y.begin() + long(pad + n)};
}

}  // namespace

TEST_CASE("filter design") {
  const FirFilter f = design_bandpass();
  CHECK(f.taps.size() == 825);
  CHECK(f.taps.size() % 2 == 1);
  CHECK(f.low_transition == 1.0);
  CHECK(f.high_transition == 11.25);
  std::vector<double> rev(f.taps.rbegin(), f.taps.rend());
  CHECK(rev == f.taps);
  CHECK(std::abs(std::accumulate(f.taps.begin(), f.taps.end(), 0.0)) < 1e-2);
  for (double hz = 2.0; hz <= 40.0; hz += 0.25) {
    CHECK(std::abs(magnitude_response(f, hz) - 1.0) <= 0.06);
    CHECK(std::abs(zero_phase_response(f, hz) - 1.0) <= 0.06);
  }
  // attenuation of the forward-backward response
  for (double hz : {0.0, 0.1, 0.25})
    CHECK(20.0 * std::log10(zero_phase_response(f, hz) + 1e-300) <= -30.0);
  for (double hz = 56.0; hz <= 125.0; hz += 0.5)
    CHECK(20.0 * std::log10(zero_phase_response(f, hz) + 1e-300) <= -30.0);
  CHECK(design_bandpass().taps == f.taps);
  CHECK_THROWS_AS(design_bandpass(0.0, 45.0), ContractError);
  CHECK_THROWS_AS(design_bandpass(10.0, 5.0), ContractError);
  CHECK_THROWS_AS(design_bandpass(1.0, 125.0), ContractError);
}

TEST_CASE("tap values against an independent windowed-sinc") {
  const FirFilter f = design_bandpass(4.0, 30.0, 250.0);
  const std::size_t len = f.taps.size();
  const double c = double(len - 1) / 2.0;
  const double f1 = (4.0 - f.low_transition / 2.0) / 250.0, f2 = (30.0 + f.high_transition / 2.0) / 250.0;
  for (std::size_t n = 0; n < len; ++n) {
    const double m = double(n) - c;
    auto lp = [&](double fc) { return m == 0.0 ? 2.0 * fc : std::sin(2.0 * kPi * fc * m) / (kPi * m); };
    const double w = 0.54 - 0.46 * std::cos(2.0 * kPi * double(n) / double(len - 1));
    CHECK(f.taps[n] == doctest::Approx(w * (lp(f2) - lp(f1))).epsilon(1e-9).scale(1e-12));
  }
}

TEST_CASE("filtfilt matches direct forward-backward filtering") {
  const FirFilter f = design_bandpass(8.0, 30.0, 250.0);
  Rng rng(3, 0);
  std::vector<double> x(1500);
  for (auto& v : x) v = rng.normal() + 3.0;
  const auto ref = filtfilt_oracle(x, f.taps);
  const auto y = filtfilt(x, f);
  REQUIRE(y.size() == ref.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) worst = std::max(worst, std::abs(y[i] - ref[i]));
  CHECK(worst <= 1e-10);
}

TEST_CASE("filtfilt behaviour on test signals") {
  const FirFilter f = design_bandpass();
  const std::size_t n = 5000;
  const auto s = sine(10.0, n);
  const auto y = filtfilt(s, f);
  CHECK(rms(y) == doctest::Approx(rms(s)).epsilon(0.05));

  // zero lag: cross-correlation peak of the interior at lag 0
  double best = -1e300;
  int best_lag = 99;
  for (int lag = -12; lag <= 12; ++lag) {
    double acc = 0.0;
    for (std::size_t i = 1000; i < 4000; ++i) acc += s[i] * y[std::size_t(long(i) + lag)];
    if (acc > best) best = acc, best_lag = lag;
  }
  CHECK(best_lag == 0);

  const std::vector<double> dc(n, 100.0);
  const auto yd = filtfilt(dc, f);
  CHECK(std::abs(std::accumulate(yd.begin(), yd.end(), 0.0) / double(n)) <= 1.0);

  const std::vector<double> zero(n, 0.0);
  const auto yz = filtfilt(zero, f);
  CHECK(std::all_of(yz.begin(), yz.end(), [](double v) { return v == 0.0; }));

  Rng rng(1, 0);
  for (int trial = 0; trial < 3; ++trial) {
    std::vector<double> w(n);
    for (auto& v : w) v = rng.normal();
    CHECK(variance(filtfilt(w, f)) < variance(w));
  }
  CHECK_THROWS_AS(filtfilt(std::vector<double>(3 * 825), f), ContractError);
}

TEST_CASE("filtfilt on tensors filters each row") {
  const FirFilter f = design_bandpass();
  TensorD x({2, 3000});
  const auto a = sine(10.0, 3000), b = sine(60.0, 3000, 2.0);
  std::copy(a.begin(), a.end(), x.data());
  std::copy(b.begin(), b.end(), x.data() + 3000);
  const TensorD y = filtfilt(x, f);
  const auto ya = filtfilt(a, f);
  CHECK(std::equal(ya.begin(), ya.end(), y.data()));
  CHECK(rms(std::span<const double>(y.data() + 4000, 1000)) < 0.06);
  TensorF xf({2, 3000});
  for (std::size_t i = 0; i < x.size(); ++i) xf[i] = float(x[i]);
  const TensorF yf = filtfilt(xf, f);
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(std::abs(yf[i] - y[i]) < 1e-4);
}

TEST_CASE("band taxonomy") {
  const auto& b = standard_bands();
  REQUIRE(b.size() == 5);
  CHECK(b[0].name == "delta");
  CHECK(b[0].low == 0.5);
  CHECK(b[0].high == 4.0);
  CHECK(b[1].low == 4.0);
  CHECK(b[1].high == 7.0);
  CHECK(b[2].low == 8.0);
  CHECK(b[2].high == 12.0);
  CHECK(b[3].low == 13.0);
  CHECK(b[3].high == 30.0);
  CHECK(b[4].low == 30.0);
  CHECK(b[4].high == 45.0);
  CHECK(b[4].include_high);
  CHECK(!b[2].include_high);
  CHECK(band_definition(Band::kAlpha).name == "alpha");
}

TEST_CASE("welch estimates") {
  TensorD x({1, 2500});
  const auto s = sine(10.0, 2500);
  std::copy(s.begin(), s.end(), x.data());
  const auto p = welch_psd(x);
  CHECK(p.freqs.front() == 0.0);
  CHECK(p.freqs.back() == 125.0);
  CHECK(p.df == 1.0);
  const auto peak = std::max_element(p.power.data(), p.power.data() + p.freqs.size()) - p.power.data();
  CHECK(p.freqs[std::size_t(peak)] == 10.0);
  CHECK(total_power(p)[0] == doctest::Approx(0.5).epsilon(0.05));
  const auto alpha = band_power(p, band_definition(Band::kAlpha))[0];
  double sum = 0.0;
  for (const auto& b : standard_bands()) {
    const double v = band_power(p, b)[0];
    sum += v;
    if (b.band != Band::kAlpha) CHECK(alpha >= 50.0 * v);
  }
  CHECK(sum <= total_power(p)[0] + 1e-12);

  TensorD z({2, 500});
  const auto pz = welch_psd(z);
  for (double v : pz.power.values()) CHECK(v == 0.0);
  for (const auto& b : standard_bands()) CHECK(band_power(pz, b)[1] == 0.0);

  Rng rng(8, 0);
  TensorD w({1, 25000});
  for (auto& v : w.storage()) v = rng.normal();
  const auto pw = welch_psd(w);
  for (std::size_t k = 0; k < pw.freqs.size(); ++k) {
    if (pw.freqs[k] < 5.0 || pw.freqs[k] > 100.0) continue;
    CHECK(pw.power[k] == doctest::Approx(2.0 / 250.0).epsilon(0.2));
  }
  const auto wv = std::span<const double>(w.data(), w.size());
  CHECK(total_power(pw)[0] == doctest::Approx(variance(wv)).epsilon(0.05));
  for (double v : pw.power.values()) CHECK(v >= 0.0);

  CHECK_THROWS_AS(welch_psd(TensorD({1, 100})), ContractError);
  const BandDefinition empty{Band::kAlpha, "none", 10.2, 10.4, false};
  CHECK_THROWS_AS(band_power(p, empty), ContractError);
}

TEST_CASE("welch matches a direct DFT oracle") {
  Rng rng(2, 0);
  TensorD x({1, 500});
  for (auto& v : x.storage()) v = rng.normal() + 1.0;
  const auto p = welch_psd(x, 250.0, 100, 0.5);
  const std::size_t seg = 100, step = 50, nseg = (500 - seg) / step + 1;
  std::vector<double> win(seg), ref(seg / 2 + 1, 0.0);
  double wss = 0.0;
  for (std::size_t i = 0; i < seg; ++i) {
    win[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * double(i) / double(seg));
    wss += win[i] * win[i];
  }
  for (std::size_t s = 0; s < nseg; ++s) {
    const double* d = x.data() + s * step;
    const double mean = std::accumulate(d, d + seg, 0.0) / double(seg);
    for (std::size_t k = 0; k <= seg / 2; ++k) {
      std::complex<double> acc{0.0, 0.0};
      for (std::size_t i = 0; i < seg; ++i)
        acc += (d[i] - mean) * win[i] * std::polar(1.0, -2.0 * kPi * double(k * i) / double(seg));
      const double scale = (k == 0 || k == seg / 2) ? 1.0 : 2.0;
      ref[k] += scale * std::norm(acc) / (250.0 * wss * double(nseg));
    }
  }
  REQUIRE(p.freqs.size() == ref.size());
  for (std::size_t k = 0; k < ref.size(); ++k) CHECK(p.power[k] == doctest::Approx(ref[k]).epsilon(1e-9).scale(1e-15));
}
