#include "nstate/dsp.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>

namespace nstate {

namespace {

constexpr double kPi = std::numbers::pi;

// fftw_malloc'd buffers keep the SIMD alignment (and so the codelet choice)
// identical on every call.
struct FftwBuffer {
  explicit FftwBuffer(std::size_t n) : n(n), p(fftw_malloc(n)) {
    if (!p) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(p); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  std::size_t n;
  void* p;
};

// Real <-> half-complex transforms of one size. Plan creation is serialized;
// execution on private buffers is thread-safe.
class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n), time_(n * sizeof(double)), freq_((n / 2 + 1) * sizeof(fftw_complex)) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd_ = fftw_plan_dft_r2c_1d(int(n), real(), cplx(), FFTW_ESTIMATE);
    inv_ = fftw_plan_dft_c2r_1d(int(n), cplx(), real(), FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(inv_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* real() { return static_cast<double*>(time_.p); }
  fftw_complex* cplx() { return static_cast<fftw_complex*>(freq_.p); }
  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }
  void forward() { fftw_execute(fwd_); }
  // Unnormalized: result is n times the inverse.
  void inverse() { fftw_execute(inv_); }

 private:
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }
  std::size_t n_;
  FftwBuffer time_, freq_;
  fftw_plan fwd_ = nullptr, inv_ = nullptr;
};

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

double hamming(std::size_t n, std::size_t len) {
  return 0.54 - 0.46 * std::cos(2.0 * kPi * double(n) / double(len - 1));
}

// ideal low-pass impulse response at offset m from the center
double sinc_lowpass(double cutoff, double fs, double m) {
  const double wc = 2.0 * cutoff / fs;
  if (m == 0.0) return wc;
  return std::sin(kPi * wc * m) / (kPi * m);
}

}  // namespace

FirFilter design_bandpass(double low, double high, double fs) {
  if (!(fs > 0.0 && low > 0.0 && high > low && high < fs / 2.0))
    throw ContractError("design_bandpass: need 0 < low < high < fs/2");
  FirFilter f;
  f.low = low;
  f.high = high;
  f.fs = fs;
  f.low_transition = std::min(std::max(0.25 * low, 2.0), low);
  f.high_transition = std::min(std::max(0.25 * high, 2.0), fs / 2.0 - high);
  const double width = std::min(f.low_transition, f.high_transition);
  auto len = static_cast<std::size_t>(std::ceil(3.3 * fs / width - 1e-9));
  if (len % 2 == 0) ++len;
  const double lo_cut = low - f.low_transition / 2.0;
  const double hi_cut = high + f.high_transition / 2.0;
  f.taps.resize(len);
  const double center = double(len - 1) / 2.0;
  for (std::size_t n = 0; n < len; ++n) {
    const double m = double(n) - center;
    f.taps[n] = hamming(n, len) * (sinc_lowpass(hi_cut, fs, m) - sinc_lowpass(lo_cut, fs, m));
  }
  // enforce exact symmetry against rounding in the window evaluation
  for (std::size_t n = 0; n < len / 2; ++n) {
    const double avg = 0.5 * (f.taps[n] + f.taps[len - 1 - n]);
    f.taps[n] = f.taps[len - 1 - n] = avg;
  }
  return f;
}

double magnitude_response(const FirFilter& filter, double freq) {
  std::complex<double> h{0.0, 0.0};
  const double w = 2.0 * kPi * freq / filter.fs;
  for (std::size_t n = 0; n < filter.taps.size(); ++n)
    h += filter.taps[n] * std::polar(1.0, -w * double(n));
  return std::abs(h);
}

double zero_phase_response(const FirFilter& filter, double freq) {
  const double m = magnitude_response(filter, freq);
  return m * m;
}

std::vector<double> filtfilt(std::span<const double> x, const FirFilter& filter) {
  const std::size_t n = x.size(), taps = filter.taps.size();
  if (taps == 0) throw ContractError("filtfilt: empty filter");
  if (n <= 3 * taps)
    throw ContractError("filtfilt: signal of " + std::to_string(n) +
                        " samples is too short for a " + std::to_string(taps) +
                        "-tap filter (need > " + std::to_string(3 * taps) + ")");
  const std::size_t pad = taps;
  const std::size_t m = n + 2 * pad;
  // forward then reversed pass of a length-L FIR equals circular filtering
  // by |H|^2 when the transform is long enough to hold the two-sided tail
  RealFft fft(next_pow2(m + 2 * taps));
  double* buf = fft.real();
  std::fill(buf, buf + fft.size(), 0.0);
  for (std::size_t i = 0; i < pad; ++i) {
    buf[i] = 2.0 * x[0] - x[pad - i];
    buf[pad + n + i] = 2.0 * x[n - 1] - x[n - 2 - i];
  }
  std::copy(x.begin(), x.end(), buf + pad);
  fft.forward();
  std::vector<std::complex<double>> spectrum(fft.bins());
  for (std::size_t k = 0; k < fft.bins(); ++k)
    spectrum[k] = {fft.cplx()[k][0], fft.cplx()[k][1]};

  RealFft hfft(fft.size());
  std::fill(hfft.real(), hfft.real() + hfft.size(), 0.0);
  std::copy(filter.taps.begin(), filter.taps.end(), hfft.real());
  hfft.forward();
  for (std::size_t k = 0; k < fft.bins(); ++k) {
    const double re = hfft.cplx()[k][0], im = hfft.cplx()[k][1];
    const double gain = (re * re + im * im) / double(fft.size());
    fft.cplx()[k][0] = spectrum[k].real() * gain;
    fft.cplx()[k][1] = spectrum[k].imag() * gain;
  }
  fft.inverse();
  return std::vector<double>(buf + pad, buf + pad + n);
}

TensorD filtfilt(const TensorD& signal, const FirFilter& filter) {
  require(signal.rank() == 2, "filtfilt: expected [C x N]");
  const std::size_t c = signal.dim(0), n = signal.dim(1);
  TensorD out(signal.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    const auto y = filtfilt(std::span<const double>(signal.data() + ch * n, n), filter);
    std::copy(y.begin(), y.end(), out.data() + ch * n);
  }
  return out;
}

TensorF filtfilt(const TensorF& signal, const FirFilter& filter) {
  require(signal.rank() == 2, "filtfilt: expected [C x N]");
  const std::size_t c = signal.dim(0), n = signal.dim(1);
  TensorF out(signal.shape());
  std::vector<double> row(n);
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::copy_n(signal.data() + ch * n, n, row.begin());
    const auto y = filtfilt(row, filter);
    for (std::size_t i = 0; i < n; ++i) out[ch * n + i] = static_cast<float>(y[i]);
  }
  return out;
}

const std::vector<BandDefinition>& standard_bands() {
  static const std::vector<BandDefinition> bands = {
      {Band::kDelta, "delta", 0.5, 4.0, false},
      {Band::kTheta, "theta", 4.0, 7.0, false},
      {Band::kAlpha, "alpha", 8.0, 12.0, false},
      {Band::kBeta, "beta", 13.0, 30.0, false},
      {Band::kGamma, "gamma", 30.0, 45.0, true},
  };
  return bands;
}

const BandDefinition& band_definition(Band b) {
  return standard_bands().at(static_cast<std::size_t>(b));
}

PsdEstimate welch_psd(const TensorD& signal, double fs, std::size_t segment, double overlap) {
  require(signal.rank() == 2, "welch_psd: expected [C x N]");
  require(segment >= 2, "welch_psd: segment too short");
  require(overlap >= 0.0 && overlap < 1.0, "welch_psd: overlap must be in [0, 1)");
  const std::size_t c = signal.dim(0), n = signal.dim(1);
  if (n < segment)
    throw ContractError("welch_psd: " + std::to_string(n) + " samples is shorter than one " +
                        std::to_string(segment) + "-sample segment");
  const auto noverlap = static_cast<std::size_t>(std::floor(overlap * double(segment)));
  const std::size_t step = segment - noverlap;
  const std::size_t nseg = (n - segment) / step + 1;

  std::vector<double> win(segment);
  double wss = 0.0;
  for (std::size_t i = 0; i < segment; ++i) {
    win[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * double(i) / double(segment));
    wss += win[i] * win[i];
  }
  RealFft fft(segment);
  const std::size_t bins = fft.bins();
  PsdEstimate psd;
  psd.segment = segment;
  psd.overlap = noverlap;
  psd.window = "hann";
  psd.df = fs / double(segment);
  for (std::size_t k = 0; k < bins; ++k) psd.freqs.push_back(double(k) * psd.df);
  psd.power = TensorD({c, bins});
  const double scale = 1.0 / (fs * wss * double(nseg));
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* x = signal.data() + ch * n;
    double* p = psd.power.data() + ch * bins;
    for (std::size_t s = 0; s < nseg; ++s) {
      const double* seg = x + s * step;
      double mean = 0.0;
      for (std::size_t i = 0; i < segment; ++i) mean += seg[i];
      mean /= double(segment);
      for (std::size_t i = 0; i < segment; ++i) fft.real()[i] = (seg[i] - mean) * win[i];
      fft.forward();
      for (std::size_t k = 0; k < bins; ++k) {
        const double re = fft.cplx()[k][0], im = fft.cplx()[k][1];
        p[k] += (re * re + im * im) * scale;
      }
    }
    const std::size_t last = segment % 2 == 0 ? bins - 1 : bins;
    for (std::size_t k = 1; k < last; ++k) p[k] *= 2.0;
  }
  return psd;
}

std::vector<double> band_power(const PsdEstimate& psd, const BandDefinition& band) {
  const std::size_t c = psd.power.dim(0), bins = psd.freqs.size();
  std::vector<double> out(c, 0.0);
  std::size_t hits = 0;
  for (std::size_t k = 0; k < bins; ++k) {
    const double f = psd.freqs[k];
    const bool in = f >= band.low && (band.include_high ? f <= band.high : f < band.high);
    if (!in) continue;
    ++hits;
    for (std::size_t ch = 0; ch < c; ++ch) out[ch] += psd.power[ch * bins + k] * psd.df;
  }
  if (hits == 0)
    throw ContractError("band_power: band '" + band.name + "' contains no PSD bins");
  return out;
}

std::vector<double> total_power(const PsdEstimate& psd) {
  const std::size_t c = psd.power.dim(0), bins = psd.freqs.size();
  std::vector<double> out(c, 0.0);
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t k = 0; k < bins; ++k) out[ch] += psd.power[ch * bins + k] * psd.df;
  return out;
}

}  // namespace nstate
