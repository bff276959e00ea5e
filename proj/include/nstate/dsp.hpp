#pragma once

#include <span>
#include <string>
#include <vector>

#include "nstate/tensor.hpp"

namespace nstate {

// Linear-phase windowed-sinc (Hamming) band-pass.
struct FirFilter {
  std::vector<double> taps;
  double low = 0.0, high = 0.0;
  double low_transition = 0.0, high_transition = 0.0;
  double fs = 0.0;
};

// Transition widths: low edge min(max(0.25*low, 2), low), high edge
// min(max(0.25*high, 2), fs/2 - high). Length ceil(3.3*fs/min_width) made
// odd; cutoffs sit at the middle of each transition band.
FirFilter design_bandpass(double low = 1.0, double high = 45.0, double fs = 250.0);

// |H(f)| of a single pass.
double magnitude_response(const FirFilter& filter, double freq);
// Effective magnitude of forward-backward filtering, |H(f)|^2.
double zero_phase_response(const FirFilter& filter, double freq);

// Forward-backward filtering of each row with reflective padding of one
// filter length at both ends. Requires N > 3 * taps.
std::vector<double> filtfilt(std::span<const double> signal, const FirFilter& filter);
TensorD filtfilt(const TensorD& signal, const FirFilter& filter);
TensorF filtfilt(const TensorF& signal, const FirFilter& filter);

enum class Band { kDelta, kTheta, kAlpha, kBeta, kGamma };

struct BandDefinition {
  Band band;
  std::string name;
  double low = 0.0, high = 0.0;
  bool include_high = false;  // gamma is closed at the filter edge
};

const std::vector<BandDefinition>& standard_bands();
const BandDefinition& band_definition(Band b);

struct PsdEstimate {
  std::vector<double> freqs;  // Hz, 0 .. fs/2
  TensorD power;              // [C x F], uV^2/Hz
  double df = 0.0;
  std::size_t segment = 0;
  std::size_t overlap = 0;
  std::string window;
};

// Welch estimate: Hann-windowed, mean-removed segments, one-sided density.
PsdEstimate welch_psd(const TensorD& signal, double fs = 250.0, std::size_t segment = 250,
                      double overlap = 0.5);

// Rectangle-rule integral of the PSD over a band; one value per channel.
std::vector<double> band_power(const PsdEstimate& psd, const BandDefinition& band);
// Integral over the whole grid [0, fs/2].
std::vector<double> total_power(const PsdEstimate& psd);

}  // namespace nstate
