#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nstate/data.hpp"
#include "nstate/tensor.hpp"

namespace nstate {

using Vec3 = std::array<double, 3>;

inline constexpr const char* kCogn26Name = "COGN-26";

// The 26 cognitive electrodes of the 256-channel net.
const std::vector<std::string>& cogn26_channels();

struct Montage {
  std::vector<std::string> names;
  std::vector<Vec3> positions;  // unit vectors
  std::map<std::string, std::vector<std::string>> subsets;

  std::size_t size() const { return names.size(); }
  bool contains(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;
  const Vec3& position(const std::string& name) const { return positions[index_of(name)]; }
  void add_channel(const std::string& name, const Vec3& p);  // normalizes p
  void add_subset(const std::string& name, std::vector<std::string> members);
  // Registers COGN-26 when every member is present; returns whether it did.
  bool register_cogn26();
  // Montage restricted to the given channels, in that order.
  Montage select(const std::vector<std::string>& channels) const;
  void validate() const;
};

// CSV with header `name,x,y,z`.
Montage load_montage(const std::filesystem::path& path);
void save_montage(const std::filesystem::path& path, const Montage& m);

// n points spread evenly over the unit sphere (golden-angle spiral).
std::vector<Vec3> fibonacci_sphere(std::size_t n);

// Synthetic stand-in for the 256-channel net: Fibonacci-sphere geometry with
// the COGN-26 names on the 26 points nearest a posterior pole and E-names
// elsewhere. For channels < 256 the montage keeps the points nearest the pole
// (so it always contains COGN-26 when channels >= 26).
Montage synthetic_montage(std::size_t channels = 256);
Vec3 posterior_pole();

// Perrin spherical-spline kernel g(x) = 1/(4 pi) sum (2n+1)/(n(n+1))^m P_n(x).
double spline_g(double cosine, int stiffness = 4, int n_terms = 50);

// Linear map [targets x sources] taking source values to interpolated values
// at the targets. Solved once per geometry from the bordered system
// [[G + ridge I, 1], [1^T, 0]].
struct SplineOptions {
  int stiffness = 4;
  int n_terms = 50;
  double ridge = 1e-5;
};

std::vector<double> spline_weights(const std::vector<Vec3>& sources,
                                   const std::vector<Vec3>& targets,
                                   const SplineOptions& opts = {});

// good_data [G x N] -> [B x N].
TensorD spline_interpolate(const std::vector<Vec3>& good_positions, const TensorD& good_data,
                           const std::vector<Vec3>& target_positions,
                           const SplineOptions& opts = {});

// Replaces the named channels of a recording by interpolation from the rest.
Recording interpolate_channels(const Recording& rec, const Montage& montage,
                               const std::vector<std::string>& bad);

// Per-column median of a row-major [rows x len] block (mean of the two
// middle values for even rows). Used for the RANSAC consensus prediction.
void column_median(const double* data, std::size_t rows, std::size_t len, double* out);

struct RansacParams {
  std::size_t n_resamples = 50;
  double subset_fraction = 0.25;
  double window_seconds = 5.0;
  double correlation_threshold = 0.75;
  double bad_window_fraction = 0.4;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RansacResult {
  std::vector<std::string> bad;                 // montage order of the recording
  std::vector<double> bad_window_fraction;      // per recording channel
  std::size_t windows = 0;
};

RansacResult ransac_detect(const Recording& rec, const Montage& montage,
                           const RansacParams& params);
std::vector<std::string> ransac_bad_channels(const Recording& rec, const Montage& montage,
                                             const RansacParams& params);

}  // namespace nstate
