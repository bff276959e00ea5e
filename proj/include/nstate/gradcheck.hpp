#pragma once

#include <functional>

#include "nstate/tensor.hpp"

namespace nstate {

inline constexpr double kGradCheckEps = 1e-5;

// Central-difference gradient of a scalar function. Throws NumericError when
// f is non-finite at x or at any probe point.
TensorD finite_diff_grad(const std::function<double(const TensorD&)>& f,
                         const TensorD& x, double eps = kGradCheckEps);

// Max over elements of |a-b| / max(|a|, |b|, floor).
double max_rel_error(const TensorD& a, const TensorD& b, double floor = 1e-8);

}  // namespace nstate
