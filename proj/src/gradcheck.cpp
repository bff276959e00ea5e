#include "nstate/gradcheck.hpp"

#include <cmath>
#include <string>

namespace nstate {

TensorD finite_diff_grad(const std::function<double(const TensorD&)>& f,
                         const TensorD& x, double eps) {
  require(eps > 0.0, "finite_diff_grad: eps must be positive");
  require(x.all_finite(), "finite_diff_grad: x must be finite");
  if (!std::isfinite(f(x)))
    throw NumericError("finite_diff_grad: f(x) is not finite");
  TensorD probe = x;
  TensorD grad(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double fp = f(probe);
    probe[i] = orig - eps;
    const double fm = f(probe);
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw NumericError("finite_diff_grad: f not finite at probe " +
                         std::to_string(i));
    grad[i] = (fp - fm) / (2.0 * eps);
  }
  return grad;
}

double max_rel_error(const TensorD& a, const TensorD& b, double floor) {
  require(a.shape() == b.shape(), "max_rel_error: shape mismatch " +
                                      shape_str(a.shape()) + " vs " +
                                      shape_str(b.shape()));
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double den = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / den);
  }
  return worst;
}

}  // namespace nstate
