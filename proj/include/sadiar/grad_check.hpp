#pragma once

// Finite-difference gradient verification. The analytic gradient from one
// reverse pass is compared coordinate-by-coordinate against central
// differences of the loss; the loss closure must rebuild its graph from the
// parameters' current values on every call.

#include <functional>
#include <vector>

#include "sadiar/tensor.hpp"

namespace sadiar::num {

struct GradCheckReport {
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  long coords = 0;
};

// rel err per coordinate: |analytic - numeric| / max(floor, |analytic| + |numeric|).
// The denominator floor guards coordinates whose true gradient is ~0, where
// central differences measure only rounding noise of the loss; a genuinely
// wrong gradient of any consequential magnitude still trips the ratio.
template <typename T>
GradCheckReport grad_check(const std::function<Tensor<T>()>& loss_fn,
                           std::vector<Tensor<T>> params, T eps = T(1e-5),
                           double denom_floor = 1e-4) {
  for (auto& p : params) {
    if (!p.requires_grad || !p.grad)
      throw InternalError("grad_check: parameter does not require grad");
    p.zero_grad();
  }
  Tensor<T> loss = loss_fn();
  backward(loss);
  std::vector<std::vector<T>> analytic;
  analytic.reserve(params.size());
  for (auto& p : params) analytic.push_back(*p.grad);

  const auto eval = [&]() -> double {
    NoGradGuard guard;
    return static_cast<double>(loss_fn().value());
  };

  GradCheckReport rep;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    std::vector<T>& vals = *params[pi].data;
    for (size_t j = 0; j < vals.size(); ++j) {
      const T orig = vals[j];
      const T h = eps * std::max(T(1), std::abs(orig));
      vals[j] = orig + h;
      const double up = eval();
      vals[j] = orig - h;
      const double down = eval();
      vals[j] = orig;
      const double numeric = (up - down) / (2.0 * double(h));
      const double a = static_cast<double>(analytic[pi][j]);
      const double abs_err = std::abs(a - numeric);
      const double rel =
          abs_err / std::max(denom_floor, std::abs(a) + std::abs(numeric));
      rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
      rep.max_rel_err = std::max(rep.max_rel_err, rel);
      rep.coords += 1;
    }
  }
  return rep;
}

}  // namespace sadiar::num
