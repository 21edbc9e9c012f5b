#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "acne/tensor.hpp"

namespace acne {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::size_t worst_tensor = 0;
  std::size_t worst_index = 0;
};

namespace detail {
inline double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}
}  // namespace detail

// Central-difference check of a scalar-valued function of several tensors.
// `f` must evaluate the same expression whether or not its inputs are taped.
// Runs in 64-bit; 32-bit finite differences are too noisy to be meaningful.
template <typename F>
GradCheckResult grad_check_many(F f, const std::vector<Tensor<double>>& xs,
                                double eps = 1e-5) {
  Tape<double> tape;
  std::vector<Tensor<double>> vars;
  vars.reserve(xs.size());
  for (const auto& x : xs) vars.push_back(tape.var(x));
  Tensor<double> loss = f(vars);
  tape.backward(loss);
  std::vector<Tensor<double>> analytic;
  analytic.reserve(vars.size());
  for (const auto& v : vars) analytic.push_back(tape.grad(v));

  GradCheckResult result;
  std::vector<Tensor<double>> probe = xs;
  for (std::size_t t = 0; t < xs.size(); ++t) {
    for (std::size_t i = 0; i < xs[t].size(); ++i) {
      const double orig = probe[t].data()[i];
      probe[t].mutable_data()[i] = orig + eps;
      const double fp = f(probe).value();
      probe[t].mutable_data()[i] = orig - eps;
      const double fm = f(probe).value();
      probe[t].mutable_data()[i] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double err = detail::rel_err(analytic[t].data()[i], numeric);
      if (err > result.max_rel_err) {
        result.max_rel_err = err;
        result.worst_tensor = t;
        result.worst_index = i;
      }
    }
  }
  return result;
}

// Single-input convenience wrapper; returns the max relative error
// |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
template <typename F>
GradCheckResult grad_check(F f, const Tensor<double>& x, double eps = 1e-5) {
  return grad_check_many(
      [&f](const std::vector<Tensor<double>>& xs) { return f(xs[0]); },
      {x}, eps);
}

}  // namespace acne
