#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "acne/config.hpp"
#include "acne/geometry.hpp"
#include "acne/layers.hpp"
#include "acne/rng.hpp"
#include "acne/tensor.hpp"

namespace acne {

enum class KernelKind { cauchy, geman_mcclure, huber };

// Classical IRLS kernel. With mad_rescale the scale follows
// s = 1.4826 * median(|r|), refreshed every iteration.
struct IRLSKernel {
  KernelKind kind = KernelKind::cauchy;
  double scale = 1.0;
  bool mad_rescale = true;
};

namespace detail {

inline double kernel_weight(const IRLSKernel& kernel, double r, double s) {
  const double q = r / s;
  switch (kernel.kind) {
    case KernelKind::cauchy:
      return 1.0 / (1.0 + q * q);
    case KernelKind::geman_mcclure:
      return 1.0 / ((1.0 + q * q) * (1.0 + q * q));
    case KernelKind::huber:
      return r <= s ? 1.0 : s / r;
  }
  return 1.0;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double hi = v[mid];
  if (v.size() % 2 == 0) {
    const double lo = *std::max_element(v.begin(), v.begin() + mid);
    return (lo + hi) / 2.0;
  }
  return hi;
}

}  // namespace detail

struct IrlsResult {
  LineParams line;
  std::vector<double> weights;  // final unit-L1 weights
  bool degenerate = false;
};

// Alternate residual computation, kernel reweighting and weighted refits.
inline IrlsResult irls_fit_line(const Tensor<double>& points,
                                const IRLSKernel& kernel, std::size_t iters,
                                const std::optional<LineParams>& init =
                                    std::nullopt) {
  if (iters < 1) throw ConfigError("irls_fit_line: iters must be >= 1");
  const std::size_t n = points.shape()[0];
  const Tensor<double> uniform =
      Tensor<double>::full({n}, 1.0 / static_cast<double>(n));
  IrlsResult result;
  result.weights.assign(n, 1.0 / static_cast<double>(n));
  LineParams theta =
      init ? *init : line_from_tensor(fit_line(points, uniform));
  std::vector<double> residuals(n);
  for (std::size_t it = 0; it < iters; ++it) {
    for (std::size_t i = 0; i < n; ++i)
      residuals[i] =
          line_point_distance(theta, points(i, 0), points(i, 1));
    const double s =
        kernel.mad_rescale
            ? std::max(1.4826 * detail::median(residuals), 1e-12)
            : kernel.scale;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      sum += (result.weights[i] = detail::kernel_weight(kernel, residuals[i], s));
    if (sum <= 0.0) {
      result.degenerate = true;
      break;
    }
    for (auto& w : result.weights) w /= sum;
    try {
      theta = line_from_tensor(
          fit_line(points, Tensor<double>({n}, result.weights)));
    } catch (const NumericError&) {
      result.degenerate = true;
      break;
    }
  }
  result.line = theta;
  return result;
}

// ---------------------------------------------------------------------------
// Learnt IRLS (residual-to-weight MLP shared across unrolled iterations)

template <typename T>
struct LearntIrlsParams {
  Perceptron<T> layer1;  // [h x 1]
  Perceptron<T> layer2;  // [1 x h]
};

template <typename T, typename Fn>
void for_each_param(LearntIrlsParams<T>& params, Fn&& fn) {
  fn("kernel.l1.weight", params.layer1.weight);
  fn("kernel.l1.bias", params.layer1.bias);
  fn("kernel.l2.weight", params.layer2.weight);
  fn("kernel.l2.bias", params.layer2.bias);
}

// The output layer starts at zero: sigmoid(0) = 0.5 everywhere, so an
// untrained kernel reproduces the uniform least-squares fit.
template <typename T>
LearntIrlsParams<T> init_learnt_irls(std::size_t hidden, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x1815));
  std::vector<T> w1(hidden);
  for (auto& v : w1) v = static_cast<T>(rng.gaussian(0.0, 1.0));
  LearntIrlsParams<T> params;
  params.layer1 = {Tensor<T>({hidden, 1}, std::move(w1)),
                   Tensor<T>::zeros({hidden})};
  params.layer2 = {Tensor<T>::zeros({1, hidden}), Tensor<T>::zeros({1})};
  return params;
}

template <typename T>
struct LearntIrlsResult {
  Tensor<T> theta;                        // [3], unit norm
  std::vector<Tensor<T>> unit_weights;    // per-iteration unit-L1 weights
  std::vector<Tensor<T>> sigmoid_scores;  // per-iteration raw kernel outputs
};

namespace detail {

// Median of a taped vector: the order statistic is located on detached
// values, the returned scalar stays differentiable through the picked
// element(s).
template <typename T>
Tensor<T> differentiable_median(const Tensor<T>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return v.data()[a] < v.data()[b];
  });
  std::vector<T> mask(n, T(0));
  if (n % 2 == 1) {
    mask[order[n / 2]] = T(1);
  } else {
    mask[order[n / 2 - 1]] += T(0.5);
    mask[order[n / 2]] += T(0.5);
  }
  return total_sum(mul(v, Tensor<T>(v.shape(), std::move(mask))));
}

}  // namespace detail

// Residual -> weight mapping through the shared 2-layer MLP, unrolled
// end-to-end. Residuals are normalized by their batch median.
template <typename T>
LearntIrlsResult<T> learnt_irls_forward(const Tensor<T>& points,
                                        const LearntIrlsParams<T>& params,
                                        std::size_t unroll) {
  if (unroll < 2) throw ConfigError("learnt_irls_forward: unroll must be >= 2");
  const std::size_t n = points.shape()[0];
  const Tensor<T> uniform = Tensor<T>::full({n}, T(1) / static_cast<T>(n));
  Tensor<T> pbar;
  {
    std::vector<T> h(n * 3);
    for (std::size_t i = 0; i < n; ++i) {
      h[i * 3] = points(i, 0);
      h[i * 3 + 1] = points(i, 1);
      h[i * 3 + 2] = T(1);
    }
    pbar = Tensor<T>({n, 3}, std::move(h));
  }
  const Tensor<T> ab_mask({3}, {T(1), T(1), T(0)});

  LearntIrlsResult<T> result;
  Tensor<T> theta = fit_line(points, uniform);
  for (std::size_t it = 0; it < unroll; ++it) {
    Tensor<T> signed_resid =
        reshape(matmul(pbar, reshape(theta, {3, 1})), {n});
    Tensor<T> ab_norm = vsqrt(total_sum(square(mul(theta, ab_mask))));
    Tensor<T> resid = div(vabs(signed_resid), ab_norm);
    Tensor<T> med = add_scalar(detail::differentiable_median(resid),
                               static_cast<T>(1e-9));
    Tensor<T> scaled = div(resid, med);
    Tensor<T> hidden =
        relu(perceptron_apply(params.layer1, reshape(scaled, {n, 1})));
    Tensor<T> scores =
        sigmoid(reshape(perceptron_apply(params.layer2, hidden), {n}));
    Tensor<T> w = blend_weights<T>(scores, std::nullopt);
    theta = fit_line(points, w);
    result.sigmoid_scores.push_back(std::move(scores));
    result.unit_weights.push_back(std::move(w));
  }
  result.theta = theta;
  return result;
}

// 200 samples of the learnt residual->weight curve over [0, 3].
template <typename T>
std::vector<std::pair<double, double>> learnt_kernel_curve(
    const LearntIrlsParams<T>& params, std::size_t samples = 200,
    double max_residual = 3.0) {
  std::vector<std::pair<double, double>> curve;
  curve.reserve(samples);
  for (std::size_t i = 0; i < samples; ++i) {
    const double r = max_residual * double(i) / double(samples - 1);
    Tensor<T> rt({1, 1}, {static_cast<T>(r)});
    auto hidden = relu(perceptron_apply(params.layer1, rt));
    auto score = sigmoid(reshape(perceptron_apply(params.layer2, hidden), {1}));
    curve.emplace_back(r, static_cast<double>(score.value()));
  }
  return curve;
}

// ---------------------------------------------------------------------------
// RANSAC line fitting (oracle baseline)

struct RansacResult {
  LineParams line;
  std::vector<std::uint8_t> inliers;
  std::size_t inlier_count = 0;
};

// Classic 2-point hypothesis sampling; ties keep the first-found model;
// the winner gets a uniform least-squares refit on its inliers.
inline RansacResult ransac_line(const Tensor<double>& points, double threshold,
                                std::size_t max_iters, std::uint64_t seed) {
  const std::size_t n = points.shape()[0];
  if (n < 2) throw ShapeError("ransac_line: need at least 2 points");
  Rng rng(seed);
  RansacResult best;
  best.inliers.assign(n, 0);
  for (std::size_t it = 0; it < max_iters; ++it) {
    const std::size_t i = rng.below(n);
    const std::size_t j = rng.below(n);
    if (i == j) continue;
    const double dx = points(j, 0) - points(i, 0);
    const double dy = points(j, 1) - points(i, 1);
    if (dx * dx + dy * dy < 1e-20) continue;
    LineParams hyp;
    hyp.theta = {-dy, dx,
                 dy * points(i, 0) - dx * points(i, 1)};
    double norm = 0.0;
    for (double v : hyp.theta) norm += v * v;
    norm = std::sqrt(norm);
    for (auto& v : hyp.theta) v /= norm;
    std::size_t count = 0;
    for (std::size_t k = 0; k < n; ++k)
      if (line_point_distance(hyp, points(k, 0), points(k, 1)) < threshold)
        ++count;
    if (count > best.inlier_count) {
      best.inlier_count = count;
      best.line = hyp;
      for (std::size_t k = 0; k < n; ++k)
        best.inliers[k] =
            line_point_distance(hyp, points(k, 0), points(k, 1)) < threshold
                ? 1
                : 0;
    }
  }
  if (best.inlier_count < 2)
    throw NumericError("ransac_line: no model with >= 2 inliers");
  std::vector<double> w(n, 0.0);
  for (std::size_t k = 0; k < n; ++k)
    if (best.inliers[k]) w[k] = 1.0 / double(best.inlier_count);
  best.line = line_from_tensor(fit_line(points, Tensor<double>({n}, w)));
  return best;
}

// Fully-specified architecture presets for every in-scope variant.
NetworkConfig baseline_preset(const std::string& name);

}  // namespace acne
