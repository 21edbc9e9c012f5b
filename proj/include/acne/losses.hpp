#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "acne/config.hpp"
#include "acne/geometry.hpp"
#include "acne/tensor.hpp"

namespace acne {

// Average binary cross entropy against hard labels. Scores are clamped to
// [eps, 1-eps] with eps = 1e-7. Supervision targets the pre-eta sigmoid
// scores, which live in (0,1); the unit-L1 blended weights do not.
template <typename T>
Tensor<T> bce(const std::vector<std::uint8_t>& y, const Tensor<T>& w) {
  if (y.size() != w.size())
    throw ShapeError("bce: " + std::to_string(y.size()) + " labels vs " +
                     std::to_string(w.size()) + " scores");
  constexpr T eps = T(1e-7);
  Tensor<T> wc = clamp(w, eps, T(1) - eps);
  std::vector<T> yv(y.size()), ynv(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    yv[i] = y[i] ? T(1) : T(0);
    ynv[i] = y[i] ? T(0) : T(1);
  }
  Tensor<T> yt(w.shape(), std::move(yv));
  Tensor<T> ynt(w.shape(), std::move(ynv));
  Tensor<T> one_minus = add_scalar(mul_scalar(wc, T(-1)), T(1));
  Tensor<T> ll = add(mul(yt, vlog(wc)), mul(ynt, vlog(one_minus)));
  return mul_scalar(total_mean(ll), T(-1));
}

// min(||v - v*||^2, ||v + v*||^2); the subgradient follows the winning
// branch and ties resolve to the '+' branch.
template <typename T>
Tensor<T> sign_min_l2(const Tensor<T>& v, const Tensor<T>& vstar) {
  if (v.size() != vstar.size())
    throw ShapeError("sign_min_l2: length mismatch");
  T dplus = T(0), dminus = T(0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    const T a = v.data()[i], b = vstar.data()[i];
    dplus += (a + b) * (a + b);
    dminus += (a - b) * (a - b);
  }
  const Tensor<T> target = vstar.detached();
  if (dplus <= dminus) return total_sum(square(add(v, target)));
  return total_sum(square(sub(v, target)));
}

template <typename T>
struct LossTerms {
  Tensor<T> total;
  double alpha_term = 0.0;  // weighted contribution of each component
  double beta_term = 0.0;
  double gamma_term = 0.0;
};

// Eq. alpha * signmin(theta_hat, theta*) + beta * BCE(y, final local scores).
template <typename T>
LossTerms<T> loss_line_fitting(const Tensor<T>& theta_hat,
                               const std::array<double, 3>& theta_star,
                               const std::optional<Tensor<T>>& local_scores,
                               const std::vector<std::uint8_t>& y,
                               const LossWeights& lw) {
  Tensor<T> star({3}, {static_cast<T>(theta_star[0]),
                       static_cast<T>(theta_star[1]),
                       static_cast<T>(theta_star[2])});
  LossTerms<T> terms;
  Tensor<T> total = Tensor<T>::scalar(T(0));
  if (lw.alpha > 0.0) {
    Tensor<T> fit = mul_scalar(sign_min_l2(theta_hat, star),
                               static_cast<T>(lw.alpha));
    terms.alpha_term = static_cast<double>(fit.value());
    total = add(total, fit);
  }
  if (lw.beta > 0.0 && local_scores) {
    Tensor<T> guide =
        mul_scalar(bce(y, *local_scores), static_cast<T>(lw.beta));
    terms.beta_term = static_cast<double>(guide.value());
    total = add(total, guide);
  }
  terms.total = total;
  return terms;
}

template <typename T>
LossTerms<T> loss_line_fitting(const Tensor<T>& theta_hat,
                               const std::array<double, 3>& theta_star,
                               const Tensor<T>& local_scores,
                               const std::vector<std::uint8_t>& y,
                               const LossWeights& lw) {
  return loss_line_fitting(theta_hat, theta_star,
                           std::optional<Tensor<T>>(local_scores), y, lw);
}

// Cross entropy H(y, softmax(logits)) for a single cloud.
template <typename T>
Tensor<T> loss_classification(const Tensor<T>& logits, std::size_t class_id) {
  const std::size_t ncls = logits.size();
  if (class_id >= ncls)
    throw ShapeError("loss_classification: class " + std::to_string(class_id) +
                     " out of range for " + std::to_string(ncls));
  std::vector<T> onehot(ncls, T(0));
  onehot[class_id] = T(1);
  Tensor<T> probs = softmax_axis(logits, 0);
  Tensor<T> picked = total_sum(mul(probs, Tensor<T>({ncls}, onehot)));
  return mul_scalar(vlog(picked), T(-1));
}

// Eq. alpha(step) * signmin_F + beta * BCE(final) + gamma * mean_k BCE(w_k).
// The alpha term contributes exactly zero before alpha_enable_step.
template <typename T>
LossTerms<T> loss_stereo(const Tensor<T>& f_hat,
                         const std::array<double, 9>& f_star,
                         const std::optional<Tensor<T>>& final_local,
                         const std::vector<Tensor<T>>& intermediate_locals,
                         const std::vector<std::uint8_t>& y,
                         const LossWeights& lw, std::size_t step) {
  LossTerms<T> terms;
  Tensor<T> total = Tensor<T>::scalar(T(0));
  if (lw.alpha > 0.0 && step >= lw.alpha_enable_step) {
    std::vector<T> fs(9);
    for (int i = 0; i < 9; ++i) fs[i] = static_cast<T>(f_star[i]);
    Tensor<T> flat = reshape(f_hat, {9});
    Tensor<T> fit = mul_scalar(sign_min_l2(flat, Tensor<T>({9}, fs)),
                               static_cast<T>(lw.alpha));
    terms.alpha_term = static_cast<double>(fit.value());
    total = add(total, fit);
  }
  if (lw.beta > 0.0 && final_local) {
    Tensor<T> guide = mul_scalar(bce(y, *final_local), static_cast<T>(lw.beta));
    terms.beta_term = static_cast<double>(guide.value());
    total = add(total, guide);
  }
  if (lw.gamma > 0.0 && !intermediate_locals.empty()) {
    Tensor<T> acc = Tensor<T>::scalar(T(0));
    for (const auto& wk : intermediate_locals) acc = add(acc, bce(y, wk));
    Tensor<T> guide = mul_scalar(
        acc, static_cast<T>(lw.gamma / static_cast<double>(
                                           intermediate_locals.size())));
    terms.gamma_term = static_cast<double>(guide.value());
    total = add(total, guide);
  }
  terms.total = total;
  return terms;
}

template <typename T>
LossTerms<T> loss_stereo(const Tensor<T>& f_hat,
                         const std::array<double, 9>& f_star,
                         const Tensor<T>& final_local,
                         const std::vector<Tensor<T>>& intermediate_locals,
                         const std::vector<std::uint8_t>& y,
                         const LossWeights& lw, std::size_t step) {
  return loss_stereo(f_hat, f_star, std::optional<Tensor<T>>(final_local),
                     intermediate_locals, y, lw, step);
}

// ---------------------------------------------------------------------------
// Evaluation metrics

struct ClassifierTally {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const {
    return total ? static_cast<double>(correct) / static_cast<double>(total)
                 : 0.0;
  }
};

struct InlierScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Precision/recall/F1 of thresholded scores against binary labels.
inline InlierScores inlier_prf(const std::vector<double>& scores,
                               const std::vector<std::uint8_t>& y,
                               double threshold = 0.5) {
  if (scores.size() != y.size())
    throw ShapeError("inlier_prf: length mismatch");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const bool pred = scores[i] > threshold;
    if (pred && y[i]) ++tp;
    if (pred && !y[i]) ++fp;
    if (!pred && y[i]) ++fn;
  }
  InlierScores out;
  out.precision = tp + fp ? static_cast<double>(tp) / (tp + fp) : 0.0;
  out.recall = tp + fn ? static_cast<double>(tp) / (tp + fn) : 0.0;
  out.f1 = (out.precision + out.recall) > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

}  // namespace acne
