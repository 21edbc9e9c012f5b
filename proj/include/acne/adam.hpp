#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "acne/error.hpp"
#include "acne/tensor.hpp"

namespace acne {

// Standard bias-corrected Adam. Moment buffers mirror the parameter shapes
// and are allocated on the first step.
template <typename T>
struct AdamState {
  T lr = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  std::size_t step = 0;
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
};

template <typename T>
void adam_step(std::vector<Tensor<T>*>& params,
               const std::vector<Tensor<T>>& grads, AdamState<T>& state) {
  if (params.size() != grads.size())
    throw ShapeError("adam_step: " + std::to_string(params.size()) +
                     " params vs " + std::to_string(grads.size()) + " grads");
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i]->size(), T(0));
      state.v[i].assign(params[i]->size(), T(0));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->size() != grads[i].size())
      throw ShapeError("adam_step: gradient shape mismatch at slot " +
                       std::to_string(i));
    for (const T g : grads[i].data())
      if (!std::isfinite(g))
        throw NumericError("adam_step: non-finite gradient at step " +
                           std::to_string(state.step + 1));
  }
  state.step += 1;
  const T bc1 = T(1) - std::pow(state.beta1, static_cast<T>(state.step));
  const T bc2 = T(1) - std::pow(state.beta2, static_cast<T>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i]->mutable_data();
    const auto& g = grads[i].data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = state.beta1 * m[j] + (T(1) - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (T(1) - state.beta2) * g[j] * g[j];
      const T mhat = m[j] / bc1;
      const T vhat = v[j] / bc2;
      p[j] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace acne
