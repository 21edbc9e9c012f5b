#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "acne/config.hpp"
#include "acne/rng.hpp"
#include "acne/tensor.hpp"

namespace acne {

// Shared perceptron applied row-wise: y_i = W f_i + b. One set of parameters
// per layer, every data point processed the same way.
template <typename T>
struct Perceptron {
  Tensor<T> weight;  // [out x in]
  Tensor<T> bias;    // [out]
};

template <typename T>
Tensor<T> perceptron_apply(const Perceptron<T>& layer, const Tensor<T>& f) {
  return add(matmul(f, transpose(layer.weight)), layer.bias);
}

template <typename T>
struct GroupNormParams {
  Tensor<T> gain;   // [C]
  Tensor<T> shift;  // [C]
};

template <typename T>
struct AcnUnitParams {
  Perceptron<T> main;
  std::optional<Perceptron<T>> attn_local;
  std::optional<Perceptron<T>> attn_global;
  std::optional<GroupNormParams<T>> gn;
};

template <typename T>
struct NetworkParams {
  Perceptron<T> input;
  std::vector<std::vector<AcnUnitParams<T>>> blocks;  // K x acn_per_arb
  std::optional<Perceptron<T>> out_local;
  std::optional<Perceptron<T>> out_global;
  std::optional<Perceptron<T>> head;  // classify head only
};

// ---------------------------------------------------------------------------
// Normalization primitives

// Weighted first/second moments across the N points. w must be a nonnegative
// unit-L1 vector; both outputs stay differentiable through f and w.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> weighted_moments(const Tensor<T>& f,
                                                 const Tensor<T>& w) {
  if (f.rank() != 2 || w.rank() != 1 || f.shape()[0] != w.shape()[0])
    throw ShapeError("weighted_moments: shapes " + shape_str(f.shape()) +
                     " and " + shape_str(w.shape()));
  if (f.shape()[0] == 0) throw ShapeError("weighted_moments: empty cloud");
  T sum = T(0);
  for (const T v : w.data()) {
    if (v < T(0)) throw NumericError("weighted_moments: negative weight");
    sum += v;
  }
  if (std::abs(sum - T(1)) > T(1e-3))
    throw NumericError("weighted_moments: weights must sum to 1, got " +
                       std::to_string(static_cast<double>(sum)));
  const std::size_t n = f.shape()[0];
  Tensor<T> wrow = reshape(w, {1, n});
  Tensor<T> mu = reshape(matmul(wrow, f), {f.shape()[1]});
  Tensor<T> centered = sub(f, mu);
  Tensor<T> var = reshape(matmul(wrow, square(centered)), {f.shape()[1]});
  return {mu, vsqrt(var)};
}

// ACN(f; w) = (f - mu_w(f)) / sigma_w(f), epsilon-guarded.
template <typename T>
Tensor<T> acn(const Tensor<T>& f, const Tensor<T>& w) {
  auto [mu, sigma] = weighted_moments(f, w);
  return div(sub(f, mu), sigma);
}

// Plain Context Normalization: ACN with uniform weights.
template <typename T>
Tensor<T> context_norm(const Tensor<T>& f) {
  if (f.rank() != 2) throw ShapeError("context_norm: expected [N x C]");
  const std::size_t n = f.shape()[0];
  if (n < 2) throw ShapeError("context_norm: context too small");
  return acn(f, Tensor<T>::full({n}, T(1) / static_cast<T>(n)));
}

template <typename T>
Tensor<T> local_attention(const Tensor<T>& f, const Perceptron<T>& layer) {
  const std::size_t n = f.shape()[0];
  return sigmoid(reshape(perceptron_apply(layer, f), {n}));
}

template <typename T>
Tensor<T> global_attention(const Tensor<T>& f, const Perceptron<T>& layer) {
  const std::size_t n = f.shape()[0];
  return softmax_axis(reshape(perceptron_apply(layer, f), {n}), 0);
}

// Element-wise product of whichever attentions are present, then
// eta(x) = x / (||x||_1 + eps). An all-zero product falls back to uniform.
template <typename T>
Tensor<T> blend_weights(const std::optional<Tensor<T>>& local,
                        const std::optional<Tensor<T>>& global_w) {
  if (!local && !global_w)
    throw ShapeError("blend_weights: at least one attention required");
  Tensor<T> prod = local ? (global_w ? mul(*local, *global_w) : *local)
                         : *global_w;
  for (const T v : prod.data())
    if (v < T(0)) throw NumericError("blend_weights: negative input");
  T sum = T(0);
  for (const T v : prod.data()) sum += v;
  const std::size_t n = prod.shape()[0];
  if (sum <= guard_eps<T>())
    return Tensor<T>::full({n}, T(1) / static_cast<T>(n));
  return div(prod, add_scalar(total_sum(prod), guard_eps<T>()));
}

// Group Normalization over (points x channels-in-group) per cloud, which
// keeps the statistics permutation-equivariant, followed by gain/shift.
// Group statistics are pooled and re-expanded through constant 0/1
// indicator matrices so every elementwise step runs on [N,C] vs [C].
template <typename T>
Tensor<T> group_norm(const Tensor<T>& f, std::size_t groups,
                     const Tensor<T>& gain, const Tensor<T>& shift) {
  if (f.rank() != 2) throw ShapeError("group_norm: expected [N x C]");
  const std::size_t n = f.shape()[0], c = f.shape()[1];
  if (groups == 0 || c % groups != 0)
    throw ShapeError("group_norm: channels " + std::to_string(c) +
                     " not divisible by groups " + std::to_string(groups));
  const std::size_t per = c / groups;
  std::vector<T> pool_v(c * groups, T(0));    // [C x G], mean over the group
  std::vector<T> expand_v(groups * c, T(0));  // [G x C], broadcast back
  for (std::size_t ch = 0; ch < c; ++ch) {
    const std::size_t g = ch / per;
    pool_v[ch * groups + g] = T(1) / static_cast<T>(per);
    expand_v[g * c + ch] = T(1);
  }
  Tensor<T> pool({c, groups}, std::move(pool_v));
  Tensor<T> expand({groups, c}, std::move(expand_v));

  Tensor<T> chan_mean = reshape(reduce_mean(f, 0), {1, c});
  Tensor<T> mean_c = reshape(matmul(matmul(chan_mean, pool), expand), {c});
  Tensor<T> centered = sub(f, mean_c);
  Tensor<T> chan_var = reshape(reduce_mean(square(centered), 0), {1, c});
  Tensor<T> var_c = reshape(matmul(matmul(chan_var, pool), expand), {c});
  Tensor<T> normed = div(centered, vsqrt(var_c));
  return add(mul(normed, gain), shift);
}

// ---------------------------------------------------------------------------
// Blocks and network assembly

template <typename T>
struct AttentionRecord {
  std::optional<Tensor<T>> local;     // pre-eta sigmoid (or relu-tanh) scores
  std::optional<Tensor<T>> global_w;  // softmax weights
  Tensor<T> blended;                  // unit-L1 weights used downstream
};

template <typename T>
struct ForwardResult {
  Tensor<T> features;                        // O [N x C]
  std::vector<AttentionRecord<T>> per_unit;  // one per ACN sub-unit
  std::optional<AttentionRecord<T>> output;  // attention over O
  Tensor<T> weights;                         // final w consumed by the heads
};

namespace detail {

template <typename T>
AttentionRecord<T> compute_attention(const Tensor<T>& h,
                                     const AcnUnitParams<T>& unit,
                                     const AttentionConfig& att) {
  AttentionRecord<T> rec;
  if (unit.attn_local) rec.local = local_attention(h, *unit.attn_local);
  if (unit.attn_global) rec.global_w = global_attention(h, *unit.attn_global);
  (void)att;
  rec.blended = blend_weights(rec.local, rec.global_w);
  return rec;
}

}  // namespace detail

// One residual sub-unit: perceptron -> (attention + normalization) ->
// group norm -> ReLU. Appendix-B placement multiplies the feature rows by
// the blended weights and falls back to plain CN.
template <typename T>
Tensor<T> acn_unit_forward(const Tensor<T>& f, const AcnUnitParams<T>& unit,
                           const NetworkConfig& cfg,
                           std::vector<AttentionRecord<T>>* records) {
  Tensor<T> h = perceptron_apply(unit.main, f);
  Tensor<T> normed = h;
  if (cfg.norm_kind == NormKind::acn) {
    AttentionRecord<T> rec = detail::compute_attention(h, unit, cfg.attention);
    if (cfg.attention.placement == AttentionPlacement::on_feature_map) {
      const std::size_t n = h.shape()[0];
      Tensor<T> scaled = mul(h, reshape(rec.blended, {n, 1}));
      normed = context_norm(scaled);
    } else {
      normed = acn(h, rec.blended);
    }
    if (records) records->push_back(std::move(rec));
  } else if (cfg.norm_kind == NormKind::cn) {
    normed = context_norm(h);
  }
  if (unit.gn)
    normed = group_norm(normed, cfg.gn_groups, unit.gn->gain, unit.gn->shift);
  return relu(normed);
}

template <typename T>
Tensor<T> arb_forward(const Tensor<T>& f,
                      const std::vector<AcnUnitParams<T>>& units,
                      const NetworkConfig& cfg,
                      std::vector<AttentionRecord<T>>* records = nullptr) {
  Tensor<T> h = f;
  for (const auto& unit : units) h = acn_unit_forward(h, unit, cfg, records);
  return add(f, h);
}

// Attention over the output tensor O that produces the head weights
// w = eta(W_omega(O)) (or the ReLU+Tanh variant).
template <typename T>
AttentionRecord<T> output_attention(const Tensor<T>& o,
                                    const NetworkParams<T>& params,
                                    const NetworkConfig& cfg) {
  AttentionRecord<T> rec;
  if (cfg.attention.output_activation == OutputActivation::relu_tanh) {
    const std::size_t n = o.shape()[0];
    Tensor<T> logits = reshape(perceptron_apply(*params.out_local, o), {n});
    rec.local = relu(vtanh(logits));
    rec.blended = blend_weights<T>(rec.local, std::nullopt);
    return rec;
  }
  if (params.out_local) rec.local = local_attention(o, *params.out_local);
  if (params.out_global) rec.global_w = global_attention(o, *params.out_global);
  rec.blended = blend_weights(rec.local, rec.global_w);
  return rec;
}

template <typename T>
ForwardResult<T> network_forward(const NetworkParams<T>& params,
                                 const NetworkConfig& cfg,
                                 const Tensor<T>& points) {
  if (points.rank() != 2 || points.shape()[1] != cfg.input_dim)
    throw ShapeError("network_forward: input " + shape_str(points.shape()) +
                     " does not match input_dim " +
                     std::to_string(cfg.input_dim));
  ForwardResult<T> result;
  Tensor<T> f = perceptron_apply(params.input, points);
  for (const auto& block : params.blocks)
    f = arb_forward(f, block, cfg, &result.per_unit);
  result.features = f;
  if (cfg.has_output_attention()) {
    result.output = output_attention(f, params, cfg);
    result.weights = result.output->blended;
  } else {
    const std::size_t n = f.shape()[0];
    result.weights = Tensor<T>::full({n}, T(1) / static_cast<T>(n));
  }
  return result;
}

// Pooled classification head: v = mu_w(O) (or max-pool), then a linear map.
template <typename T>
Tensor<T> classification_head(const Tensor<T>& o, const Tensor<T>& w,
                              const Perceptron<T>& head, PoolKind pool) {
  const std::size_t n = o.shape()[0], c = o.shape()[1];
  Tensor<T> pooled;
  if (pool == PoolKind::max) {
    pooled = reduce_max(o, 0);
  } else {
    T sum = T(0);
    for (const T v : w.data()) sum += v;
    if (std::abs(sum - T(1)) > T(1e-3))
      throw NumericError("classification_head: weights must sum to 1");
    pooled = reshape(matmul(reshape(w, {1, n}), o), {c});
  }
  const std::size_t ncls = head.weight.shape()[0];
  return reshape(perceptron_apply(head, reshape(pooled, {1, c})), {ncls});
}

// ---------------------------------------------------------------------------
// Parameter management

// Visits every trainable tensor in a fixed order (checkpoint/optimizer order).
template <typename T, typename Fn>
void for_each_param(NetworkParams<T>& params, Fn&& fn) {
  fn("in.weight", params.input.weight);
  fn("in.bias", params.input.bias);
  for (std::size_t k = 0; k < params.blocks.size(); ++k)
    for (std::size_t j = 0; j < params.blocks[k].size(); ++j) {
      auto& unit = params.blocks[k][j];
      const std::string prefix =
          "arb" + std::to_string(k) + ".unit" + std::to_string(j) + ".";
      fn(prefix + "weight", unit.main.weight);
      fn(prefix + "bias", unit.main.bias);
      if (unit.attn_local) {
        fn(prefix + "attn_local.weight", unit.attn_local->weight);
        fn(prefix + "attn_local.bias", unit.attn_local->bias);
      }
      if (unit.attn_global) {
        fn(prefix + "attn_global.weight", unit.attn_global->weight);
        fn(prefix + "attn_global.bias", unit.attn_global->bias);
      }
      if (unit.gn) {
        fn(prefix + "gn.gain", unit.gn->gain);
        fn(prefix + "gn.shift", unit.gn->shift);
      }
    }
  if (params.out_local) {
    fn("out_local.weight", params.out_local->weight);
    fn("out_local.bias", params.out_local->bias);
  }
  if (params.out_global) {
    fn("out_global.weight", params.out_global->weight);
    fn("out_global.bias", params.out_global->bias);
  }
  if (params.head) {
    fn("head.weight", params.head->weight);
    fn("head.bias", params.head->bias);
  }
}

template <typename T>
std::size_t param_count(const NetworkParams<T>& params) {
  std::size_t count = 0;
  for_each_param(const_cast<NetworkParams<T>&>(params),
                 [&](const std::string&, Tensor<T>& t) { count += t.size(); });
  return count;
}

namespace detail {

template <typename T>
Perceptron<T> init_perceptron(std::size_t out, std::size_t in, Rng& rng) {
  std::vector<T> w(out * in);
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (auto& v : w) v = static_cast<T>(rng.gaussian(0.0, scale));
  return Perceptron<T>{Tensor<T>({out, in}, std::move(w)),
                       Tensor<T>::zeros({out})};
}

template <typename T>
Perceptron<T> zero_perceptron(std::size_t out, std::size_t in) {
  return Perceptron<T>{Tensor<T>::zeros({out, in}), Tensor<T>::zeros({out})};
}

}  // namespace detail

// Zero-mean 1/sqrt(fan_in) weights, zero biases, unit GN gain, zero shift.
// Attention perceptrons start at zero: sigmoid(0) = 0.5 and a uniform
// softmax make every ACN behave exactly like CN at step zero, so attention
// departs from clean statistics instead of a random weighting (their
// gradients are f-proportional and nonzero from the first step).
template <typename T>
NetworkParams<T> init_network_params(const NetworkConfig& cfg,
                                     std::uint64_t seed) {
  cfg.validate();
  Rng rng(mix_seed(seed, 0xACE1));
  NetworkParams<T> params;
  params.input = detail::init_perceptron<T>(cfg.channels, cfg.input_dim, rng);
  params.blocks.resize(cfg.arb_count);
  for (auto& block : params.blocks) {
    block.resize(cfg.acn_per_arb);
    for (auto& unit : block) {
      unit.main = detail::init_perceptron<T>(cfg.channels, cfg.channels, rng);
      if (cfg.unit_attention() && cfg.attention.use_local)
        unit.attn_local = detail::zero_perceptron<T>(1, cfg.channels);
      if (cfg.unit_attention() && cfg.attention.use_global)
        unit.attn_global = detail::zero_perceptron<T>(1, cfg.channels);
      if (cfg.post_norm == PostNorm::group_norm)
        unit.gn = GroupNormParams<T>{Tensor<T>::full({cfg.channels}, T(1)),
                                     Tensor<T>::zeros({cfg.channels})};
    }
  }
  if (cfg.output_local())
    params.out_local = detail::zero_perceptron<T>(1, cfg.channels);
  if (cfg.output_global())
    params.out_global = detail::zero_perceptron<T>(1, cfg.channels);
  if (cfg.head == HeadKind::classify)
    params.head = detail::init_perceptron<T>(cfg.num_classes, cfg.channels, rng);
  return params;
}

// Tape-attached copy (shares data; leaves registered in for_each order).
template <typename T>
NetworkParams<T> attach_params(const NetworkParams<T>& params, Tape<T>& tape) {
  NetworkParams<T> live = params;
  for_each_param(live, [&](const std::string&, Tensor<T>& t) { t = tape.var(t); });
  return live;
}

template <typename T>
std::vector<Tensor<T>> collect_gradients(NetworkParams<T>& live,
                                         const Tape<T>& tape) {
  std::vector<Tensor<T>> grads;
  for_each_param(live, [&](const std::string&, Tensor<T>& t) {
    grads.push_back(tape.grad(t));
  });
  return grads;
}

template <typename T>
NetworkParams<double> params_to_double(const NetworkParams<T>& params);

template <>
inline NetworkParams<double> params_to_double<float>(
    const NetworkParams<float>& params) {
  NetworkParams<double> out;
  out.input = {tensor_cast<double>(params.input.weight),
               tensor_cast<double>(params.input.bias)};
  out.blocks.resize(params.blocks.size());
  for (std::size_t k = 0; k < params.blocks.size(); ++k) {
    for (const auto& unit : params.blocks[k]) {
      AcnUnitParams<double> u;
      u.main = {tensor_cast<double>(unit.main.weight),
                tensor_cast<double>(unit.main.bias)};
      if (unit.attn_local)
        u.attn_local = Perceptron<double>{
            tensor_cast<double>(unit.attn_local->weight),
            tensor_cast<double>(unit.attn_local->bias)};
      if (unit.attn_global)
        u.attn_global = Perceptron<double>{
            tensor_cast<double>(unit.attn_global->weight),
            tensor_cast<double>(unit.attn_global->bias)};
      if (unit.gn)
        u.gn = GroupNormParams<double>{tensor_cast<double>(unit.gn->gain),
                                       tensor_cast<double>(unit.gn->shift)};
      out.blocks[k].push_back(std::move(u));
    }
  }
  if (params.out_local)
    out.out_local = Perceptron<double>{
        tensor_cast<double>(params.out_local->weight),
        tensor_cast<double>(params.out_local->bias)};
  if (params.out_global)
    out.out_global = Perceptron<double>{
        tensor_cast<double>(params.out_global->weight),
        tensor_cast<double>(params.out_global->bias)};
  if (params.head)
    out.head = Perceptron<double>{tensor_cast<double>(params.head->weight),
                                  tensor_cast<double>(params.head->bias)};
  return out;
}

}  // namespace acne
