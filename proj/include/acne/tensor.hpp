#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "acne/error.hpp"

namespace acne {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += "x";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

// Division/sqrt/log guard. Gradients are cut where the guard engages.
template <typename T>
constexpr T guard_eps() {
  return std::is_same_v<T, float> ? T(1e-8) : T(1e-12);
}

// Global switch for post-op finiteness scans. On by default; every public
// operation either returns all-finite data or throws NumericError.
inline bool& finite_checks() {
  static bool enabled = true;
  return enabled;
}

template <typename T>
class Tape;

template <typename T>
class Tensor {
 public:
  Tensor() : data_(std::make_shared<std::vector<T>>()) {}

  Tensor(Shape shape, std::vector<T> values)
      : shape_(std::move(shape)),
        data_(std::make_shared<std::vector<T>>(std::move(values))) {
    if (numel(shape_) != data_->size())
      throw ShapeError("tensor shape " + shape_str(shape_) + " wants " +
                       std::to_string(numel(shape_)) + " values, got " +
                       std::to_string(data_->size()));
  }

  static Tensor zeros(Shape shape) {
    std::size_t n = numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, T(0)));
  }

  static Tensor full(Shape shape, T value) {
    std::size_t n = numel(shape);
    return Tensor(std::move(shape), std::vector<T>(n, value));
  }

  static Tensor scalar(T value) { return Tensor({}, {value}); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_->size(); }
  const std::vector<T>& data() const { return *data_; }
  std::vector<T>& mutable_data() { return *data_; }

  T value() const {
    if (size() != 1)
      throw ShapeError("value() on non-scalar tensor " + shape_str(shape_));
    return (*data_)[0];
  }

  T operator()(std::size_t i) const { return (*data_)[i]; }
  T operator()(std::size_t i, std::size_t j) const {
    return (*data_)[i * shape_[1] + j];
  }

  bool on_tape() const { return node_ >= 0; }
  Tape<T>* tape() const { return tape_; }
  int node() const { return node_; }

  // Shared handle to the underlying storage; lets backward closures keep
  // alive only the buffers they actually read.
  std::shared_ptr<const std::vector<T>> shared_data() const { return data_; }

  Tensor detached() const {
    Tensor t = *this;
    t.tape_ = nullptr;
    t.node_ = -1;
    return t;
  }

  void bind(Tape<T>* tape, int node) {
    tape_ = tape;
    node_ = node;
  }

 private:
  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
  Tape<T>* tape_ = nullptr;
  int node_ = -1;
};

// Reverse-mode tape. Nodes are appended in execution order, so every node's
// inputs precede it; backward() sweeps ids in reverse. One tape per training
// step, confined to a single thread.
template <typename T>
class Tape {
 public:
  // Attach a tensor as a differentiable leaf (shares the underlying data).
  Tensor<T> var(const Tensor<T>& t) {
    Tensor<T> attached = t.detached();
    attached.bind(this, add_node(t.shape(), {}));
    return attached;
  }

  int add_node(Shape shape, std::vector<int> parents) {
    nodes_.push_back(Node{std::move(shape), std::move(parents), nullptr});
    grads_.emplace_back();
    return static_cast<int>(nodes_.size()) - 1;
  }

  void set_backward(int node, std::function<void(Tape&)> fn) {
    nodes_[static_cast<std::size_t>(node)].backward = std::move(fn);
  }

  void accumulate(int node, const std::vector<T>& g) {
    auto& slot = grads_[static_cast<std::size_t>(node)];
    if (slot.empty()) {
      slot = g;
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
    }
  }

  void accumulate(int node, std::vector<T>&& g) {
    auto& slot = grads_[static_cast<std::size_t>(node)];
    if (slot.empty()) {
      slot = std::move(g);
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) slot[i] += g[i];
    }
  }

  bool has_grad(int node) const {
    return !grads_[static_cast<std::size_t>(node)].empty();
  }

  const std::vector<T>& grad_data(int node) const {
    return grads_[static_cast<std::size_t>(node)];
  }

  void backward(const Tensor<T>& loss) {
    if (loss.tape() != this || !loss.on_tape())
      throw Error("backward: loss is not on this tape");
    if (loss.size() != 1)
      throw ShapeError("backward: loss must be scalar, got " +
                       shape_str(loss.shape()));
    accumulate(loss.node(), {T(1)});
    for (int id = loss.node(); id >= 0; --id) {
      auto& node = nodes_[static_cast<std::size_t>(id)];
      if (node.backward && has_grad(id)) node.backward(*this);
    }
  }

  // Gradient of an attached tensor; zeros if it was never reached.
  Tensor<T> grad(const Tensor<T>& t) const {
    if (t.tape() != this || !t.on_tape())
      throw Error("grad: tensor is not on this tape");
    const auto& g = grads_[static_cast<std::size_t>(t.node())];
    if (g.empty()) return Tensor<T>::zeros(t.shape());
    return Tensor<T>(t.shape(), g);
  }

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<int> parents;
    std::function<void(Tape&)> backward;
  };

  std::vector<Node> nodes_;
  std::vector<std::vector<T>> grads_;
};

namespace detail {

template <typename T>
Tape<T>* tape_of(const Tensor<T>& a) {
  return a.on_tape() ? a.tape() : nullptr;
}

template <typename T>
Tape<T>* tape_of(const Tensor<T>& a, const Tensor<T>& b) {
  Tape<T>* ta = tape_of(a);
  Tape<T>* tb = tape_of(b);
  if (ta && tb && ta != tb) throw Error("operands belong to different tapes");
  return ta ? ta : tb;
}

template <typename T>
void check_finite(const std::vector<T>& v, const char* op) {
  if (!finite_checks()) return;
  // Single vectorizable pass: any NaN/Inf propagates into the sums, and
  // legitimate values are far too small to overflow the partials.
  T acc0 = T(0), acc1 = T(0);
  std::size_t i = 0;
  for (; i + 1 < v.size(); i += 2) {
    acc0 += std::abs(v[i]);
    acc1 += std::abs(v[i + 1]);
  }
  if (i < v.size()) acc0 += std::abs(v[i]);
  if (!std::isfinite(acc0 + acc1))
    throw NumericError(std::string("non-finite value produced by ") + op);
}

// Standard trailing-dimension broadcasting (1s are prepended implicitly).
inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    const std::size_t da = i < rank - a.size() ? 1 : a[i - (rank - a.size())];
    const std::size_t db = i < rank - b.size() ? 1 : b[i - (rank - b.size())];
    if (da != db && da != 1 && db != 1)
      throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " +
                       shape_str(b) + " are not broadcastable");
    out[i] = std::max(da, db);
  }
  return out;
}

// Row-major strides padded to `rank`, with 0 on broadcast dimensions.
inline std::vector<std::size_t> bcast_strides(const Shape& s, std::size_t rank,
                                              const Shape& out) {
  std::vector<std::size_t> strides(rank, 0);
  std::size_t acc = 1;
  for (std::size_t i = s.size(); i-- > 0;) {
    const std::size_t oi = i + (rank - s.size());
    strides[oi] = (s[i] == 1 && out[oi] != 1) ? 0 : acc;
    acc *= s[i];
  }
  return strides;
}

// Enumerates (out index, a index, b index) triples for a broadcast pair.
// Hot 2-D patterns get dedicated loops; everything else uses an odometer.
template <typename T, typename Fn>
void bcast_for_each(const Shape& ash, const Shape& bsh, const Shape& out,
                    Fn&& fn) {
  const std::size_t n = numel(out);
  if (ash == bsh) {
    for (std::size_t i = 0; i < n; ++i) fn(i, i, i);
    return;
  }
  if (numel(bsh) == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i, i, 0);
    return;
  }
  if (numel(ash) == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i, 0, i);
    return;
  }
  if (out.size() == 2 && ash == out) {
    const std::size_t rows = out[0], cols = out[1];
    if (bsh.size() == 1 || (bsh.size() == 2 && bsh[0] == 1)) {
      // [R,C] op [C]
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          fn(r * cols + c, r * cols + c, c);
      return;
    }
    if (bsh.size() == 2 && bsh[1] == 1 && bsh[0] == rows) {
      // [R,C] op [R,1]
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          fn(r * cols + c, r * cols + c, r);
      return;
    }
  }
  if (out.size() == 2 && bsh == out) {
    const std::size_t rows = out[0], cols = out[1];
    if (ash.size() == 1 || (ash.size() == 2 && ash[0] == 1)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          fn(r * cols + c, c, r * cols + c);
      return;
    }
    if (ash.size() == 2 && ash[1] == 1 && ash[0] == rows) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c)
          fn(r * cols + c, r, r * cols + c);
      return;
    }
  }
  // [N,G,C] against [1,G,1] (group-norm statistics)
  if (out.size() == 3 && ash == out && bsh.size() == 3 && bsh[0] == 1 &&
      bsh[1] == out[1] && bsh[2] == 1) {
    const std::size_t n = out[0], g = out[1], c = out[2];
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t gg = 0; gg < g; ++gg)
        for (std::size_t cc = 0; cc < c; ++cc, ++idx) fn(idx, idx, gg);
    return;
  }
  if (out.size() == 3 && bsh == out && ash.size() == 3 && ash[0] == 1 &&
      ash[1] == out[1] && ash[2] == 1) {
    const std::size_t n = out[0], g = out[1], c = out[2];
    std::size_t idx = 0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t gg = 0; gg < g; ++gg)
        for (std::size_t cc = 0; cc < c; ++cc, ++idx) fn(idx, gg, idx);
    return;
  }
  const std::size_t rank = out.size();
  const auto sa = bcast_strides(ash, rank, out);
  const auto sb = bcast_strides(bsh, rank, out);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    fn(flat, ia, ib);
    for (std::size_t d = rank; d-- > 0;) {
      idx[d]++;
      ia += sa[d];
      ib += sb[d];
      if (idx[d] < out[d]) break;
      ia -= sa[d] * out[d];
      ib -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

// Sum `grad` (shaped like `out`) down to `target` for broadcast backward.
template <typename T>
std::vector<T> reduce_to_shape(std::vector<T>&& grad, const Shape& out,
                               const Shape& target) {
  if (out == target) return std::move(grad);
  std::vector<T> reduced(numel(target), T(0));
  bcast_for_each<T>(target, out, out,
                    [&](std::size_t, std::size_t it, std::size_t io) {
                      reduced[it] += grad[io];
                    });
  return reduced;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise binary operations

enum class BinaryKind { add, sub, mul, div };

template <typename T>
Tensor<T> binary_op(BinaryKind kind, const Tensor<T>& a, const Tensor<T>& b) {
  const char* name = kind == BinaryKind::add   ? "add"
                     : kind == BinaryKind::sub ? "sub"
                     : kind == BinaryKind::mul ? "mul"
                                               : "div";
  const Shape out_shape = detail::broadcast_shape(a.shape(), b.shape(), name);
  std::vector<T> out(numel(out_shape));
  const auto& av = a.data();
  const auto& bv = b.data();
  constexpr T eps = guard_eps<T>();
  switch (kind) {
    case BinaryKind::add:
      detail::bcast_for_each<T>(a.shape(), b.shape(), out_shape,
                                [&](std::size_t i, std::size_t ia,
                                    std::size_t ib) { out[i] = av[ia] + bv[ib]; });
      break;
    case BinaryKind::sub:
      detail::bcast_for_each<T>(a.shape(), b.shape(), out_shape,
                                [&](std::size_t i, std::size_t ia,
                                    std::size_t ib) { out[i] = av[ia] - bv[ib]; });
      break;
    case BinaryKind::mul:
      detail::bcast_for_each<T>(a.shape(), b.shape(), out_shape,
                                [&](std::size_t i, std::size_t ia,
                                    std::size_t ib) { out[i] = av[ia] * bv[ib]; });
      break;
    case BinaryKind::div:
      // Denominator magnitude is clamped at eps; sign preserved.
      detail::bcast_for_each<T>(
          a.shape(), b.shape(), out_shape,
          [&](std::size_t i, std::size_t ia, std::size_t ib) {
            T d = bv[ib];
            if (d >= T(0) && d < eps) d = eps;
            if (d < T(0) && d > -eps) d = -eps;
            out[i] = av[ia] / d;
          });
      break;
  }
  detail::check_finite(out, name);
  Tensor<T> result(out_shape, std::move(out));
  if (Tape<T>* tape = detail::tape_of(a, b)) {
    std::vector<int> parents;
    if (a.on_tape()) parents.push_back(a.node());
    if (b.on_tape()) parents.push_back(b.node());
    const int out_id = tape->add_node(out_shape, parents);
    result.bind(tape, out_id);
    // Keep alive only the operand buffers the backward pass reads.
    const int a_node = a.node(), b_node = b.node();
    const bool needs_mul_data = kind == BinaryKind::mul || kind == BinaryKind::div;
    std::shared_ptr<const std::vector<T>> a_data =
        (b_node >= 0 && needs_mul_data) ? a.shared_data() : nullptr;
    std::shared_ptr<const std::vector<T>> b_data =
        ((a_node >= 0 && needs_mul_data) ||
         (b_node >= 0 && kind == BinaryKind::div))
            ? b.shared_data()
            : nullptr;
    Shape a_shape = a.shape(), b_shape = b.shape();
    tape->set_backward(
        out_id, [kind, a_node, b_node, a_data, b_data, a_shape, b_shape,
                 out_shape = result.shape(), out_id](Tape<T>& tp) {
          const std::vector<T>& g = tp.grad_data(out_id);
          constexpr T geps = guard_eps<T>();
          if (a_node >= 0) {
            if ((kind == BinaryKind::add || kind == BinaryKind::sub) &&
                a_shape == out_shape) {
              tp.accumulate(a_node, g);
            } else if (kind == BinaryKind::add || kind == BinaryKind::sub) {
              std::vector<T> ga = g;
              tp.accumulate(a_node, detail::reduce_to_shape(
                                        std::move(ga), out_shape, a_shape));
            } else {
              std::vector<T> ga(numel(out_shape));
              const std::vector<T>& bv = *b_data;
              if (kind == BinaryKind::mul) {
                detail::bcast_for_each<T>(
                    a_shape, b_shape, out_shape,
                    [&](std::size_t i, std::size_t, std::size_t ib) {
                      ga[i] = g[i] * bv[ib];
                    });
              } else {
                detail::bcast_for_each<T>(
                    a_shape, b_shape, out_shape,
                    [&](std::size_t i, std::size_t, std::size_t ib) {
                      T d = bv[ib];
                      if (d >= T(0) && d < geps) d = geps;
                      if (d < T(0) && d > -geps) d = -geps;
                      ga[i] = g[i] / d;
                    });
              }
              tp.accumulate(a_node, detail::reduce_to_shape(
                                        std::move(ga), out_shape, a_shape));
            }
          }
          if (b_node >= 0) {
            if (kind == BinaryKind::add && b_shape == out_shape) {
              tp.accumulate(b_node, g);
              return;
            }
            std::vector<T> gb(numel(out_shape));
            switch (kind) {
              case BinaryKind::add:
                gb = g;
                break;
              case BinaryKind::sub:
                for (std::size_t i = 0; i < g.size(); ++i) gb[i] = -g[i];
                break;
              case BinaryKind::mul:
                detail::bcast_for_each<T>(
                    a_shape, b_shape, out_shape,
                    [&](std::size_t i, std::size_t ia, std::size_t) {
                      gb[i] = g[i] * (*a_data)[ia];
                    });
                break;
              case BinaryKind::div:
                detail::bcast_for_each<T>(
                    a_shape, b_shape, out_shape,
                    [&](std::size_t i, std::size_t ia, std::size_t ib) {
                      const T d = (*b_data)[ib];
                      // No gradient once the guard clamps the denominator.
                      if (d >= -geps && d <= geps) {
                        gb[i] = T(0);
                      } else {
                        gb[i] = -g[i] * (*a_data)[ia] / (d * d);
                      }
                    });
                break;
            }
            tp.accumulate(b_node, detail::reduce_to_shape(std::move(gb),
                                                          out_shape, b_shape));
          }
        });
  }
  return result;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(BinaryKind::add, a, b);
}
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(BinaryKind::sub, a, b);
}
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(BinaryKind::mul, a, b);
}
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(BinaryKind::div, a, b);
}

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) {
  return add(a, b);
}
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) {
  return sub(a, b);
}
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) {
  return mul(a, b);
}

// ---------------------------------------------------------------------------
// Elementwise unary operations

enum class UnaryKind {
  relu,
  sigmoid,
  tanh_fn,
  exp_fn,
  log_fn,
  sqrt_fn,
  square,
  abs_fn
};

template <typename T>
Tensor<T> unary_op(UnaryKind kind, const Tensor<T>& x) {
  const char* name = kind == UnaryKind::relu      ? "relu"
                     : kind == UnaryKind::sigmoid ? "sigmoid"
                     : kind == UnaryKind::tanh_fn ? "tanh"
                     : kind == UnaryKind::exp_fn  ? "exp"
                     : kind == UnaryKind::log_fn  ? "log"
                     : kind == UnaryKind::sqrt_fn ? "sqrt"
                     : kind == UnaryKind::square  ? "square"
                                                  : "abs";
  const auto& xv = x.data();
  std::vector<T> out(xv.size());
  constexpr T eps = guard_eps<T>();
  switch (kind) {
    case UnaryKind::relu:
      for (std::size_t i = 0; i < xv.size(); ++i)
        out[i] = xv[i] > T(0) ? xv[i] : T(0);
      break;
    case UnaryKind::sigmoid:
      for (std::size_t i = 0; i < xv.size(); ++i)
        out[i] = T(1) / (T(1) + std::exp(-xv[i]));
      break;
    case UnaryKind::tanh_fn:
      for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::tanh(xv[i]);
      break;
    case UnaryKind::exp_fn:
      for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::exp(xv[i]);
      break;
    case UnaryKind::log_fn:
      for (std::size_t i = 0; i < xv.size(); ++i) {
        if (xv[i] < T(0)) throw NumericError("log of negative input");
        out[i] = std::log(std::max(xv[i], eps));
      }
      break;
    case UnaryKind::sqrt_fn:
      for (std::size_t i = 0; i < xv.size(); ++i) {
        if (xv[i] < T(0)) throw NumericError("sqrt of negative input");
        out[i] = std::sqrt(std::max(xv[i], eps));
      }
      break;
    case UnaryKind::square:
      for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] * xv[i];
      break;
    case UnaryKind::abs_fn:
      for (std::size_t i = 0; i < xv.size(); ++i) out[i] = std::abs(xv[i]);
      break;
  }
  detail::check_finite(out, name);
  Tensor<T> result(x.shape(), std::move(out));
  if (Tape<T>* tape = detail::tape_of(x)) {
    const int out_id = tape->add_node(x.shape(), {x.node()});
    result.bind(tape, out_id);
    // relu/sigmoid/tanh/exp/sqrt backward read the output; the rest read
    // the input. Keeping only one buffer halves the tape's live memory.
    const bool wants_output =
        kind == UnaryKind::relu || kind == UnaryKind::sigmoid ||
        kind == UnaryKind::tanh_fn || kind == UnaryKind::exp_fn ||
        kind == UnaryKind::sqrt_fn;
    std::shared_ptr<const std::vector<T>> saved =
        wants_output ? result.shared_data() : x.shared_data();
    const int x_node = x.node();
    tape->set_backward(out_id, [kind, x_node, saved, out_id](Tape<T>& tp) {
      const std::vector<T>& g = tp.grad_data(out_id);
      std::vector<T> gx(g.size());
      const std::vector<T>& s = *saved;
      constexpr T geps = guard_eps<T>();
      switch (kind) {
        case UnaryKind::relu:
          for (std::size_t i = 0; i < g.size(); ++i)
            gx[i] = s[i] > T(0) ? g[i] : T(0);
          break;
        case UnaryKind::sigmoid:
          for (std::size_t i = 0; i < g.size(); ++i)
            gx[i] = g[i] * s[i] * (T(1) - s[i]);
          break;
        case UnaryKind::tanh_fn:
          for (std::size_t i = 0; i < g.size(); ++i)
            gx[i] = g[i] * (T(1) - s[i] * s[i]);
          break;
        case UnaryKind::exp_fn:
          for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * s[i];
          break;
        case UnaryKind::log_fn:
          for (std::size_t i = 0; i < g.size(); ++i)
            gx[i] = s[i] > geps ? g[i] / s[i] : T(0);
          break;
        case UnaryKind::sqrt_fn: {
          const T ymin = std::sqrt(geps);
          for (std::size_t i = 0; i < g.size(); ++i)
            gx[i] = s[i] > ymin ? g[i] / (T(2) * s[i]) : T(0);
          break;
        }
        case UnaryKind::square:
          for (std::size_t i = 0; i < g.size(); ++i)
            gx[i] = g[i] * T(2) * s[i];
          break;
        case UnaryKind::abs_fn:
          for (std::size_t i = 0; i < g.size(); ++i)
            gx[i] = s[i] > T(0) ? g[i] : (s[i] < T(0) ? -g[i] : T(0));
          break;
      }
      tp.accumulate(x_node, std::move(gx));
    });
  }
  return result;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary_op(UnaryKind::relu, x);
}
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary_op(UnaryKind::sigmoid, x);
}
template <typename T>
Tensor<T> vtanh(const Tensor<T>& x) {
  return unary_op(UnaryKind::tanh_fn, x);
}
template <typename T>
Tensor<T> vexp(const Tensor<T>& x) {
  return unary_op(UnaryKind::exp_fn, x);
}
template <typename T>
Tensor<T> vlog(const Tensor<T>& x) {
  return unary_op(UnaryKind::log_fn, x);
}
template <typename T>
Tensor<T> vsqrt(const Tensor<T>& x) {
  return unary_op(UnaryKind::sqrt_fn, x);
}
template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary_op(UnaryKind::square, x);
}
template <typename T>
Tensor<T> vabs(const Tensor<T>& x) {
  return unary_op(UnaryKind::abs_fn, x);
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T c) {
  std::vector<T> out(x.data());
  for (auto& v : out) v += c;
  detail::check_finite(out, "add_scalar");
  Tensor<T> result(x.shape(), std::move(out));
  if (Tape<T>* tape = detail::tape_of(x)) {
    const int out_id = tape->add_node(x.shape(), {x.node()});
    result.bind(tape, out_id);
    const int x_node = x.node();
    tape->set_backward(out_id, [x_node, out_id](Tape<T>& tp) {
      tp.accumulate(x_node, tp.grad_data(out_id));
    });
  }
  return result;
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, T c) {
  std::vector<T> out(x.data());
  for (auto& v : out) v *= c;
  detail::check_finite(out, "mul_scalar");
  Tensor<T> result(x.shape(), std::move(out));
  if (Tape<T>* tape = detail::tape_of(x)) {
    const int out_id = tape->add_node(x.shape(), {x.node()});
    result.bind(tape, out_id);
    const int x_node = x.node();
    tape->set_backward(out_id, [x_node, c, out_id](Tape<T>& tp) {
      const auto& g = tp.grad_data(out_id);
      std::vector<T> gx(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * c;
      tp.accumulate(x_node, std::move(gx));
    });
  }
  return result;
}

// Clamp to [lo, hi]; gradient passes through strictly inside the interval.
template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  std::vector<T> out(x.data());
  for (auto& v : out) v = std::min(std::max(v, lo), hi);
  Tensor<T> result(x.shape(), std::move(out));
  if (Tape<T>* tape = detail::tape_of(x)) {
    const int out_id = tape->add_node(x.shape(), {x.node()});
    result.bind(tape, out_id);
    const int x_node = x.node();
    auto x_data = x.shared_data();
    tape->set_backward(out_id, [x_node, x_data, lo, hi, out_id](Tape<T>& tp) {
      const auto& g = tp.grad_data(out_id);
      const auto& xi = *x_data;
      std::vector<T> gx(g.size());
      for (std::size_t i = 0; i < g.size(); ++i)
        gx[i] = (xi[i] > lo && xi[i] < hi) ? g[i] : T(0);
      tp.accumulate(x_node, std::move(gx));
    });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Matrix product and transpose (2-D only)

namespace detail {

// c += a * b with the output row tiled through register accumulators.
// float work accumulates long k-sums in double so that results are
// insensitive to row order at f32 granularity (permutation equivariance).
template <typename T>
using Accum = std::conditional_t<std::is_same_v<T, float>, double, T>;

template <typename T>
void matmul_kernel(const T* __restrict a, const T* __restrict b,
                   T* __restrict c, std::size_t m, std::size_t k,
                   std::size_t p) {
  using Acc = Accum<T>;
  constexpr std::size_t kTile = 32;
  if (p == 1) {
    // Column output: independent partial dots break the FMA latency chain.
    for (std::size_t i = 0; i < m; ++i) {
      const T* arow = a + i * k;
      Acc s0 = 0, s1 = 0, s2 = 0, s3 = 0;
      std::size_t kk = 0;
      for (; kk + 4 <= k; kk += 4) {
        s0 += Acc(arow[kk]) * Acc(b[kk]);
        s1 += Acc(arow[kk + 1]) * Acc(b[kk + 1]);
        s2 += Acc(arow[kk + 2]) * Acc(b[kk + 2]);
        s3 += Acc(arow[kk + 3]) * Acc(b[kk + 3]);
      }
      for (; kk < k; ++kk) s0 += Acc(arow[kk]) * Acc(b[kk]);
      c[i] += T((s0 + s1) + (s2 + s3));
    }
    return;
  }
  // 4-row blocks share each B row load across four accumulator tiles.
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = a + i * k;
    const T* a1 = a0 + k;
    const T* a2 = a1 + k;
    const T* a3 = a2 + k;
    std::size_t j0 = 0;
    for (; j0 + kTile <= p; j0 += kTile) {
      T acc0[kTile] = {}, acc1[kTile] = {}, acc2[kTile] = {}, acc3[kTile] = {};
      for (std::size_t kk = 0; kk < k; ++kk) {
        const T* brow = b + kk * p + j0;
        const T v0 = a0[kk], v1 = a1[kk], v2 = a2[kk], v3 = a3[kk];
        for (std::size_t j = 0; j < kTile; ++j) {
          const T bj = brow[j];
          acc0[j] += v0 * bj;
          acc1[j] += v1 * bj;
          acc2[j] += v2 * bj;
          acc3[j] += v3 * bj;
        }
      }
      for (std::size_t j = 0; j < kTile; ++j) {
        c[(i + 0) * p + j0 + j] += acc0[j];
        c[(i + 1) * p + j0 + j] += acc1[j];
        c[(i + 2) * p + j0 + j] += acc2[j];
        c[(i + 3) * p + j0 + j] += acc3[j];
      }
    }
    for (; j0 < p; ++j0) {
      T s0 = T(0), s1 = T(0), s2 = T(0), s3 = T(0);
      for (std::size_t kk = 0; kk < k; ++kk) {
        const T bj = b[kk * p + j0];
        s0 += a0[kk] * bj;
        s1 += a1[kk] * bj;
        s2 += a2[kk] * bj;
        s3 += a3[kk] * bj;
      }
      c[(i + 0) * p + j0] += s0;
      c[(i + 1) * p + j0] += s1;
      c[(i + 2) * p + j0] += s2;
      c[(i + 3) * p + j0] += s3;
    }
  }
  for (; i < m; ++i) {
    const T* arow = a + i * k;
    T* crow = c + i * p;
    std::size_t j0 = 0;
    for (; j0 + kTile <= p; j0 += kTile) {
      Acc acc[kTile] = {};
      for (std::size_t kk = 0; kk < k; ++kk) {
        const Acc aik = arow[kk];
        const T* brow = b + kk * p + j0;
        for (std::size_t j = 0; j < kTile; ++j) acc[j] += aik * Acc(brow[j]);
      }
      for (std::size_t j = 0; j < kTile; ++j) crow[j0 + j] += T(acc[j]);
    }
    for (; j0 < p; ++j0) {
      Acc s = 0;
      for (std::size_t kk = 0; kk < k; ++kk)
        s += Acc(arow[kk]) * Acc(b[kk * p + j0]);
      crow[j0] += T(s);
    }
  }
}

template <typename T>
std::vector<T> transposed(const T* v, std::size_t rows, std::size_t cols) {
  std::vector<T> out(rows * cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = v[i * cols + j];
  return out;
}

}  // namespace detail

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0])
    throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  const std::size_t m = a.shape()[0], k = a.shape()[1], p = b.shape()[1];
  std::vector<T> out(m * p, T(0));
  detail::matmul_kernel(a.data().data(), b.data().data(), out.data(), m, k, p);
  detail::check_finite(out, "matmul");
  Tensor<T> result({m, p}, std::move(out));
  if (Tape<T>* tape = detail::tape_of(a, b)) {
    std::vector<int> parents;
    if (a.on_tape()) parents.push_back(a.node());
    if (b.on_tape()) parents.push_back(b.node());
    const int out_id = tape->add_node(result.shape(), parents);
    result.bind(tape, out_id);
    const int a_node = a.node(), b_node = b.node();
    auto a_data = b_node >= 0 ? a.shared_data() : nullptr;
    auto b_data = a_node >= 0 ? b.shared_data() : nullptr;
    tape->set_backward(
        out_id, [a_node, b_node, a_data, b_data, m, k, p, out_id](Tape<T>& tp) {
          const std::vector<T>& g = tp.grad_data(out_id);
          if (a_node >= 0) {
            // dA = g * B^T
            std::vector<T> bt = detail::transposed(b_data->data(), k, p);
            std::vector<T> ga(m * k, T(0));
            detail::matmul_kernel(g.data(), bt.data(), ga.data(), m, p, k);
            tp.accumulate(a_node, std::move(ga));
          }
          if (b_node >= 0) {
            // dB = A^T * g
            std::vector<T> at = detail::transposed(a_data->data(), m, k);
            std::vector<T> gb(k * p, T(0));
            detail::matmul_kernel(at.data(), g.data(), gb.data(), k, m, p);
            tp.accumulate(b_node, std::move(gb));
          }
        });
  }
  return result;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  if (a.rank() != 2)
    throw ShapeError("transpose: expected rank 2, got " +
                     shape_str(a.shape()));
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  std::vector<T> out(m * n);
  const auto& av = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = av[i * n + j];
  Tensor<T> result({n, m}, std::move(out));
  if (Tape<T>* tape = detail::tape_of(a)) {
    const int out_id = tape->add_node(result.shape(), {a.node()});
    result.bind(tape, out_id);
    const int a_node = a.node();
    tape->set_backward(out_id, [a_node, m, n, out_id](Tape<T>& tp) {
      const auto& g = tp.grad_data(out_id);
      std::vector<T> ga(m * n);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i) ga[i * n + j] = g[j * m + i];
      tp.accumulate(a_node, std::move(ga));
    });
  }
  return result;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.size())
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " +
                     shape_str(shape) + " changes element count");
  Tensor<T> result(shape, x.data());
  if (Tape<T>* tape = detail::tape_of(x)) {
    const int out_id = tape->add_node(shape, {x.node()});
    result.bind(tape, out_id);
    const int x_node = x.node();
    tape->set_backward(out_id, [x_node, out_id](Tape<T>& tp) {
      tp.accumulate(x_node, tp.grad_data(out_id));
    });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Reductions

enum class ReduceKind { sum, mean, max };

namespace detail {
struct AxisSplit {
  std::size_t outer, axis, inner;
};
inline AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit sp{1, s[axis], 1};
  for (std::size_t i = 0; i < axis; ++i) sp.outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) sp.inner *= s[i];
  return sp;
}
}  // namespace detail

template <typename T>
Tensor<T> reduce(const Tensor<T>& x, std::size_t axis, ReduceKind kind) {
  if (axis >= x.rank())
    throw ShapeError("reduce: axis " + std::to_string(axis) +
                     " out of range for " + shape_str(x.shape()));
  if (x.shape()[axis] == 0) throw ShapeError("reduce: empty reduction");
  const auto sp = detail::split_axis(x.shape(), axis);
  Shape out_shape;
  for (std::size_t i = 0; i < x.rank(); ++i)
    if (i != axis) out_shape.push_back(x.shape()[i]);
  std::vector<T> out(sp.outer * sp.inner, T(0));
  std::vector<std::size_t> argmax;
  const auto& xv = x.data();
  if (kind == ReduceKind::max) {
    argmax.assign(out.size(), 0);
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t in = 0; in < sp.inner; ++in) {
        T best = xv[o * sp.axis * sp.inner + in];
        std::size_t besta = 0;
        for (std::size_t a = 1; a < sp.axis; ++a) {
          const T v = xv[(o * sp.axis + a) * sp.inner + in];
          if (v > best) {  // ties keep the lowest index
            best = v;
            besta = a;
          }
        }
        out[o * sp.inner + in] = best;
        argmax[o * sp.inner + in] = besta;
      }
  } else {
    using Acc = detail::Accum<T>;
    std::vector<Acc> acc(out.size(), Acc(0));
    for (std::size_t o = 0; o < sp.outer; ++o)
      for (std::size_t a = 0; a < sp.axis; ++a) {
        const T* row = &xv[(o * sp.axis + a) * sp.inner];
        Acc* orow = &acc[o * sp.inner];
        for (std::size_t in = 0; in < sp.inner; ++in) orow[in] += row[in];
      }
    const Acc scale =
        kind == ReduceKind::mean ? Acc(1) / Acc(sp.axis) : Acc(1);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = static_cast<T>(acc[i] * scale);
  }
  detail::check_finite(out, "reduce");
  Tensor<T> result(out_shape, std::move(out));
  if (Tape<T>* tape = detail::tape_of(x)) {
    const int out_id = tape->add_node(out_shape, {x.node()});
    result.bind(tape, out_id);
    const int x_node = x.node();
    const std::size_t x_size = x.size();
    tape->set_backward(
        out_id, [x_node, x_size, sp, kind, argmax, out_id](Tape<T>& tp) {
          const auto& g = tp.grad_data(out_id);
          std::vector<T> gx(x_size, T(0));
          if (kind == ReduceKind::max) {
            for (std::size_t o = 0; o < sp.outer; ++o)
              for (std::size_t in = 0; in < sp.inner; ++in) {
                const std::size_t a = argmax[o * sp.inner + in];
                gx[(o * sp.axis + a) * sp.inner + in] = g[o * sp.inner + in];
              }
          } else {
            const T scale =
                kind == ReduceKind::mean ? T(1) / static_cast<T>(sp.axis) : T(1);
            for (std::size_t o = 0; o < sp.outer; ++o)
              for (std::size_t a = 0; a < sp.axis; ++a) {
                T* row = &gx[(o * sp.axis + a) * sp.inner];
                const T* grow = &g[o * sp.inner];
                for (std::size_t in = 0; in < sp.inner; ++in)
                  row[in] = grow[in] * scale;
              }
          }
          tp.accumulate(x_node, std::move(gx));
        });
  }
  return result;
}

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x, std::size_t axis) {
  return reduce(x, axis, ReduceKind::sum);
}
template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x, std::size_t axis) {
  return reduce(x, axis, ReduceKind::mean);
}
template <typename T>
Tensor<T> reduce_max(const Tensor<T>& x, std::size_t axis) {
  return reduce(x, axis, ReduceKind::max);
}

// Sum of all elements -> scalar.
template <typename T>
Tensor<T> total_sum(const Tensor<T>& x) {
  detail::Accum<T> s = 0;
  for (const T v : x.data()) s += v;
  if (finite_checks() && !std::isfinite(static_cast<double>(s)))
    throw NumericError("non-finite value produced by total_sum");
  Tensor<T> result = Tensor<T>::scalar(static_cast<T>(s));
  if (Tape<T>* tape = detail::tape_of(x)) {
    const int out_id = tape->add_node({}, {x.node()});
    result.bind(tape, out_id);
    const int x_node = x.node();
    const std::size_t x_size = x.size();
    tape->set_backward(out_id, [x_node, x_size, out_id](Tape<T>& tp) {
      const T g = tp.grad_data(out_id)[0];
      tp.accumulate(x_node, std::vector<T>(x_size, g));
    });
  }
  return result;
}

template <typename T>
Tensor<T> total_mean(const Tensor<T>& x) {
  return mul_scalar(total_sum(x), T(1) / static_cast<T>(x.size()));
}

// ---------------------------------------------------------------------------
// Softmax along an axis (max-subtracted)

template <typename T>
Tensor<T> softmax_axis(const Tensor<T>& x, std::size_t axis) {
  if (axis >= x.rank())
    throw ShapeError("softmax_axis: axis " + std::to_string(axis) +
                     " out of range for " + shape_str(x.shape()));
  const auto sp = detail::split_axis(x.shape(), axis);
  const auto& xv = x.data();
  std::vector<T> out(xv.size());
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t in = 0; in < sp.inner; ++in) {
      T mx = xv[o * sp.axis * sp.inner + in];
      for (std::size_t a = 1; a < sp.axis; ++a)
        mx = std::max(mx, xv[(o * sp.axis + a) * sp.inner + in]);
      detail::Accum<T> denom = 0;
      for (std::size_t a = 0; a < sp.axis; ++a) {
        const std::size_t idx = (o * sp.axis + a) * sp.inner + in;
        out[idx] = std::exp(xv[idx] - mx);
        denom += out[idx];
      }
      const T inv = static_cast<T>(detail::Accum<T>(1) / denom);
      for (std::size_t a = 0; a < sp.axis; ++a)
        out[(o * sp.axis + a) * sp.inner + in] *= inv;
    }
  detail::check_finite(out, "softmax_axis");
  Tensor<T> result(x.shape(), std::move(out));
  if (Tape<T>* tape = detail::tape_of(x)) {
    const int out_id = tape->add_node(x.shape(), {x.node()});
    result.bind(tape, out_id);
    const int x_node = x.node();
    auto y_data = result.shared_data();
    tape->set_backward(out_id, [x_node, y_data, sp, out_id](Tape<T>& tp) {
      const auto& g = tp.grad_data(out_id);
      const auto& y = *y_data;
      std::vector<T> gx(g.size());
      for (std::size_t o = 0; o < sp.outer; ++o)
        for (std::size_t in = 0; in < sp.inner; ++in) {
          T dot = T(0);
          for (std::size_t a = 0; a < sp.axis; ++a) {
            const std::size_t idx = (o * sp.axis + a) * sp.inner + in;
            dot += g[idx] * y[idx];
          }
          for (std::size_t a = 0; a < sp.axis; ++a) {
            const std::size_t idx = (o * sp.axis + a) * sp.inner + in;
            gx[idx] = y[idx] * (g[idx] - dot);
          }
        }
      tp.accumulate(x_node, std::move(gx));
    });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Conversions

template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& x) {
  std::vector<To> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = static_cast<To>(x.data()[i]);
  return Tensor<To>(x.shape(), std::move(out));
}

}  // namespace acne
