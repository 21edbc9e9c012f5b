#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "acne/error.hpp"
#include "acne/tensor.hpp"

namespace acne {

// Line a*x + b*y + c = 0 with ||theta||_2 = 1. Sign is canonicalized but all
// comparisons downstream still resolve the +/- ambiguity explicitly.
struct LineParams {
  std::array<double, 3> theta{0.0, 0.0, 0.0};
};

struct FundamentalMatrix {
  std::array<double, 9> f{};  // row-major, ||F||_F = 1
};

struct Correspondence {
  double x1, y1, x2, y2;  // image coordinates normalized by image size
};

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition (cyclic Jacobi)

template <typename T>
struct SymEigen {
  std::vector<T> values;   // ascending
  std::vector<T> vectors;  // row k holds the eigenvector for values[k]
  std::size_t dim = 0;
};

namespace detail {

// Make the largest-magnitude component positive (first such index on ties).
template <typename T>
void canonicalize_sign(T* v, std::size_t m) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < m; ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  if (v[best] < T(0))
    for (std::size_t i = 0; i < m; ++i) v[i] = -v[i];
}

template <typename T>
T off_diagonal_sq(const std::vector<T>& a, std::size_t m) {
  T s = T(0);
  for (std::size_t p = 0; p < m; ++p)
    for (std::size_t q = p + 1; q < m; ++q) s += a[p * m + q] * a[p * m + q];
  return T(2) * s;
}

}  // namespace detail

// Cyclic Jacobi sweeps until the off-diagonal Frobenius norm drops below
// 1e-12 * ||A|| (or stalls at the working precision), capped at 100 sweeps.
template <typename T>
SymEigen<T> jacobi_sym_eigen(const std::vector<T>& input, std::size_t m) {
  if (input.size() != m * m) throw ShapeError("jacobi: matrix size mismatch");
  T frob_sq = T(0);
  for (const T v : input) frob_sq += v * v;
  T asym = T(0);
  for (std::size_t p = 0; p < m; ++p)
    for (std::size_t q = p + 1; q < m; ++q)
      asym = std::max(asym, std::abs(input[p * m + q] - input[q * m + p]));
  if (asym > T(1e-6) * std::max(T(1), std::sqrt(frob_sq)))
    throw NumericError("jacobi: input matrix is not symmetric");

  // Work on the symmetrized copy.
  std::vector<T> a(m * m);
  for (std::size_t p = 0; p < m; ++p)
    for (std::size_t q = 0; q < m; ++q)
      a[p * m + q] = (input[p * m + q] + input[q * m + p]) / T(2);
  std::vector<T> v(m * m, T(0));
  for (std::size_t i = 0; i < m; ++i) v[i * m + i] = T(1);

  const T tol_sq = T(1e-24) * frob_sq;  // (1e-12 * ||A||)^2
  T prev_off = std::numeric_limits<T>::max();
  for (int sweep = 0; sweep < 100; ++sweep) {
    const T off = detail::off_diagonal_sq(a, m);
    if (off <= tol_sq || off >= prev_off) break;  // converged or stalled
    prev_off = off;
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t q = p + 1; q < m; ++q) {
        const T apq = a[p * m + q];
        if (apq == T(0)) continue;
        const T tau = (a[q * m + q] - a[p * m + p]) / (T(2) * apq);
        const T t = (tau >= T(0) ? T(1) : T(-1)) /
                    (std::abs(tau) + std::sqrt(T(1) + tau * tau));
        const T c = T(1) / std::sqrt(T(1) + t * t);
        const T s = t * c;
        for (std::size_t i = 0; i < m; ++i) {
          const T aip = a[i * m + p];
          const T aiq = a[i * m + q];
          a[i * m + p] = c * aip - s * aiq;
          a[i * m + q] = s * aip + c * aiq;
        }
        for (std::size_t i = 0; i < m; ++i) {
          const T api = a[p * m + i];
          const T aqi = a[q * m + i];
          a[p * m + i] = c * api - s * aqi;
          a[q * m + i] = s * api + c * aqi;
        }
        for (std::size_t i = 0; i < m; ++i) {
          const T vip = v[i * m + p];
          const T viq = v[i * m + q];
          v[i * m + p] = c * vip - s * viq;
          v[i * m + q] = s * vip + c * viq;
        }
      }
  }
  if (detail::off_diagonal_sq(a, m) > T(1e-8) * std::max(frob_sq, T(1e-30)))
    throw NumericError("jacobi: failed to converge");

  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return a[x * m + x] < a[y * m + y];
  });
  SymEigen<T> result;
  result.dim = m;
  result.values.resize(m);
  result.vectors.resize(m * m);
  for (std::size_t k = 0; k < m; ++k) {
    result.values[k] = a[order[k] * m + order[k]];
    for (std::size_t i = 0; i < m; ++i)
      result.vectors[k * m + i] = v[i * m + order[k]];
    detail::canonicalize_sign(&result.vectors[k * m], m);
  }
  return result;
}

template <typename T>
SymEigen<T> sym_eigen(const Tensor<T>& c) {
  if (c.rank() != 2 || c.shape()[0] != c.shape()[1])
    throw ShapeError("sym_eigen: expected square matrix, got " +
                     shape_str(c.shape()));
  return jacobi_sym_eigen(c.data(), c.shape()[0]);
}

// Gradient of a scalar of the smallest eigenvector with respect to the
// (symmetric) input matrix:
//   dL/dC = sym( sum_{i != 0} (g . v_i) / (l_0 - l_i) * v_i v_0^T ).
// Eigengap denominators are clamped to sign * max(|gap|, 1e-6 * trace).
template <typename T>
std::vector<T> smallest_eigvec_backward(const SymEigen<T>& eig,
                                        const std::vector<T>& upstream) {
  const std::size_t m = eig.dim;
  T trace = T(0);
  for (const T v : eig.values) trace += v;
  const T floor = T(1e-6) * std::max(std::abs(trace), T(1e-30));
  std::vector<T> grad(m * m, T(0));
  const T* v0 = &eig.vectors[0];
  for (std::size_t i = 1; i < m; ++i) {
    const T* vi = &eig.vectors[i * m];
    T gdotvi = T(0);
    for (std::size_t k = 0; k < m; ++k) gdotvi += upstream[k] * vi[k];
    T gap = eig.values[0] - eig.values[i];
    const T sign = gap < T(0) ? T(-1) : T(1);
    gap = sign * std::max(std::abs(gap), floor);
    const T coef = gdotvi / gap;
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < m; ++c)
        grad[r * m + c] += coef * vi[r] * v0[c];
  }
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = r + 1; c < m; ++c) {
      const T s = (grad[r * m + c] + grad[c * m + r]) / T(2);
      grad[r * m + c] = s;
      grad[c * m + r] = s;
    }
  return grad;
}

// Differentiable smallest eigenvector of a symmetric matrix, sign
// canonicalized. The backward pass uses the closed form above.
template <typename T>
Tensor<T> smallest_eigenvector(const Tensor<T>& c) {
  if (c.rank() != 2 || c.shape()[0] != c.shape()[1])
    throw ShapeError("smallest_eigenvector: expected square matrix, got " +
                     shape_str(c.shape()));
  const std::size_t m = c.shape()[0];
  SymEigen<T> eig = jacobi_sym_eigen(c.data(), m);
  std::vector<T> v0(eig.vectors.begin(), eig.vectors.begin() + m);
  Tensor<T> result({m}, std::move(v0));
  if (Tape<T>* tape = detail::tape_of(c)) {
    const int out_id = tape->add_node({m}, {c.node()});
    result.bind(tape, out_id);
    Tensor<T> cc = c;
    tape->set_backward(out_id, [cc, eig, out_id](Tape<T>& tp) {
      tp.accumulate(cc.node(),
                    smallest_eigvec_backward(eig, tp.grad_data(out_id)));
    });
  }
  return result;
}

// ---------------------------------------------------------------------------
// Weighted fitting heads

// C_w = Pbar^T diag(w)^2 Pbar, built as S^T S with S = diag(w) Pbar so the
// whole construction stays differentiable through w and Pbar.
template <typename T>
Tensor<T> weighted_covariance(const Tensor<T>& pbar, const Tensor<T>& w) {
  if (pbar.rank() != 2 || w.rank() != 1 || pbar.shape()[0] != w.shape()[0])
    throw ShapeError("weighted_covariance: shapes " + shape_str(pbar.shape()) +
                     " and " + shape_str(w.shape()));
  const std::size_t n = pbar.shape()[0];
  Tensor<T> wcol = reshape(w, {n, 1});
  Tensor<T> scaled = mul(pbar, wcol);
  return matmul(transpose(scaled), scaled);
}

namespace detail {

template <typename T>
void require_unit_l1(const Tensor<T>& w, const char* op) {
  T sum = T(0);
  for (const T v : w.data()) {
    if (v < T(0)) throw NumericError(std::string(op) + ": negative weight");
    sum += v;
  }
  if (std::abs(sum - T(1)) > T(1e-3))
    throw NumericError(std::string(op) + ": weights must sum to 1, got " +
                       std::to_string(static_cast<double>(sum)));
}

template <typename T>
Tensor<T> homogenize(const Tensor<T>& p) {
  const std::size_t n = p.shape()[0], d = p.shape()[1];
  std::vector<T> out(n * (d + 1));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) out[i * (d + 1) + j] = p.data()[i * d + j];
    out[i * (d + 1) + d] = T(1);
  }
  return Tensor<T>({n, d + 1}, std::move(out));
}

}  // namespace detail

// Weighted total least squares line fit: the smallest eigenvector of
// C_w([P, 1]). Output has unit norm; sign follows the eigen canonicalization.
template <typename T>
Tensor<T> fit_line(const Tensor<T>& points, const Tensor<T>& w) {
  if (points.rank() != 2 || points.shape()[1] != 2)
    throw ShapeError("fit_line: expected [N x 2] points, got " +
                     shape_str(points.shape()));
  const std::size_t n = points.shape()[0];
  if (n < 2) throw ShapeError("fit_line: need at least 2 points");
  detail::require_unit_l1(w, "fit_line");
  T wmax = T(0);
  for (const T v : w.data()) wmax = std::max(wmax, v);
  if (T(1) - wmax < T(1e-9))
    throw NumericError("fit_line: degenerate configuration (all weight on one point)");
  // Points are treated as data: gradients flow through w only.
  Tensor<T> pbar = detail::homogenize(points.detached());
  return smallest_eigenvector(weighted_covariance(pbar, w));
}

inline LineParams line_from_tensor(const Tensor<double>& theta) {
  LineParams lp;
  double norm = 0.0;
  for (int i = 0; i < 3; ++i) norm += theta.data()[i] * theta.data()[i];
  norm = std::sqrt(norm);
  for (int i = 0; i < 3; ++i) lp.theta[i] = theta.data()[i] / norm;
  return lp;
}

// Distance from a point to the line a*x + b*y + c = 0.
inline double line_point_distance(const LineParams& line, double x, double y) {
  const double a = line.theta[0], b = line.theta[1], c = line.theta[2];
  const double n = std::sqrt(a * a + b * b);
  if (n < 1e-15) throw NumericError("line_point_distance: degenerate line");
  return std::abs(a * x + b * y + c) / n;
}

// Per-correspondence epipolar constraint row
// (x2 x1, x2 y1, x2, y2 x1, y2 y1, y2, x1, y1, 1).
template <typename T>
Tensor<T> epipolar_constraints(const Tensor<T>& x) {
  if (x.rank() != 2 || x.shape()[1] != 4)
    throw ShapeError("epipolar_constraints: expected [N x 4], got " +
                     shape_str(x.shape()));
  const std::size_t n = x.shape()[0];
  std::vector<T> a(n * 9);
  for (std::size_t i = 0; i < n; ++i) {
    const T x1 = x.data()[i * 4 + 0], y1 = x.data()[i * 4 + 1];
    const T x2 = x.data()[i * 4 + 2], y2 = x.data()[i * 4 + 3];
    T* row = &a[i * 9];
    row[0] = x2 * x1;
    row[1] = x2 * y1;
    row[2] = x2;
    row[3] = y2 * x1;
    row[4] = y2 * y1;
    row[5] = y2;
    row[6] = x1;
    row[7] = y1;
    row[8] = T(1);
  }
  return Tensor<T>({n, 9}, std::move(a));
}

// Weighted 8-point estimate: smallest eigenvector of A^T diag(w)^2 A,
// reshaped row-major to 3x3. The eigenvector is unit norm, so ||F||_F = 1.
template <typename T>
Tensor<T> eightpoint_weighted(const Tensor<T>& correspondences,
                              const Tensor<T>& w) {
  const std::size_t n = correspondences.shape()[0];
  if (n < 8) throw ShapeError("eightpoint_weighted: need at least 8 rows");
  detail::require_unit_l1(w, "eightpoint_weighted");
  Tensor<T> a = epipolar_constraints(correspondences.detached());
  Tensor<T> f = smallest_eigenvector(weighted_covariance(a, w));
  return reshape(f, {3, 3});
}

inline FundamentalMatrix fundamental_from_tensor(const Tensor<double>& f) {
  FundamentalMatrix fm;
  double norm = 0.0;
  for (int i = 0; i < 9; ++i) norm += f.data()[i] * f.data()[i];
  norm = std::sqrt(norm);
  for (int i = 0; i < 9; ++i) fm.f[i] = f.data()[i] / norm;
  return fm;
}

// Rank-2 projection for inference: drop the singular direction belonging to
// the smallest singular value (v0 of F^T F), then renormalize. Training goes
// through the raw eigenvector head instead.
inline FundamentalMatrix rank2_project(const FundamentalMatrix& fin) {
  std::vector<double> ftf(9, 0.0);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += fin.f[k * 3 + r] * fin.f[k * 3 + c];
      ftf[r * 3 + c] = s;
    }
  const SymEigen<double> eig = jacobi_sym_eigen(ftf, 3);
  // Smallest eigenvalue; ties resolve to the last index so exact multiples
  // zero the trailing singular direction.
  std::size_t k0 = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (eig.values[i] <= eig.values[k0]) k0 = i;
  const double* v0 = &eig.vectors[k0 * 3];
  double fv[3];
  for (int r = 0; r < 3; ++r)
    fv[r] = fin.f[r * 3 + 0] * v0[0] + fin.f[r * 3 + 1] * v0[1] +
            fin.f[r * 3 + 2] * v0[2];
  FundamentalMatrix out;
  double norm = 0.0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      out.f[r * 3 + c] = fin.f[r * 3 + c] - fv[r] * v0[c];
      norm += out.f[r * 3 + c] * out.f[r * 3 + c];
    }
  norm = std::sqrt(norm);
  if (norm < 1e-15) throw NumericError("rank2_project: zero matrix");
  for (auto& v : out.f) v /= norm;
  return out;
}

// Symmetric epipolar distance (squared-residual form):
//   d = (x2^T F x1)^2 * (1 / (l1^2 + l2^2) + 1 / (l1'^2 + l2'^2)),
// with l = F x1 the epipolar line in image 2 and l' = F^T x2 in image 1.
inline double symmetric_epipolar_distance(const FundamentalMatrix& f,
                                          const Correspondence& corr,
                                          bool* degenerate = nullptr) {
  const double x1[3] = {corr.x1, corr.y1, 1.0};
  const double x2[3] = {corr.x2, corr.y2, 1.0};
  double l[3], lp[3];
  for (int i = 0; i < 3; ++i) {
    l[i] = f.f[i * 3 + 0] * x1[0] + f.f[i * 3 + 1] * x1[1] + f.f[i * 3 + 2] * x1[2];
    lp[i] = f.f[0 * 3 + i] * x2[0] + f.f[1 * 3 + i] * x2[1] + f.f[2 * 3 + i] * x2[2];
  }
  const double resid = x2[0] * l[0] + x2[1] * l[1] + x2[2] * l[2];
  const double den2 = l[0] * l[0] + l[1] * l[1];
  const double den1 = lp[0] * lp[0] + lp[1] * lp[1];
  constexpr double eps = 1e-15;
  if (degenerate) *degenerate = false;
  if (den2 < eps && den1 < eps) {
    if (degenerate) *degenerate = true;
    return 1e30;  // both epipolar lines degenerate
  }
  return resid * resid *
         (1.0 / std::max(den2, eps) + 1.0 / std::max(den1, eps));
}

// y_i = 1 iff the symmetric epipolar distance is below `threshold`.
inline std::vector<std::uint8_t> label_correspondences(
    const FundamentalMatrix& fstar, const std::vector<Correspondence>& corrs,
    double threshold = 1e-4) {
  if (threshold < 0) throw ConfigError("label threshold must be nonnegative");
  std::vector<std::uint8_t> y(corrs.size());
  for (std::size_t i = 0; i < corrs.size(); ++i)
    y[i] = symmetric_epipolar_distance(fstar, corrs[i]) < threshold ? 1 : 0;
  return y;
}

// Sign-resolved comparison helpers (theta and F are defined up to sign).
inline double sign_min_l2_distance(const std::array<double, 3>& a,
                                   const std::array<double, 3>& b) {
  double dplus = 0.0, dminus = 0.0;
  for (int i = 0; i < 3; ++i) {
    dplus += (a[i] - b[i]) * (a[i] - b[i]);
    dminus += (a[i] + b[i]) * (a[i] + b[i]);
  }
  return std::sqrt(std::min(dplus, dminus));
}

inline double sign_min_frobenius(const std::array<double, 9>& a,
                                 const std::array<double, 9>& b) {
  double dplus = 0.0, dminus = 0.0;
  for (int i = 0; i < 9; ++i) {
    dplus += (a[i] - b[i]) * (a[i] - b[i]);
    dminus += (a[i] + b[i]) * (a[i] + b[i]);
  }
  return std::sqrt(std::min(dplus, dminus));
}

}  // namespace acne
