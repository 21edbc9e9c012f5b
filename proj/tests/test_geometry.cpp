#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "acne/geometry.hpp"
#include "acne/rng.hpp"
#include "acne/tensor.hpp"

using namespace acne;

namespace {

// Closed-form eigenvalues of a symmetric 3x3 matrix (trigonometric form of
// the characteristic cubic). Independent oracle for the Jacobi solver.
std::array<double, 3> cubic_eigenvalues(const std::vector<double>& a) {
  const double p1 = a[1] * a[1] + a[2] * a[2] + a[5] * a[5];
  std::array<double, 3> eig;
  if (p1 == 0.0) {
    eig = {a[0], a[4], a[8]};
  } else {
    const double q = (a[0] + a[4] + a[8]) / 3.0;
    const double p2 = (a[0] - q) * (a[0] - q) + (a[4] - q) * (a[4] - q) +
                      (a[8] - q) * (a[8] - q) + 2.0 * p1;
    const double p = std::sqrt(p2 / 6.0);
    std::vector<double> b(9);
    for (int i = 0; i < 9; ++i) b[i] = a[i] / p;
    b[0] -= q / p;
    b[4] -= q / p;
    b[8] -= q / p;
    const double detb = b[0] * (b[4] * b[8] - b[5] * b[7]) -
                        b[1] * (b[3] * b[8] - b[5] * b[6]) +
                        b[2] * (b[3] * b[7] - b[4] * b[6]);
    double r = detb / 2.0;
    r = std::min(1.0, std::max(-1.0, r));
    const double phi = std::acos(r) / 3.0;
    const double two_pi_thirds = 2.0943951023931953;
    eig[2] = q + 2.0 * p * std::cos(phi);
    eig[0] = q + 2.0 * p * std::cos(phi + 2.0 * two_pi_thirds);
    eig[1] = 3.0 * q - eig[0] - eig[2];
  }
  std::sort(eig.begin(), eig.end());
  return eig;
}

std::vector<double> random_symmetric(std::size_t m, Rng& rng) {
  std::vector<double> a(m * m);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i; j < m; ++j) {
      const double v = rng.uniform(-1.0, 1.0);
      a[i * m + j] = v;
      a[j * m + i] = v;
    }
  return a;
}

// Minimal two-view construction used as the ground-truth oracle for the
// weighted 8-point head: F = K^-T [t]x R K^-1, rescaled to size-normalized
// image coordinates.
struct TwoViewScene {
  FundamentalMatrix fstar;
  std::vector<Correspondence> inliers;
};

std::array<double, 9> rodrigues(double ax, double ay, double az, double angle) {
  const double n = std::sqrt(ax * ax + ay * ay + az * az);
  ax /= n;
  ay /= n;
  az /= n;
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  return {c + ax * ax * t,      ax * ay * t - az * s, ax * az * t + ay * s,
          ax * ay * t + az * s, c + ay * ay * t,      ay * az * t - ax * s,
          ax * az * t - ay * s, ay * az * t + ax * s, c + az * az * t};
}

TwoViewScene make_scene(std::size_t n, Rng& rng) {
  const double size = 512.0;
  const double focal = 1.2 * size;
  const double cx = size / 2.0;
  const auto rot = rodrigues(rng.uniform(-1, 1), rng.uniform(-1, 1),
                             rng.uniform(-1, 1), rng.uniform(0.05, 0.4));
  const double tx = rng.uniform(-0.5, 0.5), ty = rng.uniform(-0.5, 0.5),
               tz = rng.uniform(-0.2, 0.2);

  // F_pix = K^-T [t]x R K^-1 for x2^T F x1 = 0 in pixel coordinates.
  const std::array<double, 9> tcross = {0, -tz, ty, tz, 0, -tx, -ty, tx, 0};
  std::array<double, 9> e{};
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 3; ++k)
        e[r * 3 + c] += tcross[r * 3 + k] * rot[k * 3 + c];
  // K^-1 = [[1/f, 0, -cx/f], [0, 1/f, -cx/f], [0, 0, 1]]
  const std::array<double, 9> kinv = {1 / focal, 0, -cx / focal,
                                      0, 1 / focal, -cx / focal,
                                      0, 0, 1};
  std::array<double, 9> tmp{}, fpix{};
  for (int r = 0; r < 3; ++r)  // K^-T E
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 3; ++k)
        tmp[r * 3 + c] += kinv[k * 3 + r] * e[k * 3 + c];
  for (int r = 0; r < 3; ++r)  // (K^-T E) K^-1
    for (int c = 0; c < 3; ++c)
      for (int k = 0; k < 3; ++k)
        fpix[r * 3 + c] += tmp[r * 3 + k] * kinv[k * 3 + c];
  // Rescale to coordinates divided by the image size.
  const double scale[3] = {size, size, 1.0};
  TwoViewScene scene;
  double norm = 0.0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      scene.fstar.f[r * 3 + c] = scale[r] * fpix[r * 3 + c] * scale[c];
      norm += scene.fstar.f[r * 3 + c] * scene.fstar.f[r * 3 + c];
    }
  for (auto& v : scene.fstar.f) v /= std::sqrt(norm);

  while (scene.inliers.size() < n) {
    const double x = rng.uniform(-1.5, 1.5), y = rng.uniform(-1.5, 1.5),
                 z = rng.uniform(4.0, 8.0);
    const double u1 = focal * x / z + cx, v1 = focal * y / z + cx;
    const double x2 = rot[0] * x + rot[1] * y + rot[2] * z + tx;
    const double y2 = rot[3] * x + rot[4] * y + rot[5] * z + ty;
    const double z2 = rot[6] * x + rot[7] * y + rot[8] * z + tz;
    if (z2 <= 0.1) continue;
    const double u2 = focal * x2 / z2 + cx, v2 = focal * y2 / z2 + cx;
    if (u1 < 0 || u1 > size || v1 < 0 || v1 > size || u2 < 0 || u2 > size ||
        v2 < 0 || v2 > size)
      continue;
    scene.inliers.push_back(
        {u1 / size, v1 / size, u2 / size, v2 / size});
  }
  return scene;
}

Tensor<double> uniform_weights(std::size_t n) {
  return Tensor<double>::full({n}, 1.0 / static_cast<double>(n));
}

}  // namespace

TEST_CASE("jacobi on a diagonal matrix") {
  auto eig = jacobi_sym_eigen<double>({3, 0, 0, 0, 2, 0, 0, 0, 1}, 3);
  CHECK(eig.values[0] == doctest::Approx(1.0));
  CHECK(eig.values[1] == doctest::Approx(2.0));
  CHECK(eig.values[2] == doctest::Approx(3.0));
  CHECK(eig.vectors[0 * 3 + 2] == doctest::Approx(1.0));
  CHECK(eig.vectors[0 * 3 + 0] == doctest::Approx(0.0));
}

TEST_CASE("jacobi eigenvalues match the cubic-formula oracle") {
  Rng rng(101);
  for (int trial = 0; trial < 100; ++trial) {
    auto a = random_symmetric(3, rng);
    auto eig = jacobi_sym_eigen(a, 3);
    auto oracle = cubic_eigenvalues(a);
    for (int i = 0; i < 3; ++i)
      CHECK(std::abs(eig.values[i] - oracle[i]) < 1e-10);
  }
}

TEST_CASE("jacobi reconstruction and orthonormality") {
  Rng rng(7);
  for (std::size_t m : {std::size_t(3), std::size_t(9)}) {
    auto a = random_symmetric(m, rng);
    auto eig = jacobi_sym_eigen(a, m);
    double frob = 0.0;
    for (auto v : a) frob += v * v;
    frob = std::sqrt(frob);
    // reconstruction: sum_k lambda_k v_k v_k^T
    double err = 0.0;
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < m; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < m; ++k)
          s += eig.values[k] * eig.vectors[k * m + r] * eig.vectors[k * m + c];
        err += (s - a[r * m + c]) * (s - a[r * m + c]);
      }
    CHECK(std::sqrt(err) < 1e-8 * frob);
    // orthonormality: ||V V^T - I||_F < 1e-9
    double orth = 0.0;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < m; ++k)
          dot += eig.vectors[i * m + k] * eig.vectors[j * m + k];
        const double want = i == j ? 1.0 : 0.0;
        orth += (dot - want) * (dot - want);
      }
    CHECK(std::sqrt(orth) < 1e-9);
  }
}

TEST_CASE("jacobi rejects non-symmetric input") {
  std::vector<double> a = {1, 2, 3, 4};
  CHECK_THROWS_AS(jacobi_sym_eigen(a, 2), NumericError);
}

TEST_CASE("smallest eigenvector backward matches symmetric finite differences") {
  Rng rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    // Build a matrix with well separated eigenvalues.
    auto basis = jacobi_sym_eigen(random_symmetric(3, rng), 3);
    const double lams[3] = {0.5, 2.0, 5.0};
    std::vector<double> c(9, 0.0);
    for (int k = 0; k < 3; ++k)
      for (int r = 0; r < 3; ++r)
        for (int col = 0; col < 3; ++col)
          c[r * 3 + col] +=
              lams[k] * basis.vectors[k * 3 + r] * basis.vectors[k * 3 + col];
    std::vector<double> dir(3);
    for (auto& v : dir) v = rng.uniform(-1.0, 1.0);

    auto loss_of = [&](const std::vector<double>& mat) {
      Tensor<double> ct({3, 3}, mat);
      auto v0 = smallest_eigenvector(ct);
      double s = 0.0;
      for (int i = 0; i < 3; ++i) s += dir[i] * v0.data()[i];
      return s;
    };

    Tape<double> tape;
    auto ct = tape.var(Tensor<double>({3, 3}, c));
    auto v0 = smallest_eigenvector(ct);
    auto loss = total_sum(mul(v0, Tensor<double>({3}, dir)));
    tape.backward(loss);
    auto grad = tape.grad(ct);

    // gradient symmetry
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col)
        CHECK(std::abs(grad(r, col) - grad(col, r)) < 1e-10);

    // symmetric-direction finite differences
    const double eps = 1e-6;
    for (int r = 0; r < 3; ++r)
      for (int col = r; col < 3; ++col) {
        std::vector<double> cp = c, cm = c;
        cp[r * 3 + col] += eps;
        cm[r * 3 + col] -= eps;
        if (col != r) {
          cp[col * 3 + r] += eps;
          cm[col * 3 + r] -= eps;
        }
        const double numeric = (loss_of(cp) - loss_of(cm)) / (2 * eps);
        const double analytic =
            col == r ? grad(r, col) : grad(r, col) + grad(col, r);
        const double rel = std::abs(analytic - numeric) /
                           std::max(1e-8, std::abs(analytic) + std::abs(numeric));
        CHECK(rel < 1e-4);
      }
  }
}

TEST_CASE("smallest eigenvector backward stays finite on degenerate spectra") {
  Tape<double> tape;
  auto c = tape.var(Tensor<double>({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 2}));
  auto v0 = smallest_eigenvector(c);
  tape.backward(total_sum(v0));
  for (double g : tape.grad(c).data()) CHECK(std::isfinite(g));
}

TEST_CASE("weighted covariance basics") {
  Tensor<double> pbar({1, 3}, {1, 0, 1});
  Tensor<double> w({1}, {1.0});
  auto c = weighted_covariance(pbar, w);
  CHECK(c.data() == std::vector<double>{1, 0, 1, 0, 0, 0, 1, 0, 1});

  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> pts(12 * 3);
    for (auto& v : pts) v = rng.uniform(-2.0, 2.0);
    std::vector<double> wv(12);
    double sum = 0.0;
    for (auto& v : wv) sum += (v = rng.uniform(0.0, 1.0));
    for (auto& v : wv) v /= sum;
    auto cw = weighted_covariance(Tensor<double>({12, 3}, pts),
                                  Tensor<double>({12}, wv));
    // exact symmetry
    for (int r = 0; r < 3; ++r)
      for (int c2 = 0; c2 < 3; ++c2) CHECK(cw(r, c2) == cw(c2, r));
    // PSD by construction
    auto eig = sym_eigen(cw);
    for (double lam : eig.values) CHECK(lam >= -1e-9);
  }
}

TEST_CASE("fit_line recovers the x-axis") {
  Tensor<double> pts({3, 2}, {-1, 0, 0, 0, 1, 0});
  auto theta = fit_line(pts, uniform_weights(3));
  const auto line = line_from_tensor(theta);
  CHECK(std::abs(line.theta[1]) == doctest::Approx(1.0));
  CHECK(std::abs(line.theta[0]) < 1e-12);
  CHECK(std::abs(line.theta[2]) < 1e-12);
}

TEST_CASE("fit_line with oracle weights beats uniform weights on outliers") {
  Rng rng(55);
  // True line y = 0.5 x + 0.1, 20% inliers.
  const double a = 0.5, b = -1.0, cc = 0.1;
  const double norm = std::sqrt(a * a + b * b + cc * cc);
  std::array<double, 3> truth = {a / norm, b / norm, cc / norm};
  const std::size_t n = 64;
  std::vector<double> pts(n * 2);
  std::vector<double> inlier_w(n, 0.0);
  std::size_t inliers = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.uniform(-1.0, 1.0);
    if (i % 5 == 0) {  // inlier on the exact line
      pts[i * 2] = x;
      pts[i * 2 + 1] = 0.5 * x + 0.1;
      inlier_w[i] = 1.0;
      ++inliers;
    } else {
      pts[i * 2] = x;
      pts[i * 2 + 1] = rng.uniform(-1.0, 1.0);
    }
  }
  for (auto& w : inlier_w) w /= static_cast<double>(inliers);
  Tensor<double> p({n, 2}, pts);

  auto theta_oracle = line_from_tensor(fit_line(p, Tensor<double>({n}, inlier_w)));
  CHECK(sign_min_l2_distance(theta_oracle.theta, truth) < 1e-6);

  auto theta_uniform = line_from_tensor(fit_line(p, uniform_weights(n)));
  CHECK(sign_min_l2_distance(theta_uniform.theta, truth) >
        sign_min_l2_distance(theta_oracle.theta, truth));
}

TEST_CASE("fit_line rejects degenerate weighting") {
  Tensor<double> pts({3, 2}, {0, 0, 1, 1, 2, 2});
  Tensor<double> w({3}, {1.0, 0.0, 0.0});
  CHECK_THROWS_AS(fit_line(pts, w), NumericError);
  Tensor<double> neg({3}, {0.5, 0.6, -0.1});
  CHECK_THROWS_AS(fit_line(pts, neg), NumericError);
}

TEST_CASE("fit_line gradient w.r.t. weights matches finite differences") {
  Rng rng(77);
  const std::size_t n = 10;
  std::vector<double> pts(n * 2);
  for (auto& v : pts) v = rng.uniform(-1.0, 1.0);
  Tensor<double> p({n, 2}, pts);
  std::vector<double> dir(3);
  for (auto& v : dir) v = rng.uniform(-1.0, 1.0);
  Tensor<double> dirt({3}, dir);

  // Softmax reparameterization keeps the perturbed weights on the simplex.
  std::vector<double> logits(n);
  for (auto& v : logits) v = rng.uniform(-0.5, 0.5);
  auto f = [&](const Tensor<double>& z) {
    auto w = softmax_axis(z, 0);
    return total_sum(mul(fit_line(p, w), dirt));
  };
  Tape<double> tape;
  auto z = tape.var(Tensor<double>({n}, logits));
  tape.backward(f(z));
  auto analytic = tape.grad(z);
  const double eps = 1e-6;
  for (std::size_t i = 0; i < n; ++i) {
    auto zp = logits, zm = logits;
    zp[i] += eps;
    zm[i] -= eps;
    const double numeric =
        (f(Tensor<double>({n}, zp)).value() - f(Tensor<double>({n}, zm)).value()) /
        (2 * eps);
    const double rel = std::abs(analytic.data()[i] - numeric) /
                       std::max(1e-8, std::abs(analytic.data()[i]) + std::abs(numeric));
    CHECK(rel < 1e-3);
  }
}

TEST_CASE("weighted 8-point recovers a constructed fundamental matrix") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    auto scene = make_scene(64, rng);
    std::vector<double> x(64 * 4);
    for (std::size_t i = 0; i < 64; ++i) {
      x[i * 4 + 0] = scene.inliers[i].x1;
      x[i * 4 + 1] = scene.inliers[i].y1;
      x[i * 4 + 2] = scene.inliers[i].x2;
      x[i * 4 + 3] = scene.inliers[i].y2;
    }
    Tensor<double> xt({64, 4}, x);

    // Construction oracle: every row satisfies the epipolar constraint.
    auto constraints = epipolar_constraints(xt);
    for (std::size_t i = 0; i < 64; ++i) {
      double resid = 0.0;
      for (int j = 0; j < 9; ++j)
        resid += constraints(i, j) * scene.fstar.f[j];
      CHECK(std::abs(resid) < 1e-9);
    }

    auto fhat = fundamental_from_tensor(eightpoint_weighted(xt, uniform_weights(64)));
    CHECK(sign_min_frobenius(fhat.f, scene.fstar.f) < 1e-6);

    double frob = 0.0;
    for (double v : fhat.f) frob += v * v;
    CHECK(std::sqrt(frob) == doctest::Approx(1.0).epsilon(1e-9));

    // F* is rank 2 by construction.
    const auto& f = scene.fstar.f;
    const double det = f[0] * (f[4] * f[8] - f[5] * f[7]) -
                       f[1] * (f[3] * f[8] - f[5] * f[6]) +
                       f[2] * (f[3] * f[7] - f[4] * f[6]);
    CHECK(std::abs(det) < 1e-12);
  }
}

TEST_CASE("8-point is insensitive to positive rescaling of the raw weights") {
  Rng rng(19);
  auto scene = make_scene(32, rng);
  std::vector<double> x(32 * 4);
  for (std::size_t i = 0; i < 32; ++i) {
    x[i * 4 + 0] = scene.inliers[i].x1;
    x[i * 4 + 1] = scene.inliers[i].y1;
    x[i * 4 + 2] = scene.inliers[i].x2;
    x[i * 4 + 3] = scene.inliers[i].y2;
  }
  Tensor<double> xt({32, 4}, x);
  std::vector<double> raw(32);
  for (auto& v : raw) v = rng.uniform(0.1, 1.0);
  auto eta = [](std::vector<double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    for (auto& x : v) x /= s;
    return v;
  };
  auto w1 = eta(raw);
  auto scaled = raw;
  for (auto& v : scaled) v *= 7.5;
  auto w2 = eta(scaled);
  auto f1 = eightpoint_weighted(xt, Tensor<double>({32}, w1));
  auto f2 = eightpoint_weighted(xt, Tensor<double>({32}, w2));
  for (int i = 0; i < 9; ++i)
    CHECK(f1.data()[i] == doctest::Approx(f2.data()[i]).epsilon(1e-9));
}

TEST_CASE("eightpoint_weighted requires 8 correspondences") {
  Tensor<double> x({4, 4}, std::vector<double>(16, 0.1));
  CHECK_THROWS_AS(eightpoint_weighted(x, uniform_weights(4)), ShapeError);
}

TEST_CASE("rank2_project") {
  // Already rank 2: unchanged.
  FundamentalMatrix f;
  f.f = {0, -1, 0, 1, 0, 0, 0, 0, 0};
  const double n = std::sqrt(2.0);
  for (auto& v : f.f) v /= n;
  auto p = rank2_project(f);
  for (int i = 0; i < 9; ++i) CHECK(std::abs(p.f[i] - f.f[i]) < 1e-8);

  // Identity projects to diag(1,1,0)/sqrt(2).
  FundamentalMatrix eye;
  eye.f = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  const double inv = 1.0 / std::sqrt(3.0);
  for (auto& v : eye.f) v *= inv;
  auto pe = rank2_project(eye);
  CHECK(pe.f[0] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(pe.f[4] == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(std::abs(pe.f[8]) < 1e-12);

  // Determinant vanishes after projection.
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    FundamentalMatrix r;
    double norm = 0.0;
    for (auto& v : r.f) {
      v = rng.uniform(-1.0, 1.0);
      norm += v * v;
    }
    for (auto& v : r.f) v /= std::sqrt(norm);
    auto pr = rank2_project(r);
    const auto& m = pr.f;
    const double det = m[0] * (m[4] * m[8] - m[5] * m[7]) -
                       m[1] * (m[3] * m[8] - m[5] * m[6]) +
                       m[2] * (m[3] * m[7] - m[4] * m[6]);
    CHECK(std::abs(det) < 1e-10);
  }
}

TEST_CASE("symmetric epipolar distance agrees with the point-line oracle") {
  Rng rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    FundamentalMatrix f;
    double norm = 0.0;
    for (auto& v : f.f) {
      v = rng.uniform(-1.0, 1.0);
      norm += v * v;
    }
    for (auto& v : f.f) v /= std::sqrt(norm);
    Correspondence c{rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1),
                     rng.uniform(0, 1)};
    const double d = symmetric_epipolar_distance(f, c);
    CHECK(d >= 0.0);

    // Oracle: squared point-line distances on both sides, coded directly.
    auto point_line_sq = [](double px, double py, double l0, double l1,
                            double l2) {
      const double num = l0 * px + l1 * py + l2;
      return num * num / (l0 * l0 + l1 * l1);
    };
    const double l0 = f.f[0] * c.x1 + f.f[1] * c.y1 + f.f[2];
    const double l1 = f.f[3] * c.x1 + f.f[4] * c.y1 + f.f[5];
    const double l2 = f.f[6] * c.x1 + f.f[7] * c.y1 + f.f[8];
    const double m0 = f.f[0] * c.x2 + f.f[3] * c.y2 + f.f[6];
    const double m1 = f.f[1] * c.x2 + f.f[4] * c.y2 + f.f[7];
    const double m2 = f.f[2] * c.x2 + f.f[5] * c.y2 + f.f[8];
    const double oracle =
        point_line_sq(c.x2, c.y2, l0, l1, l2) + point_line_sq(c.x1, c.y1, m0, m1, m2);
    CHECK(std::abs(d - oracle) < 1e-9);
  }
}

TEST_CASE("epipolar distance is zero for exact correspondences") {
  Rng rng(47);
  auto scene = make_scene(16, rng);
  for (const auto& c : scene.inliers)
    CHECK(symmetric_epipolar_distance(scene.fstar, c) < 1e-16);
}

TEST_CASE("label_correspondences") {
  Rng rng(53);
  auto scene = make_scene(32, rng);
  auto y = label_correspondences(scene.fstar, scene.inliers, 1e-4);
  for (auto v : y) CHECK(v == 1);
  auto y0 = label_correspondences(scene.fstar, scene.inliers, 0.0);
  for (auto v : y0) CHECK(v == 0);

  // Uniform random pairs are rarely mislabeled as inliers at the default
  // threshold (seeded Monte-Carlo estimate).
  std::vector<Correspondence> random_pairs(2000);
  for (auto& c : random_pairs)
    c = {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1),
         rng.uniform(0, 1)};
  auto yr = label_correspondences(scene.fstar, random_pairs, 1e-4);
  std::size_t positives = 0;
  for (auto v : yr) positives += v;
  CHECK(static_cast<double>(positives) / random_pairs.size() < 0.05);
}

TEST_CASE("line_point_distance") {
  LineParams horiz;
  horiz.theta = {0, 1, 0};
  CHECK(line_point_distance(horiz, 5, 2) == doctest::Approx(2.0));
  CHECK(line_point_distance(horiz, 3, 0) == doctest::Approx(0.0));
  LineParams neg;
  neg.theta = {0, -1, 0};
  CHECK(line_point_distance(neg, 5, 2) == doctest::Approx(2.0));
  LineParams degenerate;
  degenerate.theta = {0, 0, 1};
  CHECK_THROWS_AS(line_point_distance(degenerate, 0, 0), NumericError);
}

TEST_CASE("fits are invariant to row permutations") {
  Rng rng(61);
  const std::size_t n = 24;
  std::vector<double> pts(n * 2);
  for (auto& v : pts) v = rng.uniform(-1.0, 1.0);
  std::vector<double> w(n);
  double s = 0.0;
  for (auto& v : w) s += (v = rng.uniform(0.1, 1.0));
  for (auto& v : w) v /= s;

  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  for (std::size_t i = n; i > 1; --i)
    std::swap(perm[i - 1], perm[rng.below(i)]);

  std::vector<double> pts_p(n * 2), w_p(n);
  for (std::size_t i = 0; i < n; ++i) {
    pts_p[i * 2] = pts[perm[i] * 2];
    pts_p[i * 2 + 1] = pts[perm[i] * 2 + 1];
    w_p[i] = w[perm[i]];
  }
  auto t1 = fit_line(Tensor<double>({n, 2}, pts), Tensor<double>({n}, w));
  auto t2 = fit_line(Tensor<double>({n, 2}, pts_p), Tensor<double>({n}, w_p));
  for (int i = 0; i < 3; ++i)
    CHECK(t1.data()[i] == doctest::Approx(t2.data()[i]).epsilon(1e-9));
}
