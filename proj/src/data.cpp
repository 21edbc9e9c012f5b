#include "acne/data.hpp"

#include <algorithm>
#include <cmath>

namespace acne {

namespace {

double truncated_gaussian(Rng& rng, double sigma, double limit_sigmas = 3.0) {
  if (sigma <= 0.0) return 0.0;
  double v;
  do {
    v = rng.gaussian(0.0, sigma);
  } while (std::abs(v) > limit_sigmas * sigma);
  return v;
}

void canonicalize3(std::array<double, 3>& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (auto& x : v) x /= norm;
  std::size_t best = 0;
  for (std::size_t i = 1; i < 3; ++i)
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  if (v[best] < 0.0)
    for (auto& x : v) x = -x;
}

}  // namespace

PointCloudSample gen_line_data(std::size_t n_points, double outlier_ratio,
                               double noise_sigma, std::uint64_t seed) {
  if (n_points < 4) throw ConfigError("gen_line_data: need n_points >= 4");
  if (outlier_ratio < 0.0 || outlier_ratio >= 1.0)
    throw ConfigError("gen_line_data: outlier_ratio must be in [0, 1)");
  Rng rng(seed);
  PointCloudSample sample;
  sample.n = n_points;
  sample.d = 2;
  sample.seed = seed;
  sample.outlier_ratio = outlier_ratio;
  sample.points.resize(n_points * 2);
  sample.labels.resize(n_points);
  for (auto& v : sample.points) v = rng.uniform(-1.0, 1.0);

  // Line through two distinct cloud points; resample on degeneracy.
  double dx = 0.0, dy = 0.0;
  std::size_t i0 = 0, i1 = 0;
  do {
    i0 = rng.below(n_points);
    i1 = rng.below(n_points);
    dx = sample.points[i1 * 2] - sample.points[i0 * 2];
    dy = sample.points[i1 * 2 + 1] - sample.points[i0 * 2 + 1];
  } while (i0 == i1 || (dx * dx + dy * dy) < 1e-12);
  const double a = -dy, b = dx;
  const double c = -(a * sample.points[i0 * 2] + b * sample.points[i0 * 2 + 1]);
  sample.theta = {a, b, c};
  canonicalize3(sample.theta);

  const double na = sample.theta[0], nb = sample.theta[1], nc = sample.theta[2];
  const double nlen = std::sqrt(na * na + nb * nb);
  for (std::size_t i = 0; i < n_points; ++i) {
    if (rng.uniform() < 1.0 - outlier_ratio) {
      double& x = sample.points[i * 2];
      double& y = sample.points[i * 2 + 1];
      const double dist = (na * x + nb * y + nc) / nlen;
      const double jitter = truncated_gaussian(rng, noise_sigma);
      x += (jitter - dist) * na / nlen;
      y += (jitter - dist) * nb / nlen;
      sample.labels[i] = 1;
    } else {
      sample.labels[i] = 0;
    }
  }
  return sample;
}

std::vector<PointCloudSample> make_line_dataset(std::size_t count,
                                                std::size_t n_points,
                                                double outlier_ratio,
                                                double noise_sigma,
                                                std::uint64_t base_seed) {
  std::vector<PointCloudSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(gen_line_data(n_points, outlier_ratio, noise_sigma,
                                mix_seed(base_seed, i)));
  return out;
}

PointCloudSample gen_mnist_cloud(const std::uint8_t* image, std::size_t rows,
                                 std::size_t cols, double outlier_ratio,
                                 std::uint64_t seed, int class_id) {
  std::vector<double> fx, fy;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (image[r * cols + c] > 128) {
        fx.push_back(static_cast<double>(c));
        fy.push_back(static_cast<double>(r));
      }
  if (fx.empty()) throw Error("gen_mnist_cloud: empty foreground");

  const auto [minx, maxx] = std::minmax_element(fx.begin(), fx.end());
  const auto [miny, maxy] = std::minmax_element(fy.begin(), fy.end());
  const double sx = *maxx > *minx ? *maxx - *minx : 1.0;
  const double sy = *maxy > *miny ? *maxy - *miny : 1.0;

  constexpr std::size_t kBase = 512;
  const std::size_t n_out =
      static_cast<std::size_t>(std::ceil(kBase * outlier_ratio));
  Rng rng(seed);
  PointCloudSample sample;
  sample.n = kBase + n_out;
  sample.d = 2;
  sample.seed = seed;
  sample.outlier_ratio = outlier_ratio;
  sample.class_id = class_id;
  sample.points.resize(sample.n * 2);
  sample.labels.resize(sample.n);
  for (std::size_t i = 0; i < kBase; ++i) {
    const std::size_t pick = rng.below(fx.size());
    double x = (fx[pick] - *minx) / sx + rng.gaussian(0.0, 0.01);
    double y = (fy[pick] - *miny) / sy + rng.gaussian(0.0, 0.01);
    sample.points[i * 2] = std::min(1.0, std::max(0.0, x));
    sample.points[i * 2 + 1] = std::min(1.0, std::max(0.0, y));
    sample.labels[i] = 1;
  }
  for (std::size_t i = kBase; i < sample.n; ++i) {
    sample.points[i * 2] = rng.uniform();
    sample.points[i * 2 + 1] = rng.uniform();
    sample.labels[i] = 0;
  }
  return sample;
}

std::vector<PointCloudSample> make_mnist_clouds(
    const IdxImages& images, const IdxLabels& labels,
    const std::vector<std::size_t>& indices, double outlier_ratio,
    std::uint64_t base_seed) {
  if (images.count != labels.labels.size())
    throw IoError("make_mnist_clouds: image/label count mismatch");
  std::vector<PointCloudSample> out;
  out.reserve(indices.size());
  for (const std::size_t idx : indices)
    out.push_back(gen_mnist_cloud(images.image(idx), images.rows, images.cols,
                                  outlier_ratio, mix_seed(base_seed, idx),
                                  labels.labels[idx]));
  return out;
}

CorrespondenceSample gen_synthetic_correspondences(std::size_t n,
                                                   double outlier_ratio,
                                                   double pixel_noise,
                                                   std::uint64_t seed) {
  if (n < 16) throw ConfigError("gen_synthetic_correspondences: need n >= 16");
  Rng rng(seed);
  CorrespondenceSample sample;
  sample.n = n;
  sample.seed = seed;
  sample.outlier_ratio = outlier_ratio;
  const double size = sample.meta.image_size;
  const double focal = sample.meta.focal;
  const double cx = size / 2.0;

  // Random relative pose: axis-angle rotation up to 30 degrees, and a wide
  // baseline relative to the scene depth (a vanishing baseline makes the
  // 8-point problem degenerate). Poses whose frusta barely overlap are
  // redrawn.
  std::array<double, 9> rot{};
  double tx = 0, ty = 0, tz = 0;
  auto draw_pose = [&] {
    double ax, ay, az, alen;
    do {
      ax = rng.gaussian();
      ay = rng.gaussian();
      az = rng.gaussian();
      alen = std::sqrt(ax * ax + ay * ay + az * az);
    } while (alen < 1e-6);
    ax /= alen;
    ay /= alen;
    az /= alen;
    const double angle = rng.uniform(0.05, 3.14159265358979323846 / 6.0);
    const double ca = std::cos(angle), sa = std::sin(angle), ta = 1.0 - ca;
    rot = {ca + ax * ax * ta,      ax * ay * ta - az * sa,
           ax * az * ta + ay * sa, ax * ay * ta + az * sa,
           ca + ay * ay * ta,      ay * az * ta - ax * sa,
           ax * az * ta - ay * sa, ay * az * ta + ax * sa,
           ca + az * az * ta};
    do {
      tx = rng.uniform(-1.2, 1.2);
      ty = rng.uniform(-1.2, 1.2);
      tz = rng.uniform(-0.4, 0.4);
    } while (tx * tx + ty * ty + tz * tz < 0.16);
  };
  draw_pose();
  sample.meta.rotation = rot;
  sample.meta.translation = {tx, ty, tz};

  // F = K^-T [t]x R K^-1, rescaled to size-normalized coordinates.
  auto compute_fstar = [&] {
    const std::array<double, 9> tcross = {0, -tz, ty, tz, 0, -tx, -ty, tx, 0};
    std::array<double, 9> e{};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 3; ++k)
          e[r * 3 + c] += tcross[r * 3 + k] * rot[k * 3 + c];
    const std::array<double, 9> kinv = {1 / focal, 0, -cx / focal,
                                        0, 1 / focal, -cx / focal,
                                        0, 0, 1};
    std::array<double, 9> tmp{}, fpix{};
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 3; ++k)
          tmp[r * 3 + c] += kinv[k * 3 + r] * e[k * 3 + c];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        for (int k = 0; k < 3; ++k)
          fpix[r * 3 + c] += tmp[r * 3 + k] * kinv[k * 3 + c];
    const double scale[3] = {size, size, 1.0};
    double norm = 0.0;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        sample.fstar[r * 3 + c] = scale[r] * fpix[r * 3 + c] * scale[c];
        norm += sample.fstar[r * 3 + c] * sample.fstar[r * 3 + c];
      }
    norm = std::sqrt(norm);
    std::size_t best = 0;
    for (std::size_t i = 1; i < 9; ++i)
      if (std::abs(sample.fstar[i]) > std::abs(sample.fstar[best])) best = i;
    const double flip = sample.fstar[best] < 0.0 ? -1.0 : 1.0;
    for (auto& v : sample.fstar) v = flip * v / norm;
  };

  sample.coords.resize(n * 4);
  sample.labels.resize(n);
  std::size_t inlier_count = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sample.labels[i] = rng.uniform() < outlier_ratio ? 0 : 1;
    inlier_count += sample.labels[i];
  }

  // Generate every inlier for the current pose; redraw the pose when the
  // frusta overlap too little to place points.
  for (;;) {
    compute_fstar();
    bool pose_ok = true;
    std::size_t attempts = 0;
    const std::size_t budget = 500 * std::max<std::size_t>(inlier_count, 1);
    for (std::size_t i = 0; i < n && pose_ok; ++i) {
      if (!sample.labels[i]) continue;
      for (;;) {
        if (++attempts > budget) {
          pose_ok = false;
          break;
        }
        const double x = rng.uniform(-2.0, 2.0);
        const double y = rng.uniform(-2.0, 2.0);
        const double z = rng.uniform(3.0, 10.0);
        const double u1 = focal * x / z + cx;
        const double v1 = focal * y / z + cx;
        const double x2 = rot[0] * x + rot[1] * y + rot[2] * z + tx;
        const double y2 = rot[3] * x + rot[4] * y + rot[5] * z + ty;
        const double z2 = rot[6] * x + rot[7] * y + rot[8] * z + tz;
        if (z2 <= 0.1) continue;
        const double u2 = focal * x2 / z2 + cx;
        const double v2 = focal * y2 / z2 + cx;
        if (u1 < 0 || u1 > size || v1 < 0 || v1 > size) continue;
        if (u2 < 0 || u2 > size || v2 < 0 || v2 > size) continue;
        sample.coords[i * 4 + 0] =
            u1 / size + truncated_gaussian(rng, pixel_noise);
        sample.coords[i * 4 + 1] =
            v1 / size + truncated_gaussian(rng, pixel_noise);
        sample.coords[i * 4 + 2] =
            u2 / size + truncated_gaussian(rng, pixel_noise);
        sample.coords[i * 4 + 3] =
            v2 / size + truncated_gaussian(rng, pixel_noise);
        break;
      }
    }
    if (pose_ok) break;
    draw_pose();
    sample.meta.rotation = rot;
    sample.meta.translation = {tx, ty, tz};
  }
  for (std::size_t i = 0; i < n; ++i)
    if (!sample.labels[i])
      for (int j = 0; j < 4; ++j) sample.coords[i * 4 + j] = rng.uniform();
  return sample;
}

std::vector<CorrespondenceSample> make_stereo_dataset(std::size_t count,
                                                      std::size_t n,
                                                      double outlier_ratio,
                                                      double pixel_noise,
                                                      std::uint64_t base_seed) {
  std::vector<CorrespondenceSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    out.push_back(gen_synthetic_correspondences(n, outlier_ratio, pixel_noise,
                                                mix_seed(base_seed, i)));
  return out;
}

DatasetSplit split_dataset(std::size_t count,
                           const std::array<double, 3>& ratios,
                           std::uint64_t seed) {
  double sum = 0.0;
  for (double r : ratios) {
    if (r < 0.0) throw ConfigError("split_dataset: negative ratio");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9)
    throw ConfigError("split_dataset: ratios must sum to 1");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(seed);
  for (std::size_t i = count; i > 1; --i)
    std::swap(order[i - 1], order[rng.below(i)]);

  const std::size_t c0 =
      static_cast<std::size_t>(std::llround(ratios[0] * double(count)));
  const std::size_t c1 =
      static_cast<std::size_t>(std::llround(ratios[1] * double(count)));
  if (c0 + c1 > count) throw ConfigError("split_dataset: rounding overflow");
  const std::size_t c2 = count - c0 - c1;
  const std::size_t counts[3] = {c0, c1, c2};
  for (int i = 0; i < 3; ++i)
    if (ratios[i] > 0.0 && counts[i] == 0 && count > 0)
      throw ConfigError("split_dataset: empty partition");

  DatasetSplit split;
  split.train.assign(order.begin(), order.begin() + c0);
  split.val.assign(order.begin() + c0, order.begin() + c0 + c1);
  split.test.assign(order.begin() + c0 + c1, order.end());
  return split;
}

}  // namespace acne
