#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "acne/config.hpp"
#include "acne/error.hpp"
#include "acne/geometry.hpp"
#include "acne/idx.hpp"
#include "acne/rng.hpp"

namespace acne {

struct PointCloudSample {
  std::size_t n = 0;
  std::size_t d = 2;
  std::vector<double> points;        // n x d row-major
  std::vector<std::uint8_t> labels;  // per-point inlier indicators
  std::array<double, 3> theta{};     // line task ground truth
  int class_id = -1;                 // mnist class
  std::uint64_t seed = 0;
  double outlier_ratio = 0.0;
};

struct CameraMeta {
  double image_size = 512.0;
  double focal = 1.2 * 512.0;
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};
  std::array<double, 3> translation{};
};

struct CorrespondenceSample {
  std::size_t n = 0;
  std::vector<double> coords;  // n x 4: (x1, y1, x2, y2), unit-box normalized
  std::array<double, 9> fstar{};
  std::vector<std::uint8_t> labels;
  CameraMeta meta;
  std::uint64_t seed = 0;
  double outlier_ratio = 0.0;
};

// ---------------------------------------------------------------------------
// Robust line fitting data

// Uniform cloud in [-1,1]^2 with a line through two of its points; each
// point independently becomes an inlier with probability 1 - outlier_ratio
// by projection onto the line plus truncated perpendicular jitter.
PointCloudSample gen_line_data(std::size_t n_points, double outlier_ratio,
                               double noise_sigma, std::uint64_t seed);

std::vector<PointCloudSample> make_line_dataset(std::size_t count,
                                                std::size_t n_points,
                                                double outlier_ratio,
                                                double noise_sigma,
                                                std::uint64_t base_seed);

// ---------------------------------------------------------------------------
// MNIST point clouds

// Threshold at 128, normalize foreground pixels to the unit bounding box,
// subsample 512 points with replacement, add N(0, 0.01) jitter, then append
// ceil(512 * outlier_ratio) uniform outliers (outlier-to-inlier ratio).
PointCloudSample gen_mnist_cloud(const std::uint8_t* image, std::size_t rows,
                                 std::size_t cols, double outlier_ratio,
                                 std::uint64_t seed, int class_id);

std::vector<PointCloudSample> make_mnist_clouds(
    const IdxImages& images, const IdxLabels& labels,
    const std::vector<std::size_t>& indices, double outlier_ratio,
    std::uint64_t base_seed);

// ---------------------------------------------------------------------------
// Synthetic two-view correspondences

// Random 3D points seen by two pinhole cameras (relative rotation <= 30deg);
// F* comes from the camera construction, labels from the construction too.
// pixel_noise is expressed in size-normalized image coordinates.
CorrespondenceSample gen_synthetic_correspondences(std::size_t n,
                                                   double outlier_ratio,
                                                   double pixel_noise,
                                                   std::uint64_t seed);

std::vector<CorrespondenceSample> make_stereo_dataset(std::size_t count,
                                                      std::size_t n,
                                                      double outlier_ratio,
                                                      double pixel_noise,
                                                      std::uint64_t base_seed);

// ---------------------------------------------------------------------------
// Splits

struct DatasetSplit {
  std::vector<std::size_t> train, val, test;
};

// Deterministic shuffled split; partitions are disjoint and covering.
DatasetSplit split_dataset(std::size_t count, const std::array<double, 3>& ratios,
                           std::uint64_t seed);

// ---------------------------------------------------------------------------
// Dataset cache (little-endian, magic "ACNDAT1")

struct DatasetCache {
  TaskKind task = TaskKind::line;
  std::vector<PointCloudSample> clouds;        // line / mnist
  std::vector<CorrespondenceSample> stereo;    // stereo_synth
};

void write_cache(const std::string& path, const DatasetCache& cache);
DatasetCache read_cache(const std::string& path);

}  // namespace acne
