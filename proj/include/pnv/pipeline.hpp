#pragma once

// Submap preprocessing: accumulated run points are cropped at fixed
// trajectory intervals, ground-filtered, reduced to a fixed point count
// and normalized into the descriptor network's input domain. Pair labels
// come from planar centroid distance alone.

#include <cstdint>
#include <string>
#include <vector>

#include "pnv/geometry.hpp"
#include "pnv/tensor.hpp"

namespace pnv {

struct RawScanCloud {
  std::vector<Vec3> points;  // world frame, meters
  Vec2 pose_xy;
  std::string run_id;
  int64_t timestamp = 0;
};

struct Submap {
  Tensor cloud;  // [T,3], zero mean, coordinates in [-1,1]
  Vec2 centroid_xy;
  std::string run_id;
  double extent = 0.0;
};

enum class PairLabel { kPositive, kNegative, kIndeterminate };

struct PipelineConfig {
  double interval_m = 10.0;
  double extent_m = 25.0;
  int64_t target_points = 4096;
  double ground_inlier_tol_m = 0.15;
  double ground_max_tilt_deg = 15.0;
  double positive_max_m = 10.0;
  double negative_min_m = 50.0;
};

// Single-plane randomized consensus fit (500 seeded iterations) restricted
// to near-vertical normals; inliers within inlier_tol are dropped. Clouds
// where no such plane covers 20% of the points pass through unchanged.
RawScanCloud remove_ground(const RawScanCloud& scan, double inlier_tol_m, double max_tilt_deg,
                           uint64_t seed);

// Voxel-grid reduction to exactly target points: bisection picks the
// largest voxel size whose occupied count still reaches target, voxels
// collapse to centroids, and a seeded subsample trims to target. Inputs
// smaller than target are padded by seeded duplication.
Tensor downsample_to_fixed(const std::vector<Vec3>& points, int64_t target, uint64_t seed);

struct NormalizeResult {
  Tensor cloud;   // [N,3]
  Vec3 centroid;  // subtracted per-axis mean
  double scale;   // single isotropic divisor; 1 for degenerate input
};

NormalizeResult normalize_cloud(const std::vector<Vec3>& points);

struct SubmapBuildResult {
  std::vector<Submap> submaps;
  std::vector<std::string> warnings;  // skipped intervals with the reason
};

SubmapBuildResult build_submaps(const std::vector<RawScanCloud>& run,
                                const PipelineConfig& config, uint64_t seed);

PairLabel label_pair(const Submap& a, const Submap& b, double positive_max_m = 10.0,
                     double negative_min_m = 50.0);

struct SplitResult {
  std::vector<int> train;  // indices into the submap list
  std::vector<int> test;
};

// Tiles the covered area into region_side squares and assigns whole
// squares to the test side until its submap share reaches test_fraction;
// the sides are geographically disjoint by construction.
SplitResult split_regions(const std::vector<Submap>& submaps, double test_fraction,
                          double region_side_m, uint64_t seed);

}  // namespace pnv
