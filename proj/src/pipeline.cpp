#include "pnv/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "pnv/rng.hpp"

namespace pnv {

RawScanCloud remove_ground(const RawScanCloud& scan, double inlier_tol_m, double max_tilt_deg,
                           uint64_t seed) {
  const size_t n = scan.points.size();
  if (n < 50)
    throw std::invalid_argument("remove_ground: need at least 50 points, got " +
                                std::to_string(n));
  const double min_nz = std::cos(max_tilt_deg * M_PI / 180.0);
  Rng rng(seed);
  double best_a = 0, best_b = 0, best_c = 0, best_d = 0;
  size_t best_count = 0;
  for (int iter = 0; iter < 500; ++iter) {
    const size_t i = rng.next_below(n);
    const size_t j = rng.next_below(n);
    const size_t k = rng.next_below(n);
    if (i == j || j == k || i == k) continue;
    const Vec3 nrm = cross(scan.points[j] - scan.points[i], scan.points[k] - scan.points[i]);
    const double len = norm(nrm);
    if (len < 1e-12) continue;
    if (std::fabs(nrm.z) / len < min_nz) continue;  // wall-like plane, not ground
    const Vec3 unit = (1.0 / len) * nrm;
    const double d = -dot(unit, scan.points[i]);
    size_t count = 0;
    for (const Vec3& p : scan.points)
      if (std::fabs(dot(unit, p) + d) <= inlier_tol_m) ++count;
    if (count > best_count) {
      best_count = count;
      best_a = unit.x;
      best_b = unit.y;
      best_c = unit.z;
      best_d = d;
    }
  }
  if (best_count < static_cast<size_t>(std::ceil(0.2 * static_cast<double>(n))))
    return scan;  // no dominant near-horizontal plane
  RawScanCloud out = scan;
  out.points.clear();
  for (const Vec3& p : scan.points)
    if (std::fabs(best_a * p.x + best_b * p.y + best_c * p.z + best_d) > inlier_tol_m)
      out.points.push_back(p);
  return out;
}

namespace {

struct VoxelKey {
  int64_t x, y, z;
  bool operator==(const VoxelKey& o) const { return x == o.x && y == o.y && z == o.z; }
};

struct VoxelKeyHash {
  size_t operator()(const VoxelKey& k) const {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (uint64_t v : {static_cast<uint64_t>(k.x), static_cast<uint64_t>(k.y),
                       static_cast<uint64_t>(k.z)}) {
      h ^= v;
      h *= 0x100000001b3ULL;
    }
    return static_cast<size_t>(h);
  }
};

VoxelKey key_of(const Vec3& p, const Vec3& lo, double size) {
  return {static_cast<int64_t>(std::floor((p.x - lo.x) / size)),
          static_cast<int64_t>(std::floor((p.y - lo.y) / size)),
          static_cast<int64_t>(std::floor((p.z - lo.z) / size))};
}

size_t occupied_count(const std::vector<Vec3>& pts, const Vec3& lo, double size) {
  std::unordered_set<VoxelKey, VoxelKeyHash> seen;
  seen.reserve(pts.size() * 2);
  for (const Vec3& p : pts) seen.insert(key_of(p, lo, size));
  return seen.size();
}

Tensor gather(const std::vector<Vec3>& pts, const std::vector<int64_t>& idx) {
  Tensor t({static_cast<int64_t>(idx.size()), 3});
  for (size_t r = 0; r < idx.size(); ++r) {
    const Vec3& p = pts[static_cast<size_t>(idx[r])];
    t.at(static_cast<int64_t>(r), 0) = p.x;
    t.at(static_cast<int64_t>(r), 1) = p.y;
    t.at(static_cast<int64_t>(r), 2) = p.z;
  }
  return t;
}

std::vector<int64_t> pad_with_replacement(int64_t have, int64_t target, Rng& rng) {
  std::vector<int64_t> idx(static_cast<size_t>(have));
  for (int64_t i = 0; i < have; ++i) idx[static_cast<size_t>(i)] = i;
  while (static_cast<int64_t>(idx.size()) < target)
    idx.push_back(static_cast<int64_t>(rng.next_below(static_cast<uint64_t>(have))));
  return idx;
}

}  // namespace

Tensor downsample_to_fixed(const std::vector<Vec3>& points, int64_t target, uint64_t seed) {
  if (points.empty()) throw std::invalid_argument("downsample_to_fixed: empty input");
  if (target <= 0) throw std::invalid_argument("downsample_to_fixed: target must be positive");
  const int64_t n = static_cast<int64_t>(points.size());
  if (4 * n < target)
    throw std::invalid_argument("downsample_to_fixed: need at least target/4 points, got " +
                                std::to_string(n) + " for target " + std::to_string(target));
  Rng rng(seed);
  if (n < target) return gather(points, pad_with_replacement(n, target, rng));

  Vec3 lo = points[0], hi = points[0];
  for (const Vec3& p : points) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    lo.z = std::min(lo.z, p.z);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
    hi.z = std::max(hi.z, p.z);
  }
  const double diag = norm(hi - lo);

  // Largest voxel size whose occupied count still reaches the target; the
  // occupied count only probes sizes, centroids are built once at the end.
  double chosen = 0.0;
  if (diag > 0.0) {
    double a = diag * 1e-9, b = diag;
    if (occupied_count(points, lo, a) >= static_cast<size_t>(target)) {
      chosen = a;
      for (int step = 0; step < 32; ++step) {
        const double mid = 0.5 * (a + b);
        if (occupied_count(points, lo, mid) >= static_cast<size_t>(target)) {
          a = mid;
          chosen = mid;
        } else {
          b = mid;
        }
      }
    }
  }
  if (chosen == 0.0) {
    // Fewer distinct positions than target: collapse exact duplicates and pad.
    std::vector<Vec3> distinct;
    std::unordered_set<VoxelKey, VoxelKeyHash> seen;
    const double eps = diag > 0.0 ? diag * 1e-12 : 1.0;
    for (const Vec3& p : points)
      if (seen.insert(key_of(p, lo, eps)).second) distinct.push_back(p);
    return gather(distinct,
                  pad_with_replacement(static_cast<int64_t>(distinct.size()), target, rng));
  }

  std::unordered_map<VoxelKey, std::pair<Vec3, int64_t>, VoxelKeyHash> cells;
  cells.reserve(points.size() * 2);
  for (const Vec3& p : points) {
    auto& [sum, count] = cells[key_of(p, lo, chosen)];
    sum = sum + p;
    ++count;
  }
  std::vector<std::pair<VoxelKey, Vec3>> centroids;
  centroids.reserve(cells.size());
  for (const auto& [key, acc] : cells)
    centroids.emplace_back(key, (1.0 / static_cast<double>(acc.second)) * acc.first);
  std::sort(centroids.begin(), centroids.end(), [](const auto& a, const auto& b) {
    if (a.first.x != b.first.x) return a.first.x < b.first.x;
    if (a.first.y != b.first.y) return a.first.y < b.first.y;
    return a.first.z < b.first.z;
  });

  std::vector<Vec3> pool;
  pool.reserve(centroids.size());
  for (const auto& [key, c] : centroids) pool.push_back(c);
  std::vector<int64_t> keep =
      sample_without_replacement(static_cast<int64_t>(pool.size()), target, rng);
  std::sort(keep.begin(), keep.end());
  return gather(pool, keep);
}

NormalizeResult normalize_cloud(const std::vector<Vec3>& points) {
  if (points.empty()) throw std::invalid_argument("normalize_cloud: empty input");
  const double inv_n = 1.0 / static_cast<double>(points.size());
  Vec3 mean{0, 0, 0};
  for (const Vec3& p : points) mean = mean + p;
  mean = inv_n * mean;
  double scale = 0.0;
  for (const Vec3& p : points) {
    const Vec3 q = p - mean;
    scale = std::max({scale, std::fabs(q.x), std::fabs(q.y), std::fabs(q.z)});
  }
  if (scale == 0.0) scale = 1.0;
  NormalizeResult out;
  out.centroid = mean;
  out.scale = scale;
  out.cloud = Tensor({static_cast<int64_t>(points.size()), 3});
  for (size_t i = 0; i < points.size(); ++i) {
    const Vec3 q = points[i] - mean;
    out.cloud.at(static_cast<int64_t>(i), 0) = q.x / scale;
    out.cloud.at(static_cast<int64_t>(i), 1) = q.y / scale;
    out.cloud.at(static_cast<int64_t>(i), 2) = q.z / scale;
  }
  return out;
}

namespace {

// 2-D cell index over the accumulated run map for box crops.
struct CropIndex {
  double cell;
  Vec2 lo;
  int64_t nx = 0;
  std::vector<std::vector<int>> cells;
  const std::vector<Vec3>* pts;
};

CropIndex build_crop_index(const std::vector<Vec3>& pts, double cell) {
  CropIndex idx;
  idx.cell = cell;
  idx.pts = &pts;
  if (pts.empty()) return idx;
  Vec2 lo{pts[0].x, pts[0].y}, hi = lo;
  for (const Vec3& p : pts) {
    lo.x = std::min(lo.x, p.x);
    lo.y = std::min(lo.y, p.y);
    hi.x = std::max(hi.x, p.x);
    hi.y = std::max(hi.y, p.y);
  }
  idx.lo = lo;
  idx.nx = static_cast<int64_t>(std::floor((hi.x - lo.x) / cell)) + 1;
  const int64_t ny = static_cast<int64_t>(std::floor((hi.y - lo.y) / cell)) + 1;
  idx.cells.resize(static_cast<size_t>(idx.nx * ny));
  for (size_t i = 0; i < pts.size(); ++i) {
    const int64_t cx = static_cast<int64_t>(std::floor((pts[i].x - lo.x) / cell));
    const int64_t cy = static_cast<int64_t>(std::floor((pts[i].y - lo.y) / cell));
    idx.cells[static_cast<size_t>(cy * idx.nx + cx)].push_back(static_cast<int>(i));
  }
  return idx;
}

std::vector<Vec3> crop_box(const CropIndex& idx, Vec2 center, double extent) {
  std::vector<Vec3> out;
  if (idx.cells.empty()) return out;
  const double half = extent / 2.0;
  const int64_t ny = static_cast<int64_t>(idx.cells.size()) / idx.nx;
  const auto clamp = [](int64_t v, int64_t n) { return std::max<int64_t>(0, std::min(v, n - 1)); };
  const int64_t x0 = clamp(static_cast<int64_t>(std::floor((center.x - half - idx.lo.x) / idx.cell)), idx.nx);
  const int64_t x1 = clamp(static_cast<int64_t>(std::floor((center.x + half - idx.lo.x) / idx.cell)), idx.nx);
  const int64_t y0 = clamp(static_cast<int64_t>(std::floor((center.y - half - idx.lo.y) / idx.cell)), ny);
  const int64_t y1 = clamp(static_cast<int64_t>(std::floor((center.y + half - idx.lo.y) / idx.cell)), ny);
  for (int64_t cy = y0; cy <= y1; ++cy)
    for (int64_t cx = x0; cx <= x1; ++cx)
      for (int i : idx.cells[static_cast<size_t>(cy * idx.nx + cx)]) {
        const Vec3& p = (*idx.pts)[static_cast<size_t>(i)];
        if (std::fabs(p.x - center.x) <= half && std::fabs(p.y - center.y) <= half)
          out.push_back(p);
      }
  return out;
}

}  // namespace

SubmapBuildResult build_submaps(const std::vector<RawScanCloud>& run,
                                const PipelineConfig& config, uint64_t seed) {
  if (run.empty()) throw std::invalid_argument("build_submaps: empty run");
  if (config.interval_m <= 0 || config.extent_m <= 0 || config.target_points <= 0)
    throw std::invalid_argument("build_submaps: interval, extent and target must be positive");
  std::vector<const RawScanCloud*> ordered;
  ordered.reserve(run.size());
  for (const RawScanCloud& s : run) ordered.push_back(&s);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const RawScanCloud* a, const RawScanCloud* b) {
                     return a->timestamp < b->timestamp;
                   });

  std::vector<Vec3> merged;
  for (const RawScanCloud* s : ordered)
    merged.insert(merged.end(), s->points.begin(), s->points.end());
  const CropIndex index = build_crop_index(merged, std::max(config.extent_m, 1.0));

  // Interval walk along the pose polyline, endpoint inclusive.
  std::vector<Vec2> centers;
  {
    double remaining = 0.0;  // distance until the next emit
    Vec2 prev = ordered.front()->pose_xy;
    centers.push_back(prev);
    for (size_t i = 1; i < ordered.size(); ++i) {
      const Vec2 cur = ordered[i]->pose_xy;
      double seg = dist2d(prev, cur);
      double t0 = 0.0;
      while (remaining + (seg - t0) >= config.interval_m - 1e-9) {
        const double step = config.interval_m - remaining;
        t0 += step;
        const double f = seg > 0.0 ? t0 / seg : 0.0;
        centers.push_back({prev.x + f * (cur.x - prev.x), prev.y + f * (cur.y - prev.y)});
        remaining = 0.0;
      }
      remaining += seg - t0;
      prev = cur;
    }
  }

  SubmapBuildResult result;
  const std::string& run_id = ordered.front()->run_id;
  for (size_t idx = 0; idx < centers.size(); ++idx) {
    const Vec2 c = centers[idx];
    const auto skip = [&](const std::string& why) {
      result.warnings.push_back("submap " + std::to_string(idx) + " at (" +
                                std::to_string(c.x) + ", " + std::to_string(c.y) +
                                ") skipped: " + why);
    };
    std::vector<Vec3> cropped = crop_box(index, c, config.extent_m);
    if (cropped.empty()) {
      skip("empty crop window");
      continue;
    }
    if (cropped.size() < 50) {
      skip("only " + std::to_string(cropped.size()) + " points in crop");
      continue;
    }
    RawScanCloud crop_scan;
    crop_scan.points = std::move(cropped);
    crop_scan.run_id = run_id;
    const RawScanCloud no_ground =
        remove_ground(crop_scan, config.ground_inlier_tol_m, config.ground_max_tilt_deg,
                      mix_seed({seed, idx, 0x67726e64ULL}));
    if (4 * static_cast<int64_t>(no_ground.points.size()) < config.target_points) {
      skip("only " + std::to_string(no_ground.points.size()) + " points after ground removal");
      continue;
    }
    const Tensor fixed = downsample_to_fixed(no_ground.points, config.target_points,
                                             mix_seed({seed, idx, 0x646f776eULL}));
    std::vector<Vec3> pts(static_cast<size_t>(fixed.rows()));
    for (int64_t r = 0; r < fixed.rows(); ++r)
      pts[static_cast<size_t>(r)] = {fixed.at(r, 0), fixed.at(r, 1), fixed.at(r, 2)};
    Submap sm;
    sm.cloud = normalize_cloud(pts).cloud;
    sm.centroid_xy = c;
    sm.run_id = run_id;
    sm.extent = config.extent_m;
    result.submaps.push_back(std::move(sm));
  }
  return result;
}

PairLabel label_pair(const Submap& a, const Submap& b, double positive_max_m,
                     double negative_min_m) {
  const double d = dist2d(a.centroid_xy, b.centroid_xy);
  if (d <= positive_max_m) return PairLabel::kPositive;
  if (d >= negative_min_m) return PairLabel::kNegative;
  return PairLabel::kIndeterminate;
}

SplitResult split_regions(const std::vector<Submap>& submaps, double test_fraction,
                          double region_side_m, uint64_t seed) {
  if (submaps.empty()) throw std::invalid_argument("split_regions: no submaps");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("split_regions: test_fraction must be in (0,1), got " +
                                std::to_string(test_fraction));
  if (region_side_m <= 0.0)
    throw std::invalid_argument("split_regions: region side must be positive");
  Vec2 lo = submaps[0].centroid_xy;
  for (const Submap& s : submaps) {
    lo.x = std::min(lo.x, s.centroid_xy.x);
    lo.y = std::min(lo.y, s.centroid_xy.y);
  }
  std::unordered_map<uint64_t, std::vector<int>> regions;
  for (size_t i = 0; i < submaps.size(); ++i) {
    const auto rx = static_cast<int64_t>(std::floor((submaps[i].centroid_xy.x - lo.x) / region_side_m));
    const auto ry = static_cast<int64_t>(std::floor((submaps[i].centroid_xy.y - lo.y) / region_side_m));
    regions[(static_cast<uint64_t>(rx) << 32) ^ static_cast<uint64_t>(ry & 0xffffffff)]
        .push_back(static_cast<int>(i));
  }
  if (regions.size() < 2)
    throw std::invalid_argument("split_regions: submaps span a single region; use a smaller "
                                "region side or a wider trajectory");
  std::vector<uint64_t> keys;
  keys.reserve(regions.size());
  for (const auto& [k, v] : regions) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  Rng rng(seed);
  shuffle(keys, rng);

  const double target = test_fraction * static_cast<double>(submaps.size());
  SplitResult out;
  size_t taken = 0, used_regions = 0;
  for (uint64_t k : keys) {
    if (static_cast<double>(taken) >= target) break;
    const auto& members = regions[k];
    // Overshooting the target by a whole region is worse than stopping
    // short when the boundary region is large; keep whichever lands closer.
    const double with = std::fabs(static_cast<double>(taken + members.size()) - target);
    const double without = std::fabs(static_cast<double>(taken) - target);
    if (taken > 0 && with > without) break;
    for (int i : members) out.test.push_back(i);
    taken += members.size();
    ++used_regions;
  }
  if (used_regions == regions.size())
    throw std::invalid_argument("split_regions: test fraction consumes every region");
  std::unordered_set<int> in_test(out.test.begin(), out.test.end());
  for (size_t i = 0; i < submaps.size(); ++i)
    if (!in_test.count(static_cast<int>(i))) out.train.push_back(static_cast<int>(i));
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace pnv
