#include "pnv/synthworld.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <system_error>

#include "pnv/parallel.hpp"
#include "pnv/pcf.hpp"
#include "pnv/rng.hpp"

namespace pnv {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMinSeparationM = 5.0;
constexpr int kPlacementAttempts = 1000;

double in_range(const SizeRange& r, Rng& rng) { return rng.uniform(r.lo, r.hi); }

// Radius of the circle enclosing the footprint; bounds both world containment
// and sensor-range culling.
double footprint_radius(const Landmark& lm) {
  if (lm.kind == LandmarkKind::kCylinder) return lm.size_x;
  return 0.5 * std::hypot(lm.size_x, lm.size_y);
}

double surface_area(const Landmark& lm) {
  if (lm.kind == LandmarkKind::kCylinder) {
    const double r = lm.size_x;
    return 2.0 * kPi * r * lm.height + kPi * r * r;
  }
  return 2.0 * (lm.size_x + lm.size_y) * lm.height + lm.size_x * lm.size_y;
}

// Uniform-by-area point on the landmark surface, world coordinates, base of
// the structure at ground_z.
Vec3 sample_surface(const Landmark& lm, double ground_z, Rng& rng) {
  double lx = 0, ly = 0, lz = 0;  // landmark frame, origin at footprint center
  if (lm.kind == LandmarkKind::kCylinder) {
    const double r = lm.size_x;
    const double lateral = 2.0 * kPi * r * lm.height;
    if (rng.uniform(0, lateral + kPi * r * r) < lateral) {
      const double theta = rng.uniform(0, 2.0 * kPi);
      lx = r * std::cos(theta);
      ly = r * std::sin(theta);
      lz = rng.uniform(0, lm.height);
    } else {
      const double rr = r * std::sqrt(rng.next_double());
      const double theta = rng.uniform(0, 2.0 * kPi);
      lx = rr * std::cos(theta);
      ly = rr * std::sin(theta);
      lz = lm.height;
    }
  } else {
    const double sx = lm.size_x, sy = lm.size_y, h = lm.height;
    const double a_x = sy * h;   // each face normal to local x
    const double a_y = sx * h;   // each face normal to local y
    const double a_top = sx * sy;
    double pick = rng.uniform(0, 2.0 * (a_x + a_y) + a_top);
    if (pick < 2.0 * a_x) {
      lx = pick < a_x ? 0.5 * sx : -0.5 * sx;
      ly = rng.uniform(-0.5 * sy, 0.5 * sy);
      lz = rng.uniform(0, h);
    } else if ((pick -= 2.0 * a_x) < 2.0 * a_y) {
      ly = pick < a_y ? 0.5 * sy : -0.5 * sy;
      lx = rng.uniform(-0.5 * sx, 0.5 * sx);
      lz = rng.uniform(0, h);
    } else {
      lx = rng.uniform(-0.5 * sx, 0.5 * sx);
      ly = rng.uniform(-0.5 * sy, 0.5 * sy);
      lz = h;
    }
  }
  const double c = std::cos(lm.yaw), s = std::sin(lm.yaw);
  return {lm.center.x + c * lx - s * ly, lm.center.y + s * lx + c * ly, ground_z + lz};
}

Landmark draw_landmark(const WorldSpec& spec, Rng& rng) {
  Landmark lm;
  lm.kind = static_cast<LandmarkKind>(rng.next_int(3));
  switch (lm.kind) {
    case LandmarkKind::kBox:
      lm.size_x = in_range(spec.box_side, rng);
      lm.size_y = in_range(spec.box_side, rng);
      lm.height = in_range(spec.box_height, rng);
      break;
    case LandmarkKind::kCylinder:
      lm.size_x = in_range(spec.cylinder_radius, rng);
      lm.size_y = lm.size_x;
      lm.height = in_range(spec.cylinder_height, rng);
      break;
    case LandmarkKind::kWall:
      lm.size_x = in_range(spec.wall_length, rng);
      lm.size_y = spec.wall_thickness;
      lm.height = in_range(spec.wall_height, rng);
      break;
  }
  lm.yaw = rng.uniform(0, 2.0 * kPi);
  return lm;
}

}  // namespace

World generate_world(const WorldSpec& spec) {
  if (spec.extent_m <= 0) throw std::invalid_argument("generate_world: extent must be positive");
  if (spec.n_landmarks < 0) throw std::invalid_argument("generate_world: negative landmark count");
  World world;
  world.spec = spec;
  Rng rng(spec.seed);
  for (int i = 0; i < spec.n_landmarks; ++i) {
    Landmark lm = draw_landmark(spec, rng);
    const double margin = footprint_radius(lm);
    if (2.0 * margin >= spec.extent_m)
      throw std::invalid_argument("generate_world: landmark larger than the world");
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const Vec2 c{rng.uniform(margin, spec.extent_m - margin),
                   rng.uniform(margin, spec.extent_m - margin)};
      bool clear = true;
      for (const Landmark& other : world.landmarks)
        if (dist2d(c, other.center) < kMinSeparationM) {
          clear = false;
          break;
        }
      if (clear) {
        lm.center = c;
        world.landmarks.push_back(lm);
        placed = true;
      }
    }
    if (!placed)
      throw std::invalid_argument("generate_world: could not place landmark " +
                                  std::to_string(i + 1) + " of " +
                                  std::to_string(spec.n_landmarks) + ", world too crowded");
  }
  return world;
}

std::vector<Vec2> walk_polyline(const std::vector<Vec2>& route, double spacing) {
  if (route.empty()) throw std::invalid_argument("walk_polyline: empty route");
  if (spacing <= 0) throw std::invalid_argument("walk_polyline: spacing must be positive");
  std::vector<Vec2> poses{route.front()};
  double remaining = spacing;
  for (size_t i = 0; i + 1 < route.size(); ++i) {
    Vec2 at = route[i];
    double seg = dist2d(at, route[i + 1]);
    while (seg >= remaining - 1e-9) {
      const double t = std::min(1.0, remaining / seg);
      at = {at.x + t * (route[i + 1].x - at.x), at.y + t * (route[i + 1].y - at.y)};
      poses.push_back(at);
      seg -= remaining;
      remaining = spacing;
    }
    remaining -= seg;
  }
  return poses;
}

std::vector<Vec2> circle_route(Vec2 center, double radius, int waypoints, double start_angle) {
  if (radius <= 0 || waypoints < 3)
    throw std::invalid_argument("circle_route: need positive radius and at least 3 waypoints");
  std::vector<Vec2> route;
  for (int k = 0; k <= waypoints; ++k) {
    const double a = start_angle + 2.0 * kPi * static_cast<double>(k % waypoints) / waypoints;
    route.push_back({center.x + radius * std::cos(a), center.y + radius * std::sin(a)});
  }
  return route;
}

std::vector<RawScanCloud> simulate_run(const World& world, const RunSpec& run) {
  const double extent = world.spec.extent_m;
  if (run.route.empty()) throw std::invalid_argument("simulate_run: empty route");
  for (const Vec2& w : run.route)
    if (w.x < 0 || w.y < 0 || w.x > extent || w.y > extent)
      throw std::invalid_argument("simulate_run: route leaves the world extent");
  if (run.scan_spacing_m <= 0)
    throw std::invalid_argument("simulate_run: scan spacing must be positive");
  if (run.noise_sigma_m < 0 || run.dropout < 0 || run.dropout >= 1 ||
      run.heading_jitter_deg < 0 || run.clutter_max < 0)
    throw std::invalid_argument("simulate_run: invalid noise parameters");

  const std::vector<Vec2> poses = walk_polyline(run.route, run.scan_spacing_m);
  std::vector<RawScanCloud> scans(poses.size());
  parallel_for(static_cast<int64_t>(poses.size()), [&](int64_t idx) {
    const Vec2 pose = poses[static_cast<size_t>(idx)];
    RawScanCloud& scan = scans[static_cast<size_t>(idx)];
    scan.run_id = run.run_id;
    scan.timestamp = idx;
    scan.pose_xy = pose;

    // Noise-free geometry is a function of (world seed, pose) alone, so two
    // runs crossing the same spot sense the same surfaces.
    Rng base(mix_seed({world.spec.seed, double_bits(pose.x), double_bits(pose.y), 0x73757266}));
    std::vector<const Landmark*> visible;
    double total_area = kPi * kSensorRangeM * kSensorRangeM;
    for (const Landmark& lm : world.landmarks)
      if (dist2d(pose, lm.center) <= kSensorRangeM + footprint_radius(lm)) {
        visible.push_back(&lm);
        total_area += surface_area(lm);
      }

    const int64_t n_ground = std::llround(
        kScanPoints * (kPi * kSensorRangeM * kSensorRangeM) / total_area);
    for (int64_t i = 0; i < n_ground; ++i) {
      const double r = kSensorRangeM * std::sqrt(base.next_double());
      const double a = base.uniform(0, 2.0 * kPi);
      scan.points.push_back(
          {pose.x + r * std::cos(a), pose.y + r * std::sin(a), world.spec.ground_z});
    }
    for (const Landmark* lm : visible) {
      const int64_t n = std::llround(kScanPoints * surface_area(*lm) / total_area);
      for (int64_t i = 0; i < n; ++i) {
        const Vec3 p = sample_surface(*lm, world.spec.ground_z, base);
        if (dist2d({p.x, p.y}, pose) <= kSensorRangeM) scan.points.push_back(p);
      }
    }

    // Per-run effects; with all magnitudes zero the draws change nothing.
    Rng rrng(mix_seed({run.seed, static_cast<uint64_t>(idx), 0x72756e66}));
    std::vector<Vec3> kept;
    kept.reserve(scan.points.size());
    for (const Vec3& p : scan.points)
      if (rrng.next_double() >= run.dropout) kept.push_back(p);
    scan.points.swap(kept);

    const int n_clutter = rrng.next_int(run.clutter_max + 1);
    for (int c = 0; c < n_clutter; ++c) {
      Landmark obj;
      obj.kind = LandmarkKind::kBox;
      obj.size_x = rrng.uniform(0.5, 2.0);
      obj.size_y = rrng.uniform(0.5, 2.0);
      obj.height = rrng.uniform(0.5, 2.0);
      obj.yaw = rrng.uniform(0, 2.0 * kPi);
      const double r = rrng.uniform(2.0, kSensorRangeM - 3.0);
      const double a = rrng.uniform(0, 2.0 * kPi);
      obj.center = {pose.x + r * std::cos(a), pose.y + r * std::sin(a)};
      for (int i = 0; i < 40; ++i)
        scan.points.push_back(sample_surface(obj, world.spec.ground_z, rrng));
    }

    for (Vec3& p : scan.points) {
      p.x += run.noise_sigma_m * rrng.normal();
      p.y += run.noise_sigma_m * rrng.normal();
      p.z += run.noise_sigma_m * rrng.normal();
    }

    const double jitter = run.heading_jitter_deg * kPi / 180.0;
    const double theta = rrng.uniform(-jitter, jitter);
    const double ct = std::cos(theta), st = std::sin(theta);
    for (Vec3& p : scan.points) {
      const double dx = p.x - pose.x, dy = p.y - pose.y;
      p.x = pose.x + ct * dx - st * dy;
      p.y = pose.y + st * dx + ct * dy;
    }
  });
  return scans;
}

namespace {

// fprintf with %.17g everywhere keeps reruns byte-identical.
struct TextFile {
  FILE* f = nullptr;
  std::filesystem::path path;
  explicit TextFile(const std::filesystem::path& p) : path(p) {
    f = std::fopen(p.string().c_str(), "wb");
    if (!f) throw std::runtime_error("cannot open " + p.string() + " for writing");
  }
  ~TextFile() {
    if (f) std::fclose(f);
  }
  void close() {
    if (f && std::fclose(f) != 0) {
      f = nullptr;
      throw std::runtime_error("write failed for " + path.string());
    }
    f = nullptr;
  }
};

}  // namespace

DatasetSummary emit_dataset(const World& world, const std::vector<RunSpec>& runs,
                            const PipelineConfig& pipeline,
                            const std::filesystem::path& dir) {
  if (runs.size() < 2)
    throw std::invalid_argument("emit_dataset: need at least two runs (database and query)");
  for (size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].run_id.empty()) throw std::invalid_argument("emit_dataset: run without an id");
    for (size_t j = i + 1; j < runs.size(); ++j)
      if (runs[i].run_id == runs[j].run_id)
        throw std::invalid_argument("emit_dataset: duplicate run id " + runs[i].run_id);
  }
  std::error_code ec;
  std::filesystem::create_directories(dir / "runs", ec);
  if (ec)
    throw std::runtime_error("cannot create dataset directory " + dir.string() + ": " +
                             ec.message());

  DatasetSummary summary;
  {
    TextFile wf(dir / "world.json");
    int kinds[3] = {0, 0, 0};
    for (const Landmark& lm : world.landmarks) kinds[static_cast<int>(lm.kind)]++;
    std::fprintf(wf.f,
                 "{\n  \"seed\": %" PRIu64 ",\n  \"extent_m\": %.17g,\n"
                 "  \"n_landmarks\": %d,\n  \"ground_z\": %.17g,\n"
                 "  \"boxes\": %d,\n  \"cylinders\": %d,\n  \"walls\": %d\n}\n",
                 world.spec.seed, world.spec.extent_m, world.spec.n_landmarks,
                 world.spec.ground_z, kinds[0], kinds[1], kinds[2]);
    wf.close();
  }

  TextFile manifest(dir / "manifest.tsv");
  std::fprintf(manifest.f, "run_id\tindex\tx\ty\n");
  for (const RunSpec& run : runs) {
    const std::vector<RawScanCloud> scans = simulate_run(world, run);
    const SubmapBuildResult built =
        build_submaps(scans, pipeline, mix_seed({run.seed, 0x7375626d}));
    for (const std::string& w : built.warnings)
      summary.warnings.push_back(run.run_id + ": " + w);
    const std::filesystem::path run_dir = dir / "runs" / run.run_id;
    std::filesystem::create_directories(run_dir, ec);
    if (ec)
      throw std::runtime_error("cannot create " + run_dir.string() + ": " + ec.message());
    for (size_t k = 0; k < built.submaps.size(); ++k) {
      const Submap& sm = built.submaps[k];
      write_pcf_binary(run_dir / ("submap_" + std::to_string(k) + ".pcf"), sm.cloud);
      std::fprintf(manifest.f, "%s\t%zu\t%.17g\t%.17g\n", run.run_id.c_str(), k,
                   sm.centroid_xy.x, sm.centroid_xy.y);
    }
    summary.submap_counts.emplace_back(run.run_id, static_cast<int>(built.submaps.size()));
  }
  manifest.close();
  return summary;
}

}  // namespace pnv
