#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pnv/geometry.hpp"
#include "pnv/pipeline.hpp"

namespace pnv {

// Procedural world: a flat ground plane plus rigid structures whose surfaces
// the simulated sensor samples. Everything downstream of a seed is
// deterministic, including across thread counts.

enum class LandmarkKind { kBox, kCylinder, kWall };

struct Landmark {
  LandmarkKind kind = LandmarkKind::kBox;
  Vec2 center;
  double yaw = 0;     // footprint rotation about z
  double size_x = 1;  // box/wall footprint length; cylinder radius
  double size_y = 1;  // box footprint width; wall thickness; unused for cylinders
  double height = 1;
};

struct SizeRange {
  double lo = 0;
  double hi = 0;
};

struct WorldSpec {
  uint64_t seed = 0;
  double extent_m = 600.0;
  int n_landmarks = 120;
  double ground_z = 0.0;
  SizeRange box_side{2.0, 8.0};
  SizeRange box_height{2.0, 10.0};
  SizeRange cylinder_radius{0.5, 3.0};
  SizeRange cylinder_height{2.0, 12.0};
  SizeRange wall_length{6.0, 20.0};
  SizeRange wall_height{2.0, 5.0};
  double wall_thickness = 0.3;
};

struct World {
  WorldSpec spec;
  std::vector<Landmark> landmarks;
};

struct RunSpec {
  uint64_t seed = 0;
  std::string run_id;
  std::vector<Vec2> route;  // polyline, world coordinates
  double scan_spacing_m = 2.0;
  double noise_sigma_m = 0.03;
  double dropout = 0.1;
  double heading_jitter_deg = 5.0;
  int clutter_max = 3;  // transient objects per scan, drawn in [0, clutter_max]
};

inline constexpr double kSensorRangeM = 30.0;
inline constexpr int kScanPoints = 8000;

// Places landmarks with centers at least 5 m apart, footprints fully inside
// the extent. Throws when a landmark cannot be placed (overcrowded spec).
World generate_world(const WorldSpec& spec);

// Points every `spacing` along the polyline, starting at its first vertex.
// The final vertex is included only when it lands on the spacing grid.
std::vector<Vec2> walk_polyline(const std::vector<Vec2>& route, double spacing);

// Closed polygonal approximation of a circle (first vertex repeated at the end).
// Closed loop; the first and last waypoint coincide exactly. start_angle lets
// different traversals of one loop begin at offset poses, so no two runs
// sample a place from identical positions.
std::vector<Vec2> circle_route(Vec2 center, double radius, int waypoints = 128,
                               double start_angle = 0.0);

// One scan per walked pose. Surface points are allocated across ground and
// in-range landmarks in proportion to surface area; the noise-free geometry
// depends only on (world, pose), so coincident poses in different runs agree.
// Per-run effects: dropout, clutter injection, Gaussian noise, heading jitter
// (a rotation of the scan about its pose; the pose tag stays exact).
std::vector<RawScanCloud> simulate_run(const World& world, const RunSpec& run);

struct DatasetSummary {
  std::vector<std::pair<std::string, int>> submap_counts;  // run_id, count
  std::vector<std::string> warnings;
};

// Simulates every run, applies the submap pipeline, and writes
//   <dir>/world.json, <dir>/manifest.tsv, <dir>/runs/<run_id>/submap_<k>.pcf
// Identical inputs produce byte-identical directories.
DatasetSummary emit_dataset(const World& world, const std::vector<RunSpec>& runs,
                            const PipelineConfig& pipeline,
                            const std::filesystem::path& dir);

}  // namespace pnv
