#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "hnlabel/hn_labels.hpp"
#include "hnlabel/rgbd_ingest.hpp"

namespace hnl::synth {

// Class ids written to semantic rasters; 255 marks pixels without geometry.
inline constexpr std::uint8_t kFloor = 1;
inline constexpr std::uint8_t kWall = 2;
inline constexpr std::uint8_t kCeiling = 3;
inline constexpr std::uint8_t kRamp = 9;
inline constexpr std::uint8_t kFirstObjectClass = 4; // 4..8 for boxes
inline constexpr std::uint8_t kNoClass = 255;
inline constexpr int kClassCount = 10;

struct Box {
  int class_id = kFirstObjectClass;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d size = Eigen::Vector3d::Ones(); // full edge lengths
};

// Bounded planar patch: center + s*half_u + t*half_v for s, t in [-1, 1].
struct Ramp {
  int class_id = kRamp;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_u = Eigen::Vector3d::UnitX();
  Eigen::Vector3d half_v = Eigen::Vector3d::UnitZ();
};

// World frame: Y up, floor at Y = 0, room spans x in [-width/2, width/2] and
// z in [-depth/2, depth/2]. Walls rise to `height`; the top is open unless
// has_ceiling.
struct SyntheticScene {
  double width = 5.0;
  double depth = 5.0;
  double height = 2.8;
  bool has_ceiling = true;
  std::vector<Box> boxes;
  std::vector<Ramp> ramps;

  void validate() const;
};

void to_json(nlohmann::json &j, const SyntheticScene &s);
void from_json(const nlohmann::json &j, SyntheticScene &s);
void save_scene(const std::filesystem::path &path, const SyntheticScene &s);
SyntheticScene load_scene(const std::filesystem::path &path);

struct CameraPose {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Matrix3d orientation = Eigen::Matrix3d::Identity(); // camera -> world
  CameraIntrinsics intrinsics;

  Eigen::Vector3d to_camera(const Eigen::Vector3d &world) const;
  Eigen::Vector3d world_up_in_camera() const;
};

// Yaw about world Y, then pitch (positive looks up) and roll about the
// optical axis. Zero angles look along world +Z with the camera upright.
CameraPose make_pose(const Eigen::Vector3d &position, double yaw_deg,
                     double pitch_deg, double roll_deg,
                     const CameraIntrinsics &intrinsics);

CameraIntrinsics default_intrinsics(); // 560x424, NYUv2-like field of view

struct RenderedFrame {
  DepthFrame depth;                   // noisy sensor view
  Raster<double> true_depth;          // 0 where nothing was hit
  Raster<Eigen::Vector3d> world_points;
  Raster<Eigen::Vector3d> world_normals;
  Raster<double> height;              // analytic world Y
  Raster<double> normal_angle;        // degrees from vertical, [0, 90]
  LabelRaster hn_labels;              // analytic HN labels
  LabelRaster classes;                // semantic class ids
  ColorFrame color;
};

struct RenderOptions {
  double noise_sigma = 0.0; // meters, truncated at +-3 sigma
  std::uint64_t noise_seed = 0;
  double max_range = 10.0;
};

// Ray casts every pixel. Throws if the pose sees no geometry.
RenderedFrame render_depth(const SyntheticScene &scene, const CameraPose &pose,
                           const HNLabelConfig &cfg,
                           const RenderOptions &options = {});

// Hit test of one world ray; returns false when nothing is hit.
struct Hit {
  double t = 0;
  Eigen::Vector3d normal = Eigen::Vector3d::Zero();
  int class_id = kNoClass;
};
bool cast_ray(const SyntheticScene &scene, const Eigen::Vector3d &origin,
              const Eigen::Vector3d &dir, Hit &hit);

SyntheticScene random_scene(std::uint64_t seed);
// Upright camera (|roll| < 10, pitch in [-45, 10]) inside the free space of
// the room that sees at least 30% floor pixels.
CameraPose random_pose(const SyntheticScene &scene, std::uint64_t seed,
                       const CameraIntrinsics &intrinsics = default_intrinsics());

double floor_coverage(const SyntheticScene &scene, const CameraPose &pose,
                      int stride = 1);

// Room whose visible floor is covered by a ramp tilted `tilt_deg` and whose
// ceiling is in view, plus a pose looking at it.
std::pair<SyntheticScene, CameraPose>
ramp_scene(double tilt_deg, std::uint64_t seed,
           const CameraIntrinsics &intrinsics = default_intrinsics());

} // namespace hnl::synth
