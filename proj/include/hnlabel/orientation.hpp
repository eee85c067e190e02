#pragma once

#include <string>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "hnlabel/error.hpp"
#include "hnlabel/geometry.hpp"

namespace hnl {

// Raised when a frame does not carry enough geometry to estimate gravity.
// Callers treat it as a frame rejection, not a process failure.
class EstimationFailed : public Error {
public:
  using Error::Error;
};

struct GravityParams {
  Eigen::Vector3d seed_up{0.0, -1.0, 0.0}; // camera -y: sensor held upright
  int max_iters = 20;
  double angle_tol_deg = 25.0;
  double converge_deg = 0.1;
  // After coarse convergence the inlier band narrows to band_spread times the
  // median inlier angle, floored at min_band_deg. 0 disables narrowing.
  double band_spread = 3.0;
  double min_band_deg = 1.0;
  std::size_t min_normals = 100;
  // Modes farther than this from seed_up are only used when nothing closer
  // has support; such estimates fail floor validation.
  double max_tilt_deg = 60.0;
  double min_mode_support = 0.05; // fraction of valid normals
  std::size_t search_samples = 8000;
};

struct GravityEstimate {
  Eigen::Vector3d up = Eigen::Vector3d::UnitY();
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity(); // camera -> gravity
  double inlier_fraction = 0;
  int iterations_used = 0;
  double seed_deviation_deg = 0;
};

struct FloorParams {
  double percentile = 0.01;
  double slab_thickness = 0.05;
  double support_angle_deg = 30.0;
  double support_fraction_min = 0.5;
  double max_tilt_deg = 60.0;
};

struct FloorFrameEstimate {
  GravityEstimate gravity;
  double floor_height = 0; // gravity-frame Y of the floor plane
  bool accepted = false;
  double floor_support_fraction = 0;
  std::size_t candidate_count = 0;
  std::string reason; // empty when accepted
};

// Proper rotation taking `up` to +Y. Fixed yaw convention: the camera's
// y-down axis is flipped first, then the shortest arc aligns up with +Y.
Eigen::Matrix3d gravity_rotation(const Eigen::Vector3d &up);

GravityEstimate estimate_gravity(const NormalMap &normals,
                                 const GravityParams &params = {});

// Linear-interpolated quantile (p in [0,1]) of the values; reorders input.
double quantile_linear(std::vector<double> &values, double p);

FloorFrameEstimate locate_floor(const PointCloud &cloud,
                                const NormalMap &normals,
                                const GravityEstimate &gravity,
                                const FloorParams &params = {});

nlohmann::json to_diagnostic_json(const FloorFrameEstimate &estimate);

} // namespace hnl
