#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "hnlabel/geometry.hpp"
#include "hnlabel/orientation.hpp"

namespace hnl {

struct HNLabelConfig {
  int n_h = 10;
  int n_n = 2;
  double height_min = 0.0;
  double height_max = 3.0;
  double normal_split_angle = 45.0; // degrees, used when n_n == 2
  int ignore_label = 255;

  void validate() const;
  int label_count() const { return n_h * n_n; }
  // Height bin edges e_0..e_{n_h}; e_k = height_min + span * k / n_h.
  double height_edge(int k) const;
  // Normal bin edges over [0, 90] for n_n != 2; split angle otherwise.
  double normal_edge(int k) const;
  std::string layout() const; // e.g. "h_major:n_n=2"
  bool operator==(const HNLabelConfig &) const = default;
};

void to_json(nlohmann::json &j, const HNLabelConfig &c);
void from_json(const nlohmann::json &j, HNLabelConfig &c);

// Signed height above the floor plane in the gravity frame.
inline double compute_height(const Eigen::Vector3d &gravity_point,
                             double floor_height) {
  return gravity_point.y() - floor_height;
}

// Angle between the normal's line and the up axis, in [0, 90] degrees.
double compute_normal_angle(const Eigen::Vector3d &gravity_normal);

// Uniform bins over [height_min, height_max], clamped at both ends.
int bin_height(double h, const HNLabelConfig &cfg);
// n_n == 2: 0 below the split angle, 1 at or above it. Otherwise uniform over
// [0, 90] with the top edge inclusive.
int bin_normal(double angle_deg, const HNLabelConfig &cfg);
// Height-major layout: h_bin * n_n + n_bin.
int compose_label(int h_bin, int n_bin, const HNLabelConfig &cfg);

struct LabelingParams {
  NormalParams normals;
  GravityParams gravity;
  FloorParams floor;
  // Heights and the floor quantile from fitted surface points rather than
  // raw depth samples.
  bool surface_points = true;
};

struct LabelResult {
  LabelRaster labels;
  FloorFrameEstimate floor;
};

// Full self-labeling of one frame. Rejected frames yield an all-ignore raster.
LabelResult generate_labels(const DepthFrame &depth, const HNLabelConfig &cfg,
                            const LabelingParams &params = {});

// Same as generate_labels, from precomputed geometry.
LabelResult label_from_geometry(const PointCloud &cloud,
                                const NormalMap &normals,
                                const HNLabelConfig &cfg,
                                const LabelingParams &params);

// 21-entry inspection palette; label values past the table map to the last
// (ignore) color.
Raster<Rgb> colorize_labels(const LabelRaster &labels,
                            const HNLabelConfig &cfg);

} // namespace hnl
