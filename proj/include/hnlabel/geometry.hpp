#pragma once

#include <filesystem>
#include <string>

#include <Eigen/Core>

#include "hnlabel/raster.hpp"
#include "hnlabel/rgbd_ingest.hpp"

namespace hnl {

// Camera frame: x right, y down, z forward.
struct PointCloud {
  Raster<Eigen::Vector3d> points;
  Mask valid;

  int width() const { return points.width(); }
  int height() const { return points.height(); }
};

struct NormalMap {
  Raster<Eigen::Vector3d> normals; // unit, camera-facing where valid
  Mask valid;
  // Where valid: the pixel ray's intersection with the fitted local plane.
  Raster<Eigen::Vector3d> surface;

  int width() const { return normals.width(); }
  int height() const { return normals.height(); }
  std::size_t valid_count() const;
};

enum class NormalMethod {
  // Minor eigenvector of the neighbourhood covariance.
  Covariance,
  // Least-squares fit of 1/z = a*x_n + b*y_n + c over normalised image
  // coordinates; n is parallel to (a, b, c). Depth noise enters only the
  // regressand, so the fit does not tilt toward the viewing ray.
  InverseDepth,
};

struct NormalParams {
  NormalMethod method = NormalMethod::InverseDepth;
  int window = 5;            // neighbourhood half-width in pixels
  double depth_jump = 0.05;  // meters; neighbours beyond this are excluded
  // Surface-variation cutoff lambda_min / (l0 + l1 + l2); planes score ~0.
  // Mixed neighbourhoods are handled by the placement search, so this only
  // rejects fits with no dominant plane.
  double max_curvature = 0.3;
  int min_neighbors = 3;
  // Normals closer than this to perpendicular with the viewing ray are
  // dropped; a grazing plane's extension can pass through unrelated surfaces.
  double max_incidence_deg = 85.0;
  // Pick, among the nine window placements containing the pixel (centred and
  // shifted by `window` along each axis), the one with the smallest plane
  // residual, and apply depth_jump to the residual against that plane.
  // Fits that a quadratic explains much better than a plane are dropped as
  // straddling a crease. Off: centred window, depth_jump against the centre
  // depth.
  bool edge_aware = true;
};

PointCloud backproject(const DepthFrame &depth);

// Normalised image coordinates of a camera-frame point (x/z, y/z).
inline Eigen::Vector2d normalized_coords(const Eigen::Vector3d &p) {
  return {p.x() / p.z(), p.y() / p.z()};
}

NormalMap estimate_normals(const PointCloud &cloud,
                           const NormalParams &params = {});

// The cloud with every normal-valid point replaced by its fitted surface point.
PointCloud surface_cloud(const PointCloud &cloud, const NormalMap &normals);

const char *to_string(NormalMethod m);
NormalMethod normal_method_from_string(const std::string &s);

// Debug export: "x y z nx ny nz" per valid point (normals 0 when invalid).
void write_xyz_normals(const std::filesystem::path &path,
                       const PointCloud &cloud, const NormalMap &normals);

} // namespace hnl
