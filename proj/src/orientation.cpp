#include "hnlabel/orientation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

namespace hnl {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double angle_between_deg(const Eigen::Vector3d &a, const Eigen::Vector3d &b) {
  return std::atan2(a.cross(b).norm(), a.dot(b)) / kDeg;
}

struct Mode {
  Eigen::Vector3d up;
  std::size_t support = 0;
  int iterations = 0;
};

std::size_t count_inliers(const std::vector<Eigen::Vector3d> &normals,
                          const Eigen::Vector3d &axis, double cos_tol) {
  std::size_t n = 0;
  for (const auto &v : normals)
    n += std::abs(v.dot(axis)) >= cos_tol ? 1 : 0;
  return n;
}

// Dominant-axis refinement: gather sign-aligned normals near +-axis and
// replace the axis by their principal direction. Once the coarse band has
// converged the band narrows to a multiple of the inliers' robust angular
// spread, so a minority of tilted normals (creases, clutter) cannot drag the
// axis. The band never widens beyond angle_tol.
Mode refine(const std::vector<Eigen::Vector3d> &normals,
            const Eigen::Vector3d &start, const GravityParams &p) {
  double tol = p.angle_tol_deg;
  bool narrowed = false;
  Mode m{start.normalized(), 0, 0};
  std::vector<double> angles;
  for (int it = 0; it < p.max_iters; ++it) {
    const double cos_tol = std::cos(tol * kDeg);
    Eigen::Matrix3d scatter = Eigen::Matrix3d::Zero();
    std::size_t n = 0;
    for (const auto &v : normals) {
      const double c = v.dot(m.up);
      if (std::abs(c) < cos_tol)
        continue;
      const Eigen::Vector3d a = c < 0 ? Eigen::Vector3d(-v) : v;
      scatter.noalias() += a * a.transpose();
      ++n;
    }
    m.iterations = it + 1;
    if (n == 0)
      break;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(scatter);
    Eigen::Vector3d next = es.eigenvectors().col(2).normalized();
    if (next.dot(m.up) < 0)
      next = -next;
    const double step = angle_between_deg(next, m.up);
    m.up = next;
    if (step >= p.converge_deg)
      continue;
    if (narrowed || p.band_spread <= 0)
      break;
    // Robust spread: median absolute angle of current inliers about the axis.
    angles.clear();
    for (const auto &v : normals) {
      const double c = std::abs(v.dot(m.up));
      if (c >= cos_tol)
        angles.push_back(std::acos(std::min(1.0, c)) / kDeg);
    }
    std::nth_element(angles.begin(), angles.begin() + angles.size() / 2,
                     angles.end());
    const double spread = angles[angles.size() / 2];
    tol = std::clamp(p.band_spread * spread, p.min_band_deg, p.angle_tol_deg);
    narrowed = true;
  }
  m.support = count_inliers(normals, m.up, std::cos(p.angle_tol_deg * kDeg));
  return m;
}

// Orthonormal pair spanning the plane perpendicular to `axis`.
std::pair<Eigen::Vector3d, Eigen::Vector3d>
tangent_basis(const Eigen::Vector3d &axis) {
  const Eigen::Vector3d helper = std::abs(axis.x()) < 0.9
                                     ? Eigen::Vector3d::UnitX()
                                     : Eigen::Vector3d::UnitZ();
  Eigen::Vector3d t1 = axis.cross(helper).normalized();
  Eigen::Vector3d t2 = axis.cross(t1).normalized();
  return {t1, t2};
}

} // namespace

Eigen::Matrix3d gravity_rotation(const Eigen::Vector3d &up) {
  const Eigen::Vector3d u = up.normalized();
  // 180 degrees about x: camera y-down becomes y-up, det stays +1.
  const Eigen::Matrix3d flip = Eigen::Vector3d(1, -1, -1).asDiagonal();
  const Eigen::Vector3d f = flip * u;
  Eigen::Matrix3d align;
  if (f.dot(Eigen::Vector3d::UnitY()) < -1.0 + 1e-12) {
    align = Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitX())
                .toRotationMatrix();
  } else {
    align = Eigen::Quaterniond::FromTwoVectors(f, Eigen::Vector3d::UnitY())
                .toRotationMatrix();
  }
  Eigen::Matrix3d r = align * flip;
  // Re-orthonormalise to keep R^T R = I at machine precision.
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(r, Eigen::ComputeFullU |
                                               Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().transpose();
}

GravityEstimate estimate_gravity(const NormalMap &normals,
                                 const GravityParams &params) {
  std::vector<Eigen::Vector3d> all;
  all.reserve(normals.valid_count());
  for (std::size_t i = 0; i < normals.normals.size(); ++i)
    if (normals.valid[i])
      all.push_back(normals.normals[i]);
  if (all.size() < params.min_normals)
    throw EstimationFailed("gravity estimation failed: " +
                           std::to_string(all.size()) + " valid normals (< " +
                           std::to_string(params.min_normals) + ")");

  std::vector<Eigen::Vector3d> sample;
  const std::size_t stride =
      std::max<std::size_t>(1, all.size() / std::max<std::size_t>(
                                                1, params.search_samples));
  for (std::size_t i = 0; i < all.size(); i += stride)
    sample.push_back(all[i]);

  const Eigen::Vector3d seed = params.seed_up.normalized();
  const auto [t1, t2] = tangent_basis(seed);
  std::vector<Eigen::Vector3d> starts{seed};
  for (int ring = 1; ring <= 7; ++ring) {
    const double tilt = 12.0 * ring * kDeg;
    for (int a = 0; a < 12; ++a) {
      const double az = 30.0 * a * kDeg;
      starts.push_back(std::cos(tilt) * seed +
                       std::sin(tilt) *
                           (std::cos(az) * t1 + std::sin(az) * t2));
    }
  }

  std::vector<Mode> modes;
  modes.reserve(starts.size());
  for (const auto &s : starts)
    modes.push_back(refine(sample, s, params));

  // Closest supported mode to the prior wins; count breaks near-ties. Count
  // alone is ambiguous under the Manhattan symmetry of walls and floor.
  const double min_support = params.min_mode_support * sample.size();
  auto deviation = [&](const Mode &m) {
    return angle_between_deg(m.up, seed) <= 90.0
               ? angle_between_deg(m.up, seed)
               : 180.0 - angle_between_deg(m.up, seed);
  };
  const Mode *best = nullptr;
  for (const auto &m : modes) {
    if (m.support == 0 || m.support < min_support ||
        deviation(m) > params.max_tilt_deg)
      continue;
    if (!best || deviation(m) < deviation(*best) - 1.0 ||
        (std::abs(deviation(m) - deviation(*best)) <= 1.0 &&
         m.support > best->support))
      best = &m;
  }
  if (!best) {
    for (const auto &m : modes)
      if (!best || m.support > best->support)
        best = &m;
  }
  if (!best || best->support == 0)
    throw EstimationFailed("gravity estimation failed: no dominant direction");

  Eigen::Vector3d start = best->up;
  if (start.dot(seed) < 0)
    start = -start;
  Mode final_mode = refine(all, start, params);
  Eigen::Vector3d up = final_mode.up;
  if (up.dot(seed) < 0)
    up = -up;

  GravityEstimate g;
  g.up = up;
  g.rotation = gravity_rotation(up);
  g.inlier_fraction =
      static_cast<double>(final_mode.support) / static_cast<double>(all.size());
  g.iterations_used = best->iterations + final_mode.iterations;
  g.seed_deviation_deg = angle_between_deg(up, seed);
  return g;
}

double quantile_linear(std::vector<double> &values, double p) {
  if (values.empty())
    throw Error("quantile of an empty set");
  if (!(p >= 0 && p <= 1))
    throw Error("quantile: p must lie in [0,1]");
  const double h = (values.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  std::nth_element(values.begin(), values.begin() + lo, values.end());
  const double a = values[lo];
  if (lo + 1 >= values.size())
    return a;
  const double b = *std::min_element(values.begin() + lo + 1, values.end());
  return a + (h - lo) * (b - a);
}

FloorFrameEstimate locate_floor(const PointCloud &cloud,
                                const NormalMap &normals,
                                const GravityEstimate &gravity,
                                const FloorParams &params) {
  if (!cloud.points.same_shape(normals.normals))
    throw Error("locate_floor: cloud and normal map differ in size");
  FloorFrameEstimate est;
  est.gravity = gravity;

  const Eigen::RowVector3d row_y = gravity.rotation.row(1);
  std::vector<double> heights;
  heights.reserve(cloud.points.size());
  for (std::size_t i = 0; i < cloud.points.size(); ++i)
    if (cloud.valid[i])
      heights.push_back(row_y.dot(cloud.points[i].transpose()));
  if (heights.empty()) {
    est.reason = "no valid points";
    return est;
  }
  est.floor_height = quantile_linear(heights, params.percentile);

  const double cos_support = std::cos(params.support_angle_deg * kDeg);
  std::size_t supported = 0;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (!cloud.valid[i] || !normals.valid[i])
      continue;
    const double y = row_y.dot(cloud.points[i].transpose());
    if (std::abs(y - est.floor_height) > params.slab_thickness)
      continue;
    ++est.candidate_count;
    if (row_y.dot(normals.normals[i].transpose()) >= cos_support)
      ++supported;
  }
  if (est.candidate_count == 0) {
    est.reason = "empty floor candidate set";
    return est;
  }
  est.floor_support_fraction =
      static_cast<double>(supported) / static_cast<double>(est.candidate_count);

  if (gravity.seed_deviation_deg > params.max_tilt_deg) {
    est.reason = "up direction deviates " +
                 std::to_string(gravity.seed_deviation_deg) +
                 " deg from the sensor prior";
  } else if (!(est.floor_support_fraction > params.support_fraction_min)) {
    est.reason = "floor support " + std::to_string(est.floor_support_fraction) +
                 " <= " + std::to_string(params.support_fraction_min);
  } else {
    est.accepted = true;
  }
  return est;
}

nlohmann::json to_diagnostic_json(const FloorFrameEstimate &e) {
  const auto &u = e.gravity.up;
  nlohmann::json j{{"up", {u.x(), u.y(), u.z()}},
                   {"inlier_fraction", e.gravity.inlier_fraction},
                   {"iterations_used", e.gravity.iterations_used},
                   {"seed_deviation_deg", e.gravity.seed_deviation_deg},
                   {"floor_height", e.floor_height},
                   {"floor_support_fraction", e.floor_support_fraction},
                   {"candidate_count", e.candidate_count},
                   {"accepted", e.accepted}};
  if (!e.reason.empty())
    j["reason"] = e.reason;
  return j;
}

} // namespace hnl
