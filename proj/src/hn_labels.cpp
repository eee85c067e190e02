#include "hnlabel/hn_labels.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

namespace hnl {

void HNLabelConfig::validate() const {
  if (n_h < 1 || n_n < 1)
    throw Error("label config: n_h and n_n must be >= 1");
  if (!(height_min < height_max))
    throw Error("label config: height_min must be below height_max");
  if (!(normal_split_angle > 0 && normal_split_angle < 90))
    throw Error("label config: normal_split_angle must lie in (0, 90)");
  if (ignore_label < label_count() || ignore_label > 255)
    throw Error("label config: ignore_label must be outside [0, n_h*n_n) and "
                "fit in 8 bits");
}

double HNLabelConfig::height_edge(int k) const {
  return height_min + (height_max - height_min) * k / n_h;
}

double HNLabelConfig::normal_edge(int k) const {
  if (n_n == 2 && k == 1)
    return normal_split_angle;
  return 90.0 * k / n_n;
}

std::string HNLabelConfig::layout() const {
  return "h_major:n_n=" + std::to_string(n_n);
}

void to_json(nlohmann::json &j, const HNLabelConfig &c) {
  j = nlohmann::json{{"n_h", c.n_h},
                     {"n_n", c.n_n},
                     {"height_min", c.height_min},
                     {"height_max", c.height_max},
                     {"normal_split_angle", c.normal_split_angle},
                     {"ignore_label", c.ignore_label}};
}

void from_json(const nlohmann::json &j, HNLabelConfig &c) {
  HNLabelConfig d;
  c.n_h = j.value("n_h", d.n_h);
  c.n_n = j.value("n_n", d.n_n);
  c.height_min = j.value("height_min", d.height_min);
  c.height_max = j.value("height_max", d.height_max);
  c.normal_split_angle = j.value("normal_split_angle", d.normal_split_angle);
  c.ignore_label = j.value("ignore_label", d.ignore_label);
}

double compute_normal_angle(const Eigen::Vector3d &gravity_normal) {
  const double c = std::min(1.0, std::abs(gravity_normal.y()));
  return std::acos(c) * 180.0 / std::numbers::pi;
}

int bin_height(double h, const HNLabelConfig &cfg) {
  if (h < cfg.height_edge(1))
    return 0;
  if (h >= cfg.height_edge(cfg.n_h - 1))
    return cfg.n_h - 1;
  int k = static_cast<int>(std::floor((h - cfg.height_min) /
                                      (cfg.height_max - cfg.height_min) *
                                      cfg.n_h));
  k = std::clamp(k, 0, cfg.n_h - 1);
  // The edge table is authoritative; fix up rounding at the edges.
  while (k > 0 && h < cfg.height_edge(k))
    --k;
  while (k + 1 < cfg.n_h && h >= cfg.height_edge(k + 1))
    ++k;
  return k;
}

int bin_normal(double angle_deg, const HNLabelConfig &cfg) {
  if (cfg.n_n == 1)
    return 0;
  if (cfg.n_n == 2)
    return angle_deg < cfg.normal_split_angle ? 0 : 1;
  int k = static_cast<int>(std::floor(angle_deg / 90.0 * cfg.n_n));
  k = std::clamp(k, 0, cfg.n_n - 1);
  while (k > 0 && angle_deg < cfg.normal_edge(k))
    --k;
  while (k + 1 < cfg.n_n && angle_deg >= cfg.normal_edge(k + 1))
    ++k;
  return k;
}

int compose_label(int h_bin, int n_bin, const HNLabelConfig &cfg) {
  if (h_bin < 0 || h_bin >= cfg.n_h || n_bin < 0 || n_bin >= cfg.n_n)
    throw Error("compose_label: bin (" + std::to_string(h_bin) + ", " +
                std::to_string(n_bin) + ") out of range");
  return h_bin * cfg.n_n + n_bin;
}

LabelResult label_from_geometry(const PointCloud &cloud,
                                const NormalMap &normals,
                                const HNLabelConfig &cfg,
                                const LabelingParams &params) {
  cfg.validate();
  const auto ignore = static_cast<std::uint8_t>(cfg.ignore_label);
  LabelResult out{LabelRaster(cloud.width(), cloud.height(), ignore), {}};
  const PointCloud &points =
      params.surface_points ? surface_cloud(cloud, normals) : cloud;
  try {
    const GravityEstimate g = estimate_gravity(normals, params.gravity);
    out.floor = locate_floor(points, normals, g, params.floor);
  } catch (const EstimationFailed &e) {
    out.floor.accepted = false;
    out.floor.reason = e.what();
    return out;
  }
  if (!out.floor.accepted)
    return out;

  const Eigen::Matrix3d &r = out.floor.gravity.rotation;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    if (!cloud.valid[i] || !normals.valid[i])
      continue;
    const double h =
        compute_height(r * points.points[i], out.floor.floor_height);
    const double a = compute_normal_angle(r * normals.normals[i]);
    out.labels[i] = static_cast<std::uint8_t>(
        compose_label(bin_height(h, cfg), bin_normal(a, cfg), cfg));
  }
  return out;
}

LabelResult generate_labels(const DepthFrame &depth, const HNLabelConfig &cfg,
                            const LabelingParams &params) {
  const PointCloud cloud = backproject(depth);
  const NormalMap normals = estimate_normals(cloud, params.normals);
  return label_from_geometry(cloud, normals, cfg, params);
}

Raster<Rgb> colorize_labels(const LabelRaster &labels,
                            const HNLabelConfig &cfg) {
  // Pairs of (horizontal, vertical) shades per height level, low -> high.
  static constexpr std::array<Rgb, 21> palette{{
      {128, 64, 128}, {244, 35, 232}, {70, 70, 70},    {102, 102, 156},
      {190, 153, 153}, {153, 153, 153}, {250, 170, 30}, {220, 220, 0},
      {107, 142, 35},  {152, 251, 152}, {70, 130, 180}, {220, 20, 60},
      {255, 0, 0},     {0, 0, 142},     {0, 0, 70},     {0, 60, 100},
      {0, 80, 100},    {0, 0, 230},     {119, 11, 32},  {255, 255, 255},
      {0, 0, 0},
  }};
  Raster<Rgb> out(labels.width(), labels.height());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    out[i] = (l < cfg.label_count() && l < 20) ? palette[static_cast<std::size_t>(l)]
                                               : palette[20];
  }
  return out;
}

} // namespace hnl
