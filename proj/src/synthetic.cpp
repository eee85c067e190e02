#include "hnlabel/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Geometry>
#include <nlohmann/json.hpp>

namespace hnl::synth {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kEps = 1e-9;

// Portable draws: the standard distributions are implementation-defined.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) { // inclusive
    return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(hi - lo + 1));
  }
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = 0;
    while (u1 <= 0)
      u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2 * std::numbers::pi * u2);
    has_spare_ = true;
    return r * std::cos(2 * std::numbers::pi * u2);
  }

private:
  std::mt19937_64 gen_;
  double spare_ = 0;
  bool has_spare_ = false;
};

nlohmann::json vec(const Eigen::Vector3d &v) { return {v.x(), v.y(), v.z()}; }
Eigen::Vector3d vec(const nlohmann::json &j) {
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

void consider(Hit &best, bool &found, double t, const Eigen::Vector3d &n,
              int cls) {
  if (t > kEps && (!found || t < best.t)) {
    best = {t, n, cls};
    found = true;
  }
}

// Ray vs bounded axis-aligned rectangle lying in plane coord[axis] = value.
void hit_rect(const Eigen::Vector3d &o, const Eigen::Vector3d &d, int axis,
              double value, const Eigen::Vector3d &lo,
              const Eigen::Vector3d &hi, const Eigen::Vector3d &normal,
              int cls, Hit &best, bool &found) {
  if (std::abs(d[axis]) < 1e-15)
    return;
  const double t = (value - o[axis]) / d[axis];
  if (t <= kEps)
    return;
  const Eigen::Vector3d p = o + t * d;
  for (int k = 0; k < 3; ++k) {
    if (k == axis)
      continue;
    if (p[k] < lo[k] - 1e-12 || p[k] > hi[k] + 1e-12)
      return;
  }
  consider(best, found, t, normal, cls);
}

void hit_box(const Eigen::Vector3d &o, const Eigen::Vector3d &d, const Box &b,
             Hit &best, bool &found) {
  const Eigen::Vector3d lo = b.center - 0.5 * b.size;
  const Eigen::Vector3d hi = b.center + 0.5 * b.size;
  double t_enter = -std::numeric_limits<double>::infinity();
  double t_exit = std::numeric_limits<double>::infinity();
  int enter_axis = -1;
  double enter_sign = 0;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (o[k] < lo[k] || o[k] > hi[k])
        return;
      continue;
    }
    double t0 = (lo[k] - o[k]) / d[k];
    double t1 = (hi[k] - o[k]) / d[k];
    double sign = -1; // entering through the low face
    if (t0 > t1) {
      std::swap(t0, t1);
      sign = 1;
    }
    if (t0 > t_enter) {
      t_enter = t0;
      enter_axis = k;
      enter_sign = sign;
    }
    t_exit = std::min(t_exit, t1);
  }
  if (enter_axis < 0 || t_enter > t_exit || t_enter <= kEps)
    return;
  Eigen::Vector3d n = Eigen::Vector3d::Zero();
  n[enter_axis] = enter_sign;
  consider(best, found, t_enter, n, b.class_id);
}

void hit_ramp(const Eigen::Vector3d &o, const Eigen::Vector3d &d,
              const Ramp &r, Hit &best, bool &found) {
  Eigen::Vector3d n = r.half_u.cross(r.half_v).normalized();
  const double denom = n.dot(d);
  if (std::abs(denom) < 1e-15)
    return;
  const double t = n.dot(r.center - o) / denom;
  if (t <= kEps)
    return;
  const Eigen::Vector3d rel = o + t * d - r.center;
  const double s = rel.dot(r.half_u) / r.half_u.squaredNorm();
  const double q = rel.dot(r.half_v) / r.half_v.squaredNorm();
  if (std::abs(s) > 1 + 1e-12 || std::abs(q) > 1 + 1e-12)
    return;
  if (n.dot(d) > 0)
    n = -n;
  consider(best, found, t, n, r.class_id);
}

Rgb class_color(int cls) {
  static constexpr std::array<Rgb, 10> base{{{0, 0, 0},
                                             {150, 120, 90},
                                             {200, 200, 190},
                                             {235, 235, 235},
                                             {160, 60, 40},
                                             {60, 120, 170},
                                             {90, 160, 70},
                                             {180, 160, 50},
                                             {130, 70, 150},
                                             {200, 100, 40}}};
  return cls >= 0 && cls < 10 ? base[static_cast<std::size_t>(cls)] : Rgb{};
}

} // namespace

void SyntheticScene::validate() const {
  if (!(width > 0 && depth > 0 && height > 0))
    throw Error("scene: room dimensions must be positive");
  for (const auto &b : boxes) {
    if ((b.size.array() <= 0).any())
      throw Error("scene: box sizes must be positive");
    const Eigen::Vector3d lo = b.center - 0.5 * b.size;
    const Eigen::Vector3d hi = b.center + 0.5 * b.size;
    if (lo.y() < -1e-12)
      throw Error("scene: box extends below the floor");
    if (lo.x() < -width / 2 || hi.x() > width / 2 || lo.z() < -depth / 2 ||
        hi.z() > depth / 2 || hi.y() > height)
      throw Error("scene: box extends outside the room");
  }
}

void to_json(nlohmann::json &j, const SyntheticScene &s) {
  nlohmann::json boxes = nlohmann::json::array();
  for (const auto &b : s.boxes)
    boxes.push_back(
        {{"class_id", b.class_id}, {"center", vec(b.center)}, {"size", vec(b.size)}});
  nlohmann::json ramps = nlohmann::json::array();
  for (const auto &r : s.ramps)
    ramps.push_back({{"class_id", r.class_id},
                     {"center", vec(r.center)},
                     {"half_u", vec(r.half_u)},
                     {"half_v", vec(r.half_v)}});
  j = nlohmann::json{{"room",
                      {{"width", s.width},
                       {"depth", s.depth},
                       {"height", s.height},
                       {"has_ceiling", s.has_ceiling}}},
                     {"floor", {{"normal", {0, 1, 0}}, {"offset", 0.0}}},
                     {"boxes", boxes},
                     {"ramps", ramps}};
}

void from_json(const nlohmann::json &j, SyntheticScene &s) {
  const auto &room = j.at("room");
  s.width = room.at("width").get<double>();
  s.depth = room.at("depth").get<double>();
  s.height = room.at("height").get<double>();
  s.has_ceiling = room.value("has_ceiling", true);
  s.boxes.clear();
  for (const auto &b : j.value("boxes", nlohmann::json::array()))
    s.boxes.push_back({b.at("class_id").get<int>(), vec(b.at("center")),
                       vec(b.at("size"))});
  s.ramps.clear();
  for (const auto &r : j.value("ramps", nlohmann::json::array()))
    s.ramps.push_back({r.at("class_id").get<int>(), vec(r.at("center")),
                       vec(r.at("half_u")), vec(r.at("half_v"))});
}

void save_scene(const std::filesystem::path &path, const SyntheticScene &s) {
  std::ofstream out(path);
  if (!out)
    throw Error(path.string() + ": cannot write scene");
  out << nlohmann::json(s).dump(2) << '\n';
}

SyntheticScene load_scene(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw Error(path.string() + ": cannot open scene");
  try {
    auto s = nlohmann::json::parse(in).get<SyntheticScene>();
    s.validate();
    return s;
  } catch (const nlohmann::json::exception &e) {
    throw Error(path.string() + ": " + e.what());
  }
}

Eigen::Vector3d CameraPose::to_camera(const Eigen::Vector3d &world) const {
  return orientation.transpose() * (world - position);
}

Eigen::Vector3d CameraPose::world_up_in_camera() const {
  return orientation.transpose() * Eigen::Vector3d::UnitY();
}

CameraPose make_pose(const Eigen::Vector3d &position, double yaw_deg,
                     double pitch_deg, double roll_deg,
                     const CameraIntrinsics &intrinsics) {
  Eigen::Matrix3d base;
  // Columns: camera x, y, z expressed in world coordinates.
  base.col(0) = Eigen::Vector3d(-1, 0, 0);
  base.col(1) = Eigen::Vector3d(0, -1, 0);
  base.col(2) = Eigen::Vector3d(0, 0, 1);
  const Eigen::Matrix3d r =
      Eigen::AngleAxisd(yaw_deg * kDeg, Eigen::Vector3d::UnitY())
          .toRotationMatrix() *
      base *
      Eigen::AngleAxisd(pitch_deg * kDeg, Eigen::Vector3d::UnitX())
          .toRotationMatrix() *
      Eigen::AngleAxisd(roll_deg * kDeg, Eigen::Vector3d::UnitZ())
          .toRotationMatrix();
  return {position, r, intrinsics};
}

CameraIntrinsics default_intrinsics() {
  CameraIntrinsics k;
  k.width = 560;
  k.height = 424;
  k.fx = 454.0;
  k.fy = 454.0;
  k.cx = 279.5;
  k.cy = 211.5;
  k.depth_scale = 0.001;
  return k;
}

bool cast_ray(const SyntheticScene &s, const Eigen::Vector3d &o,
              const Eigen::Vector3d &d, Hit &hit) {
  bool found = false;
  const double hw = s.width / 2, hd = s.depth / 2;
  const Eigen::Vector3d lo(-hw, 0, -hd), hi(hw, s.height, hd);
  hit_rect(o, d, 1, 0.0, lo, hi, {0, 1, 0}, kFloor, hit, found);
  if (s.has_ceiling)
    hit_rect(o, d, 1, s.height, lo, hi, {0, -1, 0}, kCeiling, hit, found);
  hit_rect(o, d, 0, -hw, lo, hi, {1, 0, 0}, kWall, hit, found);
  hit_rect(o, d, 0, hw, lo, hi, {-1, 0, 0}, kWall, hit, found);
  hit_rect(o, d, 2, -hd, lo, hi, {0, 0, 1}, kWall, hit, found);
  hit_rect(o, d, 2, hd, lo, hi, {0, 0, -1}, kWall, hit, found);
  for (const auto &b : s.boxes)
    hit_box(o, d, b, hit, found);
  for (const auto &r : s.ramps)
    hit_ramp(o, d, r, hit, found);
  return found;
}

RenderedFrame render_depth(const SyntheticScene &scene, const CameraPose &pose,
                           const HNLabelConfig &cfg,
                           const RenderOptions &options) {
  const auto &k = pose.intrinsics;
  k.validate();
  cfg.validate();
  const int w = k.width, h = k.height;
  const auto ignore = static_cast<std::uint8_t>(cfg.ignore_label);
  RenderedFrame f;
  f.true_depth = Raster<double>(w, h, 0.0);
  f.world_points = Raster<Eigen::Vector3d>(w, h, Eigen::Vector3d::Zero());
  f.world_normals = Raster<Eigen::Vector3d>(w, h, Eigen::Vector3d::Zero());
  f.height = Raster<double>(w, h, 0.0);
  f.normal_angle = Raster<double>(w, h, 0.0);
  f.hn_labels = LabelRaster(w, h, ignore);
  f.classes = LabelRaster(w, h, kNoClass);
  f.color = ColorFrame(w, h);

  Raster<double> noisy(w, h, 0.0);
  Rng rng(options.noise_seed);
  std::size_t hits = 0;
  for (int v = 0; v < h; ++v) {
    for (int u = 0; u < w; ++u) {
      const Eigen::Vector3d dir_cam((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      const Eigen::Vector3d dir = pose.orientation * dir_cam;
      Hit hit;
      if (!cast_ray(scene, pose.position, dir, hit) || hit.t > options.max_range)
        continue;
      ++hits;
      const std::size_t i = f.true_depth.index(u, v);
      // dir_cam has unit z, so the ray parameter equals metric depth.
      f.true_depth[i] = hit.t;
      const Eigen::Vector3d p = pose.position + hit.t * dir;
      f.world_points[i] = p;
      f.world_normals[i] = hit.normal;
      f.height[i] = p.y();
      const double angle =
          std::acos(std::min(1.0, std::abs(hit.normal.y()))) / kDeg;
      f.normal_angle[i] = angle;
      f.hn_labels[i] = static_cast<std::uint8_t>(compose_label(
          bin_height(p.y(), cfg), bin_normal(angle, cfg), cfg));
      f.classes[i] = static_cast<std::uint8_t>(hit.class_id);
      const Rgb base = class_color(hit.class_id);
      const double shade = 0.55 + 0.45 * std::abs(hit.normal.y());
      f.color[i] = {static_cast<std::uint8_t>(base.r * shade),
                    static_cast<std::uint8_t>(base.g * shade),
                    static_cast<std::uint8_t>(base.b * shade)};
      double z = hit.t;
      if (options.noise_sigma > 0) {
        double n = rng.gaussian();
        while (std::abs(n) > 3.0)
          n = rng.gaussian();
        z += options.noise_sigma * n;
      }
      noisy[i] = z;
    }
  }
  if (hits == 0)
    throw Error("render_depth: pose sees no geometry");
  f.depth = depth_from_meters(noisy, k);
  return f;
}

namespace {

bool inside_box_margin(const SyntheticScene &s, const Eigen::Vector3d &p,
                       double margin) {
  for (const auto &b : s.boxes) {
    const Eigen::Vector3d lo = b.center - 0.5 * b.size;
    const Eigen::Vector3d hi = b.center + 0.5 * b.size;
    if (p.x() > lo.x() - margin && p.x() < hi.x() + margin &&
        p.z() > lo.z() - margin && p.z() < hi.z() + margin &&
        p.y() < hi.y() + margin)
      return true;
  }
  return false;
}

} // namespace

SyntheticScene random_scene(std::uint64_t seed) {
  Rng rng(seed ^ 0x5ce0e5ce0e5ce0ULL);
  SyntheticScene s;
  s.width = rng.uniform(4.0, 7.0);
  s.depth = rng.uniform(4.0, 7.0);
  s.height = rng.uniform(2.5, 3.0);
  s.has_ceiling = rng.uniform() < 0.5;
  const int want = rng.integer(2, 6);
  for (int attempt = 0; attempt < 200 && static_cast<int>(s.boxes.size()) < want;
       ++attempt) {
    Box b;
    b.class_id = kFirstObjectClass + rng.integer(0, 4);
    b.size = {rng.uniform(0.4, 1.5), rng.uniform(0.3, 1.8), rng.uniform(0.4, 1.5)};
    const double mx = s.width / 2 - b.size.x() / 2 - 0.3;
    const double mz = s.depth / 2 - b.size.z() / 2 - 0.3;
    if (mx <= 0 || mz <= 0)
      continue;
    b.center = {rng.uniform(-mx, mx), b.size.y() / 2, rng.uniform(-mz, mz)};
    bool clear = true;
    for (const auto &o : s.boxes) {
      const Eigen::Vector3d gap = (b.center - o.center).cwiseAbs() -
                                  0.5 * (b.size + o.size);
      if (gap.x() < 0.2 && gap.z() < 0.2) {
        clear = false;
        break;
      }
    }
    if (clear)
      s.boxes.push_back(b);
  }
  s.validate();
  return s;
}

double floor_coverage(const SyntheticScene &scene, const CameraPose &pose,
                      int stride) {
  const auto &k = pose.intrinsics;
  std::size_t floor = 0, total = 0;
  for (int v = stride / 2; v < k.height; v += stride)
    for (int u = stride / 2; u < k.width; u += stride) {
      ++total;
      const Eigen::Vector3d dir =
          pose.orientation *
          Eigen::Vector3d((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      Hit hit;
      if (cast_ray(scene, pose.position, dir, hit) && hit.class_id == kFloor)
        ++floor;
    }
  return total ? static_cast<double>(floor) / total : 0.0;
}

CameraPose random_pose(const SyntheticScene &scene, std::uint64_t seed,
                       const CameraIntrinsics &intrinsics) {
  Rng rng(seed ^ 0x90e5e90e5eULL);
  const double top = scene.has_ceiling ? std::min(1.8, scene.height - 0.4) : 1.8;
  for (int attempt = 0; attempt < 2000; ++attempt) {
    const Eigen::Vector3d pos(
        rng.uniform(-scene.width / 2 + 0.6, scene.width / 2 - 0.6),
        rng.uniform(1.0, top),
        rng.uniform(-scene.depth / 2 + 0.6, scene.depth / 2 - 0.6));
    const double yaw = rng.uniform(-180.0, 180.0);
    const double pitch = rng.uniform(-40.0, 10.0);
    const double roll = rng.uniform(-8.0, 8.0);
    if (inside_box_margin(scene, pos, 0.4))
      continue;
    CameraPose pose = make_pose(pos, yaw, pitch, roll, intrinsics);
    // Keep the nearest surface at a realistic sensor distance.
    const Eigen::Vector3d fwd = pose.orientation.col(2);
    Hit centre;
    if (!cast_ray(scene, pos, fwd, centre) || centre.t < 1.0)
      continue;
    if (floor_coverage(scene, pose, 8) >= 0.32)
      return pose;
  }
  throw Error("random_pose: no admissible pose found");
}

std::pair<SyntheticScene, CameraPose>
ramp_scene(double tilt_deg, std::uint64_t seed,
           const CameraIntrinsics &intrinsics) {
  Rng rng(seed ^ 0x4a3b2c1dULL);
  SyntheticScene s;
  s.width = 5.0;
  s.depth = 6.0;
  s.height = 2.4;
  s.has_ceiling = true;
  // Ramp from the floor just ahead of the camera up to the ceiling, covering
  // the full room width so no level floor is in view.
  const double t = std::tan(tilt_deg * kDeg);
  const double z0 = -2.0 + rng.uniform(-0.1, 0.1);
  const double run = s.height / t;
  const double z1 = std::min(z0 + run, s.depth / 2);
  const double y1 = (z1 - z0) * t;
  Ramp r;
  r.center = {0, y1 / 2, (z0 + z1) / 2};
  r.half_u = {s.width / 2, 0, 0};
  r.half_v = {0, y1 / 2, (z1 - z0) / 2};
  s.ramps.push_back(r);
  const Eigen::Vector3d pos(rng.uniform(-0.3, 0.3), rng.uniform(1.4, 1.6),
                            -2.6);
  CameraPose pose = make_pose(pos, rng.uniform(-8.0, 8.0),
                              rng.uniform(0.0, 8.0), rng.uniform(-3.0, 3.0),
                              intrinsics);
  return {s, pose};
}

} // namespace hnl::synth
