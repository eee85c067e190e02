#pragma once

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <unistd.h>

#include "hnlabel/hnlabel.hpp"

namespace hnl::test {

inline constexpr double kDeg = std::numbers::pi / 180.0;

inline double angle_deg(const Eigen::Vector3d &a, const Eigen::Vector3d &b) {
  return std::atan2(a.cross(b).norm(), a.dot(b)) / kDeg;
}

inline CameraIntrinsics small_intrinsics(int width = 96, int height = 72) {
  CameraIntrinsics k;
  k.width = width;
  k.height = height;
  k.fx = k.fy = 0.81 * width;
  k.cx = (width - 1) / 2.0;
  k.cy = (height - 1) / 2.0;
  return k;
}

// Metric depth of every pixel ray on the plane n . p = d (camera frame).
inline Raster<double> plane_depth(const CameraIntrinsics &k,
                                  const Eigen::Vector3d &n, double d) {
  Raster<double> z(k.width, k.height, 0.0);
  for (int v = 0; v < k.height; ++v)
    for (int u = 0; u < k.width; ++u) {
      const Eigen::Vector3d ray((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
      z(u, v) = d / n.dot(ray);
    }
  return z;
}

// The analytic camera-facing unit normal of the plane n . p = d, d > 0.
inline Eigen::Vector3d facing_normal(const Eigen::Vector3d &n) {
  return -n.normalized();
}

class TempDir {
public:
  explicit TempDir(const std::string &tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("hnl_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const std::filesystem::path &path() const { return path_; }
  std::filesystem::path operator/(const std::string &s) const {
    return path_ / s;
  }

private:
  std::filesystem::path path_;
};

inline std::string read_bytes(const std::filesystem::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline LabelRaster random_labels(std::mt19937_64 &rng, int w, int h,
                                 int classes, double ignore_rate = 0.0,
                                 int ignore = 255) {
  LabelRaster r(w, h, 0);
  std::uniform_int_distribution<int> cls(0, classes - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < r.size(); ++i)
    r[i] = static_cast<std::uint8_t>(u(rng) < ignore_rate ? ignore : cls(rng));
  return r;
}

} // namespace hnl::test
