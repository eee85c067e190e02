#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hnlabel/raster.hpp"

namespace hnl {

struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;
  double depth_scale = 0.001; // stored units -> meters

  // Throws hnl::Error naming the first violated invariant.
  void validate() const;
  bool operator==(const CameraIntrinsics &) const = default;
};

void to_json(nlohmann::json &j, const CameraIntrinsics &k);
void from_json(const nlohmann::json &j, CameraIntrinsics &k);

struct DepthFrame {
  Raster<double> values; // meters; 0 where invalid
  Mask valid;            // 1 where the sensor reported depth
  CameraIntrinsics intrinsics;

  int width() const { return values.width(); }
  int height() const { return values.height(); }
};

using ColorFrame = Raster<Rgb>;

// Builds a frame from raw sensor units; 0 encodes "no depth".
DepthFrame depth_from_units(const Raster<std::uint16_t> &stored,
                            const CameraIntrinsics &intrinsics);
// Inverse of depth_from_units (rounds to nearest unit, invalid -> 0).
Raster<std::uint16_t> depth_to_units(const DepthFrame &frame);
// Builds a frame from metric depth; non-positive or non-finite -> invalid.
DepthFrame depth_from_meters(const Raster<double> &meters,
                             const CameraIntrinsics &intrinsics);

DepthFrame load_depth(const std::filesystem::path &path,
                      const CameraIntrinsics &intrinsics);
void save_depth(const std::filesystem::path &path, const DepthFrame &frame);

struct Size2 {
  int height = 0;
  int width = 0;
};

// Center crop window applied before resampling to `target`.
struct CropWindow {
  int x0 = 0, y0 = 0, width = 0, height = 0;
};
CropWindow center_crop_for(int src_width, int src_height, Size2 target);

struct NormalizedFrame {
  ColorFrame color;
  std::optional<LabelRaster> labels;
};

// Center-crops to the target aspect ratio, then resamples: color bilinear
// (half-pixel centers), labels nearest-neighbour. Equal sizes are an exact copy.
NormalizedFrame normalize_frame(const ColorFrame &color,
                                const std::optional<LabelRaster> &labels,
                                Size2 target);
// Label-only variant used when no color is available.
LabelRaster normalize_labels(const LabelRaster &labels, Size2 target);
// Intrinsics of the cropped and rescaled raster.
CameraIntrinsics normalize_intrinsics(const CameraIntrinsics &k, Size2 target);

struct FrameRecord {
  std::string frame_id;
  std::string depth_path;
  std::string color_path; // "-" when absent
  std::string intrinsics_id;
  std::string scene_id;
  bool operator==(const FrameRecord &) const = default;
};

class DatasetManifest {
public:
  DatasetManifest() = default;
  DatasetManifest(std::vector<FrameRecord> frames,
                  std::map<std::string, CameraIntrinsics> intrinsics,
                  std::filesystem::path base_dir = {});

  const std::vector<FrameRecord> &frames() const { return frames_; }
  const std::map<std::string, CameraIntrinsics> &intrinsics() const {
    return intrinsics_;
  }
  const CameraIntrinsics &intrinsics_for(const FrameRecord &r) const;
  // Paths in records are relative to the manifest file's directory.
  std::filesystem::path resolve(const std::string &relative) const;
  const std::filesystem::path &base_dir() const { return base_dir_; }
  std::size_t size() const { return frames_.size(); }

private:
  std::vector<FrameRecord> frames_;
  std::map<std::string, CameraIntrinsics> intrinsics_;
  std::filesystem::path base_dir_;
};

// Manifest: one whitespace-separated record per line
//   frame_id depth_path color_path intrinsics_id scene_id
// Blank lines and lines starting with '#' are skipped. The intrinsics table is
// a JSON object {id: {fx, fy, cx, cy, width, height, depth_scale}}.
DatasetManifest load_manifest(const std::filesystem::path &manifest_path,
                              const std::filesystem::path &intrinsics_path);
void save_manifest(const std::filesystem::path &manifest_path,
                   const std::filesystem::path &intrinsics_path,
                   const DatasetManifest &manifest);

// Scene-balanced subset: scenes in scene_id order receive frames round-robin
// until n are allocated; frames within a scene are picked by a seeded shuffle.
// Output keeps manifest order.
DatasetManifest sample_uniform(const DatasetManifest &manifest, std::size_t n,
                               std::uint64_t seed);
// Per-scene quota used by sample_uniform, keyed by scene_id.
std::map<std::string, std::size_t>
allocate_per_scene(const std::map<std::string, std::size_t> &available,
                   std::size_t n);

} // namespace hnl
