#include "hnlabel/rgbd_ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hnlabel/png_io.hpp"

namespace hnl {

void CameraIntrinsics::validate() const {
  if (!(fx > 0) || !(fy > 0))
    throw Error("intrinsics: focal lengths must be positive");
  if (width <= 0 || height <= 0)
    throw Error("intrinsics: width and height must be positive");
  if (!(cx >= 0 && cx < width) || !(cy >= 0 && cy < height))
    throw Error("intrinsics: principal point outside the raster");
  if (!(depth_scale > 0))
    throw Error("intrinsics: depth_scale must be positive");
}

void to_json(nlohmann::json &j, const CameraIntrinsics &k) {
  j = nlohmann::json{{"fx", k.fx},         {"fy", k.fy},
                     {"cx", k.cx},         {"cy", k.cy},
                     {"width", k.width},   {"height", k.height},
                     {"depth_scale", k.depth_scale}};
}

void from_json(const nlohmann::json &j, CameraIntrinsics &k) {
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.cx = j.at("cx").get<double>();
  k.cy = j.at("cy").get<double>();
  k.width = j.at("width").get<int>();
  k.height = j.at("height").get<int>();
  k.depth_scale = j.value("depth_scale", 0.001);
}

DepthFrame depth_from_units(const Raster<std::uint16_t> &stored,
                            const CameraIntrinsics &intrinsics) {
  intrinsics.validate();
  if (!stored.same_shape(intrinsics.width, intrinsics.height))
    throw Error("depth raster is " + std::to_string(stored.width()) + "x" +
                std::to_string(stored.height()) + " but intrinsics declare " +
                std::to_string(intrinsics.width) + "x" +
                std::to_string(intrinsics.height));
  DepthFrame f{Raster<double>(stored.width(), stored.height(), 0.0),
               Mask(stored.width(), stored.height(), 0), intrinsics};
  for (std::size_t i = 0; i < stored.size(); ++i) {
    if (stored[i] != 0) {
      f.values[i] = stored[i] * intrinsics.depth_scale;
      f.valid[i] = 1;
    }
  }
  return f;
}

Raster<std::uint16_t> depth_to_units(const DepthFrame &frame) {
  Raster<std::uint16_t> out(frame.width(), frame.height(), 0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!frame.valid[i])
      continue;
    const double units =
        std::round(frame.values[i] / frame.intrinsics.depth_scale);
    // A valid sample must stay distinguishable from the "no depth" code.
    out[i] = static_cast<std::uint16_t>(std::clamp(units, 1.0, 65535.0));
  }
  return out;
}

DepthFrame depth_from_meters(const Raster<double> &meters,
                             const CameraIntrinsics &intrinsics) {
  intrinsics.validate();
  if (!meters.same_shape(intrinsics.width, intrinsics.height))
    throw Error("depth raster does not match intrinsics dimensions");
  DepthFrame f{Raster<double>(meters.width(), meters.height(), 0.0),
               Mask(meters.width(), meters.height(), 0), intrinsics};
  for (std::size_t i = 0; i < meters.size(); ++i) {
    if (std::isfinite(meters[i]) && meters[i] > 0) {
      f.values[i] = meters[i];
      f.valid[i] = 1;
    }
  }
  return f;
}

DepthFrame load_depth(const std::filesystem::path &path,
                      const CameraIntrinsics &intrinsics) {
  if (!std::filesystem::exists(path))
    throw Error(path.string() + ": missing file");
  auto stored = png::read_gray16(path);
  try {
    return depth_from_units(stored, intrinsics);
  } catch (const Error &e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void save_depth(const std::filesystem::path &path, const DepthFrame &frame) {
  png::write_gray16(path, depth_to_units(frame));
}

CropWindow center_crop_for(int src_width, int src_height, Size2 target) {
  if (target.width <= 0 || target.height <= 0)
    throw Error("normalize: target size must be positive");
  CropWindow c{0, 0, src_width, src_height};
  // Compare aspect ratios exactly in integers.
  const long long lhs = static_cast<long long>(src_width) * target.height;
  const long long rhs = static_cast<long long>(src_height) * target.width;
  if (lhs > rhs) {
    c.width = static_cast<int>(std::lround(static_cast<double>(src_height) *
                                           target.width / target.height));
    c.x0 = (src_width - c.width) / 2;
  } else if (lhs < rhs) {
    c.height = static_cast<int>(std::lround(static_cast<double>(src_width) *
                                            target.height / target.width));
    c.y0 = (src_height - c.height) / 2;
  }
  if (target.width > c.width || target.height > c.height)
    throw Error("normalize: target " + std::to_string(target.height) + "x" +
                std::to_string(target.width) + " exceeds cropped source " +
                std::to_string(c.height) + "x" + std::to_string(c.width) +
                " (upscaling is not supported)");
  return c;
}

namespace {

// Source coordinate of destination pixel center i under half-pixel alignment.
double source_coord(int i, double scale) { return (i + 0.5) * scale - 0.5; }

int nearest_index(int i, double scale, int extent) {
  const int s = static_cast<int>(std::floor((i + 0.5) * scale));
  return std::clamp(s, 0, extent - 1);
}

template <typename T>
Raster<T> resample_nearest(const Raster<T> &src, const CropWindow &c,
                           Size2 target) {
  Raster<T> out(target.width, target.height);
  const double sx = static_cast<double>(c.width) / target.width;
  const double sy = static_cast<double>(c.height) / target.height;
  for (int v = 0; v < target.height; ++v) {
    const int ys = c.y0 + nearest_index(v, sy, c.height);
    for (int u = 0; u < target.width; ++u)
      out(u, v) = src(c.x0 + nearest_index(u, sx, c.width), ys);
  }
  return out;
}

ColorFrame resample_bilinear(const ColorFrame &src, const CropWindow &c,
                             Size2 target) {
  ColorFrame out(target.width, target.height);
  const double sx = static_cast<double>(c.width) / target.width;
  const double sy = static_cast<double>(c.height) / target.height;
  for (int v = 0; v < target.height; ++v) {
    const double y = std::clamp(source_coord(v, sy), 0.0, c.height - 1.0);
    const int y0 = static_cast<int>(std::floor(y));
    const int y1 = std::min(y0 + 1, c.height - 1);
    const double wy = y - y0;
    for (int u = 0; u < target.width; ++u) {
      const double x = std::clamp(source_coord(u, sx), 0.0, c.width - 1.0);
      const int x0 = static_cast<int>(std::floor(x));
      const int x1 = std::min(x0 + 1, c.width - 1);
      const double wx = x - x0;
      const Rgb &p00 = src(c.x0 + x0, c.y0 + y0);
      const Rgb &p10 = src(c.x0 + x1, c.y0 + y0);
      const Rgb &p01 = src(c.x0 + x0, c.y0 + y1);
      const Rgb &p11 = src(c.x0 + x1, c.y0 + y1);
      auto blend = [&](std::uint8_t a, std::uint8_t b, std::uint8_t cc,
                       std::uint8_t d) {
        const double top = a + (b - a) * wx;
        const double bottom = cc + (d - cc) * wx;
        return static_cast<std::uint8_t>(
            std::lround(std::clamp(top + (bottom - top) * wy, 0.0, 255.0)));
      };
      out(u, v) = {blend(p00.r, p10.r, p01.r, p11.r),
                   blend(p00.g, p10.g, p01.g, p11.g),
                   blend(p00.b, p10.b, p01.b, p11.b)};
    }
  }
  return out;
}

} // namespace

NormalizedFrame normalize_frame(const ColorFrame &color,
                                const std::optional<LabelRaster> &labels,
                                Size2 target) {
  if (labels && !labels->same_shape(color))
    throw Error("normalize: color and label rasters differ in size");
  const CropWindow c = center_crop_for(color.width(), color.height(), target);
  NormalizedFrame out;
  if (c.width == target.width && c.height == target.height && c.x0 == 0 &&
      c.y0 == 0) {
    out.color = color;
    out.labels = labels;
    return out;
  }
  out.color = resample_bilinear(color, c, target);
  if (labels)
    out.labels = resample_nearest(*labels, c, target);
  return out;
}

LabelRaster normalize_labels(const LabelRaster &labels, Size2 target) {
  const CropWindow c = center_crop_for(labels.width(), labels.height(), target);
  return resample_nearest(labels, c, target);
}

CameraIntrinsics normalize_intrinsics(const CameraIntrinsics &k, Size2 target) {
  k.validate();
  const CropWindow c = center_crop_for(k.width, k.height, target);
  const double sx = static_cast<double>(target.width) / c.width;
  const double sy = static_cast<double>(target.height) / c.height;
  CameraIntrinsics out = k;
  out.fx = k.fx * sx;
  out.fy = k.fy * sy;
  out.cx = (k.cx - c.x0 + 0.5) * sx - 0.5;
  out.cy = (k.cy - c.y0 + 0.5) * sy - 0.5;
  out.width = target.width;
  out.height = target.height;
  return out;
}

DatasetManifest::DatasetManifest(
    std::vector<FrameRecord> frames,
    std::map<std::string, CameraIntrinsics> intrinsics,
    std::filesystem::path base_dir)
    : frames_(std::move(frames)), intrinsics_(std::move(intrinsics)),
      base_dir_(std::move(base_dir)) {
  std::set<std::string> seen;
  for (const auto &r : frames_) {
    if (!seen.insert(r.frame_id).second)
      throw Error("manifest: duplicate frame_id '" + r.frame_id + "'");
    if (!intrinsics_.contains(r.intrinsics_id))
      throw Error("manifest: frame '" + r.frame_id +
                  "' references unknown intrinsics '" + r.intrinsics_id + "'");
  }
  for (const auto &[id, k] : intrinsics_) {
    try {
      k.validate();
    } catch (const Error &e) {
      throw Error("intrinsics '" + id + "': " + e.what());
    }
  }
}

const CameraIntrinsics &
DatasetManifest::intrinsics_for(const FrameRecord &r) const {
  return intrinsics_.at(r.intrinsics_id);
}

std::filesystem::path
DatasetManifest::resolve(const std::string &relative) const {
  std::filesystem::path p(relative);
  return p.is_absolute() ? p : base_dir_ / p;
}

DatasetManifest load_manifest(const std::filesystem::path &manifest_path,
                              const std::filesystem::path &intrinsics_path) {
  std::ifstream in(manifest_path);
  if (!in)
    throw Error(manifest_path.string() + ": cannot open manifest");
  std::ifstream kin(intrinsics_path);
  if (!kin)
    throw Error(intrinsics_path.string() + ": cannot open intrinsics table");

  std::map<std::string, CameraIntrinsics> table;
  try {
    auto j = nlohmann::json::parse(kin);
    for (auto it = j.begin(); it != j.end(); ++it)
      table[it.key()] = it.value().get<CameraIntrinsics>();
  } catch (const nlohmann::json::exception &e) {
    throw Error(intrinsics_path.string() + ": " + e.what());
  }

  std::vector<FrameRecord> frames;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#')
      continue;
    std::istringstream ss(line);
    FrameRecord r;
    std::string extra;
    if (!(ss >> r.frame_id >> r.depth_path >> r.color_path >> r.intrinsics_id >>
          r.scene_id) ||
        (ss >> extra))
      throw Error(manifest_path.string() + ":" + std::to_string(lineno) +
                  ": expected 5 fields");
    frames.push_back(std::move(r));
  }
  try {
    return DatasetManifest(std::move(frames), std::move(table),
                           manifest_path.parent_path());
  } catch (const Error &e) {
    throw Error(manifest_path.string() + ": " + e.what());
  }
}

void save_manifest(const std::filesystem::path &manifest_path,
                   const std::filesystem::path &intrinsics_path,
                   const DatasetManifest &manifest) {
  std::ofstream out(manifest_path);
  if (!out)
    throw Error(manifest_path.string() + ": cannot write manifest");
  out << "# frame_id depth_path color_path intrinsics_id scene_id\n";
  for (const auto &r : manifest.frames())
    out << r.frame_id << ' ' << r.depth_path << ' ' << r.color_path << ' '
        << r.intrinsics_id << ' ' << r.scene_id << '\n';
  nlohmann::json j = nlohmann::json::object();
  for (const auto &[id, k] : manifest.intrinsics())
    j[id] = k;
  std::ofstream kout(intrinsics_path);
  if (!kout)
    throw Error(intrinsics_path.string() + ": cannot write intrinsics table");
  kout << j.dump(2) << '\n';
}

std::map<std::string, std::size_t>
allocate_per_scene(const std::map<std::string, std::size_t> &available,
                   std::size_t n) {
  std::size_t total = 0;
  for (const auto &[scene, count] : available)
    total += count;
  if (n > total)
    throw Error("sample_uniform: requested " + std::to_string(n) +
                " frames but manifest has " + std::to_string(total));
  std::map<std::string, std::size_t> quota;
  for (const auto &[scene, count] : available)
    quota[scene] = 0;
  // Round-robin in scene_id order, skipping exhausted scenes.
  std::size_t remaining = n;
  while (remaining > 0) {
    for (const auto &[scene, count] : available) {
      if (remaining == 0)
        break;
      if (quota[scene] < count) {
        ++quota[scene];
        --remaining;
      }
    }
  }
  return quota;
}

DatasetManifest sample_uniform(const DatasetManifest &manifest, std::size_t n,
                               std::uint64_t seed) {
  std::map<std::string, std::vector<std::size_t>> by_scene;
  for (std::size_t i = 0; i < manifest.frames().size(); ++i)
    by_scene[manifest.frames()[i].scene_id].push_back(i);
  std::map<std::string, std::size_t> available;
  for (const auto &[scene, idx] : by_scene)
    available[scene] = idx.size();
  const auto quota = allocate_per_scene(available, n);

  std::vector<char> keep(manifest.frames().size(), 0);
  std::mt19937_64 rng(seed);
  for (auto &[scene, idx] : by_scene) {
    const std::size_t want = quota.at(scene);
    if (want == idx.size()) {
      for (auto i : idx)
        keep[i] = 1;
      continue;
    }
    // Partial Fisher-Yates with an explicit draw so selection does not
    // depend on the standard library's distribution implementation.
    for (std::size_t k = 0; k < want; ++k) {
      const std::size_t span = idx.size() - k;
      const std::size_t j = k + static_cast<std::size_t>(rng() % span);
      std::swap(idx[k], idx[j]);
      keep[idx[k]] = 1;
    }
  }
  std::vector<FrameRecord> out;
  out.reserve(n);
  for (std::size_t i = 0; i < keep.size(); ++i)
    if (keep[i])
      out.push_back(manifest.frames()[i]);
  return DatasetManifest(std::move(out), manifest.intrinsics(),
                         manifest.base_dir());
}

} // namespace hnl
