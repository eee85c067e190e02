#include "hnlabel/stats.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "hnlabel/png_io.hpp"

namespace hnl {

HeightDistribution::HeightDistribution(int classes, int bins, int ignore_label)
    : classes_(classes), bins_(bins), ignore_(ignore_label) {
  if (classes <= 0 || bins <= 0)
    throw Error("height distribution needs positive class and bin counts");
  counts_.assign(static_cast<std::size_t>(classes) * bins, 0);
}

std::uint64_t HeightDistribution::count(int cls, int bin) const {
  return counts_.at(static_cast<std::size_t>(cls) * bins_ + bin);
}

std::uint64_t HeightDistribution::class_total(int cls) const {
  std::uint64_t t = 0;
  for (int b = 0; b < bins_; ++b)
    t += count(cls, b);
  return t;
}

void HeightDistribution::accumulate(const LabelRaster &semantic,
                                    const LabelRaster &height_bins) {
  if (!semantic.same_shape(height_bins))
    throw Error("accumulate: semantic and height rasters differ in size");
  for (std::size_t i = 0; i < semantic.size(); ++i) {
    const int c = semantic[i], b = height_bins[i];
    if (c == ignore_ || b == ignore_)
      continue;
    if (c >= classes_ || b >= bins_)
      throw Error("accumulate: class " + std::to_string(c) + " / bin " +
                  std::to_string(b) + " outside the distribution");
    ++counts_[static_cast<std::size_t>(c) * bins_ + b];
  }
}

void HeightDistribution::merge(const HeightDistribution &other) {
  if (other.classes_ != classes_ || other.bins_ != bins_)
    throw Error("merge: height distributions differ in shape");
  for (std::size_t i = 0; i < counts_.size(); ++i)
    counts_[i] += other.counts_[i];
}

std::vector<std::vector<double>> HeightDistribution::finalize() const {
  std::vector<std::vector<double>> rows(
      static_cast<std::size_t>(classes_),
      std::vector<double>(static_cast<std::size_t>(bins_), 0.0));
  for (int c = 0; c < classes_; ++c) {
    const std::uint64_t total = class_total(c);
    if (total == 0)
      continue;
    for (int b = 0; b < bins_; ++b)
      rows[c][b] = static_cast<double>(count(c, b)) / static_cast<double>(total);
  }
  return rows;
}

HeightDistribution merge(const HeightDistribution &a,
                         const HeightDistribution &b) {
  HeightDistribution out = a;
  out.merge(b);
  return out;
}

LabelRaster height_bins_from_labels(const LabelRaster &hn, int n_n,
                                    int ignore_label) {
  if (n_n < 1)
    throw Error("height_bins_from_labels: n_n must be >= 1");
  LabelRaster out(hn.width(), hn.height(),
                  static_cast<std::uint8_t>(ignore_label));
  for (std::size_t i = 0; i < hn.size(); ++i)
    if (hn[i] != ignore_label)
      out[i] = static_cast<std::uint8_t>(hn[i] / n_n);
  return out;
}

nlohmann::json to_json(const HeightDistribution &dist) {
  nlohmann::json rows = nlohmann::json::array();
  const auto fr = dist.finalize();
  for (int c = 0; c < dist.classes(); ++c) {
    const auto total = dist.class_total(c);
    if (total == 0)
      continue;
    rows.push_back({{"class", c}, {"points", total}, {"fractions", fr[c]}});
  }
  return {{"classes", dist.classes()}, {"bins", dist.bins()}, {"rows", rows}};
}

void write_distribution_image(const std::filesystem::path &path,
                              const HeightDistribution &dist, int scale) {
  const auto fr = dist.finalize();
  Raster<std::uint8_t> img(dist.bins() * scale, dist.classes() * scale, 0);
  for (int c = 0; c < dist.classes(); ++c)
    for (int b = 0; b < dist.bins(); ++b) {
      const auto v = static_cast<std::uint8_t>(std::lround(fr[c][b] * 255.0));
      for (int y = 0; y < scale; ++y)
        for (int x = 0; x < scale; ++x)
          img(b * scale + x, c * scale + y) = v;
    }
  png::write_gray8(path, img);
}

} // namespace hnl
