#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hnlabel/raster.hpp"

namespace hnl {

// Class x height-bin point counts. Normalisation is deferred to finalize() so
// partial results merge exactly.
class HeightDistribution {
public:
  HeightDistribution() = default;
  HeightDistribution(int classes, int bins, int ignore_label = 255);

  int classes() const { return classes_; }
  int bins() const { return bins_; }
  int ignore_label() const { return ignore_; }
  std::uint64_t count(int cls, int bin) const;
  std::uint64_t class_total(int cls) const;
  const std::vector<std::uint64_t> &counts() const { return counts_; }

  // Counts every pixel where both rasters carry a non-ignore value.
  void accumulate(const LabelRaster &semantic, const LabelRaster &height_bins);
  void merge(const HeightDistribution &other);

  // Row-stochastic fractions; rows of absent classes are all zero.
  std::vector<std::vector<double>> finalize() const;

  bool operator==(const HeightDistribution &) const = default;

private:
  int classes_ = 0;
  int bins_ = 0;
  int ignore_ = 255;
  std::vector<std::uint64_t> counts_;
};

HeightDistribution merge(const HeightDistribution &a,
                         const HeightDistribution &b);

// Height-bin raster from an HN label raster (h-major layout).
LabelRaster height_bins_from_labels(const LabelRaster &hn, int n_n,
                                    int ignore_label = 255);

nlohmann::json to_json(const HeightDistribution &dist);
// Class rows x bin columns, each cell `scale` pixels, white = 1.0.
void write_distribution_image(const std::filesystem::path &path,
                              const HeightDistribution &dist, int scale = 16);

} // namespace hnl
