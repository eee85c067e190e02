#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hnlabel/raster.hpp"

namespace hnl {

// Rows are ground truth, columns prediction.
class ConfusionMatrix {
public:
  ConfusionMatrix() = default;
  explicit ConfusionMatrix(int classes, int ignore_label = 255);

  int classes() const { return classes_; }
  std::uint64_t at(int gt, int pred) const;
  std::uint64_t total() const;
  std::uint64_t row_sum(int c) const;
  std::uint64_t col_sum(int c) const;

  // Pixels where either raster holds ignore_label are skipped; any other
  // value outside [0, classes) is an error.
  void update(const LabelRaster &gt, const LabelRaster &pred);
  void add(int gt, int pred, std::uint64_t n = 1);
  void merge(const ConfusionMatrix &other);

  bool operator==(const ConfusionMatrix &) const = default;

private:
  int classes_ = 0;
  int ignore_ = 255;
  std::vector<std::uint64_t> counts_;
};

double global_accuracy(const ConfusionMatrix &cm);
// Mean over classes with ground-truth pixels.
double class_avg_accuracy(const ConfusionMatrix &cm);
// Mean over classes present in ground truth or prediction.
double mean_iou(const ConfusionMatrix &cm);

std::optional<double> class_accuracy(const ConfusionMatrix &cm, int c);
std::optional<double> class_iou(const ConfusionMatrix &cm, int c);

nlohmann::json metrics_report(const ConfusionMatrix &cm);

} // namespace hnl
