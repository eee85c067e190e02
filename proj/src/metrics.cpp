#include "hnlabel/metrics.hpp"

#include <nlohmann/json.hpp>

namespace hnl {

ConfusionMatrix::ConfusionMatrix(int classes, int ignore_label)
    : classes_(classes), ignore_(ignore_label) {
  if (classes <= 0)
    throw Error("confusion matrix needs at least one class");
  counts_.assign(static_cast<std::size_t>(classes) * classes, 0);
}

std::uint64_t ConfusionMatrix::at(int gt, int pred) const {
  return counts_.at(static_cast<std::size_t>(gt) * classes_ + pred);
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_)
    t += c;
  return t;
}

std::uint64_t ConfusionMatrix::row_sum(int c) const {
  std::uint64_t t = 0;
  for (int j = 0; j < classes_; ++j)
    t += at(c, j);
  return t;
}

std::uint64_t ConfusionMatrix::col_sum(int c) const {
  std::uint64_t t = 0;
  for (int i = 0; i < classes_; ++i)
    t += at(i, c);
  return t;
}

void ConfusionMatrix::add(int gt, int pred, std::uint64_t n) {
  if (gt < 0 || gt >= classes_ || pred < 0 || pred >= classes_)
    throw Error("confusion matrix: label pair (" + std::to_string(gt) + ", " +
                std::to_string(pred) + ") out of range for " +
                std::to_string(classes_) + " classes");
  counts_[static_cast<std::size_t>(gt) * classes_ + pred] += n;
}

void ConfusionMatrix::update(const LabelRaster &gt, const LabelRaster &pred) {
  if (!gt.same_shape(pred))
    throw Error("confusion matrix: ground truth and prediction differ in size");
  for (std::size_t i = 0; i < gt.size(); ++i) {
    if (gt[i] == ignore_ || pred[i] == ignore_)
      continue;
    add(gt[i], pred[i]);
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix &other) {
  if (other.classes_ != classes_)
    throw Error("confusion matrix: cannot merge different class counts");
  for (std::size_t i = 0; i < counts_.size(); ++i)
    counts_[i] += other.counts_[i];
}

namespace {
void require_nonempty(const ConfusionMatrix &cm) {
  if (cm.total() == 0)
    throw Error("metrics: empty confusion matrix");
}
} // namespace

double global_accuracy(const ConfusionMatrix &cm) {
  require_nonempty(cm);
  std::uint64_t diag = 0;
  for (int c = 0; c < cm.classes(); ++c)
    diag += cm.at(c, c);
  return static_cast<double>(diag) / static_cast<double>(cm.total());
}

std::optional<double> class_accuracy(const ConfusionMatrix &cm, int c) {
  const auto row = cm.row_sum(c);
  if (row == 0)
    return std::nullopt;
  return static_cast<double>(cm.at(c, c)) / static_cast<double>(row);
}

std::optional<double> class_iou(const ConfusionMatrix &cm, int c) {
  const auto uni = cm.row_sum(c) + cm.col_sum(c) - cm.at(c, c);
  if (uni == 0)
    return std::nullopt;
  return static_cast<double>(cm.at(c, c)) / static_cast<double>(uni);
}

double class_avg_accuracy(const ConfusionMatrix &cm) {
  require_nonempty(cm);
  double sum = 0;
  int n = 0;
  for (int c = 0; c < cm.classes(); ++c)
    if (auto a = class_accuracy(cm, c)) {
      sum += *a;
      ++n;
    }
  return sum / n;
}

double mean_iou(const ConfusionMatrix &cm) {
  require_nonempty(cm);
  double sum = 0;
  int n = 0;
  for (int c = 0; c < cm.classes(); ++c)
    if (auto a = class_iou(cm, c)) {
      sum += *a;
      ++n;
    }
  return sum / n;
}

nlohmann::json metrics_report(const ConfusionMatrix &cm) {
  nlohmann::json per_class = nlohmann::json::array();
  for (int c = 0; c < cm.classes(); ++c) {
    const auto acc = class_accuracy(cm, c);
    const auto iou = class_iou(cm, c);
    if (!acc && !iou)
      continue;
    per_class.push_back({{"class", c},
                         {"accuracy", acc ? nlohmann::json(*acc) : nlohmann::json(nullptr)},
                         {"iou", iou ? nlohmann::json(*iou) : nlohmann::json(nullptr)},
                         {"gt_pixels", cm.row_sum(c)}});
  }
  return {{"global_accuracy", global_accuracy(cm)},
          {"class_average_accuracy", class_avg_accuracy(cm)},
          {"mean_iou", mean_iou(cm)},
          {"pixels", cm.total()},
          {"classes", cm.classes()},
          {"per_class", per_class}};
}

} // namespace hnl
