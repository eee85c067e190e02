#include <nlohmann/json.hpp>

#include "doctest.h"
#include "support.hpp"

using namespace hnl;

namespace {

// gt \ pred   0  1  2
//   0         5  1  0
//   1         2  3  1
//   2         0  0  0
ConfusionMatrix hand_matrix() {
  ConfusionMatrix cm(3);
  cm.add(0, 0, 5);
  cm.add(0, 1, 1);
  cm.add(1, 0, 2);
  cm.add(1, 1, 3);
  cm.add(1, 2, 1);
  return cm;
}

} // namespace

TEST_CASE("metrics on a hand-computed matrix") {
  const ConfusionMatrix cm = hand_matrix();
  CHECK(cm.total() == 12);
  CHECK(global_accuracy(cm) == doctest::Approx(8.0 / 12));
  CHECK(*class_accuracy(cm, 0) == doctest::Approx(5.0 / 6));
  CHECK(*class_accuracy(cm, 1) == doctest::Approx(0.5));
  CHECK_FALSE(class_accuracy(cm, 2).has_value());
  CHECK(class_avg_accuracy(cm) == doctest::Approx((5.0 / 6 + 0.5) / 2));
  CHECK(*class_iou(cm, 0) == doctest::Approx(5.0 / 8));
  CHECK(*class_iou(cm, 1) == doctest::Approx(3.0 / 7));
  CHECK(*class_iou(cm, 2) == 0.0);
  CHECK(mean_iou(cm) == doctest::Approx((5.0 / 8 + 3.0 / 7) / 3));
}

TEST_CASE("classes absent from both sides are left out of the means") {
  ConfusionMatrix cm(4);
  cm.add(0, 0, 3);
  cm.add(2, 2, 1);
  cm.add(2, 0, 1);
  CHECK_FALSE(class_iou(cm, 1).has_value());
  CHECK(mean_iou(cm) == doctest::Approx((3.0 / 4 + 1.0 / 2) / 2));
  CHECK(class_avg_accuracy(cm) == doctest::Approx((1.0 + 0.5) / 2));
}

TEST_CASE("rasters update the matrix and skip ignored ground truth") {
  LabelRaster gt(3, 2, 0), pred(3, 2, 0);
  gt(0, 0) = 0; pred(0, 0) = 0;
  gt(1, 0) = 1; pred(1, 0) = 0;
  gt(2, 0) = 255; pred(2, 0) = 1;
  gt(0, 1) = 1; pred(0, 1) = 1;
  gt(1, 1) = 1; pred(1, 1) = 1;
  gt(2, 1) = 0; pred(2, 1) = 1;
  ConfusionMatrix cm(2);
  cm.update(gt, pred);
  CHECK(cm.total() == 5);
  pred(0, 0) = 255;
  ConfusionMatrix skipped(2);
  skipped.update(gt, pred);
  CHECK(skipped.total() == 4);
  CHECK(skipped.at(0, 0) == 0);
  CHECK(cm.at(0, 0) == 1);
  CHECK(cm.at(0, 1) == 1);
  CHECK(cm.at(1, 0) == 1);
  CHECK(cm.at(1, 1) == 2);
  CHECK(cm.row_sum(1) == 3);
  CHECK(cm.col_sum(1) == 3);
}

TEST_CASE("invalid inputs are reported") {
  ConfusionMatrix cm(2);
  CHECK_THROWS_WITH_AS(global_accuracy(cm), doctest::Contains("empty"), Error);
  CHECK_THROWS_AS(cm.add(2, 0), Error);
  LabelRaster gt(2, 1, 0), pred(2, 1, 0);
  pred(1, 0) = 7;
  CHECK_THROWS_AS(cm.update(gt, pred), Error);
  CHECK_THROWS_AS(cm.update(gt, LabelRaster(3, 1, 0)), Error);
  CHECK_THROWS_AS(cm.merge(ConfusionMatrix(3)), Error);
  CHECK_THROWS_AS(ConfusionMatrix(0), Error);
}

TEST_CASE("merged per-frame matrices equal a single pass") {
  std::mt19937_64 rng(8);
  ConfusionMatrix single(20), merged(20);
  std::uint64_t agree = 0, counted = 0;
  for (int f = 0; f < 25; ++f) {
    const LabelRaster gt = test::random_labels(rng, 31, 17, 20, 0.2);
    LabelRaster pred = test::random_labels(rng, 31, 17, 20);
    for (std::size_t i = 0; i < gt.size(); ++i)
      if (gt[i] != 255 && rng() % 2)
        pred[i] = gt[i];
    ConfusionMatrix one(20);
    one.update(gt, pred);
    merged.merge(one);
    single.update(gt, pred);
    for (std::size_t i = 0; i < gt.size(); ++i)
      if (gt[i] != 255) {
        ++counted;
        agree += gt[i] == pred[i] ? 1 : 0;
      }
  }
  CHECK(merged == single);
  CHECK(single.total() == counted);
  CHECK(global_accuracy(single) ==
        doctest::Approx(static_cast<double>(agree) / counted).epsilon(1e-15));
}

TEST_CASE("metrics report lists present classes") {
  const nlohmann::json j = metrics_report(hand_matrix());
  CHECK(j["pixels"] == 12);
  CHECK(j["classes"] == 3);
  CHECK(j["global_accuracy"].get<double>() == doctest::Approx(8.0 / 12));
  REQUIRE(j["per_class"].size() == 3);
  CHECK(j["per_class"][2]["accuracy"].is_null());
  CHECK(j["per_class"][2]["iou"] == 0.0);
  CHECK(j["per_class"][1]["gt_pixels"] == 6);
  for (const char *k : {"class_average_accuracy", "mean_iou"})
    CHECK(j.contains(k));
}
