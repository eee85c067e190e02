#include <nlohmann/json.hpp>

#include "doctest.h"
#include "support.hpp"

using namespace hnl;

TEST_CASE("counts follow a hand example") {
  LabelRaster sem(4, 1, 0), bins(4, 1, 0);
  sem(0, 0) = 1; bins(0, 0) = 0;
  sem(1, 0) = 1; bins(1, 0) = 2;
  sem(2, 0) = 1; bins(2, 0) = 2;
  sem(3, 0) = 255; bins(3, 0) = 1;
  HeightDistribution d(3, 3);
  d.accumulate(sem, bins);
  CHECK(d.count(1, 0) == 1);
  CHECK(d.count(1, 2) == 2);
  CHECK(d.class_total(1) == 3);
  CHECK(d.class_total(0) == 0);
  const auto fr = d.finalize();
  CHECK(fr[1][0] == doctest::Approx(1.0 / 3));
  CHECK(fr[1][2] == doctest::Approx(2.0 / 3));
  CHECK(fr[0] == std::vector<double>(3, 0.0));
}

TEST_CASE("ignored height bins are skipped and out-of-range values rejected") {
  LabelRaster sem(2, 1, 1), bins(2, 1, 255);
  HeightDistribution d(2, 3);
  d.accumulate(sem, bins);
  CHECK(d.class_total(1) == 0);
  bins(0, 0) = 3;
  CHECK_THROWS_AS(d.accumulate(sem, bins), Error);
  CHECK_THROWS_AS(d.accumulate(sem, LabelRaster(3, 1, 0)), Error);
  CHECK_THROWS_AS(d.merge(HeightDistribution(2, 4)), Error);
}

TEST_CASE("finalized rows are stochastic and merging is exact") {
  std::mt19937_64 rng(4);
  HeightDistribution single(41, 10), merged(41, 10);
  for (int f = 0; f < 30; ++f) {
    const LabelRaster sem = test::random_labels(rng, 23, 19, 41, 0.1);
    const LabelRaster bins = test::random_labels(rng, 23, 19, 10, 0.15);
    HeightDistribution one(41, 10);
    one.accumulate(sem, bins);
    merged = merge(merged, one);
    single.accumulate(sem, bins);
  }
  CHECK(merged == single);
  const auto fr = single.finalize();
  for (int c = 0; c < 41; ++c) {
    double s = 0;
    for (double x : fr[c]) {
      REQUIRE(x >= 0);
      s += x;
    }
    REQUIRE(s == doctest::Approx(single.class_total(c) ? 1.0 : 0.0));
  }
}

TEST_CASE("height bins come from the h-major layout") {
  LabelRaster hn(5, 1, 0);
  hn(0, 0) = 0;
  hn(1, 0) = 1;
  hn(2, 0) = 7;
  hn(3, 0) = 19;
  hn(4, 0) = 255;
  const LabelRaster b = height_bins_from_labels(hn, 2);
  CHECK(b(0, 0) == 0);
  CHECK(b(1, 0) == 0);
  CHECK(b(2, 0) == 3);
  CHECK(b(3, 0) == 9);
  CHECK(b(4, 0) == 255);
  CHECK_THROWS_AS(height_bins_from_labels(hn, 0), Error);
}

TEST_CASE("distribution json and image") {
  HeightDistribution d(3, 2);
  LabelRaster sem(2, 1, 2), bins(2, 1, 1);
  d.accumulate(sem, bins);
  const nlohmann::json j = to_json(d);
  CHECK(j["classes"] == 3);
  CHECK(j["bins"] == 2);
  REQUIRE(j["rows"].size() == 1);
  CHECK(j["rows"][0]["class"] == 2);
  CHECK(j["rows"][0]["points"] == 2);
  CHECK(j["rows"][0]["fractions"] == nlohmann::json::array({0.0, 1.0}));

  test::TempDir dir("dist");
  write_distribution_image(dir / "d.png", d, 4);
  const auto img = png::read_gray8(dir / "d.png");
  CHECK(img.width() == 8);
  CHECK(img.height() == 12);
  CHECK(img(5, 9) == 255);
  CHECK(img(1, 9) == 0);
  CHECK(img(5, 1) == 0);
}
