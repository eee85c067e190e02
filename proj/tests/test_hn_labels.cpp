#include <set>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "support.hpp"

using namespace hnl;

namespace {

// Independent binning oracle: count the interior edges at or below the value.
int scan_bin(double x, const std::vector<double> &interior_edges) {
  int k = 0;
  for (double e : interior_edges)
    k += x >= e ? 1 : 0;
  return k;
}

} // namespace

TEST_CASE("height edges are uniform over the range") {
  const HNLabelConfig cfg;
  for (int k = 0; k <= cfg.n_h; ++k)
    CHECK(cfg.height_edge(k) == doctest::Approx(0.3 * k));
  CHECK(cfg.normal_edge(1) == 45.0);
  CHECK(cfg.label_count() == 20);
  CHECK(cfg.layout() == "h_major:n_n=2");
}

TEST_CASE("height bins are lower-inclusive and clamped") {
  const HNLabelConfig cfg;
  CHECK(bin_height(-2.0, cfg) == 0);
  CHECK(bin_height(0.0, cfg) == 0);
  CHECK(bin_height(0.2999999, cfg) == 0);
  CHECK(bin_height(cfg.height_edge(1), cfg) == 1);
  CHECK(bin_height(1.5, cfg) == 5);
  CHECK(bin_height(cfg.height_edge(9), cfg) == 9);
  CHECK(bin_height(3.0, cfg) == 9);
  CHECK(bin_height(40.0, cfg) == 9);
}

TEST_CASE("height binning agrees with a linear scan") {
  std::mt19937_64 rng(5);
  for (const auto &[lo, hi, nh] :
       {std::tuple{0.0, 3.0, 10}, std::tuple{-0.5, 2.0, 7}, std::tuple{0.0, 1.0, 1}}) {
    HNLabelConfig cfg;
    cfg.height_min = lo;
    cfg.height_max = hi;
    cfg.n_h = nh;
    std::vector<double> edges;
    for (int k = 1; k < nh; ++k)
      edges.push_back(cfg.height_edge(k));
    std::uniform_real_distribution<double> u(lo - 1, hi + 1);
    for (int i = 0; i < 100000; ++i) {
      const double h = u(rng);
      REQUIRE(bin_height(h, cfg) == scan_bin(h, edges));
    }
    for (double e : edges) {
      REQUIRE(bin_height(e, cfg) == scan_bin(e, edges));
      const double below = std::nextafter(e, -1e9);
      REQUIRE(bin_height(below, cfg) == scan_bin(below, edges));
    }
  }
}

TEST_CASE("normal bins split at the configured angle") {
  HNLabelConfig cfg;
  CHECK(bin_normal(0.0, cfg) == 0);
  CHECK(bin_normal(std::nextafter(45.0, 0.0), cfg) == 0);
  CHECK(bin_normal(45.0, cfg) == 1);
  CHECK(bin_normal(90.0, cfg) == 1);
  cfg.normal_split_angle = 30;
  CHECK(bin_normal(31, cfg) == 1);
  cfg.n_n = 3;
  CHECK(bin_normal(29.9, cfg) == 0);
  CHECK(bin_normal(30.0, cfg) == 1);
  CHECK(bin_normal(60.0, cfg) == 2);
  CHECK(bin_normal(90.0, cfg) == 2);
  cfg.n_n = 1;
  CHECK(bin_normal(70.0, cfg) == 0);
}

TEST_CASE("labels compose height-major and cover the label range") {
  HNLabelConfig cfg;
  CHECK(compose_label(0, 0, cfg) == 0);
  CHECK(compose_label(0, 1, cfg) == 1);
  CHECK(compose_label(3, 1, cfg) == 7);
  CHECK(compose_label(9, 1, cfg) == 19);
  CHECK_THROWS_AS(compose_label(10, 0, cfg), Error);
  CHECK_THROWS_AS(compose_label(0, 2, cfg), Error);
  std::set<int> seen;
  for (int h = 0; h < cfg.n_h; ++h)
    for (int n = 0; n < cfg.n_n; ++n)
      seen.insert(compose_label(h, n, cfg));
  CHECK(seen.size() == 20);
  CHECK(*seen.rbegin() == 19);
}

TEST_CASE("normal angle is sign invariant and spans [0, 90]") {
  CHECK(compute_normal_angle({0, 1, 0}) == 0.0);
  CHECK(compute_normal_angle({0, -1, 0}) == 0.0);
  CHECK(compute_normal_angle({1, 0, 0}) == doctest::Approx(90.0));
  const Eigen::Vector3d n = Eigen::Vector3d(1, 1, 0).normalized();
  CHECK(compute_normal_angle(n) == doctest::Approx(45.0));
  CHECK(compute_normal_angle(-n) == doctest::Approx(45.0));
  CHECK(compute_height({0, 1.25, 3}, -0.5) == doctest::Approx(1.75));
}

TEST_CASE("label config validation and json round trip") {
  HNLabelConfig cfg;
  cfg.validate();
  HNLabelConfig bad = cfg;
  bad.height_max = bad.height_min;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.ignore_label = 10;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.n_n = 0;
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = cfg;
  bad.normal_split_angle = 90;
  CHECK_THROWS_AS(bad.validate(), Error);

  HNLabelConfig other;
  other.n_h = 6;
  other.height_max = 2.4;
  other.ignore_label = 200;
  const nlohmann::json j = other;
  CHECK(j.get<HNLabelConfig>() == other);
  CHECK(nlohmann::json::object().get<HNLabelConfig>() == HNLabelConfig{});
}

TEST_CASE("rendered frames label like the analytic oracle") {
  const HNLabelConfig cfg;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto scene = synth::random_scene(seed);
    const auto pose =
        synth::random_pose(scene, seed, test::small_intrinsics(192, 144));
    const auto f = synth::render_depth(scene, pose, cfg);
    const LabelResult r = generate_labels(f.depth, cfg);
    REQUIRE(r.floor.accepted);
    CHECK(std::abs(r.floor.floor_height + pose.position.y()) < 1e-3);
    std::size_t labeled = 0, agree = 0, valid = 0;
    for (std::size_t i = 0; i < f.hn_labels.size(); ++i) {
      const int l = r.labels[i];
      REQUIRE((l < cfg.label_count() || l == cfg.ignore_label));
      if (!f.depth.valid[i]) {
        REQUIRE(l == cfg.ignore_label);
        continue;
      }
      ++valid;
      if (l == cfg.ignore_label)
        continue;
      ++labeled;
      agree += l == f.hn_labels[i] ? 1 : 0;
    }
    CHECK(labeled > 0.9 * valid);
    CHECK(agree > 0.995 * labeled);
  }
}

TEST_CASE("rejected frames are all ignore") {
  const HNLabelConfig cfg;
  const auto k = test::small_intrinsics(40, 30);
  Raster<double> z(40, 30, 0.0);
  z(5, 5) = 1.0;
  const LabelResult r = generate_labels(depth_from_meters(z, k), cfg);
  CHECK_FALSE(r.floor.accepted);
  CHECK_FALSE(r.floor.reason.empty());
  for (auto v : r.labels.pixels())
    REQUIRE(v == cfg.ignore_label);
}

TEST_CASE("colorized labels use one colour per class") {
  const HNLabelConfig cfg;
  LabelRaster l(21, 1, 0);
  for (int i = 0; i < 20; ++i)
    l(i, 0) = static_cast<std::uint8_t>(i);
  l(20, 0) = 255;
  const Raster<Rgb> c = colorize_labels(l, cfg);
  std::set<std::tuple<int, int, int>> colours;
  for (auto p : c.pixels())
    colours.insert({p.r, p.g, p.b});
  CHECK(colours.size() == 21);
  CHECK(c(20, 0) == Rgb{0, 0, 0});
}
