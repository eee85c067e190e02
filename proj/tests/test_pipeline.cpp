#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "support.hpp"

using namespace hnl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

SynthConfig small_synth(const fs::path &out, double noise = 0.0) {
  SynthConfig s;
  s.output_dir = out;
  s.scenes = 3;
  s.poses_per_scene = 2;
  s.seed = 17;
  s.noise_sigma = noise;
  s.intrinsics = test::small_intrinsics(160, 120);
  return s;
}

RunConfig labelgen_config(const fs::path &data, const fs::path &out) {
  RunConfig c;
  c.manifest = data / "manifest.txt";
  c.output_dir = out;
  return c;
}

std::map<std::string, std::string> tree_bytes(const fs::path &root,
                                              const std::set<std::string> &skip) {
  std::map<std::string, std::string> out;
  for (const auto &e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) {
      const std::string rel = fs::relative(e.path(), root).string();
      if (!skip.contains(rel))
        out[rel] = test::read_bytes(e.path());
    }
  return out;
}

std::vector<std::string> lines_of(const fs::path &p) {
  std::istringstream in(test::read_bytes(p));
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);)
    if (!l.empty())
      out.push_back(l);
  return out;
}

// Adds a frame showing only a fronto-parallel wall, which has no floor.
void add_wall_frame(const fs::path &data) {
  const auto k = test::small_intrinsics(160, 120);
  save_depth(data / "depth" / "wall.png",
             depth_from_meters(Raster<double>(k.width, k.height, 2.0), k));
  std::ofstream(data / "manifest.txt", std::ios::app)
      << "wall depth/wall.png - synthetic scene9999\n";
}

} // namespace

TEST_CASE("run config json round trips and rejects unknown keys") {
  RunConfig c;
  c.manifest = "m.txt";
  c.output_dir = "out";
  c.workers = 3;
  c.sample = 7;
  c.target_size = Size2{60, 80};
  c.labels.n_h = 8;
  c.params.normals.method = NormalMethod::Covariance;
  c.params.normals.edge_aware = false;
  c.params.gravity.max_tilt_deg = 50;
  c.params.floor.percentile = 0.02;
  c.params.surface_points = false;
  const json j = to_json(c);
  RunConfig d;
  apply_json(d, j);
  CHECK(to_json(d) == j);
  CHECK(d.target_size->width == 80);

  RunConfig e;
  apply_json(e, json{{"workers", 5}, {"labels", {{"n_n", 3}}}});
  CHECK(e.workers == 5);
  CHECK(e.labels.n_n == 3);
  CHECK(e.labels.n_h == 10);
  CHECK_THROWS_WITH_AS(apply_json(e, json{{"wokers", 2}}),
                       doctest::Contains("wokers"), Error);
  CHECK_THROWS_WITH_AS(apply_json(e, json{{"normals", {{"radius", 2}}}}),
                       doctest::Contains("normals.radius"), Error);
  CHECK_THROWS_AS(apply_json(e, json{{"normals", {{"method", "sobel"}}}}), Error);
  CHECK_THROWS_AS(apply_json(e, json::array()), Error);
  CHECK_THROWS_AS(apply_json(e, json{{"workers", "many"}}), Error);
}

TEST_CASE("run config validation") {
  RunConfig c;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("manifest"), Error);
  c.manifest = "a/m.txt";
  CHECK_THROWS_AS(c.validate(), Error);
  c.output_dir = "o";
  c.validate();
  CHECK(c.intrinsics_path() == fs::path("a/intrinsics.json"));
  c.workers = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("parallel_for visits every index once and forwards errors") {
  for (int workers : {1, 3, 8}) {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), workers, [&](std::size_t i) { ++hits[i]; });
    CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
    CHECK_THROWS_WITH(parallel_for(50, workers,
                                   [](std::size_t i) {
                                     if (i == 20)
                                       throw Error("boom");
                                   }),
                      "boom");
  }
  CHECK_THROWS_AS(parallel_for(1, 0, [](std::size_t) {}), Error);
}

TEST_CASE("synth writes a complete, reproducible dataset") {
  test::TempDir a("synth_a"), b("synth_b");
  auto cfg = small_synth(a.path(), 0.01);
  CHECK(run_synth(cfg) == 6);
  cfg.output_dir = b.path();
  cfg.workers = 4;
  run_synth(cfg);
  CHECK(tree_bytes(a.path(), {}) == tree_bytes(b.path(), {}));

  const auto m = load_manifest(a / "manifest.txt", a / "intrinsics.json");
  REQUIRE(m.size() == 6);
  CHECK(m.frames()[0].frame_id == "scene0000_pose00");
  CHECK(m.frames()[5].scene_id == "scene0002");
  for (const auto &r : m.frames()) {
    for (const char *sub : {"depth", "color", "semantic", "gt_hn"})
      CHECK(fs::exists(a.path() / sub / (r.frame_id + ".png")));
    CHECK(fs::exists(a.path() / "scenes" / (r.scene_id + ".json")));
  }
  const auto poses = lines_of(a / "poses.jsonl");
  REQUIRE(poses.size() == 6);
  CHECK(json::parse(poses[3])["frame_id"] == "scene0001_pose01");
  CHECK(m.intrinsics_for(m.frames()[0]).width == 160);
}

TEST_CASE("labelgen writes labels, sidecars and logs") {
  test::TempDir data("lg_data"), out("lg_out");
  run_synth(small_synth(data.path()));
  add_wall_frame(data.path());
  auto cfg = labelgen_config(data.path(), out.path());
  cfg.write_color = true;
  const RunReport r = run_labelgen(cfg);
  CHECK(r.processed == 7);
  CHECK(r.accepted == 6);
  CHECK(r.rejected == 1);
  CHECK(r.failed == 0);
  REQUIRE(r.rejected_frames.size() == 1);
  CHECK(r.rejected_frames[0].frame_id == "wall");

  const auto rejected = lines_of(out / "rejected.jsonl");
  REQUIRE(rejected.size() == 1);
  CHECK(json::parse(rejected[0])["frame_id"] == "wall");
  CHECK(lines_of(out / "failures.jsonl").empty());
  CHECK_FALSE(fs::exists(out.path() / "labels" / "wall.png"));

  std::ifstream rin(out / "report.json");
  const json report = json::parse(rin);
  CHECK(report["accepted"] == 6);
  CHECK(report.contains("wall_time_s"));

  const HNLabelConfig lc;
  for (const auto &id : {"scene0000_pose00", "scene0002_pose01"}) {
    CHECK(frame_outputs_complete(out.path(), id));
    const auto labels = png::read_gray8(out.path() / "labels" / (std::string(id) + ".png"));
    CHECK(labels.width() == 160);
    for (auto v : labels.pixels())
      REQUIRE((v < lc.label_count() || v == lc.ignore_label));
    std::ifstream in(out.path() / "labels" / (std::string(id) + ".json"));
    const json side = json::parse(in);
    CHECK(side["frame_id"] == id);
    CHECK(side["label_layout"] == "h_major:n_n=2");
    CHECK(side["config"].get<HNLabelConfig>() == lc);
    CHECK(side["accepted"] == true);
    CHECK(side["orientation"]["accepted"] == true);
    CHECK(fs::exists(out.path() / "labels" / (std::string(id) + "_color.png")));
  }
}

TEST_CASE("labelgen output does not depend on the worker count") {
  test::TempDir data("det_data"), one("det_1"), many("det_4");
  run_synth(small_synth(data.path(), 0.01));
  add_wall_frame(data.path());
  auto cfg = labelgen_config(data.path(), one.path());
  run_labelgen(cfg);
  cfg.output_dir = many.path();
  cfg.workers = 4;
  run_labelgen(cfg);
  const auto a = tree_bytes(one.path(), {"report.json"});
  CHECK(a.size() == 2 * 6 + 2);
  CHECK(a == tree_bytes(many.path(), {"report.json"}));
}

TEST_CASE("an empty manifest is a successful empty run") {
  test::TempDir data("empty_data"), out("empty_out");
  run_synth(small_synth(data.path()));
  std::ofstream(data.path() / "manifest.txt") << "# frame_id depth color intrinsics scene\n";
  const RunReport r = run_labelgen(labelgen_config(data.path(), out.path()));
  CHECK(r.processed == 0);
  CHECK(r.accepted == 0);
  CHECK(r.rejected == 0);
  CHECK(r.failed == 0);
  CHECK(fs::exists(out / "report.json"));
}

TEST_CASE("missing inputs are failures, not crashes") {
  test::TempDir data("fail_data"), out("fail_out");
  run_synth(small_synth(data.path()));
  fs::remove(data.path() / "depth" / "scene0001_pose00.png");
  const RunReport r = run_labelgen(labelgen_config(data.path(), out.path()));
  CHECK(r.failed == 1);
  CHECK(r.accepted == 5);
  const auto f = lines_of(out / "failures.jsonl");
  REQUIRE(f.size() == 1);
  const json j = json::parse(f[0]);
  CHECK(j["frame_id"] == "scene0001_pose00");
  CHECK(j["error"].get<std::string>().find("missing file") != std::string::npos);
}

TEST_CASE("resume skips completed frames and redoes partial ones") {
  test::TempDir data("res_data"), out("res_out");
  run_synth(small_synth(data.path()));
  auto cfg = labelgen_config(data.path(), out.path());
  run_labelgen(cfg);
  const auto before = tree_bytes(out.path(), {"report.json"});

  // A frame interrupted before its sidecar was written.
  fs::remove(out.path() / "labels" / "scene0001_pose01.json");
  CHECK_FALSE(frame_outputs_complete(out.path(), "scene0001_pose01"));
  // A sidecar that lost its completion marker.
  std::ofstream(out.path() / "labels" / "scene0002_pose00.json")
      << json{{"frame_id", "scene0002_pose00"}}.dump();
  CHECK_FALSE(frame_outputs_complete(out.path(), "scene0002_pose00"));

  cfg.resume = true;
  const RunReport r = run_labelgen(cfg);
  CHECK(r.accepted == 6);
  CHECK(r.resumed == 4);
  CHECK(tree_bytes(out.path(), {"report.json"}) == before);
}

TEST_CASE("sampling and resizing options") {
  test::TempDir data("opt_data"), out("opt_out");
  run_synth(small_synth(data.path()));
  auto cfg = labelgen_config(data.path(), out.path());
  cfg.sample = 3;
  cfg.target_size = Size2{60, 80};
  const RunReport r = run_labelgen(cfg);
  CHECK(r.processed == 3);
  std::set<std::string> scenes;
  for (const auto &e : fs::directory_iterator(out.path() / "labels"))
    if (e.path().extension() == ".png") {
      const auto l = png::read_gray8(e.path());
      CHECK(l.width() == 80);
      CHECK(l.height() == 60);
      scenes.insert(e.path().stem().string().substr(0, 9));
    }
  CHECK(scenes.size() == 3);
}

TEST_CASE("stats over a labelgen run") {
  test::TempDir data("st_data"), out("st_out");
  run_synth(small_synth(data.path()));
  run_labelgen(labelgen_config(data.path(), out.path()));
  StatsConfig sc;
  sc.labels_dir = out.path();
  sc.semantic_dir = data.path() / "semantic";
  sc.classes = synth::kClassCount;
  const HeightDistribution d = run_stats(sc);
  CHECK(d.bins() == 10);
  const auto fr = d.finalize();
  CHECK(d.class_total(synth::kFloor) > 0);
  CHECK(fr[synth::kFloor][0] > 0.999);
  CHECK(d.class_total(synth::kCeiling) + d.class_total(synth::kWall) > 0);
  sc.workers = 3;
  CHECK(run_stats(sc) == d);

  std::ofstream(out.path() / "labels" / "scene0000_pose00.json") << "{}";
  CHECK_THROWS_WITH_AS(run_stats(sc), doctest::Contains("incomplete"), Error);
  sc.labels_dir = data.path();
  CHECK_THROWS_AS(run_stats(sc), Error);
}

TEST_CASE("eval matches brute-force counting") {
  test::TempDir gt("ev_gt"), pred("ev_pred");
  std::mt19937_64 rng(23);
  std::uint64_t agree = 0, counted = 0;
  for (int f = 0; f < 4; ++f) {
    const auto g = test::random_labels(rng, 13, 9, 3, 0.2);
    auto p = test::random_labels(rng, 13, 9, 3);
    const std::string name = "f" + std::to_string(f) + ".png";
    png::write_gray8(gt / name, g);
    png::write_gray8(pred / name, p);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g[i] != 255) {
        ++counted;
        agree += g[i] == p[i];
      }
  }
  const ConfusionMatrix cm = run_eval(gt.path(), pred.path(), 3, 255, 2);
  CHECK(cm.total() == counted);
  CHECK(global_accuracy(cm) == doctest::Approx(double(agree) / counted));

  const ConfusionMatrix self = run_eval(gt.path(), gt.path(), 3);
  CHECK(global_accuracy(self) == 1.0);
  CHECK(class_avg_accuracy(self) == 1.0);
  CHECK(mean_iou(self) == 1.0);

  fs::remove(pred.path() / "f2.png");
  CHECK_THROWS_WITH_AS(run_eval(gt.path(), pred.path(), 3),
                       doctest::Contains("missing prediction"), Error);
  CHECK_THROWS_AS(run_eval(gt / "nope", pred.path(), 3), Error);
}

TEST_CASE("labelgen output evaluates against the synthetic ground truth") {
  test::TempDir data("gt_data"), out("gt_out");
  run_synth(small_synth(data.path()));
  run_labelgen(labelgen_config(data.path(), out.path()));
  const ConfusionMatrix cm =
      run_eval(data.path() / "gt_hn", out.path() / "labels", 20);
  CHECK(cm.total() > 6 * 160 * 120 * 0.9);
  CHECK(global_accuracy(cm) > 0.99);
}
