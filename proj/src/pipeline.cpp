#include "hnlabel/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "hnlabel/png_io.hpp"
#include "hnlabel/synthetic.hpp"

namespace hnl {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Overlay helper: copies j[key] into `field` when present.
template <typename T> void take(const json &j, const char *key, T &field) {
  if (auto it = j.find(key); it != j.end())
    field = it->get<T>();
}

void reject_unknown(const json &j, std::initializer_list<const char *> keys,
                    const std::string &where) {
  std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.contains(it.key()))
      throw Error("config: unknown key '" + where + it.key() + "'");
}

json normals_json(const NormalParams &p) {
  return {{"method", to_string(p.method)},
          {"window", p.window},
          {"depth_jump", p.depth_jump},
          {"max_curvature", p.max_curvature},
          {"min_neighbors", p.min_neighbors},
          {"max_incidence_deg", p.max_incidence_deg},
          {"edge_aware", p.edge_aware}};
}

json gravity_json(const GravityParams &p) {
  return {{"seed_up", {p.seed_up.x(), p.seed_up.y(), p.seed_up.z()}},
          {"max_iters", p.max_iters},
          {"angle_tol_deg", p.angle_tol_deg},
          {"converge_deg", p.converge_deg},
          {"band_spread", p.band_spread},
          {"min_band_deg", p.min_band_deg},
          {"min_normals", p.min_normals},
          {"max_tilt_deg", p.max_tilt_deg},
          {"min_mode_support", p.min_mode_support},
          {"search_samples", p.search_samples}};
}

json floor_json(const FloorParams &p) {
  return {{"percentile", p.percentile},
          {"slab_thickness", p.slab_thickness},
          {"support_angle_deg", p.support_angle_deg},
          {"support_fraction_min", p.support_fraction_min},
          {"max_tilt_deg", p.max_tilt_deg}};
}

void write_text_atomic(const fs::path &path, const std::string &text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out)
      throw Error(tmp.string() + ": cannot write");
    out << text;
    if (!out)
      throw Error(tmp.string() + ": write failed");
  }
  fs::rename(tmp, path);
}

void write_png_atomic(const fs::path &path, const LabelRaster &labels) {
  const fs::path tmp = path.string() + ".tmp";
  png::write_gray8(tmp, labels);
  fs::rename(tmp, path);
}

fs::path label_png(const fs::path &out, const std::string &id) {
  return out / "labels" / (id + ".png");
}
fs::path label_meta(const fs::path &out, const std::string &id) {
  return out / "labels" / (id + ".json");
}

enum class Status { Accepted, Rejected, Failed, Resumed };

struct Outcome {
  Status status = Status::Failed;
  std::string reason;
};

json sidecar_json(const std::string &frame_id, const HNLabelConfig &cfg,
                  const FloorFrameEstimate &floor, int width, int height) {
  return {{"frame_id", frame_id},
          {"config", cfg},
          {"label_layout", cfg.layout()},
          {"width", width},
          {"height", height},
          {"floor_height", floor.floor_height},
          {"accepted", floor.accepted},
          {"orientation", to_diagnostic_json(floor)},
          {"complete", true}};
}

Outcome process_frame(const DatasetManifest &manifest, const FrameRecord &rec,
                      const RunConfig &cfg) {
  if (cfg.resume && frame_outputs_complete(cfg.output_dir, rec.frame_id))
    return {Status::Resumed, {}};
  try {
    const DepthFrame depth =
        load_depth(manifest.resolve(rec.depth_path), manifest.intrinsics_for(rec));
    const PointCloud cloud = backproject(depth);
    const NormalMap normals = estimate_normals(cloud, cfg.params.normals);
    LabelResult res = label_from_geometry(cloud, normals, cfg.labels, cfg.params);
    if (cfg.debug_xyz)
      write_xyz_normals(cfg.output_dir / "debug" / (rec.frame_id + ".xyz"),
                        cloud, normals);
    if (!res.floor.accepted)
      return {Status::Rejected, res.floor.reason};

    LabelRaster labels = std::move(res.labels);
    if (cfg.target_size)
      labels = normalize_labels(labels, *cfg.target_size);
    write_png_atomic(label_png(cfg.output_dir, rec.frame_id), labels);
    if (cfg.write_color)
      png::write_rgb8(cfg.output_dir / "labels" / (rec.frame_id + "_color.png"),
                      colorize_labels(labels, cfg.labels));
    // The sidecar is written last: its presence marks the frame complete.
    write_text_atomic(label_meta(cfg.output_dir, rec.frame_id),
                      sidecar_json(rec.frame_id, cfg.labels, res.floor,
                                   labels.width(), labels.height())
                              .dump(2) +
                          "\n");
    return {Status::Accepted, {}};
  } catch (const std::exception &e) {
    return {Status::Failed, e.what()};
  }
}

std::vector<fs::path> sorted_pngs(const fs::path &dir) {
  if (!fs::is_directory(dir))
    throw Error(dir.string() + ": not a directory");
  std::vector<fs::path> out;
  for (const auto &e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png")
      out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

} // namespace

void RunConfig::validate() const {
  if (workers < 1)
    throw Error("config: workers must be >= 1");
  if (manifest.empty())
    throw Error("config: manifest path is required");
  if (output_dir.empty())
    throw Error("config: output directory is required");
  labels.validate();
  if (params.normals.window < 1)
    throw Error("config: normal window must be >= 1");
  if (!(params.floor.percentile >= 0 && params.floor.percentile <= 1))
    throw Error("config: floor percentile must lie in [0,1]");
}

fs::path RunConfig::intrinsics_path() const {
  return intrinsics.empty() ? manifest.parent_path() / "intrinsics.json"
                            : intrinsics;
}

json to_json(const RunConfig &c) {
  json j{{"manifest", c.manifest.string()},
         {"intrinsics", c.intrinsics.string()},
         {"output_dir", c.output_dir.string()},
         {"labels", c.labels},
         {"normals", normals_json(c.params.normals)},
         {"gravity", gravity_json(c.params.gravity)},
         {"floor", floor_json(c.params.floor)},
         {"surface_points", c.params.surface_points},
         {"workers", c.workers},
         {"seed", c.seed},
         {"resume", c.resume},
         {"sample", c.sample},
         {"write_color", c.write_color},
         {"debug_xyz", c.debug_xyz}};
  j["target_size"] = c.target_size ? json{c.target_size->height,
                                          c.target_size->width}
                                   : json(nullptr);
  return j;
}

void apply_json(RunConfig &c, const json &j) {
  if (!j.is_object())
    throw Error("config: top level must be an object");
  reject_unknown(j,
                 {"manifest", "intrinsics", "output_dir", "labels", "normals",
                  "gravity", "floor", "workers", "seed", "resume", "sample",
                  "write_color", "debug_xyz", "target_size", "surface_points"},
                 "");
  try {
    if (auto it = j.find("manifest"); it != j.end())
      c.manifest = it->get<std::string>();
    if (auto it = j.find("intrinsics"); it != j.end())
      c.intrinsics = it->get<std::string>();
    if (auto it = j.find("output_dir"); it != j.end())
      c.output_dir = it->get<std::string>();
    take(j, "workers", c.workers);
    take(j, "seed", c.seed);
    take(j, "resume", c.resume);
    take(j, "sample", c.sample);
    take(j, "write_color", c.write_color);
    take(j, "debug_xyz", c.debug_xyz);
    take(j, "surface_points", c.params.surface_points);
    if (auto it = j.find("target_size"); it != j.end()) {
      if (it->is_null())
        c.target_size.reset();
      else
        c.target_size = Size2{it->at(0).get<int>(), it->at(1).get<int>()};
    }
    if (auto it = j.find("labels"); it != j.end()) {
      reject_unknown(*it,
                     {"n_h", "n_n", "height_min", "height_max",
                      "normal_split_angle", "ignore_label"},
                     "labels.");
      json merged = c.labels;
      merged.update(*it);
      c.labels = merged.get<HNLabelConfig>();
    }
    if (auto it = j.find("normals"); it != j.end()) {
      reject_unknown(*it,
                     {"method", "window", "depth_jump", "max_curvature",
                      "min_neighbors", "max_incidence_deg", "edge_aware"},
                     "normals.");
      auto &p = c.params.normals;
      if (auto m = it->find("method"); m != it->end())
        p.method = normal_method_from_string(m->get<std::string>());
      take(*it, "window", p.window);
      take(*it, "depth_jump", p.depth_jump);
      take(*it, "max_curvature", p.max_curvature);
      take(*it, "min_neighbors", p.min_neighbors);
      take(*it, "max_incidence_deg", p.max_incidence_deg);
      take(*it, "edge_aware", p.edge_aware);
    }
    if (auto it = j.find("gravity"); it != j.end()) {
      reject_unknown(*it,
                     {"seed_up", "max_iters", "angle_tol_deg", "converge_deg",
                      "band_spread", "min_band_deg",
                      "min_normals", "max_tilt_deg", "min_mode_support",
                      "search_samples"},
                     "gravity.");
      auto &p = c.params.gravity;
      if (auto s = it->find("seed_up"); s != it->end())
        p.seed_up = {s->at(0).get<double>(), s->at(1).get<double>(),
                     s->at(2).get<double>()};
      take(*it, "max_iters", p.max_iters);
      take(*it, "angle_tol_deg", p.angle_tol_deg);
      take(*it, "converge_deg", p.converge_deg);
      take(*it, "band_spread", p.band_spread);
      take(*it, "min_band_deg", p.min_band_deg);
      take(*it, "min_normals", p.min_normals);
      take(*it, "max_tilt_deg", p.max_tilt_deg);
      take(*it, "min_mode_support", p.min_mode_support);
      take(*it, "search_samples", p.search_samples);
    }
    if (auto it = j.find("floor"); it != j.end()) {
      reject_unknown(*it,
                     {"percentile", "slab_thickness", "support_angle_deg",
                      "support_fraction_min", "max_tilt_deg"},
                     "floor.");
      auto &p = c.params.floor;
      take(*it, "percentile", p.percentile);
      take(*it, "slab_thickness", p.slab_thickness);
      take(*it, "support_angle_deg", p.support_angle_deg);
      take(*it, "support_fraction_min", p.support_fraction_min);
      take(*it, "max_tilt_deg", p.max_tilt_deg);
    }
  } catch (const json::exception &e) {
    throw Error(std::string("config: ") + e.what());
  }
}

json to_json(const RunReport &r) {
  auto issues = [](const std::vector<FrameIssue> &v) {
    json a = json::array();
    for (const auto &i : v)
      a.push_back({{"frame_id", i.frame_id}, {"reason", i.reason}});
    return a;
  };
  return {{"processed", r.processed},     {"accepted", r.accepted},
          {"rejected", r.rejected},       {"failed", r.failed},
          {"resumed", r.resumed},         {"wall_time_s", r.wall_time_s},
          {"rejected_frames", issues(r.rejected_frames)},
          {"failed_frames", issues(r.failed_frames)}};
}

void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)> &fn) {
  if (workers < 1)
    throw Error("parallel_for: workers must be >= 1");
  const auto threads =
      static_cast<std::size_t>(std::min<std::size_t>(workers, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i)
      fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error)
            first_error = std::current_exception();
        }
      }
    });
  pool.clear();
  if (first_error)
    std::rethrow_exception(first_error);
}

bool frame_outputs_complete(const fs::path &output_dir,
                            const std::string &frame_id) {
  const fs::path meta = label_meta(output_dir, frame_id);
  if (!fs::exists(label_png(output_dir, frame_id)) || !fs::exists(meta))
    return false;
  std::ifstream in(meta);
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    return false;
  for (const char *key : {"frame_id", "config", "label_layout", "floor_height",
                          "accepted", "width", "height"})
    if (!j.contains(key))
      return false;
  return j.value("complete", false) && j.value("frame_id", "") == frame_id;
}

RunReport run_labelgen(const RunConfig &config) {
  const auto start = std::chrono::steady_clock::now();
  config.validate();
  DatasetManifest manifest =
      load_manifest(config.manifest, config.intrinsics_path());
  if (config.sample > 0)
    manifest = sample_uniform(manifest, config.sample, config.seed);

  fs::create_directories(config.output_dir / "labels");
  if (config.debug_xyz)
    fs::create_directories(config.output_dir / "debug");

  const auto &frames = manifest.frames();
  std::vector<Outcome> outcomes(frames.size());
  parallel_for(frames.size(), config.workers, [&](std::size_t i) {
    outcomes[i] = process_frame(manifest, frames[i], config);
  });

  RunReport report;
  std::string rejected_log, failure_log;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto &id = frames[i].frame_id;
    const auto &o = outcomes[i];
    ++report.processed;
    switch (o.status) {
    case Status::Resumed:
      ++report.resumed;
      [[fallthrough]];
    case Status::Accepted:
      ++report.accepted;
      break;
    case Status::Rejected:
      ++report.rejected;
      report.rejected_frames.push_back({id, o.reason});
      rejected_log += json{{"frame_id", id}, {"reason", o.reason}}.dump() + "\n";
      break;
    case Status::Failed:
      ++report.failed;
      report.failed_frames.push_back({id, o.reason});
      failure_log += json{{"frame_id", id}, {"error", o.reason}}.dump() + "\n";
      break;
    }
  }
  write_text_atomic(config.output_dir / "rejected.jsonl", rejected_log);
  write_text_atomic(config.output_dir / "failures.jsonl", failure_log);
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  write_text_atomic(config.output_dir / "report.json",
                    to_json(report).dump(2) + "\n");
  return report;
}

HeightDistribution run_stats(const StatsConfig &config) {
  const fs::path dir = config.labels_dir / "labels";
  if (!fs::is_directory(dir))
    throw Error(dir.string() + ": no labelgen output found");
  std::vector<std::string> ids;
  for (const auto &e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json")
      ids.push_back(e.path().stem().string());
  std::sort(ids.begin(), ids.end());

  HNLabelConfig cfg;
  bool have_cfg = false;
  std::vector<HNLabelConfig> cfgs(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (!frame_outputs_complete(config.labels_dir, ids[i]))
      throw Error(ids[i] + ": incomplete labelgen outputs");
    std::ifstream in(label_meta(config.labels_dir, ids[i]));
    cfgs[i] = json::parse(in).at("config").get<HNLabelConfig>();
    if (have_cfg && !(cfgs[i] == cfg))
      throw Error(ids[i] + ": label config differs from other frames");
    cfg = cfgs[i];
    have_cfg = true;
  }

  std::vector<HeightDistribution> partial(
      ids.size(), HeightDistribution(config.classes, cfg.n_h, cfg.ignore_label));
  parallel_for(ids.size(), config.workers, [&](std::size_t i) {
    const auto hn = png::read_gray8(label_png(config.labels_dir, ids[i]));
    const auto sem = png::read_gray8(config.semantic_dir / (ids[i] + ".png"));
    partial[i].accumulate(sem, height_bins_from_labels(hn, cfg.n_n, cfg.ignore_label));
  });
  HeightDistribution total(config.classes, cfg.n_h, cfg.ignore_label);
  for (const auto &p : partial)
    total.merge(p);
  return total;
}

ConfusionMatrix run_eval(const fs::path &gt_dir, const fs::path &pred_dir,
                         int classes, int ignore_label, int workers) {
  const auto files = sorted_pngs(gt_dir);
  std::vector<ConfusionMatrix> partial(files.size(),
                                       ConfusionMatrix(classes, ignore_label));
  parallel_for(files.size(), workers, [&](std::size_t i) {
    const fs::path pred = pred_dir / files[i].filename();
    if (!fs::exists(pred))
      throw Error(pred.string() + ": missing prediction");
    try {
      partial[i].update(png::read_gray8(files[i]), png::read_gray8(pred));
    } catch (const Error &e) {
      throw Error(files[i].filename().string() + ": " + e.what());
    }
  });
  ConfusionMatrix total(classes, ignore_label);
  for (const auto &p : partial)
    total.merge(p);
  return total;
}

std::size_t run_synth(const SynthConfig &config) {
  if (config.scenes < 0 || config.poses_per_scene < 1)
    throw Error("synth: scene and pose counts must be positive");
  const fs::path out = config.output_dir;
  for (const char *sub : {"depth", "color", "semantic", "gt_hn", "scenes"})
    fs::create_directories(out / sub);

  const std::size_t n = static_cast<std::size_t>(config.scenes) *
                        static_cast<std::size_t>(config.poses_per_scene);
  std::vector<FrameRecord> records(n);
  std::vector<std::string> pose_lines(n);
  parallel_for(n, config.workers, [&](std::size_t i) {
    const int s = static_cast<int>(i) / config.poses_per_scene;
    const int p = static_cast<int>(i) % config.poses_per_scene;
    const std::uint64_t scene_seed = config.seed * 1000003ULL + s;
    const auto scene = synth::random_scene(scene_seed);
    const auto pose = synth::random_pose(
        scene, scene_seed * 7919ULL + static_cast<std::uint64_t>(p),
        config.intrinsics);
    synth::RenderOptions opt;
    opt.noise_sigma = config.noise_sigma;
    opt.noise_seed = scene_seed * 104729ULL + static_cast<std::uint64_t>(p);
    const auto frame = synth::render_depth(scene, pose, config.labels, opt);

    char sid[32], fid[48];
    std::snprintf(sid, sizeof sid, "scene%04d", s);
    std::snprintf(fid, sizeof fid, "scene%04d_pose%02d", s, p);
    if (p == 0)
      synth::save_scene(out / "scenes" / (std::string(sid) + ".json"), scene);
    save_depth(out / "depth" / (std::string(fid) + ".png"), frame.depth);
    png::write_rgb8(out / "color" / (std::string(fid) + ".png"), frame.color);
    png::write_gray8(out / "semantic" / (std::string(fid) + ".png"),
                     frame.classes);
    png::write_gray8(out / "gt_hn" / (std::string(fid) + ".png"),
                     frame.hn_labels);
    records[i] = {fid, "depth/" + std::string(fid) + ".png",
                  "color/" + std::string(fid) + ".png", "synthetic", sid};
    const auto &r = pose.orientation;
    pose_lines[i] =
        json{{"frame_id", fid},
             {"scene_id", sid},
             {"position", {pose.position.x(), pose.position.y(), pose.position.z()}},
             {"orientation",
              {{r(0, 0), r(0, 1), r(0, 2)},
               {r(1, 0), r(1, 1), r(1, 2)},
               {r(2, 0), r(2, 1), r(2, 2)}}}}
            .dump() +
        "\n";
  });
  std::string poses;
  for (const auto &l : pose_lines)
    poses += l;
  write_text_atomic(out / "poses.jsonl", poses);
  save_manifest(out / "manifest.txt", out / "intrinsics.json",
                DatasetManifest(records, {{"synthetic", config.intrinsics}}));
  return n;
}

} // namespace hnl
