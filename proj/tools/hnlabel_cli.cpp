#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "hnlabel/hnlabel.hpp"

using namespace hnl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json read_json(const fs::path &p) {
  std::ifstream in(p);
  if (!in)
    throw Error(p.string() + ": cannot read config");
  try {
    return json::parse(in);
  } catch (const json::exception &e) {
    throw Error(p.string() + ": " + e.what());
  }
}

void write_json(const std::string &path, const json &j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out)
    throw Error(path + ": cannot write");
  out << j.dump(2) << "\n";
}

// Overlays keys of `j` onto fields, rejecting unknown ones.
class Overlay {
public:
  explicit Overlay(const json &j) : j_(j) {
    if (!j.is_object())
      throw Error("config: top level must be an object");
  }
  template <typename T> Overlay &take(const char *key, T &field) {
    known_.push_back(key);
    if (auto it = j_.find(key); it != j_.end())
      field = it->get<T>();
    return *this;
  }
  Overlay &path(const char *key, fs::path &field) {
    std::string s = field.string();
    take(key, s);
    field = s;
    return *this;
  }
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (std::find(known_.begin(), known_.end(), it.key()) == known_.end())
        throw Error("config: unknown key '" + it.key() + "'");
  }

private:
  const json &j_;
  std::vector<std::string> known_;
};

Size2 parse_size(const std::string &s) {
  Size2 out;
  char x = 0;
  std::istringstream in(s);
  if (!(in >> out.height >> x >> out.width) || x != 'x' || !in.eof() ||
      out.height <= 0 || out.width <= 0)
    throw Error("size must look like HEIGHTxWIDTH, got '" + s + "'");
  return out;
}

struct StatsOptions {
  StatsConfig config;
  std::string output;
  std::string image;
};

json to_json(const StatsOptions &o) {
  return {{"labels_dir", o.config.labels_dir.string()},
          {"semantic_dir", o.config.semantic_dir.string()},
          {"classes", o.config.classes},
          {"workers", o.config.workers},
          {"output", o.output},
          {"image", o.image}};
}

void overlay(StatsOptions &o, const json &j) {
  Overlay(j)
      .path("labels_dir", o.config.labels_dir)
      .path("semantic_dir", o.config.semantic_dir)
      .take("classes", o.config.classes)
      .take("workers", o.config.workers)
      .take("output", o.output)
      .take("image", o.image)
      .finish();
}

struct EvalOptions {
  fs::path gt_dir, pred_dir;
  int classes = 20;
  int ignore_label = 255;
  int workers = 1;
  std::string output;
};

json to_json(const EvalOptions &o) {
  return {{"gt_dir", o.gt_dir.string()},   {"pred_dir", o.pred_dir.string()},
          {"classes", o.classes},          {"ignore_label", o.ignore_label},
          {"workers", o.workers},          {"output", o.output}};
}

void overlay(EvalOptions &o, const json &j) {
  Overlay(j)
      .path("gt_dir", o.gt_dir)
      .path("pred_dir", o.pred_dir)
      .take("classes", o.classes)
      .take("ignore_label", o.ignore_label)
      .take("workers", o.workers)
      .take("output", o.output)
      .finish();
}

json to_json(const SynthConfig &c) {
  return {{"output_dir", c.output_dir.string()},
          {"scenes", c.scenes},
          {"poses_per_scene", c.poses_per_scene},
          {"seed", c.seed},
          {"noise_sigma", c.noise_sigma},
          {"intrinsics", c.intrinsics},
          {"labels", c.labels},
          {"workers", c.workers}};
}

void overlay(SynthConfig &c, const json &j) {
  Overlay(j)
      .path("output_dir", c.output_dir)
      .take("scenes", c.scenes)
      .take("poses_per_scene", c.poses_per_scene)
      .take("seed", c.seed)
      .take("noise_sigma", c.noise_sigma)
      .take("intrinsics", c.intrinsics)
      .take("labels", c.labels)
      .take("workers", c.workers)
      .finish();
}

void overlay(RunConfig &c, const json &j) { apply_json(c, j); }

template <typename Options>
void layer_config(Options &o, const std::string &config_path) {
  if (!config_path.empty())
    overlay(o, read_json(config_path));
}

int run_labelgen_cmd(RunConfig cfg, const std::string &config_path,
                     const std::string &target, bool print) {
  if (!target.empty())
    cfg.target_size = parse_size(target);
  layer_config(cfg, config_path);
  if (print) {
    std::cout << to_json(cfg).dump(2) << "\n";
    return 0;
  }
  const RunReport r = run_labelgen(cfg);
  json summary = to_json(r);
  summary.erase("rejected_frames");
  summary.erase("failed_frames");
  std::cout << summary.dump() << "\n";
  for (const auto &f : r.failed_frames)
    std::cerr << "failed: " << f.frame_id << ": " << f.reason << "\n";
  return r.failed == 0 ? 0 : 1;
}

int run_stats_cmd(StatsOptions o, const std::string &config_path, bool print) {
  layer_config(o, config_path);
  if (print) {
    std::cout << to_json(o).dump(2) << "\n";
    return 0;
  }
  const HeightDistribution d = run_stats(o.config);
  write_json(o.output, hnl::to_json(d));
  if (!o.image.empty())
    write_distribution_image(o.image, d);
  return 0;
}

int run_eval_cmd(EvalOptions o, const std::string &config_path, bool print) {
  layer_config(o, config_path);
  if (print) {
    std::cout << to_json(o).dump(2) << "\n";
    return 0;
  }
  const ConfusionMatrix cm =
      run_eval(o.gt_dir, o.pred_dir, o.classes, o.ignore_label, o.workers);
  write_json(o.output, metrics_report(cm));
  return 0;
}

int run_synth_cmd(SynthConfig c, const std::string &intrinsics_path,
                  const std::string &config_path, bool print) {
  if (!intrinsics_path.empty())
    c.intrinsics = read_json(intrinsics_path).get<CameraIntrinsics>();
  layer_config(c, config_path);
  if (print) {
    std::cout << to_json(c).dump(2) << "\n";
    return 0;
  }
  const std::size_t n = run_synth(c);
  std::cout << json{{"frames", n}, {"output_dir", c.output_dir.string()}}.dump()
            << "\n";
  return 0;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Height-and-normal self-labeling of RGB-D frames"};
  app.require_subcommand(1);

  std::string config_path;
  bool print = false;
  auto common = [&](CLI::App *sub) {
    sub->add_option("--config", config_path,
                    "JSON file whose keys override the flags");
    sub->add_flag("--print-config", print,
                  "Print the effective configuration and exit");
  };

  RunConfig lg;
  std::string target, method = to_string(lg.params.normals.method);
  bool no_edge_aware = false, raw_points = false;
  auto *labelgen = app.add_subcommand("labelgen", "Generate HN labels for a manifest");
  common(labelgen);
  labelgen->add_option("--manifest", lg.manifest, "Manifest file");
  labelgen->add_option("--intrinsics", lg.intrinsics,
                       "Intrinsics table (default: intrinsics.json beside the manifest)");
  labelgen->add_option("--output", lg.output_dir, "Output directory");
  labelgen->add_option("--workers", lg.workers, "Worker threads")->capture_default_str();
  labelgen->add_option("--seed", lg.seed, "Sampling seed")->capture_default_str();
  labelgen->add_flag("--resume", lg.resume, "Skip frames with complete outputs");
  labelgen->add_option("--sample", lg.sample, "Scene-balanced subset size (0 = all)")
      ->capture_default_str();
  labelgen->add_option("--target-size", target, "Resize labels to HEIGHTxWIDTH");
  labelgen->add_flag("--write-color", lg.write_color, "Also write colorized labels");
  labelgen->add_flag("--debug-xyz", lg.debug_xyz, "Write xyz+normal point dumps");
  labelgen->add_option("--n-h", lg.labels.n_h, "Height bins")->capture_default_str();
  labelgen->add_option("--n-n", lg.labels.n_n, "Normal bins")->capture_default_str();
  labelgen->add_option("--height-min", lg.labels.height_min)->capture_default_str();
  labelgen->add_option("--height-max", lg.labels.height_max)->capture_default_str();
  labelgen->add_option("--split-angle", lg.labels.normal_split_angle,
                       "Normal split in degrees when n_n = 2")
      ->capture_default_str();
  labelgen->add_option("--normal-method", method, "inverse_depth or covariance")
      ->capture_default_str();
  labelgen->add_option("--window", lg.params.normals.window,
                       "Normal window half-width in pixels")
      ->capture_default_str();
  labelgen->add_option("--depth-jump", lg.params.normals.depth_jump,
                       "Neighbour depth discontinuity in meters")
      ->capture_default_str();
  labelgen->add_flag("--no-edge-aware", no_edge_aware,
                     "Centred normal windows only");
  labelgen->add_flag("--raw-points", raw_points,
                     "Heights from raw depth samples instead of fitted surfaces");
  labelgen->add_option("--floor-percentile", lg.params.floor.percentile)
      ->capture_default_str();

  StatsOptions st;
  auto *stats = app.add_subcommand("stats", "Class x height-bin distribution");
  common(stats);
  stats->add_option("--labels", st.config.labels_dir, "labelgen output directory");
  stats->add_option("--semantic", st.config.semantic_dir, "Semantic class PNGs");
  stats->add_option("--classes", st.config.classes)->capture_default_str();
  stats->add_option("--workers", st.config.workers)->capture_default_str();
  stats->add_option("--output", st.output, "JSON output (default stdout)");
  stats->add_option("--image", st.image, "Distribution image PNG");

  EvalOptions ev;
  auto *eval = app.add_subcommand("eval", "Segmentation metrics of predictions");
  common(eval);
  eval->add_option("--gt", ev.gt_dir, "Ground-truth PNG directory");
  eval->add_option("--pred", ev.pred_dir, "Prediction PNG directory");
  eval->add_option("--classes", ev.classes)->capture_default_str();
  eval->add_option("--ignore", ev.ignore_label)->capture_default_str();
  eval->add_option("--workers", ev.workers)->capture_default_str();
  eval->add_option("--output", ev.output, "JSON report (default stdout)");

  SynthConfig sy;
  sy.intrinsics = synth::default_intrinsics();
  std::string synth_intrinsics;
  auto *synth = app.add_subcommand("synth", "Render synthetic oracle frames");
  common(synth);
  synth->add_option("--output", sy.output_dir, "Output directory");
  synth->add_option("--scenes", sy.scenes)->capture_default_str();
  synth->add_option("--poses", sy.poses_per_scene, "Poses per scene")
      ->capture_default_str();
  synth->add_option("--seed", sy.seed)->capture_default_str();
  synth->add_option("--noise", sy.noise_sigma, "Depth noise sigma in meters")
      ->capture_default_str();
  synth->add_option("--intrinsics", synth_intrinsics,
                    "Camera intrinsics JSON (default 560x424)");
  synth->add_option("--workers", sy.workers)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*labelgen) {
      lg.params.normals.method = normal_method_from_string(method);
      lg.params.normals.edge_aware = !no_edge_aware;
      lg.params.surface_points = !raw_points;
      return run_labelgen_cmd(lg, config_path, target, print);
    }
    if (*stats)
      return run_stats_cmd(st, config_path, print);
    if (*eval)
      return run_eval_cmd(ev, config_path, print);
    return run_synth_cmd(sy, synth_intrinsics, config_path, print);
  } catch (const std::exception &e) {
    std::cerr << "hnlabel: " << e.what() << "\n";
    return 2;
  }
}
