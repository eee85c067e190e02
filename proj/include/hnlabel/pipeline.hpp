#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "hnlabel/hn_labels.hpp"
#include "hnlabel/metrics.hpp"
#include "hnlabel/rgbd_ingest.hpp"
#include "hnlabel/stats.hpp"

namespace hnl {

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path intrinsics; // defaults to intrinsics.json beside manifest
  std::filesystem::path output_dir;
  HNLabelConfig labels;
  LabelingParams params;
  int workers = 1;
  std::uint64_t seed = 0;
  bool resume = false;
  std::size_t sample = 0; // 0 = all frames, else scene-balanced subset
  std::optional<Size2> target_size;
  bool write_color = false;
  bool debug_xyz = false;

  void validate() const;
  std::filesystem::path intrinsics_path() const;
};

nlohmann::json to_json(const RunConfig &c);
// Overlays the keys present in `j` onto `c`; unknown keys are an error.
void apply_json(RunConfig &c, const nlohmann::json &j);

struct FrameIssue {
  std::string frame_id;
  std::string reason;
};

struct RunReport {
  std::size_t processed = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t failed = 0;
  std::size_t resumed = 0; // accepted frames whose outputs already existed
  double wall_time_s = 0;
  std::vector<FrameIssue> rejected_frames;
  std::vector<FrameIssue> failed_frames;
};

nlohmann::json to_json(const RunReport &r);

// Runs fn(i) for i in [0, n) on `workers` threads. Exceptions escaping fn
// are rethrown on the calling thread after all workers finish.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)> &fn);

// Label generation over a manifest. Layout under output_dir:
//   labels/<frame_id>.png, labels/<frame_id>.json  (accepted frames)
//   rejected.jsonl, failures.jsonl, report.json
// Everything except report.json (wall time) is identical for any worker count.
RunReport run_labelgen(const RunConfig &config);

// True when labels/<frame_id>.png exists and its sidecar is complete.
bool frame_outputs_complete(const std::filesystem::path &output_dir,
                            const std::string &frame_id);

struct StatsConfig {
  std::filesystem::path labels_dir; // labelgen output directory
  std::filesystem::path semantic_dir; // <frame_id>.png class rasters
  int classes = 41;
  int workers = 1;
};

// Height distribution over all accepted frames of a labelgen run.
HeightDistribution run_stats(const StatsConfig &config);

// Confusion matrix over gt_dir/*.png against identically named pred files.
ConfusionMatrix run_eval(const std::filesystem::path &gt_dir,
                         const std::filesystem::path &pred_dir, int classes,
                         int ignore_label = 255, int workers = 1);

struct SynthConfig {
  std::filesystem::path output_dir;
  int scenes = 5;
  int poses_per_scene = 2;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  CameraIntrinsics intrinsics;
  HNLabelConfig labels;
  int workers = 1;
};

// Writes depth/, color/, semantic/, gt_hn/ rasters, scenes/<id>.json,
// poses.jsonl, manifest.txt and intrinsics.json. Returns the frame count.
std::size_t run_synth(const SynthConfig &config);

} // namespace hnl
