#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "hnlabel/hnlabel.hpp"

namespace py = pybind11;
using namespace hnl;
using nlohmann::json;

namespace {

template <typename T> using Array = py::array_t<T, py::array::c_style | py::array::forcecast>;

py::object to_py(const json &j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

json from_py(const py::object &o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

template <typename T> Raster<T> to_raster(const Array<T> &a) {
  if (a.ndim() != 2)
    throw py::value_error("expected a 2-D array");
  Raster<T> r(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  std::copy(a.data(), a.data() + a.size(), r.data());
  return r;
}

template <typename T> Array<T> to_array(const Raster<T> &r) {
  Array<T> a({r.height(), r.width()});
  std::copy(r.data(), r.data() + r.size(), a.mutable_data());
  return a;
}

py::array_t<double> to_array(const Raster<Eigen::Vector3d> &r) {
  py::array_t<double> a({r.height(), r.width(), 3});
  double *out = a.mutable_data();
  for (std::size_t i = 0; i < r.size(); ++i)
    for (int c = 0; c < 3; ++c)
      out[3 * i + c] = r[i][c];
  return a;
}

py::array_t<std::uint8_t> to_array(const Raster<Rgb> &r) {
  py::array_t<std::uint8_t> a({r.height(), r.width(), 3});
  std::uint8_t *out = a.mutable_data();
  for (std::size_t i = 0; i < r.size(); ++i) {
    out[3 * i] = r[i].r;
    out[3 * i + 1] = r[i].g;
    out[3 * i + 2] = r[i].b;
  }
  return a;
}

CameraIntrinsics intrinsics_from(const py::object &o) {
  return from_py(o).get<CameraIntrinsics>();
}

HNLabelConfig labels_from(const py::object &o) {
  if (o.is_none())
    return {};
  HNLabelConfig c = from_py(o).get<HNLabelConfig>();
  c.validate();
  return c;
}

RunConfig run_config_from(const py::dict &d) {
  RunConfig c;
  apply_json(c, from_py(d));
  return c;
}

json frame_info(const FloorFrameEstimate &f) {
  json j = to_diagnostic_json(f);
  Eigen::Matrix3d R = f.gravity.rotation;
  j["rotation"] = {{R(0, 0), R(0, 1), R(0, 2)},
                   {R(1, 0), R(1, 1), R(1, 2)},
                   {R(2, 0), R(2, 1), R(2, 2)}};
  return j;
}

} // namespace

PYBIND11_MODULE(_hnlabel, m) {
  m.doc() = "Height-and-normal self-labeling of RGB-D frames";

  py::register_exception<Error>(m, "HnlError", PyExc_RuntimeError);

  m.def("default_config", [] { return to_py(to_json(RunConfig{})); },
        "Every labelgen setting with its default value.");

  m.def("default_intrinsics", [] { return to_py(json(synth::default_intrinsics())); });

  m.def(
      "generate_labels",
      [](const Array<double> &depth_m, const py::object &intrinsics,
         const py::object &labels, const py::object &run_config) {
        const CameraIntrinsics k = intrinsics_from(intrinsics);
        const DepthFrame frame = depth_from_meters(to_raster(depth_m), k);
        LabelingParams params;
        if (!run_config.is_none()) {
          RunConfig rc;
          apply_json(rc, from_py(run_config));
          params = rc.params;
        }
        const LabelResult r = [&] {
          py::gil_scoped_release release;
          return generate_labels(frame, labels_from(labels), params);
        }();
        return py::make_tuple(to_array(r.labels), to_py(frame_info(r.floor)));
      },
      py::arg("depth_m"), py::arg("intrinsics"), py::arg("labels") = py::none(),
      py::arg("config") = py::none(),
      "Labels one metric depth map. Returns (labels uint8 HxW, info dict).");

  m.def(
      "bin_height",
      [](double h, const py::object &labels) { return bin_height(h, labels_from(labels)); },
      py::arg("height"), py::arg("labels") = py::none());
  m.def(
      "bin_normal",
      [](double a, const py::object &labels) { return bin_normal(a, labels_from(labels)); },
      py::arg("angle_deg"), py::arg("labels") = py::none());
  m.def(
      "compose_label",
      [](int h, int n, const py::object &labels) {
        return compose_label(h, n, labels_from(labels));
      },
      py::arg("h_bin"), py::arg("n_bin"), py::arg("labels") = py::none());

  m.def(
      "colorize",
      [](const Array<std::uint8_t> &labels, const py::object &cfg) {
        return to_array(colorize_labels(to_raster(labels), labels_from(cfg)));
      },
      py::arg("labels"), py::arg("labels_config") = py::none());

  m.def("read_label_png", [](const std::string &p) { return to_array(png::read_gray8(p)); });
  m.def("write_label_png", [](const std::string &p, const Array<std::uint8_t> &a) {
    png::write_gray8(p, to_raster(a));
  });
  m.def(
      "read_depth_png",
      [](const std::string &p, const py::object &intrinsics) {
        return to_array(load_depth(p, intrinsics_from(intrinsics)).values);
      },
      py::arg("path"), py::arg("intrinsics"), "Metric depth, 0 where invalid.");

  m.def(
      "evaluate",
      [](const Array<std::uint8_t> &gt, const Array<std::uint8_t> &pred, int classes,
         int ignore) {
        ConfusionMatrix cm(classes, ignore);
        cm.update(to_raster(gt), to_raster(pred));
        return to_py(metrics_report(cm));
      },
      py::arg("gt"), py::arg("pred"), py::arg("classes"), py::arg("ignore_label") = 255,
      "Metrics report of one prediction against ground truth.");

  m.def(
      "render_synthetic",
      [](std::uint64_t scene_seed, std::uint64_t pose_seed, const py::object &intrinsics,
         double noise_sigma, const py::object &labels) {
        const CameraIntrinsics k = intrinsics.is_none() ? synth::default_intrinsics()
                                                        : intrinsics_from(intrinsics);
        const synth::SyntheticScene scene = synth::random_scene(scene_seed);
        const synth::CameraPose pose = synth::random_pose(scene, pose_seed, k);
        synth::RenderOptions opt;
        opt.noise_sigma = noise_sigma;
        opt.noise_seed = pose_seed;
        const synth::RenderedFrame f = synth::render_depth(scene, pose, labels_from(labels), opt);
        py::dict d;
        d["depth"] = to_array(f.depth.values);
        d["true_depth"] = to_array(f.true_depth);
        d["height"] = to_array(f.height);
        d["normal_angle"] = to_array(f.normal_angle);
        d["hn_labels"] = to_array(f.hn_labels);
        d["classes"] = to_array(f.classes);
        d["world_points"] = to_array(f.world_points);
        d["color"] = to_array(f.color);
        d["intrinsics"] = to_py(json(k));
        d["camera_height"] = pose.position.y();
        return d;
      },
      py::arg("scene_seed"), py::arg("pose_seed"), py::arg("intrinsics") = py::none(),
      py::arg("noise_sigma") = 0.0, py::arg("labels") = py::none(),
      "Renders a random room from a random pose. Returns a dict of arrays.");

  m.def(
      "run_labelgen",
      [](const py::dict &config) {
        const RunConfig c = run_config_from(config);
        py::gil_scoped_release release;
        const RunReport r = run_labelgen(c);
        py::gil_scoped_acquire acquire;
        return to_py(to_json(r));
      },
      py::arg("config"), "Labels a manifest. Keys as in default_config().");

  m.def(
      "run_synth",
      [](const std::string &output_dir, int scenes, int poses, std::uint64_t seed,
         double noise_sigma, const py::object &intrinsics, int workers) {
        SynthConfig c;
        c.output_dir = output_dir;
        c.scenes = scenes;
        c.poses_per_scene = poses;
        c.seed = seed;
        c.noise_sigma = noise_sigma;
        c.intrinsics = intrinsics.is_none() ? synth::default_intrinsics()
                                            : intrinsics_from(intrinsics);
        c.workers = workers;
        py::gil_scoped_release release;
        return run_synth(c);
      },
      py::arg("output_dir"), py::arg("scenes") = 5, py::arg("poses_per_scene") = 2,
      py::arg("seed") = 0, py::arg("noise_sigma") = 0.0, py::arg("intrinsics") = py::none(),
      py::arg("workers") = 1);

  m.def(
      "run_eval",
      [](const std::string &gt_dir, const std::string &pred_dir, int classes, int ignore,
         int workers) {
        ConfusionMatrix cm = [&] {
          py::gil_scoped_release release;
          return run_eval(gt_dir, pred_dir, classes, ignore, workers);
        }();
        return to_py(metrics_report(cm));
      },
      py::arg("gt_dir"), py::arg("pred_dir"), py::arg("classes"),
      py::arg("ignore_label") = 255, py::arg("workers") = 1);

  m.def(
      "run_stats",
      [](const std::string &labels_dir, const std::string &semantic_dir, int classes,
         int workers) {
        StatsConfig c{labels_dir, semantic_dir, classes, workers};
        HeightDistribution d = [&] {
          py::gil_scoped_release release;
          return run_stats(c);
        }();
        return to_py(to_json(d));
      },
      py::arg("labels_dir"), py::arg("semantic_dir"), py::arg("classes") = 41,
      py::arg("workers") = 1);
}
