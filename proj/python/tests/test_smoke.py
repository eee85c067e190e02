import json

import numpy as np
import pytest

import hnlabel

SMALL = {"fx": 129.6, "fy": 129.6, "cx": 79.5, "cy": 59.5,
         "width": 160, "height": 120, "depth_scale": 0.001}


@pytest.fixture(scope="module")
def frame():
    return hnlabel.render_synthetic(1, 2, SMALL)


def test_default_config_is_json_serializable():
    cfg = hnlabel.default_config()
    assert cfg["labels"]["n_h"] == 10
    assert cfg["labels"]["n_n"] == 2
    json.dumps(cfg)


def test_binning_matches_layout():
    assert hnlabel.bin_height(-1.0) == 0
    assert hnlabel.bin_height(0.3) == 1
    assert hnlabel.bin_height(99.0) == 9
    assert hnlabel.bin_normal(44.999) == 0
    assert hnlabel.bin_normal(45.0) == 1
    assert hnlabel.compose_label(3, 1) == 7
    cfg = {"n_h": 4, "n_n": 3, "height_min": 0.0, "height_max": 2.0,
           "normal_split_angle": 45.0, "ignore_label": 255}
    assert hnlabel.compose_label(3, 2, cfg) == 11


def test_invalid_config_raises():
    with pytest.raises(hnlabel.HnlError):
        hnlabel.bin_height(1.0, {"n_h": 0, "n_n": 2})


def test_labels_agree_with_analytic_truth(frame):
    labels, info = hnlabel.generate_labels(frame["depth"], frame["intrinsics"])
    assert labels.shape == (120, 160) and labels.dtype == np.uint8
    assert info["accepted"]
    assert abs(info["floor_height"] + frame["camera_height"]) < 0.02
    mask = labels != 255
    assert mask.mean() > 0.8
    assert (labels[mask] == frame["hn_labels"][mask]).mean() > 0.99
    report = hnlabel.evaluate(frame["hn_labels"], labels, 20)
    assert report["global_accuracy"] > 0.99


def test_label_png_round_trip(tmp_path, frame):
    path = str(tmp_path / "l.png")
    hnlabel.write_label_png(path, frame["hn_labels"])
    np.testing.assert_array_equal(hnlabel.read_label_png(path), frame["hn_labels"])
    rgb = hnlabel.colorize(frame["hn_labels"])
    assert rgb.shape == (120, 160, 3)


def test_pipeline_round_trip(tmp_path):
    data = tmp_path / "data"
    assert hnlabel.run_synth(str(data), scenes=2, poses_per_scene=1, seed=5,
                             intrinsics=SMALL) == 2
    out = tmp_path / "out"
    report = hnlabel.run_labelgen({"manifest": str(data / "manifest.txt"),
                                   "output_dir": str(out)})
    assert report["processed"] == 2 and report["failed"] == 0
    if report["rejected"] == 0:
        metrics = hnlabel.run_eval(str(data / "gt_hn"), str(out / "labels"), 20)
        assert metrics["global_accuracy"] > 0.95
    dist = hnlabel.run_stats(str(out), str(data / "semantic"))
    assert dist["bins"] == 10
    for row in dist["rows"]:
        assert abs(sum(row["fractions"]) - 1.0) < 1e-9
    depth = hnlabel.read_depth_png(str(data / "depth" / "scene0000_pose00.png"), SMALL)
    assert depth.shape == (120, 160)


def test_unknown_config_key_raises(tmp_path):
    with pytest.raises(hnlabel.HnlError):
        hnlabel.run_labelgen({"manifest": "x", "output_dir": str(tmp_path), "wokers": 2})
