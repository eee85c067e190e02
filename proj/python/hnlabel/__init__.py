"""Height-and-normal self-labeling of RGB-D frames."""

from ._hnlabel import (
    HnlError,
    bin_height,
    bin_normal,
    colorize,
    compose_label,
    default_config,
    default_intrinsics,
    evaluate,
    generate_labels,
    read_depth_png,
    read_label_png,
    render_synthetic,
    run_eval,
    run_labelgen,
    run_stats,
    run_synth,
    write_label_png,
)

__all__ = [
    "HnlError",
    "bin_height",
    "bin_normal",
    "colorize",
    "compose_label",
    "default_config",
    "default_intrinsics",
    "evaluate",
    "generate_labels",
    "read_depth_png",
    "read_label_png",
    "render_synthetic",
    "run_eval",
    "run_labelgen",
    "run_stats",
    "run_synth",
    "write_label_png",
]
