"""Change-point detection and inference for scalar-on-function linear regression series."""

__version__ = "0.1.0"

from .detect import DetectorConfig, frbs, refine, refined_interval  # noqa: E402
from .fgrid import FunctionalSeries, Grid, inner_l2, make_grid  # noqa: E402
from .kernel import gram, kernel_smooth, sobolev_kernel  # noqa: E402
from .pipeline import ChangePointReport, run_pipeline  # noqa: E402
from .regress import LambdaRule, fit_slope, predict, segment_rss  # noqa: E402
from .segment import seeded_intervals, w_stat  # noqa: E402

__all__ = [
    "ChangePointReport",
    "DetectorConfig",
    "FunctionalSeries",
    "Grid",
    "LambdaRule",
    "fit_slope",
    "frbs",
    "gram",
    "inner_l2",
    "kernel_smooth",
    "make_grid",
    "predict",
    "refine",
    "refined_interval",
    "run_pipeline",
    "seeded_intervals",
    "segment_rss",
    "sobolev_kernel",
    "w_stat",
]
