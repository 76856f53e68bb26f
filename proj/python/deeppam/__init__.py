"""Piecewise exponential additive models with a point-cloud encoder."""

from ._core import (
    __version__,
    bspline_design,
    difference_penalty,
    evaluate,
    experiment,
    fit,
    kaplan_meier,
    make_cuts,
    ped_augment,
    quantile,
    simulate,
)

__all__ = [
    "__version__",
    "bspline_design",
    "difference_penalty",
    "evaluate",
    "experiment",
    "fit",
    "kaplan_meier",
    "make_cuts",
    "ped_augment",
    "quantile",
    "simulate",
]
