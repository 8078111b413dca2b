"""Robust PCA: linear subspaces minimizing the sum of Euclidean distances to the data."""

__version__ = "0.1.0"

from .anchor import AnchorReport, certify_anchor, one_sided_derivative
from .data import DataSet, RawPointCloud, center, load_csv
from .estimator import L1PCA
from .exceptions import (
    AtAnchor,
    DataError,
    DegenerateData,
    L1PCAError,
    NotAnAnchor,
    RankDeficient,
)
from .objective import anchor_status, eval_E, eval_F, gradients
from .solver import FitResult, SolverConfig, fit

__all__ = [
    "AnchorReport",
    "AtAnchor",
    "DataError",
    "DataSet",
    "DegenerateData",
    "FitResult",
    "L1PCA",
    "L1PCAError",
    "NotAnAnchor",
    "RankDeficient",
    "RawPointCloud",
    "SolverConfig",
    "anchor_status",
    "center",
    "certify_anchor",
    "eval_E",
    "eval_F",
    "fit",
    "gradients",
    "load_csv",
    "one_sided_derivative",
]
