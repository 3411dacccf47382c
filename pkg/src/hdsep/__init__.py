"""Synthetic high-dimensional spectra, classifiers and separability audits."""

__version__ = "0.1.0"

from .synthgen import SpectraMatrix  # noqa: E402
from .evalharness import EvalPlan, Holdout, LeaveOneOut, StratifiedKFold, evaluate  # noqa: E402
from .models import ModelSpec, fit_model  # noqa: E402

__all__ = [
    "__version__",
    "SpectraMatrix",
    "EvalPlan",
    "Holdout",
    "LeaveOneOut",
    "StratifiedKFold",
    "evaluate",
    "ModelSpec",
    "fit_model",
]
