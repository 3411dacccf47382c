"""Spectra CSV ingestion, wavelength masking, region selection and class filtering.

The canonical file has a header row ``label,<w1>,<w2>,...`` with strictly
increasing wavelengths in nm, then one spectrum per row. Intensities are kept
raw; nothing here rescales or centres them.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DataFormatError
from .synthgen import SpectraMatrix

__all__ = [
    "RAYLEIGH_MASK",
    "ClassPairTask",
    "DatasetManifest",
    "load_spectra",
    "save_spectra",
    "apply_mask",
    "select_region",
    "filter_classes",
    "class_covariance",
    "save_covariance",
    "load_manifest",
    "check_manifest",
    "convert_wide_csv",
]

RAYLEIGH_MASK: Tuple[Tuple[float, float], ...] = ((380.0, 420.0),)


@dataclass(frozen=True)
class ClassPairTask:
    """Two classes to compare and the wavelength intervals removed beforehand."""

    positive: str
    negative: str
    masks: Tuple[Tuple[float, float], ...] = RAYLEIGH_MASK

    def __post_init__(self):
        if self.positive == self.negative:
            raise ValueError("task classes must be distinct")

    @classmethod
    def parse(cls, text: str, masks=RAYLEIGH_MASK) -> "ClassPairTask":
        parts = text.split(":")
        if len(parts) != 2 or not all(parts):
            raise ValueError(f"task must look like A:B, got {text!r}")
        return cls(parts[0], parts[1], tuple(tuple(m) for m in masks))

    @property
    def name(self) -> str:
        return f"{self.positive}:{self.negative}"


def _fmt(v: float) -> str:
    return repr(float(v))


def load_spectra(path, classes: Optional[Iterable[str]] = None) -> SpectraMatrix:
    """Read a canonical spectra CSV; ``classes`` restricts the allowed labels."""
    path = Path(path)
    allowed = None if classes is None else set(classes)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: empty file") from None
        if len(header) < 2 or header[0].strip().lower() != "label":
            raise DataFormatError(f"{path}: header must start with 'label' followed by wavelengths")
        axis = np.empty(len(header) - 1)
        for j, h in enumerate(header[1:], start=1):
            try:
                axis[j - 1] = float(h)
            except ValueError:
                raise DataFormatError(f"{path}: header column {j} ({h!r}) is not a wavelength") from None
        if not np.all(np.isfinite(axis)):
            raise DataFormatError(f"{path}: non-finite wavelength in header")
        bad = np.flatnonzero(np.diff(axis) <= 0)
        if bad.size:
            j = int(bad[0]) + 2
            raise DataFormatError(f"{path}: wavelengths not strictly increasing at header column {j}")
        labels: List[str] = []
        rows: List[List[float]] = []
        for r, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise DataFormatError(f"{path}: row {r} has {len(row)} columns, expected {len(header)}")
            lab = row[0].strip()
            if allowed is not None and lab not in allowed:
                raise DataFormatError(f"{path}: row {r} has unknown label {lab!r}")
            vals = []
            for j, cell in enumerate(row[1:], start=1):
                try:
                    vals.append(float(cell))
                except ValueError:
                    raise DataFormatError(f"{path}: row {r}, column {j}: {cell!r} is not a number") from None
            labels.append(lab)
            rows.append(vals)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    return SpectraMatrix(np.array(rows, dtype=float), axis, np.array(labels))


def save_spectra(data: SpectraMatrix, path) -> None:
    """Write the canonical CSV; values use ``repr`` so a reload is bit-exact."""
    if data.labels is None:
        raise ValueError("only labelled matrices can be saved in the canonical format")
    axis = data.axis if data.axis is not None else np.arange(data.n_features, dtype=float)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", *(_fmt(a) for a in axis)])
        for lab, row in zip(data.labels, data.values):
            w.writerow([str(lab), *(_fmt(v) for v in row)])


def _need_axis(data: SpectraMatrix):
    if data.axis is None:
        raise ValueError("operation needs a wavelength axis")
    return data.axis


def _in_any(axis: np.ndarray, intervals) -> np.ndarray:
    hit = np.zeros(axis.shape[0], dtype=bool)
    for lo, hi in intervals:
        hit |= (axis >= lo) & (axis < hi)
    return hit


def apply_mask(data: SpectraMatrix, intervals: Sequence[Tuple[float, float]]) -> SpectraMatrix:
    """Drop every column whose wavelength lies in one of the ``[lo, hi)`` intervals."""
    intervals = [tuple(map(float, iv)) for iv in intervals]
    if not intervals:
        return data
    axis = _need_axis(data)
    keep = ~_in_any(axis, intervals)
    if not keep.any():
        raise ValueError("mask removes every column")
    return data.take_columns(np.flatnonzero(keep))


def select_region(data: SpectraMatrix, region) -> SpectraMatrix:
    """Keep the columns of ``region`` (anything with a ``columns(data)`` method)."""
    cols = np.asarray(region.columns(data), dtype=np.int64)
    if cols.size == 0:
        raise ValueError(f"region {getattr(region, 'name', region)!r} selects no columns")
    return data.take_columns(cols)


def filter_classes(data: SpectraMatrix, task: ClassPairTask, apply_masks: bool = True) -> SpectraMatrix:
    """Rows of the two task classes, in file order, with the task masks applied."""
    if data.labels is None:
        raise ValueError("data must be labelled")
    labs = data.labels.astype(str)
    present = set(labs.tolist())
    missing = [c for c in (task.positive, task.negative) if c not in present]
    if missing:
        raise DataFormatError(f"classes not present in data: {missing}")
    rows = np.flatnonzero((labs == task.positive) | (labs == task.negative))
    out = data.take_rows(rows)
    if apply_masks and task.masks:
        out = apply_mask(out, task.masks)
    return out


def class_covariance(data: SpectraMatrix, label) -> np.ndarray:
    """Unbiased sample covariance of one class (exactly symmetric)."""
    if data.labels is None:
        raise ValueError("data must be labelled")
    X = data.values[data.labels == label]
    if X.shape[0] < 2:
        raise ValueError(f"class {label!r} has {X.shape[0]} rows; covariance needs at least 2")
    Xc = X - X.mean(axis=0)
    C = Xc.T @ Xc / (X.shape[0] - 1)
    return 0.5 * (C + C.T)


def save_covariance(cov: np.ndarray, path, axis: Optional[np.ndarray] = None) -> None:
    """Dense CSV; with an axis the first row and column carry the wavelengths."""
    cov = np.asarray(cov, dtype=float)
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if axis is not None:
            w.writerow(["wavelength", *(_fmt(a) for a in axis)])
            for a, row in zip(axis, cov):
                w.writerow([_fmt(a), *(_fmt(v) for v in row)])
        else:
            for row in cov:
                w.writerow([_fmt(v) for v in row])


@dataclass(frozen=True)
class DatasetManifest:
    """Declared class set and expected row counts (counts may be ``None``)."""

    name: str
    classes: Dict[str, Optional[int]] = field(default_factory=dict)
    source: str = ""


def load_manifest(path) -> DatasetManifest:
    with Path(path).open() as fh:
        d = json.load(fh)
    if "classes" not in d:
        raise DataFormatError(f"{path}: manifest lacks 'classes'")
    classes = d["classes"]
    if isinstance(classes, list):
        classes = {c: None for c in classes}
    return DatasetManifest(d.get("name", Path(path).stem), dict(classes), d.get("source", ""))


def check_manifest(data: SpectraMatrix, manifest: DatasetManifest) -> dict:
    """Observed vs declared counts per class; mismatches are reported, not raised."""
    labs, counts = np.unique(np.asarray(data.labels).astype(str), return_counts=True)
    observed = dict(zip(labs.tolist(), counts.tolist()))
    report = {"name": manifest.name, "classes": {}, "unknown_labels": sorted(set(observed) - set(manifest.classes))}
    for c, expected in manifest.classes.items():
        got = observed.get(c, 0)
        report["classes"][c] = {"expected": expected, "observed": got,
                                "match": None if expected is None else expected == got}
    report["ok"] = not report["unknown_labels"] and all(
        v["match"] in (None, True) for v in report["classes"].values()
    )
    return report


def _is_number(text: str) -> bool:
    try:
        return math.isfinite(float(text))
    except ValueError:
        return False


def convert_wide_csv(src, dst, label_column: str = "label", transpose: bool = False,
                     delimiter: str = ",") -> SpectraMatrix:
    """Convert a generic spreadsheet export to the canonical CSV.

    Row layout (default): one spectrum per row, a label column named
    ``label_column`` and numeric wavelength headers; other non-numeric columns
    (sample ids, dates) are dropped. Column layout (``transpose=True``): the
    first column holds wavelengths and each further column is one spectrum
    whose header is its label. Columns are sorted by wavelength.
    """
    with Path(src).open(newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise DataFormatError(f"{src}: nothing to convert")
    header = [h.strip() for h in rows[0]]
    if transpose:
        labels = header[1:]
        try:
            axis = np.array([float(r[0]) for r in rows[1:]])
            values = np.array([[float(c) for c in r[1:]] for r in rows[1:]]).T
        except ValueError as exc:
            raise DataFormatError(f"{src}: non-numeric cell ({exc})") from None
    else:
        if label_column not in header:
            raise DataFormatError(f"{src}: no column named {label_column!r}")
        li = header.index(label_column)
        wcols = [j for j, h in enumerate(header) if j != li and _is_number(h)]
        if not wcols:
            raise DataFormatError(f"{src}: no numeric wavelength columns")
        axis = np.array([float(header[j]) for j in wcols])
        labels, vals = [], []
        for r, row in enumerate(rows[1:], start=2):
            if len(row) != len(header):
                raise DataFormatError(f"{src}: row {r} has {len(row)} columns, expected {len(header)}")
            labels.append(row[li].strip())
            try:
                vals.append([float(row[j]) for j in wcols])
            except ValueError:
                raise DataFormatError(f"{src}: row {r} has a non-numeric intensity") from None
        values = np.array(vals)
    order = np.argsort(axis, kind="stable")
    axis, values = axis[order], values[:, order]
    if np.any(np.diff(axis) <= 0):
        raise DataFormatError(f"{src}: duplicate wavelengths")
    data = SpectraMatrix(values, axis, np.array(labels))
    save_spectra(data, dst)
    return data
