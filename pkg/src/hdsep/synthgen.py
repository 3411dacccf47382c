"""Seeded generators for the synthetic noise and spectra datasets.

All samplers are pure functions of ``(spec, count, seed)``: the same inputs
always return bit-identical matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.signal import lfilter

from ._seeding import derive_seed, make_rng

__all__ = [
    "SpectraMatrix",
    "Isotropic",
    "ToeplitzGeometric",
    "GaussianClassSpec",
    "SkewNormalClassSpec",
    "LorentzianSpectrumSpec",
    "sample_gaussian_class",
    "sample_skew_normal_class",
    "generate_lorentzian_class",
    "lorentzian",
    "toeplitz_covariance",
    "stack_classes",
    "NormHistogram",
    "norm_histogram",
    "histogram_overlap",
    "concentration_table",
]


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SpectraMatrix:
    """N x n intensity matrix with an optional axis and optional row labels."""

    values: np.ndarray
    axis: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1 and values.size == 0:
            values = values.reshape(0, 0)
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {values.shape}")
        object.__setattr__(self, "values", _frozen(values))
        if self.axis is not None:
            axis = _frozen(self.axis)
            if axis.ndim != 1 or axis.shape[0] != values.shape[1]:
                raise ValueError(
                    f"axis length {axis.shape} does not match width {values.shape[1]}"
                )
            if axis.size > 1 and not np.all(np.diff(axis) > 0):
                raise ValueError("axis must be strictly increasing")
            object.__setattr__(self, "axis", axis)
        if self.labels is not None:
            labels = np.array(self.labels, copy=True)
            if labels.ndim != 1 or labels.shape[0] != values.shape[0]:
                raise ValueError(
                    f"labels length {labels.shape} does not match row count {values.shape[0]}"
                )
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def with_labels(self, labels) -> "SpectraMatrix":
        return SpectraMatrix(self.values, self.axis, labels)

    def take_rows(self, idx) -> "SpectraMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        labels = None if self.labels is None else self.labels[idx]
        return SpectraMatrix(self.values[idx], self.axis, labels)

    def take_columns(self, idx, keep_axis: bool = True) -> "SpectraMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        axis = self.axis[idx] if (keep_axis and self.axis is not None) else None
        return SpectraMatrix(self.values[:, idx], axis, self.labels)

    def equals(self, other: "SpectraMatrix") -> bool:
        def same(a, b):
            if a is None or b is None:
                return a is None and b is None
            return a.shape == b.shape and bool(np.all(a == b))

        return (
            same(self.values, other.values)
            and same(self.axis, other.axis)
            and same(self.labels, other.labels)
        )


# --- class specifications ---------------------------------------------------


@dataclass(frozen=True)
class Isotropic:
    @property
    def rho(self) -> float:
        return 0.0


@dataclass(frozen=True)
class ToeplitzGeometric:
    rho: float

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")


Covariance = Union[Isotropic, ToeplitzGeometric]


@dataclass(frozen=True)
class GaussianClassSpec:
    """``N(mean * 1, sigma^2 * R)`` with ``R`` identity or ``rho^|i-j|``."""

    dim: int
    mean: float = 0.0
    sigma: float = 1.0
    covariance: Covariance = field(default_factory=Isotropic)

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not isinstance(self.covariance, (Isotropic, ToeplitzGeometric)):
            raise TypeError("covariance must be Isotropic or ToeplitzGeometric")


@dataclass(frozen=True)
class SkewNormalClassSpec:
    """Independent univariate skew-normal coordinates.

    ``location`` and ``shape`` may be scalars or length-``dim`` sequences;
    the scale matrix is ``scale**2 * I``.
    """

    dim: int
    location: Union[float, Sequence[float]] = 0.0
    scale: float = 1.0
    shape: Union[float, Sequence[float]] = 0.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        for name in ("location", "shape"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.ndim > 1 or (v.ndim == 1 and v.shape[0] != self.dim):
                raise ValueError(f"{name} must be scalar or length dim")

    def _vec(self, name):
        return np.broadcast_to(np.asarray(getattr(self, name), dtype=float), (self.dim,))

    @property
    def delta(self) -> np.ndarray:
        a = self._vec("shape")
        return a / np.sqrt(1.0 + a * a)

    def mean(self) -> np.ndarray:
        return self._vec("location") + self.scale * self.delta * np.sqrt(2.0 / np.pi)

    def variance(self) -> np.ndarray:
        return self.scale**2 * (1.0 - 2.0 * self.delta**2 / np.pi)

    def skewness(self) -> np.ndarray:
        m = self.delta * np.sqrt(2.0 / np.pi)
        return (4.0 - np.pi) / 2.0 * m**3 / (1.0 - m**2) ** 1.5


@dataclass(frozen=True)
class LorentzianSpectrumSpec:
    """One jittered unit-height Lorentzian per spectrum, optional additive noise.

    ``noise`` is ``(noise_mean, noise_sd)`` or ``None``.
    """

    dim: int
    centre_mean: float = 50.0
    centre_sd: float = 10.0
    fwhm: float = 7.0
    count: int = 500
    noise: Optional[tuple] = None

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")
        if int(self.count) != self.count or self.count < 1:
            raise ValueError(f"count must be a positive integer, got {self.count}")
        if not self.centre_sd > 0:
            raise ValueError("centre_sd must be positive")
        if not self.fwhm > 0:
            raise ValueError("fwhm must be positive")
        if self.noise is not None:
            if len(self.noise) != 2 or not self.noise[1] > 0:
                raise ValueError("noise must be (mean, sd) with sd > 0")


# --- samplers ---------------------------------------------------------------


def _check_count(count):
    if int(count) != count or count < 1:
        raise ValueError(f"count must be a positive integer, got {count}")
    return int(count)


def toeplitz_covariance(dim: int, sigma: float, rho: float) -> np.ndarray:
    i = np.arange(dim)
    return sigma**2 * rho ** np.abs(i[:, None] - i[None, :]).astype(float)


def sample_gaussian_class(spec: GaussianClassSpec, count: int, seed: int) -> SpectraMatrix:
    """Draw ``count`` rows from the Gaussian class.

    Rows follow the stationary AR(1) recursion ``x1 = mu + s z1``,
    ``xi = mu + rho (x(i-1) - mu) + s sqrt(1 - rho^2) zi``; ``rho = 0`` is the
    isotropic case and shares the same code path and draws.
    """
    count = _check_count(count)
    rng = make_rng(seed)
    z = rng.standard_normal((count, spec.dim))
    rho = float(spec.covariance.rho)
    if rho == 0.0:
        dev = spec.sigma * z
    else:
        innov = z * (spec.sigma * np.sqrt(1.0 - rho * rho))
        innov[:, 0] = spec.sigma * z[:, 0]
        dev = lfilter([1.0], [1.0, -rho], innov, axis=1)
    return SpectraMatrix(spec.mean + dev)


def sample_skew_normal_class(spec: SkewNormalClassSpec, count: int, seed: int) -> SpectraMatrix:
    """Stochastic representation ``x = mu + s (delta |z0| + sqrt(1 - delta^2) z1)``."""
    count = _check_count(count)
    rng = make_rng(seed)
    z = rng.standard_normal((2, count, spec.dim))
    delta = spec.delta
    x = spec._vec("location") + spec.scale * (
        delta * np.abs(z[0]) + np.sqrt(1.0 - delta * delta) * z[1]
    )
    return SpectraMatrix(x)


def lorentzian(x, centre, fwhm):
    """Unit-height Lorentzian, equal to 0.5 at ``centre +/- fwhm/2``."""
    hw2 = (0.5 * fwhm) ** 2
    return hw2 / ((np.asarray(x, dtype=float) - centre) ** 2 + hw2)


def generate_lorentzian_class(spec: LorentzianSpectrumSpec, seed: int) -> SpectraMatrix:
    """Spectra on the pixel axis ``1..dim``; noise is added unclipped."""
    rng = make_rng(seed)
    centres = spec.centre_mean + spec.centre_sd * rng.standard_normal(spec.count)
    axis = np.arange(1, spec.dim + 1, dtype=float)
    values = lorentzian(axis[None, :], centres[:, None], spec.fwhm)
    if spec.noise is not None:
        mu, sd = spec.noise
        values = values + (mu + sd * rng.standard_normal(values.shape))
    return SpectraMatrix(values, axis=axis)


def stack_classes(first: SpectraMatrix, second: SpectraMatrix, labels=(0, 1)) -> SpectraMatrix:
    """Concatenate two class matrices and attach labels."""
    if first.n_features != second.n_features:
        raise ValueError("class matrices have different widths")
    y = np.concatenate(
        [np.full(first.n_samples, labels[0]), np.full(second.n_samples, labels[1])]
    )
    axis = first.axis if first.axis is not None else None
    return SpectraMatrix(np.vstack([first.values, second.values]), axis, y)


# --- concentration of measure -----------------------------------------------


@dataclass(frozen=True, eq=False)
class NormHistogram:
    edges: np.ndarray
    counts: np.ndarray
    mean: float
    sd: float
    norms: np.ndarray

    @property
    def density(self) -> np.ndarray:
        return self.counts / self.counts.sum()


def norm_histogram(data: SpectraMatrix, bins: int, range: Optional[tuple] = None) -> NormHistogram:
    """Histogram of Euclidean row norms with their mean and sample sd."""
    values = data.values if isinstance(data, SpectraMatrix) else np.asarray(data, dtype=float)
    if values.size == 0 or values.shape[0] == 0:
        raise ValueError("norm_histogram needs a non-empty matrix")
    if int(bins) != bins or bins < 1:
        raise ValueError("bins must be a positive integer")
    norms = np.sqrt(np.einsum("ij,ij->i", values, values))
    counts, edges = np.histogram(norms, bins=int(bins), range=range)
    sd = float(norms.std(ddof=1)) if norms.size > 1 else 0.0
    return NormHistogram(edges, counts, float(norms.mean()), sd, norms)


def histogram_overlap(a: NormHistogram, b: NormHistogram) -> float:
    """Overlap coefficient ``sum_b min(p_b, q_b)`` of two histograms on one grid."""
    if a.edges.shape != b.edges.shape or not np.allclose(a.edges, b.edges):
        raise ValueError("histograms must share a bin grid")
    return float(np.minimum(a.density, b.density).sum())


def concentration_table(
    n_list=(2, 50, 500, 5000),
    sigmas=(1.0, 1.1),
    samples: int = 10_000,
    bins: int = 60,
    mean: float = 0.0,
    seed: int = 0,
):
    """Norm histograms per ``(n, sigma)`` on a shared grid per ``n``.

    Returns a list of dicts, one per ``n``, with the per-sigma histograms and
    the overlap between the first two sigmas (``None`` with a single sigma).
    """
    out = []
    for n in n_list:
        mats = []
        for j, s in enumerate(sigmas):
            spec = GaussianClassSpec(dim=int(n), mean=mean, sigma=float(s))
            m = sample_gaussian_class(spec, samples, derive_seed(seed, "concentration", n, j))
            if mean != 0.0:
                m = SpectraMatrix(m.values - mean)
            mats.append(m)
        norms = [np.sqrt(np.einsum("ij,ij->i", m.values, m.values)) for m in mats]
        lo = min(float(v.min()) for v in norms)
        hi = max(float(v.max()) for v in norms)
        if hi <= lo:
            hi = lo + 1.0
        hists = [norm_histogram(m, bins, range=(lo, hi)) for m in mats]
        overlap = histogram_overlap(hists[0], hists[1]) if len(hists) > 1 else None
        out.append({"n": int(n), "sigmas": [float(s) for s in sigmas], "histograms": hists, "overlap": overlap})
    return out
