"""Gaussian kernels, double centering and centered kernel-target alignment.

The public functions here are the readable reference path: they build full
matrices and are what the tests check against brute-force loops. The
selector and the greedy baselines use the closed forms at the bottom of the
module (``alignment_from_sqdist`` and friends), which avoid
materialising the centered matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DegenerateDataError,
    DegenerateKernelError,
    DegenerateLabelsError,
    InvalidDataError,
    InvalidParameterError,
)

#: Frobenius norm below which a centered kernel is treated as identically zero.
DEGENERATE_NORM = 1e-12

#: Above this many i<j pairs the median heuristic works on a random subset.
MAX_MEDIAN_PAIRS = 100_000


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetric m x m Gram matrix."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))

    @property
    def m(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class CenteredKernel:
    """Doubly centered Gram matrix ``H K H`` with its cached Frobenius norm."""

    values: np.ndarray
    frobenius_norm: float = field(init=False)

    def __post_init__(self):
        v = _frozen(self.values)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "frobenius_norm", float(np.sqrt(np.sum(v * v))))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def scaled(self, factor: float) -> "CenteredKernel":
        return CenteredKernel(self.values * factor)


@dataclass(frozen=True)
class BandwidthSpec:
    """How the Gaussian width ``gamma`` is chosen.

    ``mode`` is ``"fixed"`` (use ``gamma`` as given) or ``"median"``
    (reciprocal median pairwise squared distance of whatever feature subset
    the kernel is built on).
    """

    mode: str = "median"
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.mode == "fixed":
            if self.gamma is None or not np.isfinite(self.gamma) or self.gamma <= 0:
                raise InvalidParameterError(f"fixed bandwidth needs gamma > 0, got {self.gamma!r}")
        elif self.mode == "median":
            if self.gamma is not None:
                raise InvalidParameterError("median-heuristic bandwidth takes no gamma")
        else:
            raise InvalidParameterError(f"unknown bandwidth mode {self.mode!r}")

    @classmethod
    def fixed(cls, gamma: float) -> "BandwidthSpec":
        return cls("fixed", float(gamma))

    @classmethod
    def median(cls) -> "BandwidthSpec":
        return cls("median")

    def resolve(self, sqdist: np.ndarray) -> float:
        """Return gamma for a kernel built from the squared-distance matrix ``sqdist``."""
        if self.mode == "fixed":
            return self.gamma
        return median_gamma_from_sqdist(sqdist)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "gamma": self.gamma}


def _check_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InvalidDataError(f"expected a 2-d sample matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidDataError("sample matrix contains non-finite entries")
    return X


def sq_distances(X) -> np.ndarray:
    """Pairwise squared Euclidean distances between the rows of ``X``."""
    X = _check_matrix(X)
    sq = np.einsum("ij,ij->i", X, X)
    D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def gaussian_kernel(X, gamma: float) -> KernelMatrix:
    """``K[i, j] = exp(-gamma * ||x_i - x_j||^2)``."""
    X = _check_matrix(X)
    if X.shape[0] < 2:
        raise InvalidDataError("need at least two samples")
    if not np.isfinite(gamma) or gamma <= 0:
        raise InvalidParameterError(f"gamma must be positive, got {gamma!r}")
    K = np.exp(-gamma * sq_distances(X))
    # exact symmetry regardless of rounding in the Gram product
    K = np.triu(K) + np.triu(K, 1).T
    return KernelMatrix(K)


def label_kernel(y) -> KernelMatrix:
    """Linear kernel ``y y^T`` on labels in {-1, +1}."""
    y = np.asarray(y, dtype=float).ravel()
    bad = ~np.isin(y, (-1.0, 1.0))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise InvalidDataError(f"label {y[i]!r} at position {i} is not -1 or +1")
    return KernelMatrix(np.outer(y, y))


def center(K) -> CenteredKernel:
    """Conjugate ``K`` by ``H = I - 11^T/m``."""
    V = K.values if isinstance(K, (KernelMatrix, CenteredKernel)) else np.asarray(K, dtype=float)
    if V.ndim != 2 or V.shape[0] != V.shape[1] or V.shape[0] < 2:
        raise InvalidDataError(f"expected a square matrix with m >= 2, got shape {V.shape}")
    C = V - V.mean(axis=0, keepdims=True)
    C = C - C.mean(axis=1, keepdims=True)
    return CenteredKernel(C)


def alignment(Cx: CenteredKernel, Cy: CenteredKernel) -> float:
    """Normalised Frobenius inner product of two centered kernels."""
    if Cx.m != Cy.m:
        raise InvalidDataError(f"kernel sizes differ: {Cx.m} vs {Cy.m}")
    if Cx.frobenius_norm < DEGENERATE_NORM:
        raise DegenerateKernelError("feature kernel is constant after centering")
    if Cy.frobenius_norm < DEGENERATE_NORM:
        raise DegenerateLabelsError("label kernel is constant after centering (single class?)")
    inner = float(np.sum(Cx.values * Cy.values))
    return inner / (Cx.frobenius_norm * Cy.frobenius_norm)


def _median_of_pairs(d: np.ndarray) -> float:
    med = float(np.median(d))
    if med > 0:
        return med
    # heavily tied data (e.g. binary features): fall back to the non-zero pairs
    pos = d[d > 0]
    if pos.size == 0:
        raise DegenerateDataError("all rows are identical; median heuristic undefined")
    return float(np.median(pos))


def median_heuristic(X, rng: Optional[np.random.Generator] = None) -> float:
    """``1 / median`` of pairwise squared distances over i<j pairs.

    For more than ``MAX_MEDIAN_PAIRS`` pairs a uniform random subset of that
    size is used; ``rng`` defaults to a generator seeded with 0 so the result
    stays deterministic.
    """
    X = _check_matrix(X)
    m = X.shape[0]
    if m < 2:
        raise InvalidDataError("need at least two samples")
    n_pairs = m * (m - 1) // 2
    if n_pairs <= MAX_MEDIAN_PAIRS:
        iu = np.triu_indices(m, 1)
        d = sq_distances(X)[iu]
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        i = rng.integers(0, m, size=2 * MAX_MEDIAN_PAIRS)
        j = rng.integers(0, m, size=2 * MAX_MEDIAN_PAIRS)
        keep = i != j
        i, j = i[keep][:MAX_MEDIAN_PAIRS], j[keep][:MAX_MEDIAN_PAIRS]
        diff = X[i] - X[j]
        d = np.einsum("ij,ij->i", diff, diff)
    return 1.0 / _median_of_pairs(d)


def median_gamma_from_sqdist(D: np.ndarray) -> float:
    """Median heuristic when the squared-distance matrix is already at hand."""
    m = D.shape[0]
    iu = np.triu_indices(m, 1)
    return 1.0 / _median_of_pairs(D[iu])


# ---------------------------------------------------------------------------
# closed forms used on the hot paths
# ---------------------------------------------------------------------------


def centered_norm_sq(K: np.ndarray) -> np.ndarray:
    """``||H K H||_F^2`` for symmetric ``K`` (batched over leading axes).

    Uses ``||K||^2 - 2/m ||K 1||^2 + (1^T K 1)^2 / m^2``.
    """
    m = K.shape[-1]
    r = K.sum(axis=-1)
    out = (K * K).sum(axis=(-2, -1)) - (2.0 / m) * (r * r).sum(axis=-1) + r.sum(axis=-1) ** 2 / m**2
    return np.maximum(out, 0.0)


def centered_label_alignment(K: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Alignment of ``H K H`` with ``H y y^T H`` (batched over leading axes).

    With ``yc = y - mean(y)`` the inner product is ``yc^T K yc`` and the label
    norm is ``||yc||^2``.
    """
    yc = y - y.mean(axis=-1, keepdims=True)
    ny = (yc * yc).sum(axis=-1)
    num = np.einsum("...i,...i->...", yc, np.einsum("...ij,...j->...i", K, yc))
    nk = np.sqrt(centered_norm_sq(K))
    if np.any(ny < DEGENERATE_NORM):
        raise DegenerateLabelsError("label kernel is constant after centering (single class?)")
    if np.any(nk < DEGENERATE_NORM):
        raise DegenerateKernelError("feature kernel is constant after centering")
    return num / (ny * nk)


def alignment_from_sqdist(D: np.ndarray, y: np.ndarray, bandwidth: BandwidthSpec) -> float:
    """Gaussian-kernel/label alignment for one squared-distance matrix."""
    gamma = bandwidth.resolve(D)
    return float(centered_label_alignment(np.exp(-gamma * D), y))
