"""Synthetic benchmark data: XOR and the linear / nonlinear Weston problems."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidDataError, InvalidParameterError

# Versioned generator constants. Changing any of these changes every dataset.
GENERATOR_VERSION = 1
WESTON_LINEAR_GAINS = (1.0, 0.8, 0.6, 0.4, 0.2)
WESTON_INNER_SD = 0.5
WESTON_SHELL_RADIUS = 3.0
WESTON_SHELL_SD = 0.5
XOR_NOISE_SD = 0.3


@dataclass
class Dataset:
    """Sample matrix ``X`` (m x n), labels ``y`` in {-1, +1} and optional truth.

    ``row_ids`` tracks the original row numbers through row subsetting so
    that cross-validation code can audit which rows a selector touched.
    """

    X: np.ndarray
    y: np.ndarray
    relevant: Optional[frozenset] = None
    feature_names: Optional[list] = None
    row_ids: Optional[np.ndarray] = None
    name: str = "data"

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float).ravel()
        if self.X.ndim != 2:
            raise InvalidDataError(f"X must be 2-d, got shape {self.X.shape}")
        if self.X.shape[0] != self.y.shape[0]:
            raise InvalidDataError(f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]} labels")
        if not np.all(np.isfinite(self.X)):
            raise InvalidDataError("X contains non-finite entries")
        bad = ~np.isin(self.y, (-1.0, 1.0))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise InvalidDataError(f"label {self.y[i]!r} at row {i} is not -1 or +1")
        if self.relevant is not None:
            self.relevant = frozenset(int(j) for j in self.relevant)
            if any(j < 0 or j >= self.n_features for j in self.relevant):
                raise InvalidDataError("relevant ids out of range")
        if self.feature_names is None:
            self.feature_names = [f"f{j}" for j in range(self.n_features)]
        elif len(self.feature_names) != self.n_features:
            raise InvalidDataError("feature_names length does not match X")
        if self.row_ids is None:
            self.row_ids = np.arange(self.n_samples)
        else:
            self.row_ids = np.asarray(self.row_ids, dtype=int)

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def has_both_classes(self) -> bool:
        return bool(np.any(self.y > 0) and np.any(self.y < 0))

    def subset_rows(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=int)
        return Dataset(
            self.X[rows], self.y[rows], self.relevant, list(self.feature_names),
            self.row_ids[rows], self.name,
        )

    def standardized(self) -> "Dataset":
        """Copy with every column at zero mean and unit variance.

        Constant columns are only shifted to zero.
        """
        mu = self.X.mean(axis=0)
        sd = self.X.std(axis=0)
        sd[sd == 0] = 1.0
        return Dataset(
            (self.X - mu) / sd, self.y, self.relevant, list(self.feature_names),
            self.row_ids, self.name,
        )


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def _labels(rng: np.random.Generator, m: int) -> np.ndarray:
    return rng.choice(np.array([-1.0, 1.0]), size=m)


def gen_xor(m: int, n: int, noise_sd: float = XOR_NOISE_SD, seed=0) -> Dataset:
    """Two sign features jittered by Gaussian noise; label is their product."""
    if m < 4 or n < 2:
        raise InvalidParameterError(f"xor needs m >= 4 and n >= 2, got m={m}, n={n}")
    if noise_sd < 0:
        raise InvalidParameterError("noise_sd must be nonnegative")
    rng = _rng(seed)
    signs = rng.choice(np.array([-1.0, 1.0]), size=(m, 2))
    y = signs[:, 0] * signs[:, 1]
    X = rng.standard_normal((m, n))
    X[:, :2] = signs + noise_sd * rng.standard_normal((m, 2))
    return Dataset(X, y, relevant=frozenset({0, 1}), name="xor")


def gen_weston_linear(m: int, n: int, seed=0) -> Dataset:
    """Five class-shifted Gaussian features with decreasing gains, rest noise."""
    if m < 10 or n < 5:
        raise InvalidParameterError(f"weston-linear needs m >= 10 and n >= 5, got m={m}, n={n}")
    rng = _rng(seed)
    y = _labels(rng, m)
    X = rng.standard_normal((m, n))
    X[:, :5] += y[:, None] * np.asarray(WESTON_LINEAR_GAINS)
    return Dataset(X, y, relevant=frozenset(range(5)), name="weston-linear")


def gen_weston_nonlinear(m: int, n: int, seed=0) -> Dataset:
    """Radially separated classes on five features, rest noise.

    Positives are an isotropic Gaussian ball; negatives lie on a noisy shell
    around it, so both classes share the same mean and no single linear
    projection separates them.
    """
    if m < 10 or n < 5:
        raise InvalidParameterError(f"weston-nonlinear needs m >= 10 and n >= 5, got m={m}, n={n}")
    rng = _rng(seed)
    y = _labels(rng, m)
    X = rng.standard_normal((m, n))
    inner = WESTON_INNER_SD * rng.standard_normal((m, 5))
    direction = rng.standard_normal((m, 5))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    radius = rng.normal(WESTON_SHELL_RADIUS, WESTON_SHELL_SD, size=m)
    shell = direction * radius[:, None]
    X[:, :5] = np.where(y[:, None] > 0, inner, shell)
    return Dataset(X, y, relevant=frozenset(range(5)), name="weston-nonlinear")


GENERATORS = {
    "xor": gen_xor,
    "weston-linear": gen_weston_linear,
    "weston-nonlinear": gen_weston_nonlinear,
}


def generate(name: str, m: int, n: int, seed=0, **kwargs) -> Dataset:
    try:
        fn = GENERATORS[name]
    except KeyError:
        raise InvalidParameterError(
            f"unknown generator {name!r}; choose from {sorted(GENERATORS)}"
        ) from None
    return fn(m, n, seed=seed, **kwargs)
