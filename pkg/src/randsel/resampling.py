"""Seed-derived random draws of feature subsets and row subsamples.

Every bootstrap draw gets its own generator, derived from
``(master_seed, iteration, bootstrap_index)``. A draw therefore never
depends on how many draws came before it or on which worker produced it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError

_MASK64 = (1 << 64) - 1


def derive_stream(master_seed: int, iteration: int, bootstrap_index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(
        [int(master_seed) & _MASK64, int(iteration) & _MASK64, int(bootstrap_index) & _MASK64]
    )
    return np.random.Generator(np.random.PCG64(seq))


@dataclass(frozen=True)
class DrawPair:
    """Coupled draw: ``rows`` are shared by the base set and base + plus."""

    rows: np.ndarray
    base_features: np.ndarray
    plus_feature: int

    @property
    def plus_features(self) -> np.ndarray:
        return np.sort(np.append(self.base_features, self.plus_feature))


@dataclass(frozen=True)
class UnmatchedDraw:
    """Independent draws of a size-n//2 set and a size-n//2+1 set."""

    base_rows: np.ndarray
    base_features: np.ndarray
    plus_rows: np.ndarray
    plus_features: np.ndarray


def _check(n_active: int, m: int, s: int):
    if n_active < 2:
        raise InvalidParameterError(f"need at least 2 active features, got {n_active}")
    if s < 2 or s > m:
        raise InvalidParameterError(f"subsample size must satisfy 2 <= s <= m={m}, got {s}")


def draw_rows(stream: np.random.Generator, m: int, s: int) -> np.ndarray:
    """``s`` distinct row ids, uniform without replacement."""
    return stream.choice(m, size=s, replace=False)


def draw_pair(stream: np.random.Generator, n_active: int, m: int, s: int) -> DrawPair:
    """Coupled draw over active positions ``0..n_active-1``.

    Features are drawn before rows so a caller can redraw rows alone
    (``draw_rows`` on the same stream) while keeping the feature pair.
    """
    _check(n_active, m, s)
    half = n_active // 2
    perm = stream.permutation(n_active)
    base = np.sort(perm[:half])
    plus = int(perm[half])
    rows = draw_rows(stream, m, s)
    return DrawPair(rows, base, plus)


def draw_unmatched(stream: np.random.Generator, n_active: int, m: int, s: int) -> UnmatchedDraw:
    """Literal pseudocode draw: two unrelated subsets on two unrelated row samples."""
    _check(n_active, m, s)
    half = n_active // 2
    base = np.sort(stream.permutation(n_active)[:half])
    base_rows = draw_rows(stream, m, s)
    plus = np.sort(stream.permutation(n_active)[: half + 1])
    plus_rows = draw_rows(stream, m, s)
    return UnmatchedDraw(base_rows, base, plus_rows, plus)
