"""Comparison selectors: greedy forward/backward HSIC and correlation filtering."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .datagen import Dataset
from .errors import DegenerateDataError, DegenerateKernelError, DegenerateLabelsError, InvalidParameterError
from .kernelcore import BandwidthSpec, alignment_from_sqdist


@dataclass
class FeatureRanking:
    """Original feature ids, most important first, with the score each got
    when it was placed."""

    method: str
    ids: list
    scores: list
    flags: dict = field(default_factory=dict)

    def prefix(self, k: int) -> list:
        return sorted(self.ids[:k])

    def __len__(self):
        return len(self.ids)


def _column_sqdist(x: np.ndarray) -> np.ndarray:
    d = x[:, None] - x[None, :]
    return d * d


def _score(D: np.ndarray, y: np.ndarray, bandwidth: BandwidthSpec) -> float:
    # a candidate whose kernel is constant (e.g. a constant column) can never win
    try:
        return alignment_from_sqdist(D, y, bandwidth)
    except (DegenerateDataError, DegenerateKernelError):
        return -np.inf


def _prepare(data: Dataset):
    if not data.has_both_classes():
        raise DegenerateLabelsError("labels contain a single class")
    std = data.standardized()
    return std.X, std.y


def fohsic(data: Dataset, bandwidth: Optional[BandwidthSpec] = None, k_max: Optional[int] = None) -> FeatureRanking:
    """Greedy forward selection on full-data centered alignment.

    Each step adds the candidate whose inclusion gives the largest
    alignment; ties go to the smaller id.
    """
    bandwidth = BandwidthSpec.median() if bandwidth is None else bandwidth
    n = data.n_features
    k_max = n if k_max is None else int(k_max)
    if not 1 <= k_max <= n:
        raise InvalidParameterError(f"k_max must be in [1, {n}], got {k_max}")
    X, y = _prepare(data)
    m = X.shape[0]
    D_sel = np.zeros((m, m))
    remaining = list(range(n))
    ids, scores = [], []
    for _ in range(k_max):
        best, best_score, best_D = None, -np.inf, None
        for j in remaining:
            D = D_sel + _column_sqdist(X[:, j])
            score = _score(D, y, bandwidth)
            if best is None or score > best_score:
                best, best_score, best_D = j, score, D
        ids.append(best)
        scores.append(best_score)
        remaining.remove(best)
        D_sel = best_D
    return FeatureRanking("fohsic", ids, scores)


def bahsic(data: Dataset, bandwidth: Optional[BandwidthSpec] = None) -> FeatureRanking:
    """Greedy backward elimination, one feature per step.

    Each step removes the feature whose removal leaves the best-aligned
    remaining set (ties: smaller id removed). The ranking lists the last
    survivor first; an eliminated feature's score is the alignment of the
    set left behind after its removal, and the survivor's score is its own
    single-feature alignment.
    """
    bandwidth = BandwidthSpec.median() if bandwidth is None else bandwidth
    n = data.n_features
    if n < 2:
        raise InvalidParameterError("bahsic needs at least 2 features")
    X, y = _prepare(data)
    cols = [_column_sqdist(X[:, j]) for j in range(n)]
    remaining = list(range(n))
    eliminated, elim_scores = [], []
    while len(remaining) > 1:
        D_all = np.sum([cols[j] for j in remaining], axis=0)
        best, best_score = None, -np.inf
        for j in remaining:
            D = np.maximum(D_all - cols[j], 0.0)
            score = _score(D, y, bandwidth)
            if best is None or score > best_score:
                best, best_score = j, score
        eliminated.append(best)
        elim_scores.append(best_score)
        remaining.remove(best)
    last = remaining[0]
    ids = [last] + eliminated[::-1]
    scores = [_score(cols[last], y, bandwidth)] + elim_scores[::-1]
    return FeatureRanking("bahsic", ids, scores)


def corr_filter(data: Dataset) -> FeatureRanking:
    """Rank by decreasing absolute Pearson correlation with the labels.

    Constant columns get correlation 0 and are listed under
    ``flags["constant"]``.
    """
    X = data.X
    y = data.y
    if X.shape[1] < 1:
        raise InvalidParameterError("need at least one feature")
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    sx = np.sqrt((xc * xc).sum(axis=0))
    sy = np.sqrt((yc * yc).sum())
    constant = sx <= 1e-12 * np.maximum(np.abs(X).max(axis=0), 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = (xc * yc[:, None]).sum(axis=0) / (sx * sy)
    r = np.where(constant | ~np.isfinite(r), 0.0, r)
    score = np.abs(r)
    order = np.lexsort((np.arange(len(score)), -score))
    return FeatureRanking(
        "corr",
        [int(j) for j in order],
        [float(score[j]) for j in order],
        flags={"constant": [int(j) for j in np.flatnonzero(constant)]},
    )
