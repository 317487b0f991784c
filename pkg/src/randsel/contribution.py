"""Bootstrap estimates of each feature's contribution to kernel-target alignment.

A coupled draw picks rows R, a base set S of ``n_active // 2`` features and
one extra feature ``j``; it yields ``a(S u {j}; R) - a(S; R)``, credited to
``j``. The contribution of ``j`` is the mean of its credited differences.
With ``coupled=False`` the unmatched estimator is used instead: the mean
alignment over draws whose plus set contains ``j`` minus the mean over draws
whose base set does not.

Draws are evaluated in fixed-size chunks, each chunk stacking its Gram
matrices into one (B, s, s) array. Chunk boundaries never depend on the
worker count, so results are bitwise identical for any ``threads``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .datagen import Dataset
from .errors import DegenerateDataError, DegenerateLabelsError, InvalidParameterError
from .kernelcore import BandwidthSpec, _median_of_pairs, centered_label_alignment
from .resampling import derive_stream, draw_pair, draw_rows, draw_unmatched

log = logging.getLogger(__name__)

CHUNK_SIZE = 200
MAX_ROW_RETRIES = 100


@dataclass
class KernelEvalCounter:
    """Number of atomic ``k(x, x')`` evaluations performed."""

    evals: int = 0

    def add(self, n: int):
        if n < 0:
            raise ValueError("kernel evaluation counts only go up")
        self.evals += int(n)


@dataclass
class ContributionTable:
    """Per-feature contribution estimates, indexed like ``features``.

    ``features`` holds original dataset column ids. A feature with
    ``count_plus == 0`` is *unsampled*: its contribution is reported as 0 and
    must not be trusted.
    """

    features: np.ndarray
    mean_plus: np.ndarray
    mean_base: np.ndarray
    contribution: np.ndarray
    count_plus: np.ndarray
    count_base: np.ndarray
    stderr: np.ndarray
    coupled: bool = True

    @property
    def unsampled(self) -> np.ndarray:
        return (self.count_plus == 0) | (self.count_base == 0)

    def as_dict(self) -> dict:
        """Map original feature id -> contribution."""
        return {int(f): float(c) for f, c in zip(self.features, self.contribution)}

    def top(self, k: int) -> np.ndarray:
        """Original ids of the ``k`` largest contributions (ties: smaller id first)."""
        order = np.lexsort((self.features, -self.contribution))
        return self.features[order[:k]]


def _pair_sqdist(Xs: np.ndarray) -> np.ndarray:
    """Squared distances within each sample of a (B, s, d) stack."""
    sq = np.einsum("bij,bij->bi", Xs, Xs)
    D = sq[:, :, None] + sq[:, None, :] - 2.0 * (Xs @ Xs.transpose(0, 2, 1))
    np.maximum(D, 0.0, out=D)
    return D


def _gammas(D: np.ndarray, bandwidth: BandwidthSpec) -> np.ndarray:
    B, s, _ = D.shape
    if bandwidth.mode == "fixed":
        return np.full(B, bandwidth.gamma)
    iu = np.triu_indices(s, 1)
    pairs = D[:, iu[0], iu[1]]
    med = np.median(pairs, axis=1)
    for b in np.flatnonzero(med <= 0):
        try:
            med[b] = _median_of_pairs(pairs[b])
        except DegenerateDataError:
            raise DegenerateDataError(
                "a bootstrap subsample has identical rows on its feature subset"
            ) from None
    return 1.0 / med


def _aligned(D: np.ndarray, gamma: np.ndarray, Y: np.ndarray) -> np.ndarray:
    K = np.exp(-gamma[:, None, None] * D)
    return centered_label_alignment(K, Y)


def _two_class_rows(stream, y, m, s, rows):
    for _ in range(MAX_ROW_RETRIES):
        ys = y[rows]
        if ys.max() > ys.min():
            return rows
        rows = draw_rows(stream, m, s)
    raise DegenerateLabelsError(
        f"{MAX_ROW_RETRIES} consecutive row subsamples of size {s} contained a single class"
    )


def _coupled_chunk(X, y, s, bandwidth, seed, iteration, start, stop):
    m, n_active = X.shape
    B = stop - start
    half = n_active // 2
    rows = np.empty((B, s), dtype=np.intp)
    base = np.empty((B, half), dtype=np.intp)
    plus = np.empty(B, dtype=np.intp)
    for k, b in enumerate(range(start, stop)):
        stream = derive_stream(seed, iteration, b)
        dp = draw_pair(stream, n_active, m, s)
        rows[k] = _two_class_rows(stream, y, m, s, dp.rows)
        base[k] = dp.base_features
        plus[k] = dp.plus_feature
    D = _pair_sqdist(X[rows[:, :, None], base[:, None, :]])
    xp = X[rows, plus[:, None]]
    Dp = D + (xp[:, :, None] - xp[:, None, :]) ** 2
    # one width per draw, shared by both kernels of the pair
    gamma = _gammas(Dp, bandwidth)
    Y = y[rows]
    return _aligned(D, gamma, Y), _aligned(Dp, gamma, Y), plus


def _unmatched_chunk(X, y, s, bandwidth, seed, iteration, start, stop):
    m, n_active = X.shape
    B = stop - start
    half = n_active // 2
    rows_b = np.empty((B, s), dtype=np.intp)
    rows_p = np.empty((B, s), dtype=np.intp)
    base = np.empty((B, half), dtype=np.intp)
    plus = np.empty((B, half + 1), dtype=np.intp)
    for k, b in enumerate(range(start, stop)):
        stream = derive_stream(seed, iteration, b)
        dr = draw_unmatched(stream, n_active, m, s)
        rows_b[k] = _two_class_rows(stream, y, m, s, dr.base_rows)
        rows_p[k] = _two_class_rows(stream, y, m, s, dr.plus_rows)
        base[k] = dr.base_features
        plus[k] = dr.plus_features
    Db = _pair_sqdist(X[rows_b[:, :, None], base[:, None, :]])
    Dp = _pair_sqdist(X[rows_p[:, :, None], plus[:, None, :]])
    a_base = _aligned(Db, _gammas(Db, bandwidth), y[rows_b])
    a_plus = _aligned(Dp, _gammas(Dp, bandwidth), y[rows_p])
    return a_base, a_plus, (base, plus)


def _run_chunks(fn, N, threads, *args):
    bounds = [(i, min(i + CHUNK_SIZE, N)) for i in range(0, N, CHUNK_SIZE)]
    if threads <= 1 or len(bounds) == 1:
        return [fn(*args, lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda b: fn(*args, b[0], b[1]), bounds))


def _mean_and_se(total, total_sq, count):
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(count > 0, total / np.maximum(count, 1), 0.0)
        var = np.where(count > 1, (total_sq - count * mean**2) / np.maximum(count - 1, 1), np.nan)
    return mean, np.maximum(var, 0.0)


def estimate_contributions(
    data: Dataset,
    active,
    n_bootstraps: int,
    subsample: int,
    bandwidth: Optional[BandwidthSpec] = None,
    seed: int = 0,
    iteration: int = 0,
    threads: int = 1,
    coupled: bool = True,
    standardize: bool = True,
    counter: Optional[KernelEvalCounter] = None,
) -> tuple[ContributionTable, KernelEvalCounter]:
    """Estimate contributions of the ``active`` features (original column ids).

    Each draw evaluates two ``subsample x subsample`` Gram matrices, so the
    returned counter grows by exactly ``2 * n_bootstraps * subsample**2``.
    """
    bandwidth = BandwidthSpec.median() if bandwidth is None else bandwidth
    active = np.asarray(sorted(int(j) for j in active), dtype=np.intp)
    n_active = active.size
    m = data.n_samples
    if n_active < 2:
        raise InvalidParameterError(f"need at least 2 active features, got {n_active}")
    if n_bootstraps < 1:
        raise InvalidParameterError("n_bootstraps must be >= 1")
    if subsample < 2 or subsample > m:
        raise InvalidParameterError(f"subsample must satisfy 2 <= s <= m={m}, got {subsample}")
    if not data.has_both_classes():
        raise DegenerateLabelsError("labels contain a single class")
    if threads < 1:
        raise InvalidParameterError("threads must be >= 1")

    src = data.standardized() if standardize else data
    X = np.ascontiguousarray(src.X[:, active])
    y = src.y
    N, s = int(n_bootstraps), int(subsample)
    counter = KernelEvalCounter() if counter is None else counter

    if coupled:
        parts = _run_chunks(_coupled_chunk, N, threads, X, y, s, bandwidth, seed, iteration)
        a_base = np.concatenate([p[0] for p in parts])
        a_plus = np.concatenate([p[1] for p in parts])
        plus = np.concatenate([p[2] for p in parts])
        diff = a_plus - a_base
        count = np.bincount(plus, minlength=n_active)
        mean_plus, _ = _mean_and_se(np.bincount(plus, a_plus, n_active), 0.0, count)
        mean_base, _ = _mean_and_se(np.bincount(plus, a_base, n_active), 0.0, count)
        contrib, var = _mean_and_se(
            np.bincount(plus, diff, n_active), np.bincount(plus, diff * diff, n_active), count
        )
        count_plus = count_base = count
        se = np.sqrt(var / np.maximum(count, 1))
    else:
        parts = _run_chunks(_unmatched_chunk, N, threads, X, y, s, bandwidth, seed, iteration)
        a_base = np.concatenate([p[0] for p in parts])
        a_plus = np.concatenate([p[1] for p in parts])
        base = np.concatenate([p[2][0] for p in parts])
        plus = np.concatenate([p[2][1] for p in parts])
        h = base.shape[1]
        count_plus = np.bincount(plus.ravel(), minlength=n_active)
        wp = np.repeat(a_plus, h + 1)
        mean_plus, var_p = _mean_and_se(
            np.bincount(plus.ravel(), wp, n_active),
            np.bincount(plus.ravel(), wp * wp, n_active),
            count_plus,
        )
        in_base = np.bincount(base.ravel(), minlength=n_active)
        count_base = N - in_base
        wb = np.repeat(a_base, h)
        mean_base, var_b = _mean_and_se(
            a_base.sum() - np.bincount(base.ravel(), wb, n_active),
            (a_base * a_base).sum() - np.bincount(base.ravel(), wb * wb, n_active),
            count_base,
        )
        contrib = mean_plus - mean_base
        se = np.sqrt(var_p / np.maximum(count_plus, 1) + var_b / np.maximum(count_base, 1))

    counter.add(2 * N * s * s)

    table = ContributionTable(
        features=active,
        mean_plus=mean_plus,
        mean_base=mean_base,
        contribution=contrib,
        count_plus=np.asarray(count_plus),
        count_base=np.asarray(count_base),
        stderr=se,
        coupled=coupled,
    )
    unsampled = table.unsampled
    if unsampled.any():
        table.contribution[unsampled] = 0.0
        log.warning(
            "%d of %d features were never sampled with N=%d draws; their contribution is set to 0",
            int(unsampled.sum()), n_active, N,
        )
    return table, counter


def coupled_alignments(
    data: Dataset,
    base,
    extra: int,
    n_draws: int,
    subsample: int,
    bandwidth: Optional[BandwidthSpec] = None,
    seed: int = 0,
    standardize: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Alignment of fixed feature set ``base`` with and without ``extra``.

    Every draw shares one row subsample and one gamma (from the enlarged
    set) between the two kernels. Returns ``(without, with_extra)``.
    """
    bandwidth = BandwidthSpec.median() if bandwidth is None else bandwidth
    base = np.asarray(sorted(int(j) for j in base), dtype=np.intp)
    if extra in set(base.tolist()):
        raise InvalidParameterError("extra feature is already in the base set")
    m = data.n_samples
    if subsample < 2 or subsample > m:
        raise InvalidParameterError(f"subsample must satisfy 2 <= s <= m={m}, got {subsample}")
    src = data.standardized() if standardize else data
    X, y = src.X, src.y
    rows = np.empty((n_draws, subsample), dtype=np.intp)
    for b in range(n_draws):
        stream = derive_stream(seed, 0, b)
        rows[b] = _two_class_rows(stream, y, m, subsample, draw_rows(stream, m, subsample))
    without = np.empty(n_draws)
    with_extra = np.empty(n_draws)
    for lo in range(0, n_draws, CHUNK_SIZE):
        r = rows[lo:lo + CHUNK_SIZE]
        D = _pair_sqdist(X[r[:, :, None], base[None, None, :]])
        xe = X[r, extra]
        De = D + (xe[:, :, None] - xe[:, None, :]) ** 2
        gamma = _gammas(De, bandwidth)
        without[lo:lo + len(r)] = _aligned(D, gamma, y[r])
        with_extra[lo:lo + len(r)] = _aligned(De, gamma, y[r])
    return without, with_extra
