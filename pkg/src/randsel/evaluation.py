"""Nested cross-validation harness, kernel classifier and selection metrics."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .baselines import bahsic, corr_filter, fohsic
from .datagen import Dataset
from .errors import InvalidDataError, InvalidParameterError, RandSelError
from .kernelcore import median_heuristic, sq_distances
from .selector import SelectorConfig, cull_schedule, randsel

ALGORITHMS = ("randsel", "fohsic", "bahsic", "corr")
DEFAULT_GAMMA_FACTORS = (0.25, 0.5, 1.0, 2.0, 4.0)
LEDGER_FORMAT_VERSION = 1

# Published results for the two baselines this package does not run
# (stability selection with the lasso, SVM-RFE). Shown as static rows only.
REFERENCE_RESULTS = {
    ("weston-linear", "stability-selection"): dict(accuracy=(97.3, 3.1), features=(2.0, 0.0), precision=(100.0, 0.0), recall=(40.0, 0.0)),
    ("weston-linear", "rfe"): dict(accuracy=(95.3, 3.9), features=(5.0, 0.0), precision=(66.9, 33.7), recall=(56.0, 13.5)),
    ("weston-nonlinear", "stability-selection"): dict(accuracy=(50.0, 7.1), features=(2.0, 0.0), precision=(0.0, 0.0), recall=(0.0, 0.0)),
    ("weston-nonlinear", "rfe"): dict(accuracy=(98.9, 2.7), features=(5.0, 0.0), precision=(97.8, 5.9), recall=(100.0, 0.0)),
    ("xor", "stability-selection"): dict(accuracy=(49.3, 11.1), features=(2.0, 0.0), precision=(13.3, 22.9), recall=(13.3, 22.9)),
    ("xor", "rfe"): dict(accuracy=(91.8, 12.1), features=(2.0, 0.0), precision=(96.7, 12.9), recall=(96.7, 12.9)),
}


# ---------------------------------------------------------------------------
# classifier
# ---------------------------------------------------------------------------


@dataclass
class KernelClassifier:
    """Regularised kernel least squares on a Gaussian kernel.

    Training solves ``(K + lam I) alpha = y``; prediction is the sign of
    ``sum_i alpha_i k(x_i, x)`` with 0 mapped to +1. Inputs are standardised
    with training-set statistics.
    """

    X: np.ndarray
    alpha: np.ndarray
    gamma: float
    mu: np.ndarray
    sd: np.ndarray

    def decision_function(self, Xtest) -> np.ndarray:
        Z = (np.asarray(Xtest, dtype=float) - self.mu) / self.sd
        sq_tr = np.einsum("ij,ij->i", self.X, self.X)
        sq_te = np.einsum("ij,ij->i", Z, Z)
        D = np.maximum(sq_te[:, None] + sq_tr[None, :] - 2.0 * Z @ self.X.T, 0.0)
        return np.exp(-self.gamma * D) @ self.alpha

    def predict(self, Xtest) -> np.ndarray:
        return np.where(self.decision_function(Xtest) >= 0, 1.0, -1.0)


def _solve(K: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    A = K + lam * np.eye(K.shape[0])
    alpha = cho_solve(cho_factor(A, lower=True), y)
    resid = np.linalg.norm(A @ alpha - y)
    assert resid < 1e-8 * max(1.0, np.linalg.norm(y)), f"kernel solve residual {resid:.3e}"
    return alpha


def kernel_classifier_train(Xtrain, ytrain, gamma: float, lam: float = 1.0) -> KernelClassifier:
    X = np.asarray(Xtrain, dtype=float)
    y = np.asarray(ytrain, dtype=float).ravel()
    if not (np.any(y > 0) and np.any(y < 0)):
        raise InvalidDataError("training labels contain a single class")
    if gamma <= 0 or lam <= 0:
        raise InvalidParameterError("gamma and lam must be positive")
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    Z = (X - mu) / sd
    K = np.exp(-gamma * sq_distances(Z))
    return KernelClassifier(Z, _solve(K, y, lam), float(gamma), mu, sd)


def kernel_classifier_predict(model: KernelClassifier, Xtest) -> np.ndarray:
    return model.predict(Xtest)


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


def selection_precision_recall(selected, relevant) -> tuple[float, float]:
    """Percent of selected features that are relevant, percent of relevant selected."""
    selected, relevant = set(selected), set(relevant)
    if not selected:
        raise InvalidParameterError("precision is undefined for an empty selection")
    if not relevant:
        raise InvalidParameterError("recall is undefined without relevant features")
    hit = len(selected & relevant)
    return 100.0 * hit / len(selected), 100.0 * hit / len(relevant)


# ---------------------------------------------------------------------------
# folds
# ---------------------------------------------------------------------------


def stratified_folds(y: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Fold id per row; each class is shuffled and dealt round-robin."""
    fold = np.empty(len(y), dtype=int)
    offset = 0
    for label in (-1.0, 1.0):
        idx = np.flatnonzero(y == label)
        idx = idx[rng.permutation(len(idx))]
        fold[idx] = (np.arange(len(idx)) + offset) % k
        offset += len(idx)
    return fold


@dataclass(frozen=True)
class CvPlan:
    outer_folds: int = 10
    inner_folds: int = 10
    reshuffles: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.outer_folds < 2 or self.inner_folds < 2 or self.reshuffles < 1:
            raise InvalidParameterError("need >= 2 outer and inner folds and >= 1 reshuffle")

    def check(self, y: np.ndarray):
        for label in (-1.0, 1.0):
            c = int(np.sum(y == label))
            if c < 2 * self.outer_folds:
                raise InvalidDataError(
                    f"class {label:+.0f} has {c} rows; the plan needs >= {2 * self.outer_folds}"
                )

    def outer_splits(self, y: np.ndarray):
        """Yield ``(reshuffle, fold, train_idx, test_idx)``."""
        for r in range(self.reshuffles):
            rng = np.random.default_rng([self.seed, r])
            fold = stratified_folds(y, self.outer_folds, rng)
            for f in range(self.outer_folds):
                yield r, f, np.flatnonzero(fold != f), np.flatnonzero(fold == f)

    def inner_folds_for(self, y: np.ndarray, reshuffle: int, fold: int) -> np.ndarray:
        rng = np.random.default_rng([self.seed, reshuffle, fold, 1])
        return stratified_folds(y, self.inner_folds, rng)


# ---------------------------------------------------------------------------
# selection sequences
# ---------------------------------------------------------------------------


@dataclass
class SelectionSequence:
    """Nested candidate feature sets produced by one selector on one training set."""

    sets: list
    row_ids: np.ndarray
    detail: object = None


def _fold_seed(seed: int, reshuffle: int, fold: int) -> int:
    return int(np.random.SeedSequence([int(seed) & (2**64 - 1), reshuffle, fold]).generate_state(1, np.uint64)[0])


def selection_sequence(
    train: Dataset, algorithm: str, config: SelectorConfig, seed: Optional[int] = None
) -> SelectionSequence:
    """Run ``algorithm`` on ``train`` and return its nested candidate sets.

    randSel yields the active set of every iteration; rankings yield their
    prefixes at the sizes of randSel's culling schedule.
    """
    n = train.n_features
    sizes = cull_schedule(n, config.cull, config.min_features)
    if algorithm == "randsel":
        cfg = config if seed is None else _replace_seed(config, seed)
        trace = randsel(train, cfg)
        return SelectionSequence(trace.active_sets(), train.row_ids.copy(), trace)
    if algorithm == "fohsic":
        k_max = max([k for k in sizes if k < n], default=n)
        ranking = fohsic(train, config.bandwidth, k_max=k_max)
    elif algorithm == "bahsic":
        ranking = bahsic(train, config.bandwidth)
    elif algorithm == "corr":
        ranking = corr_filter(train)
    else:
        raise InvalidParameterError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    sets = [list(range(n)) if k >= n else ranking.prefix(k) for k in sizes]
    return SelectionSequence(sets, train.row_ids.copy(), ranking)


def _replace_seed(config: SelectorConfig, seed: int) -> SelectorConfig:
    return replace(config, seed=seed)


# ---------------------------------------------------------------------------
# nested cross-validation
# ---------------------------------------------------------------------------


@dataclass
class FoldRecord:
    dataset: str
    algorithm: str
    reshuffle: int
    fold: int
    n_features: int
    gamma: float
    gamma_factor: float
    accuracy: float
    selected_ids: list
    precision: Optional[float] = None
    recall: Optional[float] = None
    inner_accuracy: Optional[float] = None
    selector_row_ids: Optional[np.ndarray] = field(default=None, repr=False)
    test_row_ids: Optional[np.ndarray] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {
            "format_version": LEDGER_FORMAT_VERSION,
            "dataset": self.dataset,
            "algorithm": self.algorithm,
            "reshuffle": self.reshuffle,
            "fold": self.fold,
            "n_features": self.n_features,
            "gamma": self.gamma,
            "gamma_factor": self.gamma_factor,
            "accuracy": self.accuracy,
            "inner_accuracy": self.inner_accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "selected_ids": self.selected_ids,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FoldRecord":
        keys = ("dataset", "algorithm", "reshuffle", "fold", "n_features", "gamma", "gamma_factor",
                "accuracy", "selected_ids", "precision", "recall", "inner_accuracy")
        return cls(**{k: d.get(k) for k in keys})


def _mean_sd(values) -> tuple[Optional[float], Optional[float]]:
    v = [x for x in values if x is not None]
    if not v:
        return None, None
    a = np.asarray(v, dtype=float)
    sd = float(a.std(ddof=1)) if a.size > 1 else 0.0
    return float(a.mean()), sd


@dataclass
class CellReport:
    """Aggregate over outer folds x reshuffles for one (dataset, algorithm)."""

    dataset: str
    algorithm: str
    accuracy: tuple = (None, None)
    features: tuple = (None, None)
    precision: tuple = (None, None)
    recall: tuple = (None, None)
    n_folds: int = 0
    wall_time: float = 0.0
    error: Optional[str] = None

    @classmethod
    def from_records(cls, dataset, algorithm, records: Sequence[FoldRecord], wall_time=0.0) -> "CellReport":
        return cls(
            dataset,
            algorithm,
            accuracy=_mean_sd(r.accuracy for r in records),
            features=_mean_sd(r.n_features for r in records),
            precision=_mean_sd(r.precision for r in records),
            recall=_mean_sd(r.recall for r in records),
            n_folds=len(records),
            wall_time=wall_time,
        )

    def to_dict(self) -> dict:
        d = {"dataset": self.dataset, "algorithm": self.algorithm}
        for name in ("accuracy", "features", "precision", "recall"):
            mean, sd = getattr(self, name)
            d[f"{name}_mean"] = mean
            d[f"{name}_sd"] = sd
        d.update(n_folds=self.n_folds, wall_time=self.wall_time, error=self.error)
        return d


@dataclass
class EvalReport:
    cells: list = field(default_factory=list)
    records: list = field(default_factory=list)

    @property
    def failed(self) -> list:
        return [c for c in self.cells if c.error is not None]

    def cell(self, dataset: str, algorithm: str) -> CellReport:
        for c in self.cells:
            if c.dataset == dataset and c.algorithm == algorithm:
                return c
        raise KeyError((dataset, algorithm))

    @classmethod
    def from_ledger(cls, records: Sequence[FoldRecord]) -> "EvalReport":
        keys = []
        for r in records:
            if (r.dataset, r.algorithm) not in keys:
                keys.append((r.dataset, r.algorithm))
        cells = [
            CellReport.from_records(d, a, [r for r in records if (r.dataset, r.algorithm) == (d, a)])
            for d, a in keys
        ]
        return cls(cells, list(records))


def _inner_choice(Xtr_std, ytr, sets, inner_fold, gamma_factors, lam):
    """Pick (feature set index, gamma factor) by pooled inner accuracy.

    Accuracy is pooled over inner folds as an integer count of correct
    predictions, so ties are exact. Ties prefer fewer features, then the
    smaller gamma.
    """
    k = inner_fold.max() + 1
    best = None
    for si, feats in enumerate(sets):
        Z = Xtr_std[:, feats]
        D = sq_distances(Z)
        g0 = median_heuristic(Z)
        for factor in gamma_factors:
            gamma = g0 * factor
            K = np.exp(-gamma * D)
            correct = 0
            for f in range(k):
                tr = inner_fold != f
                va = ~tr
                if not (np.any(ytr[tr] > 0) and np.any(ytr[tr] < 0)):
                    continue
                alpha = _solve(K[np.ix_(tr, tr)], ytr[tr], lam)
                pred = np.where(K[np.ix_(va, tr)] @ alpha >= 0, 1.0, -1.0)
                correct += int(np.sum(pred == ytr[va]))
            key = (-correct, len(feats), gamma)
            if best is None or key < best[0]:
                best = (key, si, factor, gamma, correct)
    _, si, factor, gamma, correct = best
    return si, factor, correct / len(ytr)


def nested_cv(
    data: Dataset,
    algorithm: str,
    plan: Optional[CvPlan] = None,
    config: Optional[SelectorConfig] = None,
    gamma_factors: Sequence[float] = DEFAULT_GAMMA_FACTORS,
    lam: float = 1.0,
    progress: Optional[Callable[[str], None]] = None,
) -> tuple[CellReport, list]:
    """Outer folds estimate accuracy; inner folds pick feature count and gamma.

    The selector runs once per outer training set and only ever sees those
    rows. Returns the aggregated cell and the per-fold records.
    """
    plan = CvPlan() if plan is None else plan
    config = SelectorConfig() if config is None else config
    if algorithm not in ALGORITHMS:
        raise InvalidParameterError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")
    plan.check(data.y)
    t0 = time.perf_counter()
    records = []
    for r, f, tr, te in plan.outer_splits(data.y):
        train = data.subset_rows(tr)
        seq = selection_sequence(train, algorithm, config, seed=_fold_seed(config.seed, r, f))
        std = train.standardized()
        inner = plan.inner_folds_for(train.y, r, f)
        si, factor, inner_acc = _inner_choice(std.X, train.y, seq.sets, inner, gamma_factors, lam)
        feats = seq.sets[si]
        gamma = median_heuristic(std.X[:, feats]) * factor
        model = kernel_classifier_train(train.X[:, feats], train.y, gamma, lam)
        acc = 100.0 * float(np.mean(model.predict(data.X[te][:, feats]) == data.y[te]))
        prec = rec = None
        if data.relevant:
            prec, rec = selection_precision_recall(feats, data.relevant)
        records.append(
            FoldRecord(
                data.name, algorithm, r, f, len(feats), float(gamma), float(factor), acc,
                [int(j) for j in feats], prec, rec, 100.0 * inner_acc,
                selector_row_ids=seq.row_ids, test_row_ids=data.row_ids[te],
            )
        )
        if progress is not None:
            progress(f"{data.name}/{algorithm} reshuffle {r} fold {f}: acc {acc:.1f}% with {len(feats)} features")
    cell = CellReport.from_records(data.name, algorithm, records, time.perf_counter() - t0)
    return cell, records


def majority_baseline(data: Dataset, plan: Optional[CvPlan] = None) -> float:
    """Outer-fold accuracy (%) of predicting the training majority class."""
    plan = CvPlan() if plan is None else plan
    accs = []
    for _, _, tr, te in plan.outer_splits(data.y):
        label = 1.0 if np.sum(data.y[tr] > 0) >= np.sum(data.y[tr] < 0) else -1.0
        accs.append(100.0 * float(np.mean(data.y[te] == label)))
    return float(np.mean(accs))


def run_benchmark(
    datasets: Sequence[Dataset],
    algorithms: Sequence[str],
    plan: Optional[CvPlan] = None,
    config: Optional[SelectorConfig] = None,
    gamma_factors: Sequence[float] = DEFAULT_GAMMA_FACTORS,
    lam: float = 1.0,
    progress: Optional[Callable[[str], None]] = None,
) -> EvalReport:
    """Every (dataset, algorithm) cell; a failing cell records its error and the rest continue."""
    if not algorithms:
        raise InvalidParameterError("algorithm list is empty")
    report = EvalReport()
    for data in datasets:
        for algorithm in algorithms:
            try:
                cell, records = nested_cv(data, algorithm, plan, config, gamma_factors, lam, progress)
            except RandSelError as exc:
                cell, records = CellReport(data.name, algorithm, error=f"{type(exc).__name__}: {exc}"), []
            report.cells.append(cell)
            report.records.extend(records)
    return report
