"""The randSel outer loop: estimate contributions, fix persistent winners, cull."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .contribution import ContributionTable, KernelEvalCounter, estimate_contributions
from .datagen import Dataset
from .errors import DegenerateLabelsError, InsufficientSamplesError, InvalidDataError, InvalidParameterError
from .kernelcore import BandwidthSpec

TRACE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class SelectorConfig:
    """Parameters of one randSel run.

    ``subsample`` may be an absolute row count (int >= 2) or a fraction of
    the rows in ``(0, 1)``; it is resolved against the data at run time.
    """

    n_bootstraps: int = 3000
    subsample: float = 0.25
    cull: float = 0.25
    top: float = 0.05
    occasions: int = 2
    fixing: bool = False
    bandwidth: BandwidthSpec = field(default_factory=BandwidthSpec.median)
    seed: int = 0
    min_features: int = 2
    coupled: bool = True
    threads: int = 1

    def __post_init__(self):
        if not 0 < self.cull < 1:
            raise InvalidParameterError(f"cull fraction must lie in (0, 1), got {self.cull}")
        if not 0 < self.top < 1:
            raise InvalidParameterError(f"top fraction must lie in (0, 1), got {self.top}")
        if self.cull + self.top > 1:
            raise InvalidParameterError("cull + top fractions must not exceed 1")
        if self.occasions < 1:
            raise InvalidParameterError("occasions must be >= 1")
        if self.min_features < 2:
            raise InvalidParameterError("min_features must be >= 2")
        if self.n_bootstraps < 1:
            raise InvalidParameterError("n_bootstraps must be >= 1")
        if self.threads < 1:
            raise InvalidParameterError("threads must be >= 1")
        if self.subsample <= 0 or (self.subsample >= 1 and self.subsample != int(self.subsample)):
            raise InvalidParameterError(
                f"subsample must be a fraction in (0, 1) or an integer row count, got {self.subsample}"
            )

    def subsample_size(self, m: int) -> int:
        if self.subsample < 1:
            s = int(math.floor(self.subsample * m))
        else:
            s = int(self.subsample)
        if s < 2 or s > m:
            raise InvalidParameterError(f"subsample size {s} is not in [2, m={m}]")
        return s

    def to_dict(self) -> dict:
        """Settings that determine the result; ``threads`` is left out on purpose."""
        d = asdict(self)
        d["bandwidth"] = self.bandwidth.to_dict()
        del d["threads"]
        return d


@dataclass
class IterationRecord:
    iteration: int
    active_ids: list
    contributions: list
    stderr: list
    culled_ids: list
    fixed_ids: list
    kernel_evals: int

    def to_dict(self) -> dict:
        return {
            "format_version": TRACE_FORMAT_VERSION,
            "iteration": self.iteration,
            "active_ids": self.active_ids,
            "contributions": self.contributions,
            "stderr": self.stderr,
            "culled_ids": self.culled_ids,
            "fixed_ids": self.fixed_ids,
            "kernel_evals": self.kernel_evals,
        }


@dataclass
class SelectionTrace:
    """Everything randSel did, one record per contribution/cull iteration.

    All ids are original dataset column ids.
    """

    config: SelectorConfig
    n_features: int
    iterations: list = field(default_factory=list)
    tables: list = field(default_factory=list)
    selected: list = field(default_factory=list)
    fixed: list = field(default_factory=list)

    @property
    def total_kernel_evals(self) -> int:
        return sum(r.kernel_evals for r in self.iterations)

    def active_sets(self) -> list:
        """Nested feature sets: every pre-cull active set, then the final survivors."""
        sets = [list(r.active_ids) for r in self.iterations]
        sets.append(list(self.selected))
        return sets

    def contribution_history(self, feature: int) -> list:
        """Contribution of ``feature`` at each iteration where it was active."""
        out = []
        for r in self.iterations:
            if feature in r.active_ids:
                out.append(r.contributions[r.active_ids.index(feature)])
        return out


def cull(table: ContributionTable, active, fixed, z: float, min_features: int = 2) -> list:
    """Drop the ``ceil(z * #non-fixed)`` lowest-contribution non-fixed features.

    Never leaves fewer than ``min_features``. Ties are broken by culling the
    smaller original id first. Returns the surviving ids, sorted.
    """
    active = sorted(int(j) for j in active)
    fixed = {int(j) for j in fixed}
    contrib = table.as_dict()
    candidates = [j for j in active if j not in fixed]
    k = math.ceil(z * len(candidates))
    k = max(0, min(k, len(active) - min_features, len(candidates)))
    order = sorted(candidates, key=lambda j: (contrib[j], j))
    dropped = set(order[:k])
    return [j for j in active if j not in dropped]


def update_fixed(streaks: dict, table: ContributionTable, a: float, t: int) -> list:
    """Advance consecutive top-``a`` counters; return features that reach ``t``.

    ``streaks`` maps feature id -> current consecutive count and is updated in
    place. Features absent from the current top set have their streak reset.
    """
    n = len(table.features)
    k = math.ceil(a * n)
    top = {int(j) for j in table.top(k)}
    added = []
    for j in (int(f) for f in table.features):
        if j in top:
            streaks[j] = streaks.get(j, 0) + 1
            if streaks[j] >= t:
                added.append(j)
        else:
            streaks[j] = 0
    return sorted(added)


def cull_schedule(n: int, z: float, min_features: int = 2) -> list:
    """Active-set sizes randSel passes through without fixing: n, ..., min_features."""
    sizes = [n]
    while sizes[-1] > min_features:
        k = sizes[-1]
        sizes.append(k - max(1, min(math.ceil(z * k), k - min_features)))
    return sizes


def randsel(data: Dataset, config: Optional[SelectorConfig] = None) -> SelectionTrace:
    """Run randomised selection until ``min_features`` remain.

    With fixing enabled the run also stops as soon as every active feature
    is fixed.
    """
    config = SelectorConfig() if config is None else config
    n = data.n_features
    if n < config.min_features:
        raise InvalidDataError(f"dataset has {n} features, fewer than min_features={config.min_features}")
    if data.n_samples < 4:
        raise InvalidDataError("need at least 4 rows")
    if not data.has_both_classes():
        raise DegenerateLabelsError("labels contain a single class")
    s = config.subsample_size(data.n_samples)

    std = data.standardized()
    trace = SelectionTrace(config=config, n_features=n)
    active = list(range(n))
    fixed: set = set()
    streaks: dict = {}
    it = 0
    while len(active) > config.min_features and not (config.fixing and fixed >= set(active)):
        counter = KernelEvalCounter()
        table, counter = estimate_contributions(
            std, active, config.n_bootstraps, s, config.bandwidth,
            seed=config.seed, iteration=it, threads=config.threads,
            coupled=config.coupled, standardize=False, counter=counter,
        )
        loose = [int(j) for j, u in zip(table.features, table.unsampled) if u and int(j) not in fixed]
        if loose:
            raise InsufficientSamplesError(
                f"iteration {it}: features {loose[:10]} were never sampled with "
                f"n_bootstraps={config.n_bootstraps} over {len(active)} active features; "
                f"increase n_bootstraps (at least ~{5 * len(active)} recommended)"
            )
        if config.fixing:
            fixed.update(update_fixed(streaks, table, config.top, config.occasions))
        survivors = cull(table, active, fixed, config.cull, config.min_features)
        culled = sorted(set(active) - set(survivors))
        trace.iterations.append(
            IterationRecord(
                iteration=it,
                active_ids=list(active),
                contributions=[float(c) for c in table.contribution],
                stderr=[float(e) for e in table.stderr],
                culled_ids=culled,
                fixed_ids=sorted(fixed),
                kernel_evals=counter.evals,
            )
        )
        trace.tables.append(table)
        active = survivors
        it += 1
    trace.selected = list(active)
    trace.fixed = sorted(fixed)
    return trace
