"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Monte Carlo criteria use master seeds 0..9 with the dataset drawn from the
same seed. Runs take several minutes in total on one core.
"""

import math

import numpy as np
import pytest
from scipy import stats

from randsel import io
from randsel.baselines import bahsic, corr_filter, fohsic
from randsel.contribution import coupled_alignments
from randsel.datagen import Dataset, gen_weston_linear, gen_weston_nonlinear, gen_xor
from randsel.evaluation import CvPlan, nested_cv, selection_precision_recall
from randsel.kernelcore import BandwidthSpec, alignment, center, gaussian_kernel, label_kernel, median_heuristic
from randsel.selector import SelectorConfig, randsel

pytestmark = pytest.mark.slow

SEEDS = range(10)
TABLE_CONFIG = dict(n_bootstraps=3000, subsample=75, cull=0.25, fixing=False)


def table_config(seed, **kw):
    return SelectorConfig(**{**TABLE_CONFIG, "seed": seed, **kw})


@pytest.fixture(scope="module")
def xor_traces():
    return [randsel(gen_xor(300, 100, seed=s), table_config(s)) for s in SEEDS]


@pytest.fixture(scope="module")
def xor_cv():
    data = gen_xor(300, 100, seed=0)
    cfg = SelectorConfig(n_bootstraps=3000, subsample=0.25, seed=0)
    return {alg: nested_cv(data, alg, CvPlan(), cfg)[0] for alg in ("randsel", "fohsic")}


def test_c01_xor_recovery(xor_traces, verdict):
    hits = sum(t.selected == [0, 1] for t in xor_traces)
    finals = [t.selected for t in xor_traces]
    assert verdict(1, hits >= 9, f"XOR pair recovered in {hits}/10 seeds (need >= 9); finals {finals}")


def test_c02_xor_accuracy(xor_cv, verdict):
    rs, fo = xor_cv["randsel"], xor_cv["fohsic"]
    ok_rs = 90 <= rs.accuracy[0] <= 100
    ok_fo = fo.accuracy[0] < 70
    detail = (f"randSel {rs.accuracy[0]:.1f} +/- {rs.accuracy[1]:.1f}% (need [90, 100]); "
              f"FoHsic {fo.accuracy[0]:.1f} +/- {fo.accuracy[1]:.1f}% (need < 70)")
    assert verdict(2, ok_rs and ok_fo, detail)


@pytest.mark.xfail(
    strict=True,
    reason="measured 100.0%: with jitter sd 0.3 the XOR Bayes accuracy is 99.9%, above the 99.0 upper edge",
)
def test_xor_randsel_accuracy_within_one_sd(xor_cv):
    assert 92.4 <= xor_cv["randsel"].accuracy[0] <= 99.0


def test_c03_linear_weston_culling_safety(verdict):
    removals = relevant_removed = 0
    for s in SEEDS:
        trace = randsel(gen_weston_linear(300, 100, seed=s), table_config(s))
        for r in trace.iterations:
            if len(r.active_ids) > 10:
                removals += len(r.culled_ids)
                relevant_removed += len(set(r.culled_ids) & set(range(5)))
    rate = relevant_removed / removals
    assert verdict(3, rate <= 0.05,
                   f"{relevant_removed}/{removals} removals above 10 active hit a relevant feature "
                   f"({100 * rate:.2f}%, need <= 5%)")


def test_c04_nonlinear_weston_contrast(verdict):
    corr_prec, rs_prec = [], []
    for s in SEEDS:
        data = gen_weston_nonlinear(300, 100, seed=s)
        corr_prec.append(selection_precision_recall(corr_filter(data).prefix(5), data.relevant)[0])
        # a floor of 5 makes the last iteration the 5-feature one (9 -> 6 -> 5)
        trace = randsel(data, table_config(s, min_features=5))
        rs_prec.append(selection_precision_recall(trace.selected, data.relevant)[0])
    ok = np.mean(corr_prec) <= 20 and np.mean(rs_prec) >= 80
    assert verdict(4, ok, f"corr precision@5 {np.mean(corr_prec):.1f}% (need <= 20); "
                          f"randSel precision@5 {np.mean(rs_prec):.1f}% (need >= 80)")


def _alpha(z, gamma):
    return float(np.mean(np.exp(-gamma * (z[:, None] - z[None, :]) ** 2)))


def test_c05_irrelevant_feature_lowers_alignment(verdict):
    parts, ok = [], True
    for name, data, base in [("XOR", gen_xor(300, 10, seed=0), [0, 1]),
                             ("linear Weston", gen_weston_linear(300, 10, seed=0), [0, 1, 2, 3, 4])]:
        rng = np.random.default_rng(1)
        aug = Dataset(np.column_stack([data.X, rng.standard_normal(300)]), data.y)
        noise = aug.n_features - 1
        without, with_noise = coupled_alignments(aug, base, noise, 2000, 75, seed=3)
        p = stats.ttest_rel(with_noise, without, alternative="less").pvalue
        std = aug.standardized().X
        alphas = []
        for k in range(50):
            rows = np.random.default_rng([5, k]).choice(300, 75, replace=False)
            g = median_heuristic(std[rows][:, base + [noise]])
            alphas.append(_alpha(std[rows, noise], g))
        ok &= p < 0.01 and max(alphas) <= 1.0
        parts.append(f"{name} p={p:.2e}, mean drop {np.mean(without - with_noise):.4f}, max alpha {max(alphas):.3f}")
    assert verdict(5, ok, "; ".join(parts) + " (need p < 0.01, alpha <= 1)")


def test_c06_linear_kernel_identity(verdict):
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(100):
        m, d = int(rng.integers(1, 51)), int(rng.integers(1, 11))
        X = rng.standard_normal((m, d)) * rng.uniform(0.1, 5)
        y = rng.choice([-1.0, 1.0], m)
        lhs = math.sqrt(max(np.mean(np.outer(y, y) * (X @ X.T)), 0.0))
        rhs = float(np.linalg.norm((y[:, None] * X).mean(axis=0)))
        worst = max(worst, abs(lhs - rhs))
    assert verdict(6, worst <= 1e-10, f"max |lhs - rhs| over 100 datasets = {worst:.2e} (need <= 1e-10)")


def test_c07_kernel_accounting(verdict):
    configs = [
        dict(n_bootstraps=150, subsample=10),
        dict(n_bootstraps=333, subsample=0.3),
        dict(n_bootstraps=401, subsample=17, coupled=False),
        dict(n_bootstraps=250, subsample=25, fixing=True, top=0.2, occasions=1),
        dict(n_bootstraps=120, subsample=12, bandwidth=BandwidthSpec.fixed(0.4), min_features=3),
    ]
    bad = []
    for i, kw in enumerate(configs):
        cfg = SelectorConfig(seed=i, **kw)
        data = gen_weston_linear(80, 16, seed=i)
        s = cfg.subsample_size(80)
        trace = randsel(data, cfg)
        expected = 2 * cfg.n_bootstraps * s * s
        if any(r.kernel_evals != expected for r in trace.iterations):
            bad.append(i)
        if trace.total_kernel_evals != expected * len(trace.iterations):
            bad.append(i)
    assert verdict(7, not bad, f"{len(configs)} configurations, per-iteration count == 2*N*s^2; mismatches {bad}")


def test_c08_deterministic_parallelism(verdict):
    configs = [
        (gen_xor(120, 30, seed=8), SelectorConfig(n_bootstraps=700, subsample=30, seed=8)),
        (gen_weston_linear(120, 30, seed=9), SelectorConfig(n_bootstraps=650, subsample=0.25, seed=9, coupled=False)),
        (gen_weston_nonlinear(120, 30, seed=10),
         SelectorConfig(n_bootstraps=900, subsample=40, seed=10, fixing=True, top=0.1, occasions=2)),
    ]
    identical = 0
    for data, cfg in configs:
        blobs = set()
        for threads in (1, 2, 8):
            trace = randsel(data, SelectorConfig(**{**cfg.__dict__, "threads": threads}))
            blobs.add("\n".join(io.trace_lines(trace)).encode())
        identical += len(blobs) == 1
    assert verdict(8, identical == 3, f"{identical}/3 configurations byte-identical at 1, 2 and 8 threads")


def _loop_alignment(X, y, gamma):
    m = len(y)
    K = [[math.exp(-gamma * sum((X[i][k] - X[j][k]) ** 2 for k in range(len(X[i])))) for j in range(m)]
         for i in range(m)]
    L = [[y[i] * y[j] for j in range(m)] for i in range(m)]

    def centred(A):
        r = [sum(row) / m for row in A]
        c = [sum(A[i][j] for i in range(m)) / m for j in range(m)]
        t = sum(r) / m
        return [[A[i][j] - r[i] - c[j] + t for j in range(m)] for i in range(m)]

    Kc, Lc = centred(K), centred(L)
    inner = sum(Kc[i][j] * Lc[i][j] for i in range(m) for j in range(m))
    nk = math.sqrt(sum(v * v for row in Kc for v in row))
    nl = math.sqrt(sum(v * v for row in Lc for v in row))
    return inner / (nk * nl), Kc


def _loop_median_gamma(X):
    m = len(X)
    d = sorted(sum((X[i][k] - X[j][k]) ** 2 for k in range(len(X[i]))) for i in range(m) for j in range(i + 1, m))
    n = len(d)
    med = d[n // 2] if n % 2 else 0.5 * (d[n // 2 - 1] + d[n // 2])
    return 1.0 / med


def _loop_greedy(Xs, y, forward):
    n = len(Xs[0])
    pick = lambda cols: _loop_alignment([[row[c] for c in cols] for row in Xs], y,
                                        _loop_median_gamma([[row[c] for c in cols] for row in Xs]))[0]
    if forward:
        chosen = []
        while len(chosen) < n:
            cand = [j for j in range(n) if j not in chosen]
            chosen.append(max(cand, key=lambda j: (pick(chosen + [j]), -j)))
        return chosen
    remaining, elim = list(range(n)), []
    while len(remaining) > 1:
        j = max(remaining, key=lambda j: (pick([k for k in remaining if k != j]), -j))
        elim.append(j)
        remaining.remove(j)
    return remaining + elim[::-1]


def test_c09_oracle_equivalence(verdict):
    worst, greedy_ok = 0.0, 0
    for t in range(6):
        rng = np.random.default_rng([9, t])
        m, n = 12, int(rng.integers(3, 13))
        X = rng.standard_normal((m, n))
        y = np.array([1.0, -1.0] * 6)
        rng.shuffle(y)
        X[:, 0] += y
        gamma = float(rng.uniform(0.05, 2.0))
        ref, Kc = _loop_alignment(X.tolist(), y.tolist(), gamma)
        C = center(gaussian_kernel(X, gamma))
        worst = max(worst, abs(alignment(C, center(label_kernel(y))) - ref),
                    float(np.max(np.abs(C.values - np.array(Kc)))))
        std = Dataset(X, y).standardized().X.tolist()
        greedy_ok += fohsic(Dataset(X, y)).ids == _loop_greedy(std, y.tolist(), True)
        greedy_ok += bahsic(Dataset(X, y)).ids == _loop_greedy(std, y.tolist(), False)
    ok = worst <= 1e-10 and greedy_ok == 12
    assert verdict(9, ok, f"max deviation {worst:.2e} (need <= 1e-10); greedy step sequences matching {greedy_ok}/12")


def test_c10_relevant_contribution_rises(xor_traces, verdict):
    rises = 0
    for t in xor_traces:
        first, last = t.iterations[0], t.iterations[-1]
        pair = [j for j in (0, 1) if j in last.active_ids]
        if len(pair) < 2:
            continue
        c0 = np.mean([first.contributions[first.active_ids.index(j)] for j in pair])
        c1 = np.mean([last.contributions[last.active_ids.index(j)] for j in pair])
        rises += c1 > c0
    assert verdict(10, rises >= 9, f"mean relevant contribution higher at last than first iteration in {rises}/10 seeds")
