"""``randsel`` command line: generate data, run one selection, run a benchmark.

Exit codes: 0 success, 1 usage, 2 data, 3 numeric degeneracy.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import io
from .baselines import bahsic, corr_filter, fohsic
from .datagen import GENERATORS, XOR_NOISE_SD, generate
from .errors import InvalidParameterError, RandSelError
from .evaluation import (
    ALGORITHMS,
    DEFAULT_GAMMA_FACTORS,
    REFERENCE_RESULTS,
    CvPlan,
    EvalReport,
    run_benchmark,
)
from .kernelcore import BandwidthSpec
from .selector import SelectorConfig, randsel

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("randsel")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _subsample(text: str) -> float:
    v = float(text)
    return int(v) if v >= 1 else v


def _add_selector_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("selector")
    g.add_argument("--bootstraps", type=int, help="draws per iteration (default 3000)")
    g.add_argument("--subsample", type=_subsample, help="rows per draw: count, or fraction of m (default 0.25)")
    g.add_argument("--cull", type=float, help="fraction culled per iteration (default 0.25)")
    g.add_argument("--top", type=float, help="top fraction tracked for fixing (default 0.05)")
    g.add_argument("--occasions", type=int, help="consecutive top placements needed to fix (default 2)")
    g.add_argument("--fixing", action="store_true", default=None, help="enable fixing of persistent top features")
    g.add_argument("--min-features", type=int, help="stop when this many features remain (default 2)")
    g.add_argument("--unmatched", action="store_true", default=None,
                   help="independent base/plus draws instead of coupled pairs")
    bw = g.add_mutually_exclusive_group()
    bw.add_argument("--gamma", type=float, help="fixed Gaussian gamma")
    bw.add_argument("--median-heuristic", action="store_true", help="median-heuristic gamma (default)")
    g.add_argument("--threads", type=int, help="worker threads; never changes results (default 1)")


_FLAG_TO_FIELD = {
    "bootstraps": "n_bootstraps",
    "subsample": "subsample",
    "cull": "cull",
    "top": "top",
    "occasions": "occasions",
    "fixing": "fixing",
    "min_features": "min_features",
    "threads": "threads",
}


def selector_config(args, base: dict | None = None) -> SelectorConfig:
    """Merge a config-file dict (flag names or field names) with command-line flags."""
    fields = {}
    for k, v in (base or {}).items():
        key = k.replace("-", "_")
        if key == "gamma":
            fields["bandwidth"] = BandwidthSpec.fixed(v) if v is not None else BandwidthSpec.median()
        elif key == "unmatched":
            fields["coupled"] = not v
        elif key in _FLAG_TO_FIELD:
            fields[_FLAG_TO_FIELD[key]] = v
        elif key in SelectorConfig.__dataclass_fields__ and key != "bandwidth":
            fields[key] = v
        else:
            raise InvalidParameterError(f"unknown selector setting {k!r}")
    for flag, name in _FLAG_TO_FIELD.items():
        v = getattr(args, flag, None)
        if v is not None:
            fields[name] = v
    if getattr(args, "unmatched", None):
        fields["coupled"] = False
    if getattr(args, "gamma", None) is not None:
        fields["bandwidth"] = BandwidthSpec.fixed(args.gamma)
    elif getattr(args, "median_heuristic", False):
        fields["bandwidth"] = BandwidthSpec.median()
    if getattr(args, "seed", None) is not None:
        fields["seed"] = args.seed
    return SelectorConfig(**fields)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="randsel", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="write a synthetic dataset as CSV")
    p.add_argument("generator", choices=sorted(GENERATORS))
    p.add_argument("--m", type=int, default=300, help="rows (default 300)")
    p.add_argument("--n", type=int, default=100, help="features (default 100)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise-sd", type=float, default=XOR_NOISE_SD, help="xor jitter (default 0.3)")
    p.add_argument("--out", help="output CSV (default <generator>.csv)")

    p = sub.add_parser("select", help="run one feature selection on a CSV file")
    p.add_argument("data")
    p.add_argument("--algorithm", choices=ALGORITHMS, default="randsel")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", help="JSON file with selector settings")
    p.add_argument("--out", help="trace (.jsonl) or ranking (.csv) path")
    p.add_argument("--plot", help="write a contribution-trace figure (randsel only)")
    _add_selector_flags(p)

    p = sub.add_parser("bench", help="nested cross-validation benchmark from a JSON config")
    p.add_argument("config")
    p.add_argument("--seed", type=int, help="overrides the config's seed")
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="output directory (default: config's 'out' or ./bench_out)")
    p.add_argument("--no-plot", action="store_true")
    return parser


def cmd_gen(args) -> int:
    kwargs = {"noise_sd": args.noise_sd} if args.generator == "xor" else {}
    data = generate(args.generator, args.m, args.n, seed=args.seed, **kwargs)
    out = Path(args.out or f"{args.generator}.csv")
    try:
        io.write_csv(data, out, io.generator_meta(args.generator, args.m, args.n, args.seed, **kwargs))
    except OSError as exc:
        print(f"randsel gen: cannot write {out}: {exc.strerror}", file=sys.stderr)
        return EXIT_DATA
    print(f"wrote {out} ({data.n_samples} rows, {data.n_features} features)")
    return EXIT_OK


class _OutputError(RandSelError):
    exit_code = EXIT_DATA


def _write_text(path: Path, text: str):
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise _OutputError(f"cannot write {path}: {exc.strerror}") from None


def cmd_select(args) -> int:
    base = json.loads(Path(args.config).read_text()) if args.config else None
    config = selector_config(args, base)
    data = io.read_csv(args.data)
    stem = Path(args.data).with_suffix("")
    if args.algorithm == "randsel":
        trace = randsel(data, config)
        out = Path(args.out or f"{stem}.trace.jsonl")
        _write_text(out, "\n".join(io.trace_lines(trace)) + "\n")
        last = trace.iterations[-1] if trace.iterations else None
        print(f"iterations: {len(trace.iterations)}")
        if last is not None:
            contrib = dict(zip(last.active_ids, last.contributions))
            for j in trace.selected:
                if j in contrib:
                    print(f"  f{j}: contribution {contrib[j]:.6g}")
        print(f"kernel evaluations: {trace.total_kernel_evals}")
        print(f"trace: {out}")
        if args.plot:
            from .plotting import plot_contribution_trace

            plot_contribution_trace(trace, args.plot, relevant=data.relevant, title=data.name)
            print(f"figure: {args.plot}")
        if trace.fixed:
            print("fixed: " + " ".join(str(j) for j in trace.fixed))
        print("selected: " + " ".join(str(j) for j in trace.selected))
        return EXIT_OK

    if args.algorithm == "corr":
        ranking = corr_filter(data)
    elif args.algorithm == "fohsic":
        ranking = fohsic(data, config.bandwidth)
    else:
        ranking = bahsic(data, config.bandwidth)
    out = Path(args.out or f"{stem}.{args.algorithm}.ranking.csv")
    lines = ["rank,feature,score"] + [f"{i + 1},{j},{s:.17g}" for i, (j, s) in enumerate(zip(ranking.ids, ranking.scores))]
    _write_text(out, "\n".join(lines) + "\n")
    print(f"ranking ({args.algorithm}): {out}")
    print("ranking: " + " ".join(str(j) for j in ranking.ids))
    return EXIT_OK


def _fmt(pair, digits=1):
    mean, sd = pair
    if mean is None:
        return "-"
    return f"{mean:.{digits}f} ± {sd:.{digits}f}"


def report_table(report: EvalReport, reference: bool = True) -> str:
    head = f"{'Dataset':<18}{'Algorithm':<28}{'Accuracy':>16}{'Features':>16}{'Precision':>16}{'Recall':>16}"
    lines = [head, "-" * len(head)]
    datasets = list(dict.fromkeys(c.dataset for c in report.cells))
    for d in datasets:
        for c in (c for c in report.cells if c.dataset == d):
            if c.error:
                lines.append(f"{d:<18}{c.algorithm:<28}  FAILED: {c.error}")
                continue
            lines.append(
                f"{d:<18}{c.algorithm:<28}{_fmt(c.accuracy):>16}{_fmt(c.features):>16}"
                f"{_fmt(c.precision):>16}{_fmt(c.recall):>16}"
            )
        if reference:
            for (rd, alg), v in REFERENCE_RESULTS.items():
                if rd == d:
                    lines.append(
                        f"{d:<18}{alg + ' (ref)':<28}{_fmt(v['accuracy']):>16}{_fmt(v['features']):>16}"
                        f"{_fmt(v['precision']):>16}{_fmt(v['recall']):>16}"
                    )
    return "\n".join(lines) + "\n"


def report_csv(report: EvalReport) -> str:
    cols = ["dataset", "algorithm", "accuracy_mean", "accuracy_sd", "features_mean", "features_sd",
            "precision_mean", "precision_sd", "recall_mean", "recall_sd", "n_folds", "wall_time", "error"]
    rows = [",".join(cols)]
    for c in report.cells:
        d = c.to_dict()
        rows.append(",".join("" if d[k] is None else (f"{d[k]:.17g}" if isinstance(d[k], float) else str(d[k]).replace(",", ";")) for k in cols))
    return "\n".join(rows) + "\n"


def load_bench_config(path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InvalidParameterError(f"cannot read config {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InvalidParameterError(f"config {path} is not valid JSON: {exc}") from None
    if not cfg.get("algorithms"):
        raise InvalidParameterError("config needs a nonempty 'algorithms' list")
    bad = [a for a in cfg["algorithms"] if a not in ALGORITHMS]
    if bad:
        raise InvalidParameterError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
    if not cfg.get("datasets"):
        raise InvalidParameterError("config needs a nonempty 'datasets' list")
    return cfg


def _bench_datasets(cfg: dict, seed: int, root: Path) -> list:
    out = []
    for i, spec in enumerate(cfg["datasets"]):
        if "path" in spec:
            p = Path(spec["path"])
            out.append(io.read_csv(p if p.is_absolute() else root / p, name=spec.get("name")))
            continue
        if "generator" not in spec:
            raise InvalidParameterError(f"dataset entry {i} needs 'generator' or 'path'")
        extra = {k: spec[k] for k in ("noise_sd",) if k in spec}
        data = generate(spec["generator"], spec.get("m", 300), spec.get("n", 100),
                        seed=spec.get("seed", seed + i), **extra)
        if "name" in spec:
            data.name = spec["name"]
        out.append(data)
    return out


def cmd_bench(args) -> int:
    cfg = load_bench_config(args.config)
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    sel = dict(cfg.get("selector", {}))
    sel["seed"] = seed
    if args.threads is not None:
        sel["threads"] = args.threads
    config = selector_config(argparse.Namespace(), sel)
    plan = CvPlan(seed=seed, **cfg.get("plan", {}))
    datasets = _bench_datasets(cfg, seed, Path(args.config).parent)
    out = Path(args.out or cfg.get("out", "bench_out"))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"randsel bench: cannot create {out}: {exc.strerror}", file=sys.stderr)
        return EXIT_DATA
    report = run_benchmark(
        datasets, cfg["algorithms"], plan, config,
        gamma_factors=cfg.get("gamma_factors", DEFAULT_GAMMA_FACTORS),
        lam=cfg.get("lambda", 1.0),
        progress=log.info,
    )
    table = report_table(report)
    _write_text(out / "report.txt", table)
    _write_text(out / "report.csv", report_csv(report))
    _write_text(out / "report.json", json.dumps([io._clean(c.to_dict()) for c in report.cells], indent=2) + "\n")
    io.write_ledger(report.records, out / "ledger.jsonl")
    if not args.no_plot and any(c.error is None for c in report.cells):
        from .plotting import plot_report

        plot_report(report, out / "report.png")
    sys.stdout.write(table)
    print(f"outputs: {out}")
    if report.failed:
        print(f"{len(report.failed)} cell(s) failed", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    handler = {"gen": cmd_gen, "select": cmd_select, "bench": cmd_bench}[args.command]
    try:
        return handler(args)
    except RandSelError as exc:
        print(f"randsel {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, json.JSONDecodeError) as exc:
        print(f"randsel {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
