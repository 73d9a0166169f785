"""Command-line front door: ingestion, horizon selection, analysis, summaries.

Input files are delimiter-separated text with a header row containing at
least ``time`` and ``status`` plus the declared factor columns.  The
delimiter is auto-detected among comma, semicolon and tab unless given
explicitly.  Exit codes: 0 success, 2 validation error, 3 degenerate design.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .designs import FactorialLayout, contrast_from_hypothesis
from .errors import (
    DegenerateDesignError,
    DegenerateFitWarning,
    SurvconcordError,
    ValidationError,
)
from .inference import confidence_ellipsoid, run_contrast_tests
from .km import GroupData

__all__ = [
    "Dataset",
    "ingest",
    "terminal_times",
    "select_tau",
    "analyze",
    "summarize",
    "main",
]


@dataclass(frozen=True)
class Dataset:
    """Validated observations with their factorial grouping."""

    times: np.ndarray
    status: np.ndarray
    factor_names: tuple
    factor_values: tuple  # one tuple of level strings per row
    layout: FactorialLayout
    group_index: np.ndarray
    path: str
    n_rows: int

    @property
    def d(self) -> int:
        return self.layout.d

    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.group_index, minlength=self.d)

    def groups(self) -> list[GroupData]:
        cells = self.layout.cells()
        out = []
        for g, cell in enumerate(cells):
            mask = self.group_index == g
            out.append(
                GroupData(self.times[mask], self.status[mask], self.layout.cell_label(cell))
            )
        return out


def _detect_delimiter(header_line: str) -> str:
    counts = {d: header_line.count(d) for d in (",", ";", "\t")}
    best = max(counts, key=counts.get)
    if counts[best] == 0:
        raise ValidationError(
            "cannot detect the delimiter (no comma, semicolon or tab in the header); "
            "pass --delimiter explicitly"
        )
    return best


def ingest(path, factors, delimiter: str | None = None) -> Dataset:
    """Read and validate a dataset, grouping rows by the cross of ``factors``.

    Every combination of observed factor levels must be populated; empty
    cells of the cross are a hard error.  Rows with missing or malformed
    values are rejected with their row numbers.
    """
    path = str(path)
    factors = tuple(factors)
    if not factors:
        raise ValidationError("at least one factor column required")
    try:
        with open(path, newline="") as fh:
            first = fh.readline()
            if not first.strip():
                raise ValidationError(f"{path}: empty file")
            delim = delimiter or _detect_delimiter(first)
            fh.seek(0)
            reader = csv.reader(fh, delimiter=delim)
            header = [h.strip() for h in next(reader)]
            rows = [[c.strip() for c in row] for row in reader if any(c.strip() for c in row)]
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc

    required = ("time", "status") + factors
    missing = [c for c in required if c not in header]
    if missing:
        raise ValidationError(f"{path}: missing columns {missing}; header is {header}")
    col = {name: header.index(name) for name in required}

    times, status, fvalues = [], [], []
    bad: list[str] = []
    for r, row in enumerate(rows, start=2):  # header is line 1
        if len(row) < len(header):
            bad.append(f"line {r}: expected {len(header)} fields, got {len(row)}")
            continue
        raw_time = row[col["time"]]
        raw_status = row[col["status"]]
        fvals = tuple(row[col[f]] for f in factors)
        if not raw_time or not raw_status or any(v == "" for v in fvals):
            bad.append(f"line {r}: missing value")
            continue
        try:
            t = float(raw_time)
        except ValueError:
            bad.append(f"line {r}: non-numeric time {raw_time!r}")
            continue
        if not math.isfinite(t) or t <= 0:
            bad.append(f"line {r}: time must be positive, got {raw_time}")
            continue
        if raw_status not in ("0", "1"):
            bad.append(f"line {r}: status must be 0 or 1, got {raw_status!r}")
            continue
        times.append(t)
        status.append(int(raw_status))
        fvalues.append(fvals)
    if bad:
        shown = "; ".join(bad[:10]) + ("; ..." if len(bad) > 10 else "")
        raise ValidationError(f"{path}: {len(bad)} invalid rows: {shown}")
    if not times:
        raise ValidationError(f"{path}: no data rows")

    levels = [sorted({fv[i] for fv in fvalues}) for i in range(len(factors))]
    layout = FactorialLayout(tuple(zip(factors, (tuple(l) for l in levels))))
    group_index = np.array([layout.cell_index(fv) for fv in fvalues], dtype=np.int64)
    sizes = np.bincount(group_index, minlength=layout.d)
    empty = [layout.cell_label(c) for g, c in enumerate(layout.cells()) if sizes[g] == 0]
    if empty:
        raise ValidationError(
            f"{path}: empty cells in the factorial cross: {empty}; "
            "drop the factor or merge levels"
        )

    return Dataset(
        times=np.asarray(times),
        status=np.asarray(status, dtype=int),
        factor_names=factors,
        factor_values=tuple(fvalues),
        layout=layout,
        group_index=group_index,
        path=path,
        n_rows=len(times),
    )


def terminal_times(dataset: Dataset) -> list[dict]:
    """Per group: the smallest censoring time exceeding every event time.

    When a group's largest observation is an event no such censoring time
    exists; the group's largest observation is used instead and flagged.
    """
    out = []
    for g, cell in enumerate(dataset.layout.cells()):
        mask = dataset.group_index == g
        t = dataset.times[mask]
        s = dataset.status[mask]
        events = t[s == 1]
        censored = t[s == 0]
        max_event = events.max() if events.size else -math.inf
        candidates = censored[censored > max_event]
        if candidates.size:
            value, fallback = float(candidates.min()), False
        else:
            value, fallback = float(t.max()), True
        out.append(
            {
                "cell": dataset.layout.cell_label(cell),
                "terminal_time": value,
                "fallback": fallback,
            }
        )
    return out


def select_tau(dataset: Dataset, policy) -> float:
    """Pick the analysis horizon.

    ``auto``: the smallest per-group terminal time.  ``max``: place the
    end-of-horizon atom just past the largest observation (the
    unrestricted-horizon mode).  A number passes through unchanged.
    """
    if isinstance(policy, (int, float)) and not isinstance(policy, bool):
        if policy <= 0:
            raise ValidationError("explicit tau must be positive")
        return float(policy)
    if policy == "auto":
        terms = terminal_times(dataset)
        fallbacks = [t["cell"] for t in terms if t["fallback"]]
        if fallbacks:
            warnings.warn(
                "no censoring time exceeds the last event in "
                f"{fallbacks}; using those groups' largest observations",
                DegenerateFitWarning,
                stacklevel=2,
            )
        return min(t["terminal_time"] for t in terms)
    if policy == "max":
        return float(dataset.times.max()) + 1.0
    try:
        return select_tau(dataset, float(policy))
    except (TypeError, ValueError):
        raise ValidationError(f"tau policy must be 'auto', 'max' or a number, got {policy!r}") from None


def _tie_histogram(values: np.ndarray) -> dict[int, int]:
    """How many distinct values occur once, twice, ...; keys are counts."""
    _, counts = np.unique(values, return_counts=True)
    return dict(sorted(Counter(counts.tolist()).items()))


def summarize(dataset: Dataset, tau_policy="auto") -> dict:
    """Group sizes, terminal times, censoring rates and tie histograms
    before and after capping at the selected horizon."""
    tau = select_tau(dataset, tau_policy)
    capped = np.minimum(dataset.times, tau)
    capped_status = np.where(dataset.times < tau, dataset.status, 0)
    terms = terminal_times(dataset)
    cells = []
    for g, cell in enumerate(dataset.layout.cells()):
        mask = dataset.group_index == g
        cells.append(
            {
                "cell": dataset.layout.cell_label(cell),
                "size": int(mask.sum()),
                "terminal_time": terms[g]["terminal_time"],
                "terminal_time_fallback": terms[g]["fallback"],
                "censoring_rate_raw": float(np.mean(dataset.status[mask] == 0)),
                "censoring_rate_capped": float(np.mean(capped_status[mask] == 0)),
            }
        )
    return {
        "path": dataset.path,
        "n_rows": dataset.n_rows,
        "factors": {name: list(levels) for name, levels in dataset.layout.factors},
        "tau": tau,
        "cells": cells,
        "ties_before_capping": _tie_histogram(dataset.times),
        "ties_after_capping": _tie_histogram(capped),
    }


def analyze(
    dataset: Dataset,
    hypotheses,
    alpha: float = 0.05,
    n_boot: int = 1999,
    tau_policy="auto",
    multiplier: str = "poisson",
    seed=None,
    workers: int = 1,
) -> dict:
    """Estimate effects and test the requested hypotheses on one dataset.

    Returns the full report as a dictionary; every number in the rendered
    text report is present here.
    """
    tau = select_tau(dataset, tau_policy)
    groups = dataset.groups()
    specs = [contrast_from_hypothesis(h, dataset.layout) for h in hypotheses]
    results = run_contrast_tests(
        groups, specs, alpha=alpha, n_boot=n_boot, tau=tau,
        multiplier=multiplier, seed=seed, workers=workers,
    )
    eff = results[0].effects
    vhat = results[0].vhat
    summary = summarize(dataset, tau)

    tests = []
    for h, res in zip(hypotheses, results):
        ell = confidence_ellipsoid(res)
        tests.append(
            {
                "hypothesis": h,
                "label": res.contrast.label,
                "statistic": res.statistic,
                "p_value": res.p_value,
                "critical_value": res.critical_value,
                "reject": bool(res.reject),
                "trace_term": res.trace_term,
                "n_redraws": res.n_redraws,
                "ellipsoid": {
                    "center": ell.center.tolist(),
                    "shape": ell.shape.tolist(),
                    "radius_sq": ell.radius_sq,
                },
            }
        )
    cells = [
        dict(c, effect=float(eff.p[g])) for g, c in enumerate(summary["cells"])
    ]
    return {
        "dataset": {
            "path": dataset.path,
            "n_rows": dataset.n_rows,
            "factors": summary["factors"],
        },
        "settings": {
            "tau": tau,
            "tau_policy": str(tau_policy),
            "alpha": alpha,
            "bootstrap": n_boot,
            "multiplier": multiplier,
            "seed": results[0].seed,
        },
        "cells": cells,
        "pairwise_effects": eff.w.tolist(),
        "vhat": vhat.tolist(),
        "tests": tests,
    }


def _fmt_table(rows: list[list[str]], header: list[str]) -> str:
    table = [header] + rows
    widths = [max(len(r[i]) for r in table) for i in range(len(header))]
    lines = []
    for k, row in enumerate(table):
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def render_analysis_text(report: dict) -> str:
    s = report["settings"]
    out = [
        f"survconcord {__version__} analysis of {report['dataset']['path']}",
        f"rows: {report['dataset']['n_rows']}   tau: {s['tau']:g} (policy {s['tau_policy']})",
        f"alpha: {s['alpha']:g}   bootstrap: {s['bootstrap']}   multiplier: {s['multiplier']}   seed: {s['seed']}",
        "",
        "Per-group summary",
        _fmt_table(
            [
                [
                    c["cell"],
                    str(c["size"]),
                    f"{c['terminal_time']:g}" + ("*" if c["terminal_time_fallback"] else ""),
                    f"{100 * c['censoring_rate_capped']:.1f}%",
                    f"{c['effect']:.3f}",
                ]
                for c in report["cells"]
            ],
            ["cell", "n", "terminal", "cens(capped)", "effect"],
        ),
        "",
        "Covariance matrix of the normalized effects",
    ]
    for row in report["vhat"]:
        out.append("  " + "  ".join(f"{v: .6f}" for v in row))
    out += ["", "Hypothesis tests"]
    out.append(
        _fmt_table(
            [
                [
                    t["label"],
                    f"{t['statistic']:.4f}",
                    f"{t['p_value']:.4f}",
                    f"{t['critical_value']:.4f}",
                    "reject" if t["reject"] else "keep",
                ]
                for t in report["tests"]
            ],
            ["hypothesis", "F", "p-value", "critical", "decision"],
        )
    )
    for t in report["tests"]:
        e = t["ellipsoid"]
        center = ", ".join(f"{v:.4f}" for v in e["center"])
        out.append(f"  ellipsoid[{t['label']}]: center=({center}) radius^2={e['radius_sq']:.6f}")
    return "\n".join(out) + "\n"


def render_summary_text(report: dict) -> str:
    out = [
        f"survconcord {__version__} summary of {report['path']}",
        f"rows: {report['n_rows']}   tau: {report['tau']:g}",
        "",
        "Per-group summary",
        _fmt_table(
            [
                [
                    c["cell"],
                    str(c["size"]),
                    f"{c['terminal_time']:g}" + ("*" if c["terminal_time_fallback"] else ""),
                    f"{100 * c['censoring_rate_raw']:.1f}%",
                    f"{100 * c['censoring_rate_capped']:.1f}%",
                ]
                for c in report["cells"]
            ],
            ["cell", "n", "terminal", "cens(raw)", "cens(capped)"],
        ),
        "",
        "Tie multiplicities (value occurrences: distinct values)",
    ]
    for key, title in (("ties_before_capping", "before capping"), ("ties_after_capping", "after capping")):
        hist = report[key]
        out.append(f"  {title}: " + ", ".join(f"{m}x: {c}" for m, c in sorted(hist.items())))
    return "\n".join(out) + "\n"


def _write_km_curves(dataset: Dataset, tau: float, out_dir: Path) -> list[str]:
    from .km import fit_groups

    fits = fit_groups(dataset.groups(), tau)
    written = []
    for g, fit in enumerate(fits):
        safe = fit.group_id.replace("=", "-").replace(",", "_").replace("/", "_") or f"group{g}"
        path = out_dir / f"km_{g}_{safe}.tsv"
        sf = fit.survival
        with open(path, "w") as fh:
            fh.write("time\tsurvival\n")
            fh.write(f"0\t{1.0:.10g}\n")
            for t, v in zip(sf.times, sf.values):
                fh.write(f"{t:.10g}\t{v:.10g}\n")
        written.append(str(path))
    return written


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _emit(report: dict, text: str, out_dir, fmt: str, stem: str) -> None:
    if out_dir is None:
        sys.stdout.write(text)
        return
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt in ("text", "both"):
        (out / f"{stem}.txt").write_text(text)
    if fmt in ("machine", "both"):
        with open(out / f"{stem}.json", "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
    sys.stdout.write(text)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="survconcord",
        description="Concordance-effect estimation and wild-bootstrap tests "
        "for factorial right-censored survival designs.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("data", help="delimiter-separated data file with a header row")
        p.add_argument("--factors", required=True, help="comma-separated factor column names")
        p.add_argument("--delimiter", default=None, help="field delimiter (default: auto-detect)")
        p.add_argument("--tau", default="auto", help="horizon: a number, 'auto' or 'max'")
        p.add_argument("--out", default=None, help="output directory (default: print to stdout)")
        p.add_argument(
            "--format", default="both", choices=("text", "machine", "both"),
            help="report flavors to write under --out",
        )

    pa = sub.add_parser("analyze", help="estimate effects and run hypothesis tests")
    add_common(pa)
    pa.add_argument(
        "--hypothesis", action="append", default=None,
        help="oneway | main:<factor> | interaction:<f1>,<f2> | custom:<matrix file>; repeatable",
    )
    pa.add_argument("--alpha", type=float, default=0.05)
    pa.add_argument("--boot", type=int, default=1999, help="bootstrap replicates")
    pa.add_argument("--seed", type=int, default=None)
    pa.add_argument("--multiplier", default="poisson", choices=("poisson", "normal"))
    pa.add_argument("--workers", type=int, default=1)

    ps = sub.add_parser("summarize", help="group sizes, censoring rates, tie histograms")
    add_common(ps)

    pm = sub.add_parser("simulate", help="run a Monte Carlo study from a config file")
    pm.add_argument("--config", default=None, help="JSON study configuration")
    pm.add_argument("--out", default=None, help="output file for the study table")
    pm.add_argument("--workers", type=int, default=1)
    pm.add_argument("--power", default=None, help="comma-separated shift grid for a power study")
    pm.add_argument(
        "--full", action="store_true",
        help="replace the configured scenarios with the full stock grid (long-running)",
    )
    return parser


def _default_hypotheses(dataset: Dataset) -> list[str]:
    names = dataset.layout.names
    hyps = ["oneway"]
    if len(names) >= 2:
        hyps += [f"main:{n}" for n in names]
        hyps += [f"interaction:{a},{b}" for i, a in enumerate(names) for b in names[i + 1 :]]
    return hyps


def _cmd_analyze(args) -> int:
    dataset = ingest(args.data, [f.strip() for f in args.factors.split(",")], args.delimiter)
    hypotheses = args.hypothesis or _default_hypotheses(dataset)
    report = analyze(
        dataset,
        hypotheses,
        alpha=args.alpha,
        n_boot=args.boot,
        tau_policy=args.tau,
        multiplier=args.multiplier,
        seed=args.seed,
        workers=args.workers,
    )
    text = render_analysis_text(report)
    _emit(report, text, args.out, args.format, "analysis")
    if args.out is not None:
        written = _write_km_curves(dataset, report["settings"]["tau"], Path(args.out))
        sys.stdout.write("KM curve data: " + ", ".join(written) + "\n")
    return 0


def _cmd_summarize(args) -> int:
    dataset = ingest(args.data, [f.strip() for f in args.factors.split(",")], args.delimiter)
    report = summarize(dataset, args.tau)
    _emit(report, render_summary_text(report), args.out, args.format, "summary")
    return 0


def _cmd_simulate(args) -> int:
    from . import sim

    cfg = sim.load_study_config(args.config) if args.config else sim.default_type1_config()
    if args.full:
        cfg = sim.StudyConfig(
            scenarios=sim.full_type1_grid(),
            contrasts=cfg.contrasts,
            replications=cfg.replications,
            n_boot=cfg.n_boot,
            alpha=cfg.alpha,
            seed=cfg.seed,
            multiplier=cfg.multiplier,
        )
    if args.power:
        shifts = [float(x) for x in args.power.split(",")]
        rows = sim.run_power_study(cfg, shifts, workers=args.workers)
        table = sim.format_study_table(rows, power=True)
    else:
        rows = sim.run_type1_study(cfg, workers=args.workers)
        table = sim.format_study_table(rows)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(table)
    sys.stdout.write(table)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "analyze":
            return _cmd_analyze(args)
        if args.command == "summarize":
            return _cmd_summarize(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        raise ValidationError(f"unknown command {args.command!r}")
    except DegenerateDesignError as exc:
        print(f"degenerate design: {exc}", file=sys.stderr)
        return 3
    except ValidationError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return 2
    except SurvconcordError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
