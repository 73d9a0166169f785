"""Acceptance suite: one test per criterion, each printing a PASS line with
the measured numbers (run with ``pytest tests/test_acceptance.py -v -s``).

The two Monte Carlo studies are computed once per worker count through
session-scoped fixtures and shared between the calibration criteria and the
determinism criterion.  The data-example criterion needs the colon cancer
dataset (columns time, status, sex, rx); point SURVCONCORD_COLON_CSV at it or
drop it at tests/data/colonCS.csv, otherwise that criterion is skipped.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest

import survconcord as sc
from survconcord.sim import (
    LAMBDA_VECTORS,
    N_VECTORS,
    Scenario,
    StudyConfig,
    format_study_table,
    run_power_study,
    run_type1_study,
)

from oracles import entrywise_vhat, midrank_w, naive_boot_statistic

SEED = 20260808


def _pass(num, message):
    print(f"\nACCEPTANCE {num}: PASS - {message}")


def _random_dataset(rng, d, n_lo=3, n_hi=15, max_censoring=0.6):
    groups = []
    for i in range(d):
        n = int(rng.integers(n_lo, n_hi + 1))
        t = np.round(rng.exponential(2.0, n), 1) + 0.1
        rate = rng.uniform(0.0, max_censoring)
        if rate > 0:
            c = rng.exponential(2.0, n) / rate
            x, s = np.minimum(t, c), (t <= c).astype(int)
        else:
            x, s = t, np.ones(n, dtype=int)
        groups.append(sc.GroupData(np.round(x, 1) + 0.05, s, f"g{i}"))
    return groups


def test_criterion_1_exact_identities():
    rng = np.random.default_rng(SEED)
    start = time.time()
    for k in range(200):
        d = (2, 3, 6)[k % 3]
        tau = math.inf if k % 2 else float(rng.uniform(2.0, 6.0))
        fits = sc.fit_groups(_random_dataset(rng, d), tau)
        eff = sc.pairwise_effects(fits)
        assert np.max(np.abs(np.diag(eff.w) - 0.5)) <= 1e-10
        assert np.max(np.abs(eff.w + eff.w.T - 1.0)) <= 1e-10
        assert abs(eff.p.sum() - d / 2) <= 1e-10
        v = sc.v_hat(fits)
        assert np.max(np.abs(v - v.T)) <= 1e-10
        assert np.max(np.abs(v @ np.ones(d))) <= 1e-10
        t = sc.one_way_contrast(d).t
        assert np.max(np.abs(t @ t - t)) <= 1e-10
    elapsed = time.time() - start
    assert elapsed < 1.0, f"identity suite took {elapsed:.2f}s, budget is 1s"
    _pass(1, f"200 datasets, all identities within 1e-10, {elapsed:.2f}s")


def test_criterion_2_uncensored_midrank_oracle():
    rng = np.random.default_rng(SEED + 1)
    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 4))
        groups = []
        for i in range(d):
            n = int(rng.integers(2, 9))
            t = rng.integers(1, 7, n).astype(float)  # heavy forced ties
            groups.append(sc.GroupData(t, np.ones(n, dtype=int), f"g{i}"))
        eff = sc.pairwise_effects(sc.fit_groups(groups, math.inf))
        expected = midrank_w([g.times for g in groups])
        worst = max(worst, float(np.max(np.abs(eff.w - expected))))
    assert worst <= 1e-12
    _pass(2, f"100 uncensored tied datasets, max |w - midrank| = {worst:.2e}")


def test_criterion_3_covariance_oracle():
    rng = np.random.default_rng(SEED + 2)
    worst = 0.0
    for k in range(50):
        d = int(rng.integers(2, 4))
        fits = sc.fit_groups(
            _random_dataset(rng, d, n_hi=10), math.inf if k % 2 else 5.0
        )
        v = sc.v_hat(fits)
        ref = entrywise_vhat(fits)
        # rtol on the matrix scale; the atol guard only covers float noise in
        # the all-degenerate case where the covariance is (near) zero
        assert np.allclose(v, ref, rtol=1e-8, atol=1e-14)
        scale = float(np.max(np.abs(ref)))
        if scale > 1e-6:
            worst = max(worst, float(np.max(np.abs(v - ref))) / scale)
    _pass(3, f"50 datasets, compact vs entrywise covariance, worst rel err = {worst:.2e}")


def test_criterion_4_bootstrap_dual_path():
    rng = np.random.default_rng(SEED + 3)
    worst = 0.0
    for k in range(20):
        d = int(rng.integers(2, 4))
        fits = sc.fit_groups(_random_dataset(rng, d, n_hi=10), math.inf if k % 2 else 5.0)
        spec = sc.one_way_contrast(d) if k % 3 else sc.make_contrast(rng.normal(size=(2, d)))
        n_total = sum(f.n for f in fits)
        while True:
            mult = rng.poisson(1.0, n_total) - 1.0
            try:
                produced = sc.wb_statistic(fits, spec, mult)
                break
            except sc.InvalidReplicateError:
                continue
        reference = naive_boot_statistic(fits, spec, mult)
        worst = max(worst, abs(produced - reference) / max(abs(reference), 1e-12))
    assert worst <= 1e-8
    _pass(4, f"20 fixed-multiplier cases, production vs naive, worst rel err = {worst:.2e}")


def _type1_config():
    scenario = Scenario(
        scenario_id="n1-lam1-K3",
        n_base=N_VECTORS["n1"],
        cens_rates=LAMBDA_VECTORS["lam1"],
        size_factor=3,
        layout="oneway",
    )
    return StudyConfig(
        scenarios=(scenario,), contrasts=("oneway",),
        replications=1000, n_boot=499, alpha=0.05, seed=SEED,
    )


def _power_config():
    scenario = Scenario(
        scenario_id="n2-lam5-K5",
        n_base=N_VECTORS["n2"],
        cens_rates=LAMBDA_VECTORS["lam5"],
        size_factor=5,
        layout="oneway",
    )
    return StudyConfig(
        scenarios=(scenario,), contrasts=("oneway",),
        replications=500, n_boot=499, alpha=0.05, seed=SEED + 10,
    )


@pytest.fixture(scope="session")
def type1_tables():
    cfg = _type1_config()
    return {
        workers: format_study_table(run_type1_study(cfg, workers=workers))
        for workers in (1, 8)
    }


@pytest.fixture(scope="session")
def power_tables():
    cfg = _power_config()
    return {
        workers: format_study_table(
            run_power_study(cfg, [0.0, 0.5, 1.0], workers=workers), power=True
        )
        for workers in (1, 8)
    }


def test_criterion_5_type1_error_desk_scale(type1_tables):
    row = type1_tables[1].splitlines()[1].split("\t")
    rate = float(row[4])
    excluded = int(row[6])
    assert excluded == 0
    assert abs(rate - 0.072) <= 0.020, f"rejection rate {rate:.3f} not within 7.2% +/- 2pp"
    _pass(5, f"one-way n1/lam1/K3, M=1000, B=499: rejection rate {100 * rate:.1f}% (target 7.2 +/- 2pp)")


@pytest.mark.skipif(
    not os.environ.get("SURVCONCORD_ACCEPT_EXTENDED"),
    reason="extended run enabled via SURVCONCORD_ACCEPT_EXTENDED=1",
)
def test_criterion_5_extended_type1():
    scenario = Scenario(
        scenario_id="n1-lam1-K10",
        n_base=N_VECTORS["n1"],
        cens_rates=LAMBDA_VECTORS["lam1"],
        size_factor=10,
        layout="oneway",
    )
    cfg = StudyConfig(
        scenarios=(scenario,), contrasts=("oneway",),
        replications=2000, n_boot=999, alpha=0.05, seed=SEED + 20,
    )
    rows = run_type1_study(cfg, workers=8)
    rate = rows[0].rejection_rate
    assert abs(rate - 0.057) <= 0.015, f"extended rate {rate:.3f} not within 5.7% +/- 1.5pp"
    _pass("5x", f"one-way n1/lam1/K10, M=2000, B=999: rejection rate {100 * rate:.1f}%")


def test_criterion_6_power_sanity(power_tables):
    lines = power_tables[1].splitlines()[1:]
    by_shift = {float(parts[2]): float(parts[5]) for parts in (l.split("\t") for l in lines)}
    assert abs(by_shift[0.0] - 0.05) <= 0.03, f"null rate {by_shift[0.0]:.3f} not within 5% +/- 3pp"
    assert by_shift[0.5] > 0.95, f"power at shift 0.5 is {by_shift[0.5]:.3f}"
    assert by_shift[1.0] > 0.95, f"power at shift 1.0 is {by_shift[1.0]:.3f}"
    _pass(
        6,
        "one-way n2/lam5/K5, M=500, B=499: rates "
        + ", ".join(f"d={d:g}: {100 * r:.1f}%" for d, r in sorted(by_shift.items())),
    )


COLON_EXPECTED = {
    # keyed by group size: (terminal time, censoring % after capping, effect)
    166: (2800.0, 47.6, 0.475),
    149: (2562.0, 51.0, 0.483),
    177: (2915.0, 47.5, 0.459),
    133: (2173.0, 52.6, 0.501),
    141: (2726.0, 68.8, 0.581),
    163: (2198.0, 55.2, 0.501),
}


def _colon_path():
    env = os.environ.get("SURVCONCORD_COLON_CSV")
    if env and Path(env).exists():
        return env
    bundled = Path(__file__).parent / "data" / "colonCS.csv"
    return str(bundled) if bundled.exists() else None


@pytest.mark.skipif(_colon_path() is None, reason="colon dataset not supplied")
def test_criterion_7_data_example():
    from survconcord.cli import analyze, ingest, select_tau, summarize

    dataset = ingest(_colon_path(), ["sex", "rx"])
    tau = select_tau(dataset, "auto")
    assert tau == 2173.0

    summary = summarize(dataset, "auto")
    assert summary["ties_before_capping"] == {1: 651, 2: 115, 3: 12, 4: 3}
    assert summary["ties_after_capping"] == {1: 421, 2: 59, 3: 7, 4: 2, 361: 1}

    report = analyze(
        dataset,
        ["oneway", "main:sex", "main:rx", "interaction:sex,rx"],
        alpha=0.05,
        n_boot=1999,
        tau_policy="auto",
        seed=SEED,
    )
    seen = {}
    for cell in report["cells"]:
        seen[cell["size"]] = (
            cell["terminal_time"],
            round(100 * cell["censoring_rate_capped"], 1),
            round(cell["effect"], 3),
        )
    assert seen == COLON_EXPECTED

    pvals = {t["hypothesis"]: t["p_value"] for t in report["tests"]}
    assert pvals["main:sex"] > 0.05
    for h in ("oneway", "main:rx", "interaction:sex,rx"):
        assert pvals[h] <= 0.001
    _pass(7, f"colon data example: tau=2173, effects/ties reproduced, p-values {pvals}")


def test_criterion_8_bootstrap_mean_near_one():
    rng = np.random.default_rng(SEED + 8)
    groups = []
    for i in range(6):
        n = 50
        t = rng.lognormal(0.0, 0.2726, n)
        c = rng.exponential(1 / 0.4, n)
        groups.append(sc.GroupData(np.minimum(t, c), (t <= c).astype(int), f"g{i}"))
    res = sc.wb_test(groups, sc.one_way_contrast(6), n_boot=2000, tau=math.inf, seed=SEED + 8)
    mean = float(res.boot_stats.mean())
    assert 0.8 <= mean <= 1.2
    _pass(8, f"d=6, n_i=50 null dataset: mean of 2000 bootstrap statistics = {mean:.3f}")


def test_criterion_9_worker_determinism(type1_tables, power_tables):
    assert type1_tables[1] == type1_tables[8], "type-I table differs between 1 and 8 workers"
    assert power_tables[1] == power_tables[8], "power table differs between 1 and 8 workers"
    _pass(9, "type-I and power tables byte-identical at 1 and 8 workers")
