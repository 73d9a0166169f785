"""Monte Carlo engine: null rejection rates and shift-alternative power.

Scenarios draw d groups with known survival laws and exponential censoring.
The stock group laws G1..G6 (lognormal, Weibull, gamma, and the three
equal-weight pairwise mixtures) are parameterized so that every group
concordance effect equals 1/2, i.e. all stock null hypotheses hold at
shift zero.  Parameterization conventions: Weibull survival
S(t) = exp(-(t/scale)^shape); gamma with shape/scale as named; lognormal
with log-mean/log-sd as named; exponential censoring with rate lambda
(mean 1/lambda).

Each replication owns an independent seed substream, so study tables are
byte-identical for a fixed root seed at any worker count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .designs import FactorialLayout, contrast_from_hypothesis
from .errors import DegenerateDesignError, ValidationError
from .inference import ContrastSpec, run_contrast_tests
from .km import GroupData

__all__ = [
    "Scenario",
    "StudyConfig",
    "StudyRow",
    "sample_scenario",
    "run_type1_study",
    "run_power_study",
    "write_study_table",
    "load_study_config",
    "default_type1_config",
    "full_type1_grid",
    "N_VECTORS",
    "LAMBDA_VECTORS",
    "GROUP_LAWS",
]

# Stock sample-size and censoring-rate vectors for d = 6 groups.
N_VECTORS = {
    "n1": (10, 10, 10, 10, 10, 10),
    "n2": (10, 12, 14, 10, 12, 14),
    "n3": (10, 12, 14, 14, 10, 12),
}
LAMBDA_VECTORS = {
    "lam1": (0.4,) * 6,
    "lam2": (0.5,) * 6,
    "lam3": (2 / 3,) * 6,
    "lam4": (0.4, 0.5, 2 / 3, 0.4, 0.5, 2 / 3),
    "lam5": (0.4, 0.5, 2 / 3, 2 / 3, 0.5, 0.4),
}


def _draw_g1(rng, size):
    return rng.lognormal(0.0, 0.2726, size)


def _draw_g2(rng, size):
    return 1.412 * rng.weibull(1.1, size)


def _draw_g3(rng, size):
    return rng.gamma(2.851, 0.4, size)


def _mix(draw_a, draw_b):
    def draw(rng, size):
        pick = rng.random(size) < 0.5
        return np.where(pick, draw_a(rng, size), draw_b(rng, size))

    return draw


GROUP_LAWS = {
    "G1": _draw_g1,
    "G2": _draw_g2,
    "G3": _draw_g3,
    "G4": _mix(_draw_g1, _draw_g2),
    "G5": _mix(_draw_g1, _draw_g3),
    "G6": _mix(_draw_g2, _draw_g3),
}


@dataclass(frozen=True)
class Scenario:
    """One simulation cell: group laws, censoring, sizes, shift and layout."""

    scenario_id: str
    dists: tuple = ("G1", "G2", "G3", "G4", "G5", "G6")
    cens_rates: tuple = LAMBDA_VECTORS["lam1"]
    n_base: tuple = N_VECTORS["n1"]
    size_factor: int = 1
    shift: float = 0.0
    tau: float = math.inf
    layout: str = "oneway"

    def __post_init__(self):
        d = len(self.dists)
        if not (len(self.cens_rates) == len(self.n_base) == d):
            raise ValidationError("dists, cens_rates and n_base must have equal length")
        for name in self.dists:
            if name not in GROUP_LAWS:
                raise ValidationError(f"unknown group law {name!r}")
        if any(r <= 0 for r in self.cens_rates):
            raise ValidationError("censoring rates must be positive")
        if self.size_factor < 1 or int(self.size_factor) != self.size_factor:
            raise ValidationError("size_factor must be a positive integer")
        if self.shift < 0:
            raise ValidationError("shift must be nonnegative")
        if self.layout not in ("oneway", "2x3"):
            raise ValidationError("layout must be 'oneway' or '2x3'")
        if self.layout == "2x3" and d != 6:
            raise ValidationError("the 2x3 layout needs exactly 6 groups")

    @property
    def d(self) -> int:
        return len(self.dists)

    @property
    def sizes(self) -> tuple:
        return tuple(int(n * self.size_factor) for n in self.n_base)

    def factorial_layout(self) -> FactorialLayout:
        if self.layout == "2x3":
            return FactorialLayout((("A", ("1", "2")), ("B", ("1", "2", "3"))))
        return FactorialLayout((("group", tuple(str(i + 1) for i in range(self.d))),))


@dataclass(frozen=True)
class StudyConfig:
    """Scenario grid plus Monte Carlo settings."""

    scenarios: tuple
    contrasts: tuple = ("oneway",)
    replications: int = 1000
    n_boot: int = 499
    alpha: float = 0.05
    seed: int = 0
    multiplier: str = "poisson"

    def __post_init__(self):
        if self.replications < 1:
            raise ValidationError("replications must be at least 1")
        if self.n_boot < 39:
            raise ValidationError("at least 39 bootstrap replicates required")


def sample_scenario(scenario: Scenario, rng: np.random.Generator) -> list[GroupData]:
    """Draw one dataset.  Group 1's survival and censoring times are both
    shifted, which preserves its censoring rate while moving its effect."""
    groups = []
    for i, (name, rate, n) in enumerate(
        zip(scenario.dists, scenario.cens_rates, scenario.sizes)
    ):
        t = GROUP_LAWS[name](rng, n)
        c = rng.exponential(1.0 / rate, n)
        if i == 0 and scenario.shift > 0:
            t = t + scenario.shift
            c = c + scenario.shift
        x = np.minimum(t, c)
        status = (t <= c).astype(int)
        groups.append(GroupData(x, status, group_id=f"{scenario.scenario_id}/g{i + 1}"))
    return groups


def _scenario_specs(scenario: Scenario, contrasts: Sequence[str]) -> list[ContrastSpec]:
    layout = scenario.factorial_layout()
    return [contrast_from_hypothesis(h, layout) for h in contrasts]


def _replicate(scenario, specs, child, n_boot, alpha, multiplier):
    """One Monte Carlo replication; None per contrast marks an exclusion."""
    data_ss, boot_ss = child.spawn(2)
    groups = sample_scenario(scenario, np.random.default_rng(data_ss))
    try:
        results = run_contrast_tests(
            groups, specs, alpha=alpha, n_boot=n_boot, tau=scenario.tau,
            multiplier=multiplier, seed=boot_ss,
        )
    except DegenerateDesignError:
        return [None] * len(specs)
    return [bool(r.reject) for r in results]


@dataclass(frozen=True)
class StudyRow:
    scenario_id: str
    contrast: str
    replications: int
    n_boot: int
    rejection_rate: float
    mc_stderr: float
    excluded: int
    shift: float = 0.0


def _run_scenario(scenario, cfg: StudyConfig, scenario_index: int, workers: int) -> list[StudyRow]:
    specs = _scenario_specs(scenario, cfg.contrasts)
    root = np.random.SeedSequence(cfg.seed, spawn_key=(scenario_index,))
    children = root.spawn(cfg.replications)
    args = [(scenario, specs, child, cfg.n_boot, cfg.alpha, cfg.multiplier) for child in children]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_replicate_star, args, chunksize=8))
    else:
        outcomes = [_replicate(*a) for a in args]

    rows = []
    for c, name in enumerate(cfg.contrasts):
        flags = [o[c] for o in outcomes]
        valid = [f for f in flags if f is not None]
        n_valid = len(valid)
        rate = sum(valid) / n_valid if n_valid else math.nan
        se = math.sqrt(rate * (1.0 - rate) / n_valid) if n_valid else math.nan
        rows.append(
            StudyRow(
                scenario_id=scenario.scenario_id,
                contrast=name,
                replications=cfg.replications,
                n_boot=cfg.n_boot,
                rejection_rate=rate,
                mc_stderr=se,
                excluded=cfg.replications - n_valid,
                shift=scenario.shift,
            )
        )
    return rows


def _replicate_star(args):
    return _replicate(*args)


def run_type1_study(cfg: StudyConfig, workers: int = 1) -> list[StudyRow]:
    """Rejection rate per scenario x contrast under the configured scenarios."""
    rows = []
    for si, scenario in enumerate(cfg.scenarios):
        rows.extend(_run_scenario(scenario, cfg, si, workers))
    return rows


def run_power_study(cfg: StudyConfig, shifts: Sequence[float], workers: int = 1) -> list[StudyRow]:
    """Rejection rate along a grid of location shifts applied to group 1.

    Shift zero reproduces the null study for the same scenarios.
    """
    rows = []
    index = 0
    for scenario in cfg.scenarios:
        for delta in shifts:
            shifted = replace(scenario, shift=float(delta))
            rows.extend(_run_scenario(shifted, cfg, index, workers))
            index += 1
    return rows


_TABLE_HEADER = ("scenario", "contrast", "M", "B", "rejection_rate", "mc_stderr", "excluded")


def format_study_table(rows: Sequence[StudyRow], power: bool = False) -> str:
    """Tab-separated table with a header row; `power` adds the shift column."""
    header = list(_TABLE_HEADER)
    if power:
        header.insert(2, "shift")
    lines = ["\t".join(header)]
    for r in rows:
        fields = [r.scenario_id, r.contrast]
        if power:
            fields.append(f"{r.shift:g}")
        fields += [
            str(r.replications),
            str(r.n_boot),
            f"{r.rejection_rate:.6f}",
            f"{r.mc_stderr:.6f}",
            str(r.excluded),
        ]
        lines.append("\t".join(fields))
    return "\n".join(lines) + "\n"


def write_study_table(rows: Sequence[StudyRow], path, power: bool = False) -> None:
    with open(path, "w") as fh:
        fh.write(format_study_table(rows, power=power))


def _scenario_from_dict(obj: dict, index: int) -> Scenario:
    tau = obj.get("tau", "pooled-max")
    return Scenario(
        scenario_id=str(obj.get("id", f"scenario{index + 1}")),
        dists=tuple(obj.get("dists", ("G1", "G2", "G3", "G4", "G5", "G6"))),
        cens_rates=tuple(obj.get("cens_rates", LAMBDA_VECTORS["lam1"])),
        n_base=tuple(obj.get("n_base", N_VECTORS["n1"])),
        size_factor=int(obj.get("size_factor", 1)),
        shift=float(obj.get("shift", 0.0)),
        tau=math.inf if tau == "pooled-max" else float(tau),
        layout=str(obj.get("layout", "oneway")),
    )


def load_study_config(path) -> StudyConfig:
    """Read a study configuration from a JSON document.

    Shape: {"scenarios": [{...}], "contrasts": [...], "replications": M,
    "bootstrap": B, "alpha": a, "seed": s, "multiplier": kind}.  Scenario
    fields: id, dists, cens_rates, n_base, size_factor, shift, layout, and
    tau (a number, or "pooled-max" for the unrestricted-horizon mode).
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read study config {path}: {exc}") from exc
    if "scenarios" not in raw or not raw["scenarios"]:
        raise ValidationError("study config must list at least one scenario")
    scenarios = tuple(_scenario_from_dict(o, i) for i, o in enumerate(raw["scenarios"]))
    return StudyConfig(
        scenarios=scenarios,
        contrasts=tuple(raw.get("contrasts", ("oneway",))),
        replications=int(raw.get("replications", 1000)),
        n_boot=int(raw.get("bootstrap", 499)),
        alpha=float(raw.get("alpha", 0.05)),
        seed=int(raw.get("seed", 0)),
        multiplier=str(raw.get("multiplier", "poisson")),
    )


def default_type1_config(seed: int = 0) -> StudyConfig:
    """Desk-scale null study: balanced sizes, light censoring, K = 3."""
    scenario = Scenario(
        scenario_id="n1-lam1-K3",
        n_base=N_VECTORS["n1"],
        cens_rates=LAMBDA_VECTORS["lam1"],
        size_factor=3,
        layout="oneway",
    )
    return StudyConfig(scenarios=(scenario,), contrasts=("oneway",), seed=seed)


def full_type1_grid(size_factors=(1, 2, 3, 5, 10), layout: str = "oneway") -> tuple:
    """All 75 combinations of stock size vectors, censoring vectors and size
    factors.  At full replication counts this is a long-running study; it is
    exposed behind an explicit flag, not as a default."""
    scenarios = []
    for n_name, n_vec in N_VECTORS.items():
        for l_name, l_vec in LAMBDA_VECTORS.items():
            for k in size_factors:
                scenarios.append(
                    Scenario(
                        scenario_id=f"{n_name}-{l_name}-K{k}",
                        n_base=n_vec,
                        cens_rates=l_vec,
                        size_factor=k,
                        layout=layout,
                    )
                )
    return tuple(scenarios)
