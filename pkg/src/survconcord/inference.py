"""Hypothesis tests and confidence regions for group concordance effects.

The test statistic for a linear hypothesis C p = 0 is the ANOVA-type
quadratic form

    F = N * p' T p / tr(T V),      T = C' (C C')^+ C,

whose null distribution is calibrated by a multiplier wild bootstrap: the
martingale residuals of each Kaplan-Meier curve are perturbed by i.i.d.
mean-zero unit-variance multipliers, and the covariance matrix is replaced by
its optional-variation counterpart for each draw.

Finite-B conventions (deliberate choices, stable across releases):

* p-value ``(1 + #{F*_b >= F}) / (B + 1)``, which is valid at any finite B;
* critical value = the ``ceil((1 - alpha) (B + 1))``-th order statistic of the
  bootstrap sample, so that rejection at level alpha implies p-value <= alpha;
* draws whose trace denominator is not positive are redrawn with fresh
  multipliers, with total redraws capped at 10% of B;
* one root seed spawns an independent substream per replicate, so results are
  identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._engine import BootstrapEngine
from .effects import EffectEstimates, pairwise_effects
from .errors import (
    DegenerateDesignError,
    InvalidReplicateError,
    TooManyInvalidReplicates,
    ValidationError,
)
from .km import GroupData, KmFit, fit_groups, gamma_hat

__all__ = [
    "ContrastSpec",
    "TestResult",
    "Ellipsoid",
    "make_contrast",
    "v_hat",
    "anova_stat",
    "wb_statistic",
    "wb_test",
    "run_contrast_tests",
    "confidence_ellipsoid",
]

MULTIPLIER_KINDS = ("poisson", "normal")

# Replicates are evaluated in fixed-size slices so that results do not depend
# on how many workers share the slices.
_CHUNK = 512


@dataclass(frozen=True)
class ContrastSpec:
    """Hypothesis matrix ``c`` with its row-space projection ``t``.

    ``t`` depends only on the row space, so row-equivalent hypothesis
    matrices produce the same test.
    """

    c: np.ndarray
    t: np.ndarray
    label: str = ""

    @property
    def n_rows(self) -> int:
        return self.c.shape[0]


def _pinv_psd(mat: np.ndarray) -> np.ndarray:
    """Moore-Penrose inverse of a small symmetric PSD matrix via eigh.

    Eigenvalues below 1e-12 of the largest are treated as zero.
    """
    evals, evecs = np.linalg.eigh(mat)
    cutoff = 1e-12 * max(evals.max(), 0.0)
    inv = np.where(evals > cutoff, 1.0 / np.where(evals > cutoff, evals, 1.0), 0.0)
    return (evecs * inv) @ evecs.T


def make_contrast(c, label: str = "") -> ContrastSpec:
    """Build a :class:`ContrastSpec` from an r x d hypothesis matrix."""
    c = np.atleast_2d(np.asarray(c, dtype=float))
    if c.ndim != 2 or c.size == 0:
        raise ValidationError("contrast matrix must be a nonempty 2-d array")
    if not np.any(c):
        raise ValidationError("contrast matrix must not be all zeros")
    t = c.T @ _pinv_psd(c @ c.T) @ c
    return ContrastSpec(c=c, t=t, label=label)


def v_hat(fits: Sequence[KmFit]) -> np.ndarray:
    """Plug-in covariance matrix of the normalized effect vector.

    Assembles the compact four-term form from double Stieltjes sums of the
    corner-averaged per-group covariance kernels over the pooled jump grid
    (horizon atoms included).  Integrals against the averaged curve are the
    corresponding block means, so only the d x d matrices
    ``M_l[a, b] = int int Gamma_l^pmpm dS_a dS_b`` are needed.
    """
    d = len(fits)
    if d < 2:
        raise ValidationError("at least two groups required")
    total_n = sum(fit.n for fit in fits)
    union = np.unique(np.concatenate([f.survival.times for f in fits]))
    deltas = np.zeros((union.size, d))
    for a, f in enumerate(fits):
        idx = np.searchsorted(union, f.survival.times)
        deltas[idx, a] = f.survival.deltas

    v = np.zeros((d, d))
    term3 = np.zeros((d, d))
    diag2 = np.zeros(d)
    for l, f in enumerate(fits):
        pm = gamma_hat(f).pmpm(union[:, None], union[None, :])
        m_l = deltas.T @ pm @ deltas
        invlam = total_n / f.n
        v += invlam / d**2 * m_l
        diag2[l] = invlam * m_l.mean()
        term3[l, :] = invlam / d * m_l.mean(axis=0)
    v += np.diag(diag2) - term3 - term3.T
    return v


def anova_stat(eff: EffectEstimates, vhat: np.ndarray, spec: ContrastSpec, total_n: int) -> float:
    """N * p' T p / tr(T V); raises when the trace is not positive."""
    trace = float(np.trace(spec.t @ vhat))
    if trace <= 0.0:
        raise DegenerateDesignError(
            f"tr(T V) = {trace} for hypothesis {spec.label!r}: "
            "the design carries no variance under this contrast"
        )
    return float(total_n * eff.p @ spec.t @ eff.p / trace)


def _draw_multipliers(rng: np.random.Generator, kind: str, size: int) -> np.ndarray:
    if kind == "poisson":
        return rng.poisson(1.0, size) - 1.0
    if kind == "normal":
        return rng.standard_normal(size)
    raise ValidationError(f"unknown multiplier kind {kind!r}; choose from {MULTIPLIER_KINDS}")


def _eval_chunk(engine, children, kind, tgmat, t_stack):
    """Evaluate one fixed slice of replicates; top level for picklability."""
    g = np.empty((len(children), engine.total_n))
    for i, child in enumerate(children):
        g[i] = _draw_multipliers(np.random.default_rng(child), kind, engine.total_n)
    z, den = engine.batch(g, tgmat)
    nums = np.einsum("bi,cij,bj->bc", z, t_stack, z)
    return nums, den


def wb_statistic(
    fits: Sequence[KmFit],
    spec: ContrastSpec,
    multipliers,
    engine: BootstrapEngine | None = None,
) -> float:
    """Bootstrap statistic for one explicit multiplier vector.

    ``multipliers`` holds one value per subject, groups stacked in order and
    subjects in their input order within each group.  Raises
    :class:`InvalidReplicateError` when the draw yields a non-positive trace.
    """
    engine = engine if engine is not None else BootstrapEngine(fits)
    g = np.asarray(multipliers, dtype=float)
    if g.shape != (engine.total_n,):
        raise ValidationError(f"expected {engine.total_n} multipliers, got shape {g.shape}")
    tgmat = engine.trace_rows(spec.t)[:, None]
    nums, dens = _eval_chunk_direct(engine, g[None, :], tgmat, spec.t[None, :, :])
    den = float(dens[0, 0])
    if not den > 0.0:
        raise InvalidReplicateError(f"trace denominator {den} is not positive for this draw")
    return float(nums[0, 0] / den)


def _eval_chunk_direct(engine, g, tgmat, t_stack):
    z, den = engine.batch(g, tgmat)
    nums = np.einsum("bi,cij,bj->bc", z, t_stack, z)
    return nums, den


@dataclass(frozen=True)
class TestResult:
    """Outcome of one wild-bootstrap hypothesis test."""

    statistic: float
    boot_stats: np.ndarray
    critical_value: float
    p_value: float
    alpha: float
    n_boot: int
    seed: object
    trace_term: float
    effects: EffectEstimates
    vhat: np.ndarray
    contrast: ContrastSpec
    total_n: int
    tau: float
    multiplier: str
    n_redraws: int = 0

    @property
    def reject(self) -> bool:
        return self.statistic > self.critical_value


def run_contrast_tests(
    groups: Sequence[GroupData],
    specs: Sequence[ContrastSpec],
    alpha: float = 0.05,
    n_boot: int = 1999,
    tau: float = math.inf,
    multiplier: str = "poisson",
    seed=None,
    workers: int = 1,
) -> list[TestResult]:
    """Test several hypotheses on one dataset, sharing fits and bootstrap draws.

    All contrasts are evaluated on the same multiplier draws; per-contrast
    redraws replace degenerate replicates.  ``seed`` may be an int, None, or
    a ``numpy.random.SeedSequence``.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValidationError("alpha must be in (0, 1]")
    if n_boot < 39:
        raise ValidationError("at least 39 bootstrap replicates required")
    if not specs:
        raise ValidationError("at least one contrast required")
    if multiplier not in MULTIPLIER_KINDS:
        raise ValidationError(f"unknown multiplier kind {multiplier!r}")

    fits = fit_groups(groups, tau)
    tau_eff = fits[0].tau
    total_n = sum(fit.n for fit in fits)
    eff = pairwise_effects(fits)
    vhat = v_hat(fits)
    traces = [float(np.trace(s.t @ vhat)) for s in specs]
    stats = [anova_stat(eff, vhat, s, total_n) for s in specs]

    engine = BootstrapEngine(fits)
    tgmat = np.column_stack([engine.trace_rows(s.t) for s in specs])
    t_stack = np.ascontiguousarray(np.stack([s.t for s in specs]))

    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = root.spawn(n_boot)
    slices = [(lo, min(lo + _CHUNK, n_boot)) for lo in range(0, n_boot, _CHUNK)]

    if workers > 1 and len(slices) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(
                    _eval_chunk,
                    [engine] * len(slices),
                    [children[lo:hi] for lo, hi in slices],
                    [multiplier] * len(slices),
                    [tgmat] * len(slices),
                    [t_stack] * len(slices),
                )
            )
    else:
        parts = [
            _eval_chunk(engine, children[lo:hi], multiplier, tgmat, t_stack)
            for lo, hi in slices
        ]
    nums = np.vstack([p[0] for p in parts])
    dens = np.vstack([p[1] for p in parts])

    n_contrasts = len(specs)
    boot = np.full((n_boot, n_contrasts), np.nan)
    valid = dens > 0.0
    np.divide(nums, dens, out=boot, where=valid)

    budget = max(1, math.ceil(0.1 * n_boot))
    redraws = np.zeros(n_contrasts, dtype=int)
    for c in range(n_contrasts):
        invalid = np.flatnonzero(~valid[:, c])
        used = 0
        for b in invalid:
            while True:
                if used >= budget:
                    raise TooManyInvalidReplicates(
                        f"hypothesis {specs[c].label!r}: {invalid.size} of {n_boot} "
                        f"bootstrap draws had a degenerate trace and the redraw "
                        f"budget ({budget}) is exhausted"
                    )
                child = root.spawn(1)[0]
                used += 1
                g = _draw_multipliers(np.random.default_rng(child), multiplier, total_n)
                num_r, den_r = _eval_chunk_direct(
                    engine, g[None, :], tgmat[:, c : c + 1], t_stack[c : c + 1]
                )
                if den_r[0, 0] > 0.0:
                    boot[b, c] = num_r[0, 0] / den_r[0, 0]
                    break
        redraws[c] = used

    results = []
    for c, spec in enumerate(specs):
        col = boot[:, c]
        k = math.ceil((1.0 - alpha) * (n_boot + 1))
        if k <= 0:
            crit = -math.inf
        elif k > n_boot:
            crit = math.inf
        else:
            crit = float(np.sort(col)[k - 1])
        p_value = (1 + int(np.count_nonzero(col >= stats[c]))) / (n_boot + 1)
        results.append(
            TestResult(
                statistic=stats[c],
                boot_stats=col,
                critical_value=crit,
                p_value=p_value,
                alpha=alpha,
                n_boot=n_boot,
                seed=root.entropy,
                trace_term=traces[c],
                effects=eff,
                vhat=vhat,
                contrast=spec,
                total_n=total_n,
                tau=tau_eff,
                multiplier=multiplier,
                n_redraws=int(redraws[c]),
            )
        )
    return results


def wb_test(
    groups: Sequence[GroupData],
    spec: ContrastSpec,
    alpha: float = 0.05,
    n_boot: int = 1999,
    tau: float = math.inf,
    multiplier: str = "poisson",
    seed=None,
    workers: int = 1,
) -> TestResult:
    """Wild-bootstrap test of the hypothesis encoded by ``spec``."""
    return run_contrast_tests(
        groups, [spec], alpha=alpha, n_boot=n_boot, tau=tau,
        multiplier=multiplier, seed=seed, workers=workers,
    )[0]


@dataclass(frozen=True)
class Ellipsoid:
    """Confidence region {v : (center - v)' shape (center - v) <= radius_sq}."""

    center: np.ndarray
    shape: np.ndarray
    radius_sq: float

    def contains(self, v) -> bool:
        diff = self.center - np.asarray(v, dtype=float)
        return bool(diff @ self.shape @ diff <= self.radius_sq)


def confidence_ellipsoid(result: TestResult, spec: ContrastSpec | None = None) -> Ellipsoid:
    """Confidence ellipsoid for the contrast values C p, dual to the test.

    The zero vector lies inside exactly when the test does not reject.
    """
    spec = spec if spec is not None else result.contrast
    center = spec.c @ result.effects.p
    shape = _pinv_psd(spec.c @ spec.c.T)
    radius_sq = result.trace_term * result.critical_value / result.total_n
    return Ellipsoid(center=center, shape=shape, radius_sq=radius_sq)
