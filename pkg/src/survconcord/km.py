"""Per-group counting-process estimators.

Fits tie-aware Kaplan-Meier curves restricted to a horizon tau, exposes the
Nelson-Aalen hazard increments, the plug-in covariance kernel of the
normalized survival curve, and the multiplier-bootstrap building blocks
(perturbed survival process and its optional-variation kernel).

Horizon convention: every observation with time >= tau is recorded at tau as
censored, and the survival curve carries a deterministic jump to zero at tau
(the "atom") of size S(tau-).  The atom is not a hazard event: it contributes
to integrals through the jump of the survival curve but carries no bootstrap
noise of its own.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DegenerateFitWarning, ValidationError
from .stepfun import StepFn, TwoParamFn

__all__ = [
    "GroupData",
    "KmFit",
    "KmCovKernel",
    "resolve_tau",
    "fit_km",
    "fit_groups",
    "gamma_hat",
    "gamma_star",
    "wb_process",
]

WARN_TAU_AT_OR_BELOW_DATA = "tau_at_or_below_smallest_observation"


@dataclass(frozen=True)
class GroupData:
    """Right-censored observations of one group.

    ``times`` are the observed follow-up times, ``status`` is 1 for an
    observed event and 0 for censoring.  Ties of any pattern are allowed.
    """

    times: np.ndarray
    status: np.ndarray
    group_id: str = ""

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        status = np.asarray(self.status, dtype=int)
        if times.ndim != 1 or status.ndim != 1 or times.shape != status.shape:
            raise ValidationError("times and status must be 1-d arrays of equal length")
        if times.size == 0:
            raise ValidationError(f"group {self.group_id!r} is empty")
        if not np.all(np.isfinite(times)) or np.any(times <= 0.0):
            raise ValidationError(f"group {self.group_id!r}: times must be positive and finite")
        if not np.all((status == 0) | (status == 1)):
            raise ValidationError(f"group {self.group_id!r}: status must be 0 or 1")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "status", status)
        times.setflags(write=False)
        status.setflags(write=False)

    @property
    def n(self) -> int:
        return self.times.size


def resolve_tau(groups: Sequence[GroupData], tau: float) -> float:
    """Turn the infinite-horizon sentinel into a concrete atom location.

    With ``tau=inf`` the leftover survival mass is pushed to an atom placed
    just beyond the largest observation pooled over all groups; the exact
    placement does not matter because no curve jumps past that point.
    Finite values pass through unchanged.
    """
    if not groups:
        raise ValidationError("at least one group required")
    if math.isinf(tau):
        return float(max(g.times.max() for g in groups)) + 1.0
    if tau <= 0.0:
        raise ValidationError("tau must be positive")
    return float(tau)


@dataclass(frozen=True)
class KmFit:
    """Kaplan-Meier fit of one group on [0, tau].

    ``grid`` holds the distinct uncensored times strictly below tau;
    ``at_risk`` and ``events`` are the counts Y(u) and dN(u) on that grid.
    ``survival`` is the product-limit curve including the forced atom at tau.
    ``times``/``status`` are the capped observations in input order, so that
    subject k of the originating :class:`GroupData` stays at index k.
    """

    n: int
    tau: float
    grid: np.ndarray
    at_risk: np.ndarray
    events: np.ndarray
    survival: StepFn
    times: np.ndarray
    status: np.ndarray
    group_id: str = ""
    flags: tuple = ()

    @property
    def hazard_increments(self) -> np.ndarray:
        """Nelson-Aalen increments dN(u) / Y(u) on the event grid."""
        return self.events / self.at_risk

    @cached_property
    def _qbase(self) -> np.ndarray:
        # 1 / ((Y - dN) Y); zero at grid points where the hazard increment is
        # one, matching the convention that everything vanishes from there on.
        y = self.at_risk.astype(float)
        dn = self.events.astype(float)
        with np.errstate(divide="ignore"):
            q = np.where(y > dn, 1.0 / ((y - dn) * y), 0.0)
        return q

    @cached_property
    def _qhat(self) -> np.ndarray:
        # Increment of the covariance integral: dLambda / (Y (1 - dLambda)),
        # which simplifies to dN / (Y (Y - dN)).
        return self.events * self._qbase

    @cached_property
    def _wb_weight(self) -> np.ndarray:
        # Per-event multiplier weight ((Y - dN) Y)^(-1/2).
        return np.sqrt(self._qbase)

    @cached_property
    def _event_grid_index(self) -> np.ndarray:
        """Grid index of each uncensored subject (input order of subjects)."""
        ev = np.flatnonzero(self.status == 1)
        return ev, np.searchsorted(self.grid, self.times[ev])


def fit_km(data: GroupData, tau: float) -> KmFit:
    """Tie-aware Kaplan-Meier fit restricted to [0, tau].

    ``tau`` may be ``math.inf``; it is then resolved against this group's own
    largest observation.  When fitting several groups jointly, resolve the
    horizon once with :func:`resolve_tau` (or use :func:`fit_groups`) so all
    groups share the same atom location.
    """
    tau_eff = resolve_tau([data], tau)
    flags = ()
    if tau_eff <= data.times.min():
        flags = (WARN_TAU_AT_OR_BELOW_DATA,)
        warnings.warn(
            f"group {data.group_id!r}: tau={tau_eff} at or below the smallest "
            "observation; all mass sits in the atom at tau",
            DegenerateFitWarning,
            stacklevel=2,
        )

    capped = np.minimum(data.times, tau_eff)
    cstatus = np.where(data.times < tau_eff, data.status, 0)

    grid, events = np.unique(capped[cstatus == 1], return_counts=True)
    sorted_capped = np.sort(capped)
    at_risk = data.n - np.searchsorted(sorted_capped, grid, side="left")
    surv_values = np.cumprod(1.0 - events / at_risk)

    # Forced atom: whatever is left at tau- drops to zero at tau.
    times = np.concatenate([grid, [tau_eff]])
    values = np.concatenate([surv_values, [0.0]])
    survival = StepFn(1.0, times, values)

    return KmFit(
        n=data.n,
        tau=tau_eff,
        grid=grid,
        at_risk=at_risk.astype(np.int64),
        events=events.astype(np.int64),
        survival=survival,
        times=capped,
        status=cstatus,
        group_id=data.group_id,
        flags=flags,
    )


def fit_groups(groups: Sequence[GroupData], tau: float) -> list[KmFit]:
    """Fit all groups with a shared horizon (resolving ``tau=inf`` jointly)."""
    tau_eff = resolve_tau(groups, tau)
    return [fit_km(g, tau_eff) for g in groups]


class KmCovKernel(TwoParamFn):
    """Kernel of the form S(s) S(t) * scale * Q(min(s, t)) with Q a cumulative
    sum over the event grid.  Covers both the plug-in covariance kernel and
    its multiplier-bootstrap counterpart."""

    def __init__(self, survival: StepFn, scale: float, grid: np.ndarray, increments: np.ndarray):
        self.survival = survival
        self.scale = float(scale)
        self.grid = np.asarray(grid, dtype=float)
        self.cum = np.concatenate(([0.0], np.cumsum(np.asarray(increments, dtype=float))))

    def corner(self, s, t, left_s: bool = False, left_t: bool = False):
        ss = self.survival(s, left=left_s)
        tt = self.survival(t, left=left_t)
        i_s = np.searchsorted(self.grid, s, side="left" if left_s else "right")
        i_t = np.searchsorted(self.grid, t, side="left" if left_t else "right")
        return ss * tt * self.scale * self.cum[np.minimum(i_s, i_t)]


def gamma_hat(fit: KmFit) -> KmCovKernel:
    """Plug-in covariance kernel of the normalized Kaplan-Meier curve.

    Gamma(s, t) = S(s) S(t) * n * sum_{u <= min(s,t)} dN(u) / (Y(u) (Y(u) - dN(u))).
    Grid points with Y = dN contribute nothing and the kernel vanishes for
    arguments at or past such a point (the survival factor is zero there).
    """
    return KmCovKernel(fit.survival, fit.n, fit.grid, fit._qhat)


def _per_grid_sums(fit: KmFit, values: np.ndarray) -> np.ndarray:
    """Sum per-subject values of uncensored subjects over their grid point."""
    ev, gi = fit._event_grid_index
    out = np.zeros(fit.grid.size)
    np.add.at(out, gi, values[ev])
    return out


def _check_multipliers(fit: KmFit, multipliers) -> np.ndarray:
    g = np.asarray(multipliers, dtype=float)
    if g.shape != (fit.n,):
        raise ValidationError(
            f"group {fit.group_id!r}: expected {fit.n} multipliers, got shape {g.shape}"
        )
    return g


def wb_process(fit: KmFit, multipliers, total_n: int) -> StepFn:
    """Multiplier-perturbed survival process for one group.

    h(t) = S(t) * sqrt(total_n) * sum over uncensored subjects k with
    X_k <= t of G_k * ((Y(X_k) - dN(X_k)) Y(X_k))^(-1/2), with the group's
    tau-restricted Kaplan-Meier curve S.  Subjects censored (or absorbed by
    the atom) contribute nothing; h vanishes from any grid point with Y = dN
    onward and is identically zero from tau on.
    """
    g = _check_multipliers(fit, multipliers)
    inc = fit._wb_weight * _per_grid_sums(fit, g)
    cum = np.cumsum(inc)
    surv_at_grid = fit.survival(fit.grid)
    values = surv_at_grid * math.sqrt(total_n) * cum
    times = np.concatenate([fit.grid, [fit.tau]])
    return StepFn(0.0, times, np.concatenate([values, [0.0]]))


def gamma_star(fit: KmFit, multipliers) -> KmCovKernel:
    """Optional-variation kernel of the multiplier-perturbed survival process.

    Same shape as :func:`gamma_hat` but each uncensored subject contributes
    G_k^2 / ((Y - dN) Y) at its event time instead of the hazard increment.
    """
    g = _check_multipliers(fit, multipliers)
    inc = fit._qbase * _per_grid_sums(fit, g * g)
    return KmCovKernel(fit.survival, fit.n, fit.grid, inc)
