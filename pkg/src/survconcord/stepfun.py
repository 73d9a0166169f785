"""Exact calculus for right-continuous step functions.

Survival curves, bootstrap processes and their covariance kernels are all
piecewise constant with finitely many jumps, so every integral in this
package is a finite Lebesgue-Stieltjes sum over jump grids.  Ties in the
data produce genuine jumps; the `pm` (plus-minus) value, the average of a
function and its left-continuous version, is used throughout so that mass
sitting exactly on a jump is split evenly.
"""

from __future__ import annotations

import numpy as np

from .errors import ValidationError

__all__ = [
    "StepFn",
    "TwoParamFn",
    "FuncKernel",
    "SumKernel",
    "eval_pm",
    "stieltjes_pm",
    "double_stieltjes_pmpm",
]


class StepFn:
    """Right-continuous piecewise-constant function on [0, inf).

    The function equals ``initial_value`` on [0, times[0]) and ``values[k]``
    on [times[k], times[k+1]).  Jump times must be positive, finite and
    strictly increasing; use :meth:`from_jumps` to merge duplicate times.
    Instances are immutable and safe to share between threads.
    """

    __slots__ = ("initial_value", "times", "values", "_values0")

    def __init__(self, initial_value: float, times, values):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.ndim != 1 or values.ndim != 1 or times.shape != values.shape:
            raise ValidationError("times and values must be 1-d arrays of equal length")
        if times.size:
            if not np.all(np.isfinite(times)) or times[0] <= 0.0:
                raise ValidationError("jump times must be positive and finite")
            if np.any(np.diff(times) <= 0.0):
                raise ValidationError("jump times must be strictly increasing")
        self.initial_value = float(initial_value)
        self.times = times
        self.values = values
        # values0[k] = value on the k-th constancy interval, starting at [0, t_1)
        self._values0 = np.concatenate(([self.initial_value], values))
        for arr in (self.times, self.values, self._values0):
            arr.setflags(write=False)

    @classmethod
    def constant(cls, value: float) -> "StepFn":
        return cls(value, [], [])

    @classmethod
    def from_jumps(cls, initial_value: float, jumps) -> "StepFn":
        """Build from (time, value_after) pairs; later duplicates win."""
        merged: dict[float, float] = {}
        for t, v in jumps:
            merged[float(t)] = float(v)
        times = sorted(merged)
        return cls(initial_value, times, [merged[t] for t in times])

    @property
    def deltas(self) -> np.ndarray:
        """Jump sizes f(t_k) - f(t_k-), aligned with ``times``."""
        return self.values - self._values0[:-1]

    def __call__(self, t, left: bool = False):
        """Evaluate f(t); with ``left=True`` the left limit f(t-)."""
        idx = np.searchsorted(self.times, t, side="left" if left else "right")
        out = self._values0[idx]
        return float(out) if np.isscalar(t) else out

    def left(self, t):
        return self(t, left=True)

    def pm(self, t):
        """The plus-minus value (f(t) + f(t-)) / 2."""
        return 0.5 * (self(t) + self(t, left=True))

    def __repr__(self) -> str:  # pragma: no cover
        return f"StepFn(initial={self.initial_value}, jumps={len(self.times)})"


class TwoParamFn:
    """Two-argument kernel evaluable at all four one-sided limit corners.

    Subclasses implement :meth:`corner`, vectorized over broadcastable
    arguments.  Kernels representing covariance functions are symmetric:
    ``corner(s, t, a, b) == corner(t, s, b, a)``.
    """

    def corner(self, s, t, left_s: bool = False, left_t: bool = False):
        raise NotImplementedError

    def value(self, s, t):
        return self.corner(s, t)

    def pmpm(self, s, t):
        """Average of the four corner evaluations at (s, t)."""
        return 0.25 * (
            self.corner(s, t, False, False)
            + self.corner(s, t, True, False)
            + self.corner(s, t, False, True)
            + self.corner(s, t, True, True)
        )


class FuncKernel(TwoParamFn):
    """Kernel defined by a jointly continuous function; left limits coincide
    with plain evaluation."""

    def __init__(self, fn):
        self.fn = fn

    def corner(self, s, t, left_s: bool = False, left_t: bool = False):
        return self.fn(s, t)


class SumKernel(TwoParamFn):
    """Weighted sum of kernels."""

    def __init__(self, kernels, weights=None):
        self.kernels = list(kernels)
        self.weights = [1.0] * len(self.kernels) if weights is None else list(weights)
        if len(self.weights) != len(self.kernels):
            raise ValidationError("one weight per kernel required")

    def corner(self, s, t, left_s: bool = False, left_t: bool = False):
        acc = 0.0
        for w, k in zip(self.weights, self.kernels):
            acc = acc + w * k.corner(s, t, left_s, left_t)
        return acc


def eval_pm(f: StepFn, t) -> float:
    """(f(t) + f(t-)) / 2, the tie-symmetric evaluation of ``f`` at ``t``."""
    return f.pm(t)


def stieltjes_pm(f: StepFn, g: StepFn) -> float:
    """Finite sum of f^pm against the jumps of g, in ascending time order.

    Returns sum over jump times t of g of f^pm(t) * (g(t) - g(t-)).  The
    result is exact for step functions; callers wanting the survival-style
    integral -int f^pm dg negate it.
    """
    if g.times.size == 0:
        return 0.0
    return float(np.dot(f.pm(g.times), g.deltas))


def double_stieltjes_pmpm(K: TwoParamFn, g1: StepFn, g2: StepFn) -> float:
    """Double Stieltjes sum of the corner-averaged kernel over two jump grids.

    Computes sum_s sum_t K^pmpm(s, t) dg1(s) dg2(t) with s ranging over the
    jumps of g1 and t over the jumps of g2.
    """
    if g1.times.size == 0 or g2.times.size == 0:
        return 0.0
    pm = K.pmpm(g1.times[:, None], g2.times[None, :])
    return float(g1.deltas @ np.asarray(pm) @ g2.deltas)
