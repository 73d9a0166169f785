"""Pairwise concordance matrix and group concordance effects.

Index convention (important): ``w[j, i]`` is the probability-style effect of
group i measured against group j,

    w[j, i] = -int S_i^pm dS_j
            = P(subject from group i outlives subject from group j)
              + 1/2 P(tie),

so the diagonal is exactly 1/2 and ``w[j, i] + w[i, j] = 1``.  The group
effect ``p[i]`` is the column mean ``(1/d) sum_j w[j, i]``: the chance that a
group-i subject outlives a subject drawn from the equal-weight mixture of all
groups, with ties counted half.  Horizon atoms participate in every integral,
which is what makes these identities exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .km import KmFit
from .stepfun import stieltjes_pm

__all__ = ["EffectEstimates", "pairwise_effects"]


@dataclass(frozen=True)
class EffectEstimates:
    """d x d pairwise effect matrix ``w`` and d-vector ``p`` of group effects."""

    w: np.ndarray
    p: np.ndarray
    d: int
    flags: tuple = ()


def pairwise_effects(fits: Sequence[KmFit]) -> EffectEstimates:
    """Estimate all pairwise and group concordance effects from fitted curves.

    All fits must share the same horizon so their atoms line up; with fully
    uncensored data this reproduces mid-rank Mann-Whitney relative effects.
    """
    d = len(fits)
    if d < 2:
        raise ValidationError("at least two groups required")
    taus = {fit.tau for fit in fits}
    if len(taus) != 1:
        raise ValidationError(f"fits use different horizons: {sorted(taus)}")

    w = np.empty((d, d))
    for j in range(d):
        for i in range(d):
            w[j, i] = -stieltjes_pm(fits[i].survival, fits[j].survival)
    p = w.mean(axis=0)
    flags = tuple(flag for fit in fits for flag in fit.flags)
    return EffectEstimates(w=w, p=p, d=d, flags=flags)
