"""Precomputed jump-grid representation of the bootstrap statistic.

Every covariance-style kernel here has the shape S(s) S(t) Q(min(s, t)) with
Q cumulative over the group's event grid, so a double Stieltjes sum against
two survival curves splits per event time u into an outer product of the
suffix sums

    B_a(u) = 1/2 [ sum_{s >= u} S_l(s) dS_a(s) + sum_{s > u} S_l(s-) dS_a(s) ],

taken over the jumps s of curve a (atoms included).  With the centered
direction vectors g_u[a] = B_a(u)/d - 1{a = l} * mean_c B_c(u) the quantities
needed per bootstrap replicate collapse to weighted sums over the pooled
event grid:

    z[i]        = sqrt(N) * sum_u w(u)  G1(u) * g_u[i]
    tr(T V*)    =       N * sum_u qbase(u) G2(u) * g_u' T g_u
    V[a, b]     =       N * sum_u qhat(u)        * g_u[a] g_u[b]

where G1/G2 are the per-event-time sums of the subject multipliers and their
squares, w = sqrt(qbase), and the replicate statistic is z' T z / tr(T V*).
The per-replicate evaluation lives in ``_kernels``; everything precomputable
is stored here as flat arrays, which also keeps the engine picklable for
process pools.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from . import _kernels
from .km import KmFit

__all__ = ["BootstrapEngine"]


def _suffix_sums(values: np.ndarray) -> np.ndarray:
    """suffix[k] = sum of values[k:], with a trailing zero entry."""
    return np.concatenate([np.cumsum(values[::-1])[::-1], [0.0]])


class BootstrapEngine:
    """Flat per-event-grid coefficient arrays for one fitted dataset.

    Attributes of interest: ``gmat`` (rows are the direction vectors g_u),
    ``wbg`` (rows w(u) * g_u, feeding the perturbed effect vector), ``qbase``
    and ``qhat`` (per-row increment weights), ``event_cols``/``starts``
    (multiplier gather pattern: which columns of the stacked multiplier
    vector belong to which event time).
    """

    def __init__(self, fits: Sequence[KmFit]):
        d = len(fits)
        total_n = sum(fit.n for fit in fits)
        offsets = np.concatenate([[0], np.cumsum([fit.n for fit in fits])])

        gmat_rows = []
        qbase_rows = []
        qhat_rows = []
        wbg_rows = []
        event_cols = []
        counts = []
        row_group = []
        for l, fl in enumerate(fits):
            u = fl.grid
            if u.size == 0:
                continue
            b_mat = np.empty((u.size, d))
            for a, fa in enumerate(fits):
                ja = fa.survival.times
                da = fa.survival.deltas
                right = _suffix_sums(fl.survival(ja) * da)
                left = _suffix_sums(fl.survival(ja, left=True) * da)
                b_mat[:, a] = 0.5 * (
                    right[np.searchsorted(ja, u, side="left")]
                    + left[np.searchsorted(ja, u, side="right")]
                )
            g = b_mat / d
            g[:, l] -= b_mat.mean(axis=1)
            gmat_rows.append(g)
            qbase_rows.append(fl._qbase)
            qhat_rows.append(fl._qhat)
            wbg_rows.append(fl._wb_weight[:, None] * g)

            ev, gi = fl._event_grid_index
            order = np.argsort(gi, kind="stable")
            event_cols.append(offsets[l] + ev[order])
            counts.append(fl.events)
            row_group.extend([l] * u.size)

        self.d = d
        self.total_n = int(total_n)
        self.sqrt_n = math.sqrt(total_n)
        self.group_sizes = np.array([fit.n for fit in fits], dtype=np.int64)
        if gmat_rows:
            self.gmat = np.ascontiguousarray(np.vstack(gmat_rows))
            self.qbase = np.concatenate(qbase_rows)
            self.qhat = np.concatenate(qhat_rows)
            self.wbg = np.ascontiguousarray(np.vstack(wbg_rows))
            self.event_cols = np.concatenate(event_cols).astype(np.int64)
            self.starts = np.concatenate([[0], np.cumsum(np.concatenate(counts))]).astype(np.int64)
        else:
            self.gmat = np.zeros((0, d))
            self.qbase = np.zeros(0)
            self.qhat = np.zeros(0)
            self.wbg = np.zeros((0, d))
            self.event_cols = np.zeros(0, dtype=np.int64)
            self.starts = np.zeros(1, dtype=np.int64)
        self.row_group = np.asarray(row_group, dtype=np.int64)
        self.n_points = self.gmat.shape[0]

    def trace_rows(self, t_mat: np.ndarray) -> np.ndarray:
        """Per-grid-row contributions to tr(T V*) before the G^2 weights."""
        quad = np.einsum("md,de,me->m", self.gmat, t_mat, self.gmat)
        return self.total_n * self.qbase * quad

    def vhat_fast(self) -> np.ndarray:
        """Covariance matrix of the normalized effect vector, assembled from
        the same rows the bootstrap uses (cross-check against `v_hat`)."""
        return self.total_n * (self.gmat.T @ (self.qhat[:, None] * self.gmat))

    def batch(self, g_matrix: np.ndarray, tgmat: np.ndarray):
        """Evaluate a batch of multiplier vectors.

        ``g_matrix`` has one row per replicate and one column per subject in
        group-stacked order; ``tgmat`` has one column of trace rows per
        contrast.  Returns the perturbed effect vectors ``z`` (B, d) and the
        trace denominators ``den`` (B, C).
        """
        gev = np.ascontiguousarray(g_matrix[:, self.event_cols])
        return _kernels.batch_core(gev, self.starts, self.wbg, tgmat, self.sqrt_n)
