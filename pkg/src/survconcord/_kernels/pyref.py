"""Pure-numpy implementation of the bootstrap hot kernel."""

import numpy as np


def batch_core(gev, starts, wbg, tgmat, sqrt_n):
    """Evaluate a batch of bootstrap replicates against precomputed grids.

    gev     (B, K)  multipliers of event subjects, columns ordered so that
                    subjects sharing a jump point are contiguous
    starts  (M+1,)  int64 segment offsets into the columns of gev, one segment
                    per jump point; starts[0] == 0 and starts[M] == K
    wbg     (M, d)  per-jump-point weight rows for the perturbed-effect vector
    tgmat   (M, C)  per-jump-point trace rows, one column per contrast
    sqrt_n  scalar  sqrt of the total sample size

    Returns ``(z, den)`` with ``z`` of shape (B, d) and ``den`` of shape
    (B, C): z[b] = sqrt_n * sum_j g1[b, j] * wbg[j], den[b] = sum_j
    g2[b, j] * tgmat[j], where g1/g2 are the per-segment sums of the
    multipliers and their squares.
    """
    gev = np.ascontiguousarray(gev, dtype=np.float64)
    n_batch = gev.shape[0]
    n_points = starts.shape[0] - 1
    if n_points == 0:
        return (
            np.zeros((n_batch, wbg.shape[1])),
            np.zeros((n_batch, tgmat.shape[1])),
        )
    g1 = np.add.reduceat(gev, starts[:-1], axis=1)
    g2 = np.add.reduceat(gev * gev, starts[:-1], axis=1)
    z = sqrt_n * (g1 @ wbg)
    den = g2 @ tgmat
    return z, den
