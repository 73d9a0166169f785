import sys
from pathlib import Path

import numpy as np
import pytest

SRC = Path(__file__).resolve().parent.parent / "src"
if str(SRC) not in sys.path:
    try:
        import survconcord  # noqa: F401
    except ImportError:
        sys.path.insert(0, str(SRC))

from survconcord import GroupData  # noqa: E402


def make_group(times, status=None, group_id="g"):
    times = np.asarray(times, dtype=float)
    if status is None:
        status = np.ones(times.size, dtype=int)
    return GroupData(times, np.asarray(status, dtype=int), group_id)


def random_groups(rng, d=None, n_range=(3, 15), censor=0.4, tie_decimals=1):
    """Small censored groups with forced ties (times rounded coarsely)."""
    if d is None:
        d = int(rng.integers(2, 4))
    groups = []
    for i in range(d):
        n = int(rng.integers(n_range[0], n_range[1] + 1))
        t = np.round(rng.exponential(2.0, n), tie_decimals) + 0.1
        c = rng.exponential(2.0 / max(censor, 1e-9), n) if censor > 0 else np.full(n, np.inf)
        x = np.minimum(t, c)
        s = (t <= c).astype(int)
        groups.append(GroupData(np.round(x, tie_decimals) + 0.05, s, f"g{i}"))
    return groups


@pytest.fixture
def rng():
    return np.random.default_rng(20240819)
