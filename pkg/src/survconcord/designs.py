"""Factorial layout bookkeeping and contrast matrix construction.

Cells of a crossed design are ordered lexicographically in the declared
factor order (first factor slowest), which is what makes the Kronecker
construction of main-effect and interaction contrasts line up with the cell
indexing.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import ValidationError
from .inference import ContrastSpec, make_contrast

__all__ = [
    "FactorialLayout",
    "centering_matrix",
    "one_way_contrast",
    "main_effect_contrast",
    "interaction_contrast",
    "load_contrast_matrix",
    "contrast_from_hypothesis",
]


@dataclass(frozen=True)
class FactorialLayout:
    """Ordered factors with their level lists; cells in lexicographic order."""

    factors: tuple

    def __post_init__(self):
        factors = tuple((str(name), tuple(levels)) for name, levels in self.factors)
        if not factors:
            raise ValidationError("at least one factor required")
        names = [name for name, _ in factors]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate factor names: {names}")
        for name, levels in factors:
            if len(levels) < 1:
                raise ValidationError(f"factor {name!r} has no levels")
            if len(set(levels)) != len(levels):
                raise ValidationError(f"factor {name!r} has duplicate levels")
        if self.d < 2:
            raise ValidationError("the design must have at least two cells")
        object.__setattr__(self, "factors", factors)

    @property
    def names(self) -> tuple:
        return tuple(name for name, _ in self.factors)

    @property
    def level_counts(self) -> tuple:
        return tuple(len(levels) for _, levels in self.factors)

    @property
    def d(self) -> int:
        out = 1
        for _, levels in self.factors:
            out *= len(levels)
        return out

    def cells(self) -> list[tuple]:
        """All level combinations, first factor slowest."""
        return list(product(*(levels for _, levels in self.factors)))

    def cell_index(self, values) -> int:
        values = tuple(values)
        if len(values) != len(self.factors):
            raise ValidationError(f"expected {len(self.factors)} factor values, got {len(values)}")
        idx = 0
        for (name, levels), v in zip(self.factors, values):
            try:
                pos = levels.index(v)
            except ValueError:
                raise ValidationError(f"unknown level {v!r} for factor {name!r}") from None
            idx = idx * len(levels) + pos
        return idx

    def cell_label(self, values) -> str:
        return ",".join(f"{name}={v}" for (name, _), v in zip(self.factors, values))


def centering_matrix(d: int) -> np.ndarray:
    """P_d = I_d - J_d / d: symmetric, idempotent, zero row sums."""
    if d < 1:
        raise ValidationError("d must be at least 1")
    return np.eye(d) - np.ones((d, d)) / d


def one_way_contrast(d: int) -> ContrastSpec:
    """Equality of all group effects: C = P_d."""
    if d < 2:
        raise ValidationError("d must be at least 2")
    return make_contrast(centering_matrix(d), label="one-way: all group effects equal")


def _kron_contrast(layout: FactorialLayout, targets: set) -> np.ndarray:
    blocks = []
    for name, levels in layout.factors:
        a = len(levels)
        blocks.append(centering_matrix(a) if name in targets else np.ones((a, a)) / a)
    out = np.array([[1.0]])
    for b in blocks:
        out = np.kron(out, b)
    return out


def main_effect_contrast(layout: FactorialLayout, factor: str) -> ContrastSpec:
    """No main effect of ``factor``: level means of the effect vector equal."""
    if factor not in layout.names:
        raise ValidationError(f"unknown factor {factor!r}; have {layout.names}")
    c = _kron_contrast(layout, {factor})
    return make_contrast(c, label=f"main effect of {factor}")


def interaction_contrast(layout: FactorialLayout, factor_a: str, factor_b: str) -> ContrastSpec:
    """No interaction between two factors (all others averaged out)."""
    for f in (factor_a, factor_b):
        if f not in layout.names:
            raise ValidationError(f"unknown factor {f!r}; have {layout.names}")
    if factor_a == factor_b:
        raise ValidationError("interaction requires two distinct factors")
    c = _kron_contrast(layout, {factor_a, factor_b})
    return make_contrast(c, label=f"interaction {factor_a} x {factor_b}")


def load_contrast_matrix(path) -> np.ndarray:
    """Read a contrast matrix from a whitespace-separated text file."""
    try:
        mat = np.loadtxt(path, ndmin=2)
    except (OSError, ValueError) as exc:
        raise ValidationError(f"cannot read contrast matrix from {path}: {exc}") from exc
    return mat


def contrast_from_hypothesis(hypothesis: str, layout: FactorialLayout) -> ContrastSpec:
    """Parse a hypothesis string into a contrast.

    Supported forms: ``oneway``, ``main:<factor>``, ``interaction:<f1>,<f2>``
    and ``custom:<path>`` (plain-text matrix with d columns).
    """
    h = hypothesis.strip()
    if h == "oneway":
        return one_way_contrast(layout.d)
    if h.startswith("main:"):
        return main_effect_contrast(layout, h.split(":", 1)[1].strip())
    if h.startswith("interaction:"):
        parts = [p.strip() for p in h.split(":", 1)[1].split(",")]
        if len(parts) != 2:
            raise ValidationError(f"interaction hypothesis needs two factors, got {hypothesis!r}")
        return interaction_contrast(layout, parts[0], parts[1])
    if h.startswith("custom:"):
        path = h.split(":", 1)[1].strip()
        mat = load_contrast_matrix(path)
        if mat.shape[1] != layout.d:
            raise ValidationError(
                f"contrast matrix in {path} has {mat.shape[1]} columns, design has {layout.d} cells"
            )
        return make_contrast(mat, label=f"custom contrast from {path}")
    raise ValidationError(
        f"unknown hypothesis {hypothesis!r}; use oneway, main:<factor>, "
        "interaction:<f1>,<f2> or custom:<path>"
    )
