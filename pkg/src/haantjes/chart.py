"""Coordinate chart boxes and deterministic sample points."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

__all__ = ["ChartBox", "sample_points"]


@dataclass(frozen=True)
class ChartBox:
    """An open coordinate box: the single chart all fields live on.

    ``label`` is the display letter for coordinates (u, t or A); all three
    letters alias the same indices in expressions.
    """

    dim: int
    lower: tuple = ()
    upper: tuple = ()
    base_point: tuple = ()
    label: str = "u"

    def __post_init__(self):
        if self.dim < 1:
            raise DomainError("chart dimension must be >= 1")
        lower = tuple(float(x) for x in (self.lower or (-1.0,) * self.dim))
        upper = tuple(float(x) for x in (self.upper or (1.0,) * self.dim))
        if len(lower) != self.dim or len(upper) != self.dim:
            raise DomainError("bounds length must equal the chart dimension")
        if not all(lo < hi for lo, hi in zip(lower, upper)):
            raise DomainError("chart box requires lower[i] < upper[i]")
        base = self.base_point or tuple((lo + hi) / 2.0 for lo, hi in zip(lower, upper))
        base = tuple(float(x) for x in base)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "base_point", base)
        if not self.contains(base):
            raise DomainError("base point must lie strictly inside the box")
        if self.label not in ("u", "t", "A"):
            raise DomainError(f"chart label must be one of u/t/A, got {self.label!r}")

    def contains(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,):
            return False
        return bool(np.all(p > self.lower) and np.all(p < self.upper))

    def require_interior(self, p):
        if not self.contains(p):
            raise DomainError(f"point {np.asarray(p)} outside chart box")

    @property
    def base(self):
        return np.asarray(self.base_point, dtype=float)

    @property
    def widths(self):
        return np.asarray(self.upper) - np.asarray(self.lower)


# Generalized golden-ratio (Kronecker) sequence: deterministic, low
# discrepancy, identical across platforms.
def _alphas(dim):
    phi = 1.0
    for _ in range(64):
        phi = (1.0 + phi) ** (1.0 / (dim + 1))
    return np.array([(1.0 / phi) ** (k + 1) for k in range(dim)])


def sample_points(chart, count, seed=42, shrink=0.8):
    """Deterministic low-discrepancy points in the middle ``shrink`` of the box.

    The seed offsets the sequence start, so reports are reproducible given
    (manifest, seed).
    """
    lo = np.asarray(chart.lower)
    hi = np.asarray(chart.upper)
    mid = (lo + hi) / 2.0
    half = (hi - lo) * shrink / 2.0
    alphas = _alphas(chart.dim)
    start = ((seed * 0.6180339887498949) + 0.5) % 1.0
    idx = np.arange(1, count + 1)[:, None]
    unit = (start + idx * alphas[None, :]) % 1.0
    return mid + (unit - 0.5) * 2.0 * half
