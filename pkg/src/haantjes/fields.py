"""Tensor fields: expression-valued components with valence metadata.

A :class:`TensorField` stores one :class:`~haantjes.expr.Expr` per component.
``jet_at`` evaluates every component's 2-jet at a point and returns plain
numpy arrays (values, gradients, Hessians), the common currency of all
geometric operations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import DimensionMismatch, DomainError
from .jets import Jet, fd_gradient, variables

__all__ = ["Valence", "TensorField", "JetTensor", "eval_jet2", "identity_field"]

VALENCE_SHAPES = {
    "scalar": 0,
    "vector": 1,
    "oneform": 1,
    "(1,1)": 2,
    "(1,2)": 3,
}


class Valence:
    SCALAR = "scalar"
    VECTOR = "vector"
    ONEFORM = "oneform"
    OP = "(1,1)"  # K^j_l: [j, l] = upper, lower
    BILINEAR = "(1,2)"  # C^m_{jl}: [m, j, l] = upper, lower, lower


@dataclass(frozen=True)
class JetTensor:
    """2-jet of every component: value[S], grad[S + (n,)], hess[S + (n, n)].

    The trailing axes index the differentiation directions:
    ``grad[..., s] = d(component)/dx_s``.
    """

    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray


class TensorField:
    def __init__(self, chart, valence, components):
        if valence not in VALENCE_SHAPES:
            raise DimensionMismatch(f"unknown valence {valence!r}")
        n = chart.dim
        rank = VALENCE_SHAPES[valence]
        shape = (n,) * rank
        comps = np.empty(shape, dtype=object)
        arr = np.asarray(components, dtype=object)
        if rank == 0:
            if arr.shape not in ((), (1,)):
                raise DimensionMismatch("scalar field takes a single component")
            comps = arr.reshape(())
        else:
            if arr.shape != shape:
                raise DimensionMismatch(
                    f"valence {valence} on a {n}-dim chart needs {n ** rank} components "
                    f"of shape {shape}, got {arr.shape}"
                )
            comps = arr
        for c in comps.flat if rank else [comps[()]]:
            if not isinstance(c, ex.Expr):
                raise DimensionMismatch(f"component is not an expression: {c!r}")
        self.chart = chart
        self.valence = valence
        self.components = comps

    def __repr__(self):
        return f"TensorField({self.valence}, dim={self.chart.dim})"

    def same_chart(self, other):
        if self.chart is not other.chart and self.chart != other.chart:
            raise DimensionMismatch("fields live on different charts")

    def value_at(self, p, check=True):
        """Component values; ``p`` may be a point or a list of coordinate arrays."""
        if check and np.asarray(p, dtype=float).ndim == 1:
            self.chart.require_interior(p)
        vals = list(p)
        base_shape = np.broadcast_shapes(*[np.shape(v) for v in vals]) if vals else ()
        shape = self.components.shape
        if shape == ():
            v = self.components[()].eval(vals)
            return np.broadcast_to(np.asarray(v, dtype=float), base_shape).copy()
        flat = [c.eval(vals) for c in self.components.flat]
        out = np.empty(shape + base_shape, dtype=float)
        for idx, v in zip(np.ndindex(shape), flat):
            out[idx] = np.broadcast_to(np.asarray(v, dtype=float), base_shape)
        return out

    def jet_at(self, p, check=True):
        """Exact 2-jets of all components at a single point."""
        p = np.asarray(p, dtype=float)
        if check:
            self.chart.require_interior(p)
        coords = variables(p)
        n = self.chart.dim
        shape = self.components.shape
        value = np.empty(shape)
        grad = np.empty(shape + (n,))
        hess = np.empty(shape + (n, n))
        it = np.ndindex(shape) if shape else [()]
        for idx in it:
            j = _as_jet(self.components[idx].eval(coords), n)
            value[idx] = j.value
            grad[idx] = j.grad
            hess[idx] = j.hess
        return JetTensor(value, grad, hess)

    def diff(self):
        """Componentwise symbolic gradient: one extra trailing index."""
        n = self.chart.dim
        shape = self.components.shape + (n,)
        out = np.empty(shape, dtype=object)
        it = np.ndindex(self.components.shape) if self.components.shape else [()]
        for idx in it:
            for s in range(n):
                out[idx + (s,)] = ex.diff(self.components[idx], s)
        return out


def _as_jet(v, n):
    if isinstance(v, Jet):
        return v
    return Jet(float(v), np.zeros(n), np.zeros((n, n)))


def eval_jet2(f, p, chart=None, cross_check=False, fd_tol=1e-6):
    """2-jet of a scalar component expression at ``p``.

    With ``cross_check`` the forward-mode gradient is compared against
    central finite differences with step ``1e-5 * (1 + |p|)``; disagreement
    beyond ``fd_tol`` (relative) raises.  Output Hessians are exactly
    symmetric by construction; this is asserted as an internal sanity bound.
    """
    p = np.asarray(p, dtype=float)
    if chart is not None:
        chart.require_interior(p)
    n = p.shape[0]
    j = _as_jet(f.eval(variables(p)), n)
    asym = np.max(np.abs(j.hess - j.hess.T))
    scale = 1.0 + np.max(np.abs(j.hess))
    if asym > 1e-12 * scale:  # pragma: no cover - guards evaluator bugs
        raise AssertionError(f"asymmetric Hessian ({asym}) signals an evaluator bug")
    if cross_check:
        fd = fd_gradient(lambda q: float(f.eval(list(q))), p)
        err = np.max(np.abs(fd - j.grad)) / (1.0 + np.max(np.abs(j.grad)))
        if err > fd_tol:
            raise DomainError(f"finite-difference cross-check failed: relative error {err:.3e}")
    return j


def identity_field(chart):
    """The identity (1,1) tensor field on ``chart``."""
    n = chart.dim
    comps = np.empty((n, n), dtype=object)
    for j in range(n):
        for l in range(n):
            comps[j, l] = ex.Num(1.0 if j == l else 0.0)
    return TensorField(chart, Valence.OP, comps)
