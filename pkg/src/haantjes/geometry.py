"""Basic differential-geometric operations on chart boxes.

Lie brackets, the exterior derivative of 1-forms, Lie derivatives, and
coordinate changes (both pointwise component transforms and field-level
pushforwards that produce new expression-backed fields).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .errors import DimensionMismatch, SingularJacobian
from .fields import TensorField, Valence

__all__ = [
    "lie_bracket",
    "lie_bracket_jets",
    "exterior_d_oneform",
    "exterior_d_jets",
    "lie_derivative",
    "Diffeo",
    "transform_components",
    "change_chart",
    "pushforward_field",
]

COND_LIMIT = 1e8


def lie_bracket_jets(X, Y):
    """[X, Y]^i from value/grad jets of two vector fields."""
    return np.einsum("s,is->i", X.value, Y.grad) - np.einsum("s,is->i", Y.value, X.grad)


def lie_bracket(X, Y, p):
    """Commutator of two vector fields at ``p``."""
    X.same_chart(Y)
    if X.valence != Valence.VECTOR or Y.valence != Valence.VECTOR:
        raise DimensionMismatch("lie_bracket expects vector fields")
    return lie_bracket_jets(X.jet_at(p), Y.jet_at(p))


def exterior_d_jets(a):
    """(da)_{ij} = d_i a_j - d_j a_i from a 1-form jet (antisymmetric)."""
    return a.grad.T - a.grad


def exterior_d_oneform(a, p):
    if a.valence != Valence.ONEFORM:
        raise DimensionMismatch("exterior_d_oneform expects a 1-form field")
    return exterior_d_jets(a.jet_at(p))


def lie_derivative(T, X, p):
    """Lie derivative of a 1-form or (1,1) field along a vector field."""
    T.same_chart(X)
    if X.valence != Valence.VECTOR:
        raise DimensionMismatch("lie_derivative expects a vector field direction")
    Tj = T.jet_at(p)
    Xj = X.jet_at(p)
    if T.valence == Valence.ONEFORM:
        return np.einsum("l,il->i", Xj.value, Tj.grad) + np.einsum("l,li->i", Tj.value, Xj.grad)
    if T.valence == Valence.OP:
        return (
            np.einsum("l,ijl->ij", Xj.value, Tj.grad)
            - np.einsum("lj,il->ij", Tj.value, Xj.grad)
            + np.einsum("il,lj->ij", Tj.value, Xj.grad)
        )
    raise DimensionMismatch(f"lie_derivative not defined for valence {T.valence}")


@dataclass(frozen=True)
class Diffeo:
    """A coordinate change given by forward and inverse expression lists."""

    forward: tuple
    inverse: tuple

    def __post_init__(self):
        if len(self.forward) != len(self.inverse):
            raise DimensionMismatch("forward and inverse must have equal dimension")

    @property
    def dim(self):
        return len(self.forward)

    def map_point(self, p):
        vals = list(np.asarray(p, dtype=float))
        return np.array([f.eval(vals) for f in self.forward])

    def unmap_point(self, q):
        vals = list(np.asarray(q, dtype=float))
        return np.array([f.eval(vals) for f in self.inverse])

    def jacobian(self, p):
        """J[i, j] = d(forward^i)/du_j at ``p``, with an invertibility guard."""
        vals = list(np.asarray(p, dtype=float))
        n = self.dim
        J = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                J[i, j] = ex.diff(self.forward[i], j).eval(vals)
        if np.linalg.cond(J) > COND_LIMIT:
            raise SingularJacobian(f"Jacobian condition number exceeds {COND_LIMIT:g} at {p}")
        return J

    def check_roundtrip(self, points, tol=1e-9):
        worst = 0.0
        for p in points:
            q = self.unmap_point(self.map_point(p))
            worst = max(worst, float(np.max(np.abs(q - np.asarray(p, dtype=float)))))
        return worst <= tol, worst


def transform_components(values, valence, J, Jinv):
    """Pointwise tensor transformation law for the supported valences.

    ``valence`` may also be ``("upper", k)`` meaning one upper and k lower
    indices (used for torsion and bracket tensoriality checks).
    """
    values = np.asarray(values, dtype=float)
    if valence == Valence.SCALAR:
        return values
    if valence == Valence.VECTOR:
        return J @ values
    if valence == Valence.ONEFORM:
        return values @ Jinv
    if valence == Valence.OP:
        return J @ values @ Jinv
    if valence == Valence.BILINEAR:
        return np.einsum("ma,abc,bj,cl->mjl", J, values, Jinv, Jinv)
    if isinstance(valence, tuple) and valence[0] == "upper":
        k = valence[1]
        out = np.tensordot(J, values, axes=(1, 0))
        for axis in range(1, k + 1):
            out = np.moveaxis(np.tensordot(out, Jinv, axes=(axis, 0)), -1, axis)
        return out
    raise DimensionMismatch(f"no transformation law for valence {valence!r}")


def change_chart(T, diffeo, p):
    """Components of ``T`` at ``p`` expressed in the target chart.

    Raises :class:`SingularJacobian` when the forward Jacobian is
    numerically singular at ``p``.
    """
    J = diffeo.jacobian(p)
    Jinv = np.linalg.inv(J)
    return transform_components(T.value_at(p), T.valence, J, Jinv)


def _subst_all(e, psi):
    return ex.substitute(e, list(psi))


def pushforward_field(T, diffeo, new_chart):
    """New expression-backed field: ``T`` rewritten in the target chart.

    Component expressions are composed with the inverse map and contracted
    with exact symbolic Jacobians, so the result supports jet evaluation like
    any other field (this is how tensoriality of derived objects is tested).
    """
    n = T.chart.dim
    if new_chart.dim != n or diffeo.dim != n:
        raise DimensionMismatch("pushforward requires equal dimensions")
    psi = diffeo.inverse
    # J_phi composed with the inverse map, and J_psi (the exact inverse Jacobian)
    Jf = [[_subst_all(ex.diff(diffeo.forward[i], j), psi) for j in range(n)] for i in range(n)]
    Jb = [[ex.diff(psi[j], i) for i in range(n)] for j in range(n)]
    comp = T.components

    def pulled(idx):
        return _subst_all(comp[idx], psi)

    if T.valence == Valence.SCALAR:
        return TensorField(new_chart, Valence.SCALAR, np.array(pulled(()), dtype=object))
    out = np.empty(comp.shape, dtype=object)
    if T.valence == Valence.VECTOR:
        for i in range(n):
            acc = ex.Num(0.0)
            for j in range(n):
                acc = ex.add(acc, ex.mul(Jf[i][j], pulled((j,))))
            out[i] = acc
    elif T.valence == Valence.ONEFORM:
        for i in range(n):
            acc = ex.Num(0.0)
            for j in range(n):
                acc = ex.add(acc, ex.mul(pulled((j,)), Jb[j][i]))
            out[i] = acc
    elif T.valence == Valence.OP:
        for i in range(n):
            for j in range(n):
                acc = ex.Num(0.0)
                for a in range(n):
                    for b in range(n):
                        acc = ex.add(acc, ex.mul(ex.mul(Jf[i][a], pulled((a, b))), Jb[b][j]))
                out[i, j] = acc
    elif T.valence == Valence.BILINEAR:
        for m in range(n):
            for j in range(n):
                for l in range(n):
                    acc = ex.Num(0.0)
                    for a in range(n):
                        for b in range(n):
                            for c in range(n):
                                term = ex.mul(
                                    ex.mul(Jf[m][a], pulled((a, b, c))),
                                    ex.mul(Jb[b][j], Jb[c][l]),
                                )
                                acc = ex.add(acc, term)
                    out[m, j, l] = acc
    else:
        raise DimensionMismatch(f"no pushforward for valence {T.valence!r}")
    return TensorField(new_chart, T.valence, out)
