"""Second-order forward-mode differentiation.

A :class:`Jet` carries a function value together with its exact gradient and
Hessian with respect to the chart coordinates, propagated through arithmetic
by the second-order chain rule (truncated Taylor / nested dual numbers).
Hessians are built from symmetric rank updates only, so mixed partials come
out exactly symmetric; any asymmetry downstream signals an evaluator bug.

The module-level math functions (:func:`exp`, :func:`log`, ...) accept jets,
floats and numpy arrays alike, so one expression evaluator serves point-jet
evaluation and vectorized value-only evaluation.
"""

from __future__ import annotations

import numbers

import numpy as np

from .errors import EvalError

__all__ = [
    "Jet",
    "variables",
    "constant",
    "exp",
    "log",
    "sin",
    "cos",
    "sqrt",
    "fd_gradient",
]


class Jet:
    """Value, gradient and Hessian of a scalar quantity at a point."""

    __slots__ = ("value", "grad", "hess")

    def __init__(self, value, grad, hess):
        self.value = float(value)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = np.asarray(hess, dtype=float)

    @property
    def dim(self):
        return self.grad.shape[0]

    # -- ring operations ---------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.value + other.value, self.grad + other.grad, self.hess + other.hess)
        if isinstance(other, numbers.Real):
            return Jet(self.value + other, self.grad, self.hess)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet):
            return Jet(self.value - other.value, self.grad - other.grad, self.hess - other.hess)
        if isinstance(other, numbers.Real):
            return Jet(self.value - other, self.grad, self.hess)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, numbers.Real):
            return Jet(other - self.value, -self.grad, -self.hess)
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, Jet):
            cross = np.outer(self.grad, other.grad)
            return Jet(
                self.value * other.value,
                self.value * other.grad + other.value * self.grad,
                self.value * other.hess + other.value * self.hess + cross + cross.T,
            )
        if isinstance(other, numbers.Real):
            return Jet(self.value * other, self.grad * other, self.hess * other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other._reciprocal()
        if isinstance(other, numbers.Real):
            if other == 0.0:
                raise EvalError("division by zero")
            return Jet(self.value / other, self.grad / other, self.hess / other)
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, numbers.Real):
            return self._reciprocal() * other
        return NotImplemented

    def _reciprocal(self):
        if self.value == 0.0:
            raise EvalError("division by zero")
        inv = 1.0 / self.value
        outer = np.outer(self.grad, self.grad)
        return Jet(
            inv,
            -self.grad * inv * inv,
            -self.hess * inv * inv + 2.0 * inv * inv * inv * outer,
        )

    def __neg__(self):
        return Jet(-self.value, -self.grad, -self.hess)

    def __pow__(self, k):
        if not isinstance(k, numbers.Integral):
            return NotImplemented
        k = int(k)
        if k == 0:
            n = self.dim
            return Jet(1.0, np.zeros(n), np.zeros((n, n)))
        if k < 0:
            return (self ** (-k))._reciprocal()
        # exponentiation by squaring keeps deep powers cheap and exact
        result = self
        for _ in range(k - 1):
            result = result * self
        return result

    def _chain(self, f, fp, fpp):
        """Compose with a scalar function given f(v), f'(v), f''(v)."""
        outer = np.outer(self.grad, self.grad)
        return Jet(f, fp * self.grad, fp * self.hess + fpp * outer)

    def __repr__(self):
        return f"Jet({self.value!r}, grad={self.grad!r})"


def variables(point):
    """Coordinate jets at ``point``: x_i with grad e_i and zero Hessian."""
    point = np.asarray(point, dtype=float)
    n = point.shape[0]
    eye = np.eye(n)
    zero = np.zeros((n, n))
    return [Jet(point[i], eye[i], zero) for i in range(n)]


def constant(value, dim):
    return Jet(value, np.zeros(dim), np.zeros((dim, dim)))


def _lift(x, f, fp, fpp, numpy_f, domain=None):
    if isinstance(x, Jet):
        if domain is not None and not domain(x.value):
            raise EvalError(f"{numpy_f.__name__} undefined at {x.value}")
        v = x.value
        return x._chain(f(v), fp(v), fpp(v))
    with np.errstate(divide="raise", invalid="raise"):
        try:
            return numpy_f(x)
        except FloatingPointError as exc:
            raise EvalError(f"{numpy_f.__name__} undefined: {exc}") from exc


def exp(x):
    return _lift(x, np.exp, np.exp, np.exp, np.exp)


def log(x):
    return _lift(
        x, np.log, lambda v: 1.0 / v, lambda v: -1.0 / (v * v), np.log, domain=lambda v: v > 0.0
    )


def sin(x):
    return _lift(x, np.sin, np.cos, lambda v: -np.sin(v), np.sin)


def cos(x):
    return _lift(x, np.cos, lambda v: -np.sin(v), lambda v: -np.cos(v), np.cos)


def sqrt(x):
    def fp(v):
        return 0.5 / np.sqrt(v)

    def fpp(v):
        return -0.25 / np.sqrt(v) ** 3

    return _lift(x, np.sqrt, fp, fpp, np.sqrt, domain=lambda v: v > 0.0)


def fd_gradient(f, point, h=None):
    """Central finite-difference gradient of a scalar callable.

    Diagnostic cross-check for the forward-mode gradients; not used on any
    certified path.
    """
    point = np.asarray(point, dtype=float)
    if h is None:
        h = 1e-5 * (1.0 + np.linalg.norm(point))
    n = point.shape[0]
    grad = np.empty(n)
    for i in range(n):
        step = np.zeros(n)
        step[i] = h
        grad[i] = (f(point + step) - f(point - step)) / (2.0 * h)
    return grad
