"""Product-rule combinators on jet tensors.

Derived objects such as K*xi, K_j*K_l or K(dA) inherit exact 2-jets from
their factors; differentiation (d, exterior d) consumes one order, so a
combinator propagates the Hessian block only when every input still carries
one.  All index conventions:

* (1,1) operator ``K``: ``value[j, l] = K^j_l`` (upper, lower),
* vector ``X``: ``value[i] = X^i``,
* 1-form ``a``: ``value[l] = a_l``,
* trailing jet axes are differentiation directions.
"""

from __future__ import annotations

import numpy as np

from .fields import JetTensor

__all__ = [
    "apply_op",
    "op_mul",
    "op_on_oneform",
    "d_scalar",
    "pair_form_vector",
]


def _hess_ok(*ts):
    return all(t.hess is not None for t in ts)


def apply_op(K, X):
    """(K X)^i = K^i_s X^s for an operator jet and a vector jet."""
    value = np.einsum("is,s->i", K.value, X.value)
    grad = np.einsum("isq,s->iq", K.grad, X.value) + np.einsum("is,sq->iq", K.value, X.grad)
    hess = None
    if _hess_ok(K, X):
        cross = np.einsum("isq,sr->iqr", K.grad, X.grad)
        hess = (
            np.einsum("isqr,s->iqr", K.hess, X.value)
            + cross
            + cross.transpose(0, 2, 1)
            + np.einsum("is,sqr->iqr", K.value, X.hess)
        )
    return JetTensor(value, grad, hess)


def op_mul(A, B):
    """(A B)^j_l = A^j_s B^s_l, jets propagated by the product rule."""
    value = np.einsum("js,sl->jl", A.value, B.value)
    grad = np.einsum("jsq,sl->jlq", A.grad, B.value) + np.einsum("js,slq->jlq", A.value, B.grad)
    hess = None
    if _hess_ok(A, B):
        cross = np.einsum("jsq,slr->jlqr", A.grad, B.grad)
        hess = (
            np.einsum("jsqr,sl->jlqr", A.hess, B.value)
            + cross
            + cross.transpose(0, 1, 3, 2)
            + np.einsum("js,slqr->jlqr", A.value, B.hess)
        )
    return JetTensor(value, grad, hess)


def op_on_oneform(K, a):
    """(K a)_l = K^j_l a_j: the fixed convention for operators on 1-forms."""
    value = np.einsum("jl,j->l", K.value, a.value)
    grad = np.einsum("jlq,j->lq", K.grad, a.value) + np.einsum("jl,jq->lq", K.value, a.grad)
    hess = None
    if _hess_ok(K, a):
        cross = np.einsum("jlq,jr->lqr", K.grad, a.grad)
        hess = (
            np.einsum("jlqr,j->lqr", K.hess, a.value)
            + cross
            + cross.transpose(0, 2, 1)
            + np.einsum("jl,jqr->lqr", K.value, a.hess)
        )
    return JetTensor(value, grad, hess)


def d_scalar(A):
    """Differential of a scalar jet: a 1-form jet one order lower."""
    return JetTensor(A.grad.copy(), A.hess.copy(), None)


def pair_form_vector(a, X):
    """Scalar jet of the pairing a(X) = a_l X^l."""
    value = float(np.einsum("l,l->", a.value, X.value))
    grad = np.einsum("lq,l->q", a.grad, X.value) + np.einsum("l,lq->q", a.value, X.grad)
    hess = None
    if _hess_ok(a, X):
        cross = np.einsum("lq,lr->qr", a.grad, X.grad)
        hess = (
            np.einsum("lqr,l->qr", a.hess, X.value)
            + cross
            + cross.T
            + np.einsum("l,lqr->qr", a.value, X.hess)
        )
    return JetTensor(np.asarray(value), grad, hess)
