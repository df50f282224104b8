import numpy as np
import pytest

from haantjes import expr as _expr_mod
from haantjes.chart import ChartBox
from haantjes.certify import HaantjesCandidate
from haantjes.expr import Num, Var, parse_expr
from haantjes.fields import TensorField, Valence, identity_field


def op_field(chart, rows):
    arr = np.array(
        [[parse_expr(s, chart.dim) for s in row] for row in rows], dtype=object
    )
    return TensorField(chart, Valence.OP, arr)


def vec_field(chart, comps):
    arr = np.array([parse_expr(s, chart.dim) for s in comps], dtype=object)
    return TensorField(chart, Valence.VECTOR, arr)


def oneform_field(chart, comps):
    arr = np.array([parse_expr(s, chart.dim) for s in comps], dtype=object)
    return TensorField(chart, Valence.ONEFORM, arr)


def scalar_field(chart, src):
    return TensorField(chart, Valence.SCALAR, np.array(parse_expr(src, chart.dim), dtype=object))


def random_poly(rng, dim, degree=2, scale=1.0):
    """Random polynomial expression with modest coefficients."""
    terms = [Num(round(rng.uniform(-scale, scale), 6))]
    for _ in range(rng.integers(1, 4)):
        term = Num(round(rng.uniform(-scale, scale), 6))
        for _ in range(rng.integers(1, degree + 1)):
            term = _expr_mod.Mul(term, Var(int(rng.integers(0, dim))))
        terms.append(term)
    out = terms[0]
    for t in terms[1:]:
        out = _expr_mod.Add(out, t)
    return out


def random_op_field(rng, chart, degree=2, scale=1.0):
    n = chart.dim
    arr = np.empty((n, n), dtype=object)
    for j in range(n):
        for l in range(n):
            arr[j, l] = random_poly(rng, n, degree, scale)
    return TensorField(chart, Valence.OP, arr)


def random_vec_field(rng, chart, degree=2, scale=1.0):
    arr = np.array([random_poly(rng, chart.dim, degree, scale) for _ in range(chart.dim)],
                   dtype=object)
    return TensorField(chart, Valence.VECTOR, arr)


@pytest.fixture
def chart2():
    return ChartBox(2, (-2.0, -2.0), (2.0, 2.0), (0.3, 0.5))


@pytest.fixture
def chart3():
    return ChartBox(3, (-2.0, -2.0, -2.0), (2.0, 2.0, 2.0), (0.2, 0.4, 0.6))


def a3_chart():
    return ChartBox(3, (0.05, 0.05, 0.45), (0.6, 0.3, 0.8), (0.3, 0.15, 0.6), label="t")


def a3_candidate(xi="unity"):
    """The packaged three-operator bundle, built from scratch for tests."""
    chart = a3_chart()
    K1 = identity_field(chart)
    K2 = op_field(chart, [["0", "t3", "t2"], ["1", "0", "t3"], ["0", "1", "0"]])
    K3 = op_field(chart, [["0", "t2", "t3^2"], ["0", "t3", "t2"], ["1", "0", "0"]])
    A = scalar_field(chart, "t3")
    F = scalar_field(chart, "t1^2*t3/2 + t1*t2^2/2 + t2^2*t3^2/4 + t3^5/60")
    if xi == "unity":
        xi_f = vec_field(chart, ["1", "0", "0"])
    elif xi == "euler":
        xi_f = vec_field(chart, ["t1", "0.75*t2", "0.5*t3"])
    elif xi is None:
        xi_f = None
    else:
        xi_f = xi
    return HaantjesCandidate(chart=chart, A=A, K_list=(K1, K2, K3), xi=xi_f, F=F)


@pytest.fixture
def a3():
    return a3_candidate()


@pytest.fixture
def a3_euler():
    return a3_candidate(xi="euler")


@pytest.fixture
def rng():
    return np.random.default_rng(987654321)
