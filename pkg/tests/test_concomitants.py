import numpy as np
import pytest

from haantjes import expr as ex
from haantjes.chart import ChartBox, sample_points
from haantjes.concomitants import (
    check_lemma1_identities,
    dK2_scalar,
    dK_oneform,
    dK_scalar,
    haantjes_torsion,
    ideal_membership_probe,
    ideal_membership_single_generator,
    nijenhuis_bracket_oracle,
    nijenhuis_torsion,
    rel_scale,
    yano_ako_bracket,
)
from haantjes.errors import PreconditionViolated
from haantjes.fields import TensorField, Valence, identity_field
from conftest import (
    oneform_field,
    op_field,
    random_op_field,
    random_poly,
    scalar_field,
)


def test_constant_operator_torsion_free(chart2):
    K = op_field(chart2, [["2", "1"], ["0", "3"]])
    for p in sample_points(chart2, 5, seed=1):
        assert np.max(np.abs(nijenhuis_torsion(K, p))) == 0.0


def test_diag_torsion_hand_values(chart2):
    K = op_field(chart2, [["u2", "0"], ["0", "u1"]])
    T = nijenhuis_torsion(K, (0.0, 1.0))
    assert np.isclose(T[0, 0, 1], 1.0)
    assert np.isclose(T[1, 0, 1], 1.0)
    # T(d1, d2) = (u2 - u1)(d1 + d2) at a generic point
    p = (0.3, 0.9)
    T = nijenhuis_torsion(K, p)
    assert np.allclose(T[:, 0, 1], [0.6, 0.6])


def test_torsion_closed_form_matches_bracket_oracle(rng):
    for dim in (2, 3, 4):
        chart = ChartBox(dim, (-2,) * dim, (2,) * dim)
        for _ in range(4):
            K = random_op_field(rng, chart)
            for p in sample_points(chart, 5, seed=int(rng.integers(1, 1000))):
                T1 = nijenhuis_torsion(K, p)
                T2 = nijenhuis_bracket_oracle(K, p)
                scale = rel_scale(K.value_at(p)) ** 2
                assert np.max(np.abs(T1 - T2)) <= 1e-10 * scale


def test_conformal_identity_multiple_torsion_free(chart2):
    K = op_field(chart2, [["u1*u2", "0"], ["0", "u1*u2"]])
    for p in sample_points(chart2, 10, seed=2):
        scale = rel_scale(K.value_at(p)) ** 2
        assert np.max(np.abs(nijenhuis_torsion(K, p))) <= 1e-10 * scale


def test_haantjes_vanishes_when_torsion_does(chart2):
    K = op_field(chart2, [["1", "2"], ["3", "4"]])
    assert np.max(np.abs(haantjes_torsion(K, chart2.base))) == 0.0


def test_haantjes_of_diagonal_vanishes_despite_torsion(chart2):
    K = op_field(chart2, [["u2", "0"], ["0", "u1"]])
    for p in sample_points(chart2, 10, seed=3):
        assert np.max(np.abs(nijenhuis_torsion(K, p))) > 0.01
        assert np.max(np.abs(haantjes_torsion(K, p))) <= 1e-12


def test_companion_field_has_haantjes_torsion():
    chart = ChartBox(3, (0.2, -0.8, -0.8), (1.8, 0.8, 0.8), (1.0, 0.0, 0.0))
    K = op_field(chart, [["0", "1", "0"], ["0", "0", "1"], ["u1", "u2", "u3"]])
    H = haantjes_torsion(K, (1.0, 0.0, 0.0))
    assert np.max(np.abs(H)) > 1e-3


def test_yano_ako_constant_field_vanishes(chart2):
    n = 2
    comps = np.empty((n, n, n), dtype=object)
    # symmetric associative structure: the algebra with e1 unity, e2*e2 = 0
    table = np.zeros((n, n, n))
    table[0, 0, 0] = 1.0
    table[1, 0, 1] = table[1, 1, 0] = 1.0
    for idx in np.ndindex(n, n, n):
        comps[idx] = ex.Num(float(table[idx]))
    C = TensorField(chart2, Valence.BILINEAR, comps)
    val = yano_ako_bracket(C, chart2.base, enforce_pre=True)
    assert np.max(np.abs(val.components)) == 0.0
    assert not val.warned


def test_yano_ako_dimension_one_vanishes():
    chart = ChartBox(1, (-2,), (2,), (0.3,))
    comps = np.array(ex.parse_expr("exp(u1) + u1^3"), dtype=object).reshape(1, 1, 1)
    C = TensorField(chart, Valence.BILINEAR, comps)
    for p in sample_points(chart, 10, seed=4):
        val = yano_ako_bracket(C, p, enforce_pre=True)
        scale = rel_scale(C.value_at(p)) ** 2
        assert np.max(np.abs(val.components)) <= 1e-12 * scale


def test_yano_ako_precondition_enforcement(chart2):
    comps = np.empty((2, 2, 2), dtype=object)
    for idx in np.ndindex(2, 2, 2):
        comps[idx] = ex.Num(0.0)
    comps[0, 0, 1] = ex.parse_expr("u1")  # asymmetric in the lower pair
    C = TensorField(chart2, Valence.BILINEAR, comps)
    with pytest.raises(PreconditionViolated) as err:
        yano_ako_bracket(C, (1.0, 1.0), enforce_pre=True, tol=1e-8)
    assert err.value.residual > 1e-7
    # without enforcement the bracket is computed with a warning flag
    val = yano_ako_bracket(C, (1.0, 1.0), enforce_pre=False, tol=1e-8)
    assert val.warned


def test_dK_scalar_examples(chart2):
    A = scalar_field(chart2, "u1")
    I = identity_field(chart2)
    assert np.allclose(dK_scalar(I, A, chart2.base), [1.0, 0.0])
    K = op_field(chart2, [["u2", "0"], ["0", "u1"]])
    p = (0.5, 0.8)
    assert np.allclose(dK_scalar(K, A, p), [0.8, 0.0])


def test_dK_scalar_linearity(chart2, rng):
    K = random_op_field(rng, chart2)
    A = scalar_field(chart2, "u1^2*u2")
    B = scalar_field(chart2, "exp(u1) + u2^3")
    AB = scalar_field(chart2, "u1^2*u2 + exp(u1) + u2^3")
    for p in sample_points(chart2, 5, seed=5):
        left = dK_scalar(K, AB, p)
        right = dK_scalar(K, A, p) + dK_scalar(K, B, p)
        assert np.max(np.abs(left - right)) <= 1e-12 * rel_scale(left)


def test_dK_oneform_with_identity_is_exterior_d(chart2):
    a = oneform_field(chart2, ["-u2", "u1"])
    I = identity_field(chart2)
    W = dK_oneform(I, a, chart2.base)
    assert np.isclose(W[0, 1], 2.0)
    dA = oneform_field(chart2, ["u2", "u1"])  # exact
    assert np.max(np.abs(dK_oneform(I, dA, chart2.base))) <= 1e-14


def test_dK2_equals_torsion_pairing_hand_example(chart2):
    K = op_field(chart2, [["u2", "0"], ["0", "u1"]])
    A = scalar_field(chart2, "u1")
    p = (0.2, 0.9)
    W = dK2_scalar(K, A, p)
    assert np.isclose(W[0, 1], 0.9 - 0.2)


def test_dK2_identity_random(rng):
    for dim in (2, 3):
        chart = ChartBox(dim, (-2,) * dim, (2,) * dim)
        for _ in range(5):
            K = random_op_field(rng, chart)
            A = TensorField(chart, Valence.SCALAR,
                            np.array(random_poly(rng, dim, 3), dtype=object))
            for p in sample_points(chart, 4, seed=int(rng.integers(1, 999))):
                W = dK2_scalar(K, A, p)
                T = nijenhuis_torsion(K, p)
                Ag = A.jet_at(p).grad
                expected = np.einsum("j,jlm->lm", Ag, T)
                scale = rel_scale(K.value_at(p), Ag) ** 2
                assert np.max(np.abs(W - expected)) <= 1e-9 * scale


def test_dK2_vanishes_for_constant_operator(chart2):
    K = op_field(chart2, [["1", "2"], ["0", "5"]])
    A = scalar_field(chart2, "exp(u1)*u2 + u2^3")
    assert np.max(np.abs(dK2_scalar(K, A, chart2.base))) <= 1e-13


def test_lemma1_identities_with_identity_operator(chart2):
    I = identity_field(chart2)
    a = oneform_field(chart2, ["u1*u2", "u1^2"])
    r1, r2 = check_lemma1_identities(I, a, chart2.base, [1.0, 0.5], [-0.3, 1.0])
    assert r1 <= 1e-14 and r2 <= 1e-14


def test_lemma1_identities_random(rng):
    for dim in (2, 3):
        chart = ChartBox(dim, (-2,) * dim, (2,) * dim)
        for _ in range(8):
            K = random_op_field(rng, chart)
            comps = np.array([random_poly(rng, dim, 2) for _ in range(dim)], dtype=object)
            a = TensorField(chart, Valence.ONEFORM, comps)
            for p in sample_points(chart, 3, seed=int(rng.integers(1, 999))):
                xi = rng.normal(size=dim)
                eta = rng.normal(size=dim)
                r1, r2 = check_lemma1_identities(K, a, p, xi, eta)
                assert r1 <= 1e-9 and r2 <= 1e-9


def test_lemma1_second_identity_specializes_to_dk2(chart2):
    K = op_field(chart2, [["u2", "0"], ["0", "u1"]])
    A = scalar_field(chart2, "u1")
    dA = oneform_field(chart2, ["1", "0"])
    p = (0.2, 0.9)
    r1, r2 = check_lemma1_identities(K, dA, p, [1.0, 0.0], [0.0, 1.0])
    assert r2 <= 1e-13
    # d_K(K dA)(e1, e2) must equal dK2_scalar directly
    from haantjes.algebra import op_on_oneform
    from haantjes.concomitants import dK_oneform_jets

    KJ = K.jet_at(p)
    W = dK_oneform_jets(KJ, op_on_oneform(KJ, dA.jet_at(p)))
    assert np.allclose(W, dK2_scalar(K, A, p))


def test_ideal_membership_trivial_case(chart2):
    K = op_field(chart2, [["1", "0"], ["2", "3"]])
    A = scalar_field(chart2, "1")
    B = scalar_field(chart2, "u1*u2")
    residual, self_res = ideal_membership_single_generator(K, A, B, chart2.base)
    assert residual <= 1e-14 and self_res <= 1e-14


def test_ideal_membership_single_generator_positive(chart2):
    # K = [[0, 1], [-A, 0]] satisfies d_K^2 B = dA ^ dB for every B
    A = scalar_field(chart2, "u1*u2")
    K = op_field(chart2, [["0", "1"], ["-u1*u2", "0"]])
    pts = sample_points(chart2, 8, seed=6)
    flag, worst = ideal_membership_probe(K, A, pts)
    assert flag, f"probe family residual {worst}"
    B = scalar_field(chart2, "u1^2 + 3*u2")
    for p in pts[:4]:
        residual, self_res = ideal_membership_single_generator(K, A, B, p)
        assert residual <= 1e-11
        assert self_res <= 1e-11


def test_ideal_membership_negative_diagnostic(chart2):
    K = op_field(chart2, [["u2", "0"], ["0", "u1"]])
    A = scalar_field(chart2, "u1")
    pts = sample_points(chart2, 8, seed=7)
    flag, worst = ideal_membership_probe(K, A, pts)
    assert not flag and worst > 1e-4
