import numpy as np
import pytest

from haantjes import certify as cf
from haantjes import hydro as hy
from haantjes.chart import ChartBox
from haantjes.errors import Blowup, CFLViolation, DomainError
from haantjes.fields import identity_field
from conftest import a3_candidate, op_field


@pytest.fixture
def line_chart():
    return ChartBox(1, (-2.0,), (2.0,), (0.0,))


def test_constant_state_has_zero_rhs(line_chart):
    K = identity_field(line_chart)
    rhs = hy.build_rhs(K)
    u = np.full((64, 1), 0.25)
    assert np.max(np.abs(rhs(u, 0.1))) == 0.0


def test_rhs_identity_is_derivative(line_chart):
    K = identity_field(line_chart)
    st = hy.make_initial_state(line_chart, grid=128, length=1.0, amplitude=0.1)
    rhs = hy.build_rhs(K)
    out = rhs(st.u, st.dx)
    exact = 0.1 * 2 * np.pi * np.cos(2 * np.pi * st.x)
    assert np.max(np.abs(out[:, 0] - exact)) <= 1e-6


def test_rhs_diagonal_decouples(chart2):
    K = op_field(chart2, [["u1", "0"], ["0", "u2"]])
    st = hy.make_initial_state(chart2, grid=64, length=1.0, amplitude=0.05)
    rhs = hy.build_rhs(K)
    out = rhs(st.u, st.dx)
    du = (
        -np.roll(st.u, -2, axis=0) + 8 * np.roll(st.u, -1, axis=0)
        - 8 * np.roll(st.u, 1, axis=0) + np.roll(st.u, 2, axis=0)
    ) / (12 * st.dx)
    assert np.allclose(out[:, 0], st.u[:, 0] * du[:, 0])
    assert np.allclose(out[:, 1], st.u[:, 1] * du[:, 1])


def test_zero_amplitude_stays_zero(line_chart):
    st = hy.make_initial_state(line_chart, grid=64, length=1.0, amplitude=0.0)
    final, _ = hy.integrate_flow(st, identity_field(line_chart), 1e-3, 50)
    assert np.allclose(final.u, st.u)


def test_advection_exact_solution_one_period(line_chart):
    K = identity_field(line_chart)
    st = hy.make_initial_state(line_chart, grid=256, length=1.0, amplitude=0.1)
    final, _ = hy.integrate_flow(st, K, 1.0 / 1024, 1024)
    err = float(np.sqrt(st.dx * np.sum((final.u - st.u) ** 2)))
    assert err <= 1e-6


def test_dt_halving_fourth_order(line_chart):
    """Halving dt divides the temporal error by ~16 (self-convergence)."""
    K = identity_field(line_chart)
    st = hy.make_initial_state(line_chart, grid=64, length=1.0, amplitude=0.1)
    ref, _ = hy.integrate_flow(st, K, 0.5 / 4096, 4096)
    errs = []
    for steps in (128, 256, 512):
        f, _ = hy.integrate_flow(st, K, 0.5 / steps, steps)
        errs.append(float(np.sqrt(st.dx * np.sum((f.u - ref.u) ** 2))))
    orders = hy.convergence_orders(errs)
    assert np.all(orders >= 3.8)
    assert abs(errs[0] / errs[1] - 16.0) <= 2.0


def test_cfl_violation_raises(line_chart):
    K = identity_field(line_chart)
    st = hy.make_initial_state(line_chart, grid=64, length=1.0, amplitude=0.1)
    with pytest.raises(CFLViolation):
        hy.integrate_flow(st, K, 1.0, 1)


def test_small_grid_rejected(line_chart):
    with pytest.raises(DomainError):
        hy.make_initial_state(line_chart, grid=8)


def test_chart_exit_halts_with_breakdown_time():
    chart = ChartBox(1, (-0.05,), (0.05,), (0.0,))
    st = hy.make_initial_state(chart, grid=64, length=1.0, amplitude=0.05)
    # drive the state towards the boundary with a strong constant flow
    K = op_field(chart, [["1"]])
    grown = st.advanced(st.u + 0.049, flow="seed", dt=0.0)
    with pytest.raises(Blowup) as err:
        hy.integrate_flow(grown, K, 1e-3, 2000)
    assert err.value.time is not None


def test_conservation_certified_vs_perturbed():
    cand = a3_candidate()
    chart = cand.chart
    K2 = cand.K_list[1]
    K2p = op_field(
        chart, [["0.1*t1", "t3", "t2"], ["1", "0.1*t1", "t3"], ["0", "1", "0.1*t1"]]
    )
    square = cf.PotentialSquare(cand)
    st = hy.make_initial_state(chart, grid=96, length=20.0, amplitude=0.04)
    _, hist = hy.integrate_flow(st, K2, 2e-2, 200, store_every=50)
    _, _, drift = hy.conservation_series(hist, square, st.dx)
    assert np.max(drift) <= 1e-6
    _, histp = hy.integrate_flow(st, K2p, 2e-2, 200, store_every=50)
    _, _, driftp = hy.conservation_series(histp, square, st.dx)
    assert np.max(driftp) > 1e-3


def test_identical_flows_commute_exactly():
    cand = a3_candidate()
    st = hy.make_initial_state(cand.chart, grid=64, length=20.0, amplitude=0.04)
    d = hy.commuting_flows_check(st, cand.K_list[1], cand.K_list[1], 1e-2)
    assert d == 0.0


def test_compatible_pair_order_at_least_three():
    cand = a3_candidate()
    ds, orders = hy.flow_commutation_order_study(
        cand.chart,
        cand.K_list[1],
        cand.K_list[2],
        dts=[1e-2, 5e-3, 2.5e-3],
        grids=[128, 256, 512],
        length=20.0,
        amplitude=0.04,
    )
    assert np.all(orders >= 3.0)


def test_incompatible_pair_plateaus_at_second_order():
    cand = a3_candidate()
    chart = cand.chart
    K2p = op_field(
        chart, [["0.1*t1", "t3", "t2"], ["1", "0.1*t1", "t3"], ["0", "1", "0.1*t1"]]
    )
    ds, orders = hy.flow_commutation_order_study(
        chart, K2p, cand.K_list[2],
        dts=[1e-2, 5e-3, 2.5e-3], grids=[128, 256, 512],
        length=20.0, amplitude=0.04,
    )
    assert np.all(np.abs(orders - 2.0) <= 0.2)
    assert ds[-1] > 1e-12  # nonzero constant, not integrator noise


def test_order_study_requires_matching_lists():
    cand = a3_candidate()
    with pytest.raises(DomainError):
        hy.flow_commutation_order_study(
            cand.chart, cand.K_list[1], cand.K_list[2],
            dts=[1e-2], grids=[64, 128], length=20.0,
        )
