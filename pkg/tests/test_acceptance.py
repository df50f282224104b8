"""Acceptance suite: the eight gate criteria, one test (and PASS line) each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines with their measured residuals and runtimes.
"""

import time

import numpy as np

from haantjes import certify as cf
from haantjes import expr as ex
from haantjes import hydro as hy
from haantjes import symmetry as sm
from haantjes.chart import ChartBox, sample_points
from haantjes.concomitants import (
    check_lemma1_identities,
    dK2_scalar,
    haantjes_torsion,
    nijenhuis_torsion,
    rel_scale,
    yano_ako_bracket,
)
from haantjes.errors import PreconditionViolated
from haantjes.fields import TensorField, Valence, identity_field
from haantjes.geometry import Diffeo, pushforward_field, transform_components
from haantjes.manifest import load_manifest
from haantjes.pipeline import run_pipeline
from conftest import (
    a3_candidate,
    random_op_field,
    random_poly,
    random_vec_field,
    vec_field,
)


def _line(criterion, ok, detail):
    print(f"\nACCEPT-{criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, detail


# -- 1: identity suite -----------------------------------------------------------


def test_criterion_1_identity_suite():
    rng = np.random.default_rng(1001)
    t0 = time.perf_counter()
    worst = 0.0
    count = 0
    for dim in (2, 3, 4):
        chart = ChartBox(dim, (-2,) * dim, (2,) * dim)
        for _ in range(7):
            K = random_op_field(rng, chart)
            A = TensorField(chart, Valence.SCALAR,
                            np.array(random_poly(rng, dim, 3), dtype=object))
            alpha = TensorField(
                chart, Valence.ONEFORM,
                np.array([random_poly(rng, dim, 2) for _ in range(dim)], dtype=object),
            )
            for p in sample_points(chart, 3, seed=int(rng.integers(1, 10**6))):
                xi = rng.normal(size=dim)
                eta = rng.normal(size=dim)
                # noticeable identity: d_K^2 A pairs dA with the torsion
                W = dK2_scalar(K, A, p)
                T = nijenhuis_torsion(K, p)
                Ag = A.jet_at(p).grad
                scale = rel_scale(K.value_at(p), Ag) ** 2
                worst = max(worst, float(np.max(np.abs(
                    W - np.einsum("j,jlm->lm", Ag, T)))) / scale)
                r1, r2 = check_lemma1_identities(K, alpha, p, xi, eta)
                worst = max(worst, r1, r2)
                count += 1
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10.0 and count >= 50
    _line(1, ok, f"identity suite: {count} inputs, max residual {worst:.3e}, {elapsed:.2f}s")


# -- 2: tensoriality ---------------------------------------------------------------


def _random_diffeo(rng, n):
    """Nonlinear triangular shear composed with a unimodular linear map."""
    shear_fwd = [ex.Var(i) for i in range(n)]
    shear_inv = [ex.Var(i) for i in range(n)]
    for i in range(n - 1):
        c = round(float(rng.uniform(0.05, 0.3)), 4)
        shear_fwd[i] = ex.add(ex.Var(i), ex.mul(ex.Num(c), ex.Pow(ex.Var(i + 1), 2)))
    for i in range(n - 2, -1, -1):
        c_expr = ex.sub(shear_fwd[i], ex.Var(i))  # c * u_{i+1}^2
        shear_inv[i] = ex.sub(ex.Var(i), ex.substitute(c_expr, shear_inv))
    L = np.eye(n)
    for i in range(1, n):
        for j in range(i):
            L[i, j] = float(rng.integers(-1, 2))
    Linv = np.round(np.linalg.inv(L)).astype(float)
    assert np.allclose(L @ Linv, np.eye(n))
    fwd = []
    for i in range(n):
        acc = ex.Num(0.0)
        for j in range(n):
            acc = ex.add(acc, ex.mul(ex.Num(L[i, j]), shear_fwd[j]))
        fwd.append(acc)
    # inverse: first undo L, then the shear
    undo_L = []
    for j in range(n):
        acc = ex.Num(0.0)
        for i in range(n):
            acc = ex.add(acc, ex.mul(ex.Num(Linv[j, i]), ex.Var(i)))
        undo_L.append(acc)
    inv = [ex.substitute(e, undo_L) for e in shear_inv]
    return Diffeo(tuple(fwd), tuple(inv))


def _frobenius_structure_field(chart, F_src):
    """Polynomial symmetric associative (1,2) field from a potential."""
    n = chart.dim
    Fe = ex.parse_expr(F_src, n)
    c = [[[ex.diff(ex.diff(ex.diff(Fe, s), j), l) for l in range(n)] for j in range(n)]
         for s in range(n)]
    eta = np.array([[c[0][j][l].eval(list(chart.base)) for l in range(n)] for j in range(n)])
    eta_inv = np.linalg.inv(eta)
    comps = np.empty((n, n, n), dtype=object)
    for m in range(n):
        for j in range(n):
            for l in range(n):
                acc = ex.Num(0.0)
                for s in range(n):
                    acc = ex.add(acc, ex.mul(ex.Num(float(eta_inv[m, s])), c[s][j][l]))
                comps[m, j, l] = acc
    return TensorField(chart, Valence.BILINEAR, comps)


def test_criterion_2_tensoriality():
    rng = np.random.default_rng(2002)
    worst = 0.0
    cases = [
        (ChartBox(2, (0.1, 0.2), (0.9, 0.9), (0.4, 0.5), label="t"),
         "t1^2*t2/2 + t2^4/24"),
        (ChartBox(3, (0.05, 0.05, 0.45), (0.6, 0.3, 0.8), (0.3, 0.15, 0.6), label="t"),
         "t1^2*t3/2 + t1*t2^2/2 + t2^2*t3^2/4 + t3^5/60"),
    ]
    for chart, F_src in cases:
        n = chart.dim
        d = _random_diffeo(rng, n)
        target = ChartBox(n, (-60.0,) * n, (60.0,) * n)
        K = random_op_field(rng, chart, degree=2)
        Knew = pushforward_field(K, d, target)
        C = _frobenius_structure_field(chart, F_src)
        Cnew = pushforward_field(C, d, target)
        for p in sample_points(chart, 6, seed=22):
            q = d.map_point(p)
            J = d.jacobian(p)
            Jinv = np.linalg.inv(J)
            for tensor, field_new, kind in (
                (nijenhuis_torsion(K, p), Knew, "nijenhuis"),
                (haantjes_torsion(K, p), Knew, "haantjes"),
            ):
                got = (
                    nijenhuis_torsion(field_new, q)
                    if kind == "nijenhuis"
                    else haantjes_torsion(field_new, q)
                )
                expected = transform_components(tensor, Valence.BILINEAR, J, Jinv)
                scale = rel_scale(expected, got)
                worst = max(worst, float(np.max(np.abs(got - expected))) / scale)
            br = yano_ako_bracket(C, p, enforce_pre=True).components
            br_new = yano_ako_bracket(Cnew, q, enforce_pre=True).components
            expected = transform_components(br, ("upper", 4), J, Jinv)
            scale = rel_scale(expected, br_new)
            worst = max(worst, float(np.max(np.abs(br_new - expected))) / scale)
    ok = worst <= 1e-8
    _line(2, ok, f"tensoriality under nonlinear chart change: max relative error {worst:.3e}")


# -- 3: diagonal operators ----------------------------------------------------------


def test_criterion_3_diagonal_haantjes():
    rng = np.random.default_rng(3003)
    worst = 0.0
    count = 0
    smooth = ["u{i}^2 + 2*u{j}", "exp(u{i}/2)", "sin(u{i})*u{j}", "u{i}*u{j} + 1",
              "cos(u{j}) + u{i}^3"]
    for trial in range(20):
        dim = int(rng.integers(2, 5))
        chart = ChartBox(dim, (-1.5,) * dim, (1.5,) * dim)
        comps = np.empty((dim, dim), dtype=object)
        for a in range(dim):
            for b in range(dim):
                if a == b:
                    template = smooth[int(rng.integers(0, len(smooth)))]
                    src = template.format(i=a + 1, j=int(rng.integers(1, dim + 1)))
                    comps[a, b] = ex.parse_expr(src, dim)
                else:
                    comps[a, b] = ex.Num(0.0)
        K = TensorField(chart, Valence.OP, comps)
        for p in sample_points(chart, 5, seed=trial + 1):
            H = haantjes_torsion(K, p)
            scale = rel_scale(K.value_at(p)) ** 3
            worst = max(worst, float(np.max(np.abs(H))) / scale)
        count += 1
    ok = worst <= 1e-10 and count == 20
    _line(3, ok, f"diagonal operators: 20 random fields, max |H|/scale {worst:.3e}")


# -- 4: full certification ------------------------------------------------------------


def test_criterion_4_a3_full_certification():
    t0 = time.perf_counter()
    manifest = load_manifest("a3-frobenius")
    report = run_pipeline(manifest, points=50)
    elapsed = time.perf_counter() - t0
    worst = max(
        (r.max_residual for r in report.records if r.max_residual is not None), default=0.0
    )
    all_pass = report.overall == "PASS"
    ok = all_pass and worst <= 1e-8 and elapsed < 60.0
    _line(4, ok, f"a3-frobenius: overall {report.overall}, max residual {worst:.3e}, "
                 f"{elapsed:.1f}s at 50 points")


# -- 5: potential round trip -----------------------------------------------------------


def test_criterion_5_potentials_match_hessian():
    cand = a3_candidate()
    pts = sample_points(cand.chart, 50, seed=42)
    square = cf.integrate_potentials(cand, pts)
    vals = square.values(pts)
    Fe = cand.F.components[()]
    base = list(cand.chart.base)
    worst = 0.0
    for j in range(3):
        for l in range(3):
            h = ex.diff(ex.diff(Fe, j), l)
            h0 = h.eval(base)
            for i, p in enumerate(pts):
                worst = max(worst, abs(vals[i, j, l] - (h.eval(list(p)) - h0)))
    ok = worst <= 1e-8
    _line(5, ok, f"potentials vs second derivatives of F: max deviation {worst:.3e}")


# -- 6: flatness --------------------------------------------------------------------------


def test_criterion_6_flatness():
    details = []
    ok = True
    for xi_kind in ("unity", "euler"):
        cand = a3_candidate(xi=xi_kind)
        pts = sample_points(cand.chart, 30, seed=42)
        fit = sm.fit_conformal_symmetry(cand.xi, cand.A, cand.K_list, pts)
        cert = sm.flatness_certificate(cand, pts, fit)
        wc, wC, diff = sm.riemann_closed_form(cand, pts, fit)
        provider = sm.frame_metric_jets(cand)
        oracle, _ = sm.riemann_from_metric_oracle(provider, pts)
        ok = ok and cert.verdict == "FLAT"
        ok = ok and max(wc, wC) <= 1e-7 and oracle <= 1e-7 and diff <= 1e-9
        details.append(f"{xi_kind}: closed {max(wc, wC):.2e}, oracle {oracle:.2e}, "
                       f"agreement {diff:.2e}, {cert.verdict}")
    cand = a3_candidate()
    bad_xi = vec_field(cand.chart, ["t3", "0", "0"])
    pts = sample_points(cand.chart, 20, seed=42)
    fit = sm.fit_conformal_symmetry(bad_xi, cand.A, cand.K_list, pts)
    cert = sm.flatness_certificate(cand, pts, fit, xi=bad_xi)
    ok = ok and cert.verdict == "HYPOTHESES_UNMET"
    details.append(f"non-constant fit: {cert.verdict}")
    _line(6, ok, "; ".join(details))


# -- 7: hydrodynamic compatibility -----------------------------------------------------------


def test_criterion_7_hydrodynamics():
    cand = a3_candidate()
    rng = np.random.default_rng(7007)
    pts = sample_points(cand.chart, 10, seed=42)
    eq15 = 0.0
    for _ in range(3):
        xi = random_vec_field(rng, cand.chart)
        for j in range(3):
            for l in range(j + 1, 3):
                eq15 = max(eq15, cf.check_compatibility_identity(cand, j, l, pts, xi=xi))
    _, orders = hy.flow_commutation_order_study(
        cand.chart, cand.K_list[1], cand.K_list[2],
        dts=[1e-2, 5e-3, 2.5e-3], grids=[128, 256, 512],
        length=20.0, amplitude=0.04,
    )
    square = cf.PotentialSquare(cand)
    st = hy.make_initial_state(cand.chart, grid=96, length=20.0, amplitude=0.04)
    _, hist = hy.integrate_flow(st, cand.K_list[1], 2e-2, 200, store_every=50)
    _, _, drift = hy.conservation_series(hist, square, st.dx)
    line = ChartBox(1, (-2.0,), (2.0,), (0.0,))
    adv = hy.make_initial_state(line, grid=256, length=1.0, amplitude=0.1)
    final, _ = hy.integrate_flow(adv, identity_field(line), 1.0 / 1024, 1024)
    adv_err = float(np.sqrt(adv.dx * np.sum((final.u - adv.u) ** 2)))
    ok = (
        eq15 <= 1e-8
        and np.min(orders) >= 3.0
        and np.max(drift) <= 1e-6
        and adv_err <= 1e-6
    )
    _line(
        7,
        ok,
        f"compatibility residual {eq15:.2e}; commutation orders {np.round(orders, 2)}; "
        f"conservation drift {np.max(drift):.2e}; advection error {adv_err:.2e}",
    )


# -- 8: negative controls ----------------------------------------------------------------------


def test_criterion_8_negative_controls():
    rep_p = run_pipeline(load_manifest("perturbed-a3"))
    by_id = {r.id: r for r in rep_p.records}
    ok = by_id["square-closed"].verdict == "FAIL" and by_id["commute"].verdict == "PASS"
    rep_c = run_pipeline(load_manifest("companion-3d"))
    weak = {r.id: r for r in rep_c.records}["weak-haantjes"]
    cond1_fail = any(
        v["haantjes"] > 1e-3 for v in weak.details.values() if isinstance(v, dict)
    )
    ok = ok and weak.verdict == "FAIL" and cond1_fail
    chart = ChartBox(2, (-2.0, -2.0), (2.0, 2.0), (0.4, 0.7))
    comps = np.empty((2, 2, 2), dtype=object)
    table = {(0, 0, 0): "1", (0, 0, 1): "u1", (1, 0, 1): "1", (1, 1, 0): "1",
             (1, 1, 1): "u2"}
    for idx in np.ndindex(2, 2, 2):
        comps[idx] = ex.parse_expr(table.get(idx, "0"), 2)
    C = TensorField(chart, Valence.BILINEAR, comps)
    raised = False
    try:
        yano_ako_bracket(C, chart.base, enforce_pre=True, tol=1e-8)
    except PreconditionViolated:
        raised = True
    ok = ok and raised
    r1 = run_pipeline(load_manifest("perturbed-a3")).dumps()
    r2 = run_pipeline(load_manifest("perturbed-a3")).dumps()
    deterministic = r1 == r2 == rep_p.dumps()
    ok = ok and deterministic
    _line(
        8,
        ok,
        f"perturbed-a3 fails square-closed; companion-3d fails condition 1 "
        f"(H residual {max(v['haantjes'] for v in weak.details.values() if isinstance(v, dict)):.2e}); "
        f"non-associative input raises; reports deterministic: {deterministic}",
    )
