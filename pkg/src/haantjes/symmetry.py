"""Conformal symmetries, the induced metric, its connection and curvature.

A conformal symmetry xi scales dA by alpha and each K_j by gamma_j under the
Lie derivative.  With constant scales and the frame xi_j = K_j xi it induces
the metric g(xi_j, xi_l) = xi(A_jl), whose flatness is certified through two
independent routes: closed-form frame curvature (in two algebraically
different arrangements) and a coordinate-metric oracle built from Christoffel
symbols of exact metric 2-jets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .algebra import apply_op, op_mul, op_on_oneform, pair_form_vector
from .concomitants import rel_scale
from .errors import SingularMetric, ZeroDenominator
from .fields import Valence
from .geometry import COND_LIMIT, lie_bracket_jets, lie_derivative
from .jets import Jet

__all__ = [
    "ConformalSymmetryFit",
    "fit_conformal_symmetry",
    "MetricData",
    "build_metric",
    "commutator_lemma_check",
    "lemma_derivative_checks",
    "christoffel_koszul",
    "riemann_closed_form",
    "riemann_from_metric_oracle",
    "coordinate_metric_jets",
    "frame_metric_jets",
    "curvature_from_metric_jets",
    "flatness_certificate",
    "FlatnessCertificate",
]


# -- conformal symmetry fit ----------------------------------------------------


@dataclass(frozen=True)
class ConformalSymmetryFit:
    """Pointwise-fitted scales for L_xi(dA) = alpha dA and L_xi(K_j) = gamma_j K_j."""

    alpha: float
    gamma: np.ndarray
    residual: float
    constancy_defect: float
    excluded: int
    passed: bool
    tolerance: float


def _ratio_fit(L, V):
    denom = float(np.sum(V * V))
    scale = rel_scale(V, L)
    if denom < 1e-14 * scale * scale:
        raise ZeroDenominator("reference tensor vanishes at this point")
    coeff = float(np.sum(L * V)) / denom
    residual = float(np.max(np.abs(L - coeff * V))) / scale
    return coeff, residual


def fit_conformal_symmetry(xi, A, K_list, points, tol=1e-8):
    """Least-squares proportionality fit per point, then a constancy test.

    Points where dA or a K_j vanishes are excluded and counted.  PASS needs
    both the proportionality residuals and the spatial variation of the
    fitted scales below tolerance (constancy is a hypothesis of the flatness
    statement, so it is certified rather than assumed).
    """
    chart = xi.chart
    from .fields import TensorField

    dA = TensorField(chart, Valence.ONEFORM, A.diff())
    alphas, gammas = [], []
    residual = 0.0
    excluded = 0
    for p in points:
        try:
            LdA = lie_derivative(dA, xi, p)
            a_p, r = _ratio_fit(LdA, dA.value_at(p))
            g_p = np.empty(len(K_list))
            for j, K in enumerate(K_list):
                LK = lie_derivative(K, xi, p)
                g_p[j], rj = _ratio_fit(LK, K.value_at(p))
                r = max(r, rj)
        except ZeroDenominator:
            excluded += 1
            continue
        alphas.append(a_p)
        gammas.append(g_p)
        residual = max(residual, r)
    if not alphas:
        raise ZeroDenominator("every sample point was excluded by the fit")
    alphas = np.asarray(alphas)
    gammas = np.asarray(gammas)
    alpha = float(np.median(alphas))
    gamma = np.median(gammas, axis=0)
    defect = max(
        float(np.max(np.abs(alphas - alpha))) / (1.0 + abs(alpha)),
        float(np.max(np.abs(gammas - gamma))) / (1.0 + float(np.max(np.abs(gamma)))),
    )
    passed = residual <= tol and defect <= tol
    return ConformalSymmetryFit(alpha, gamma, residual, defect, excluded, passed, tol)


# -- metric data -----------------------------------------------------------------


@dataclass
class MetricData:
    """Frame metric at one point: g_jl = xi(A_jl), its inverse, and c_jlm."""

    point: np.ndarray
    g: np.ndarray  # [j, l]
    ginv: np.ndarray
    c: np.ndarray  # c[j, l, m] = xi_m(A_jl)
    frame: np.ndarray  # E[j, a] = (K_j xi)^a
    achart_jacobian: np.ndarray  # J[m, a] = (dA_m)_a
    c_symmetry_residual: float
    frame_expansion_residual: float  # xi_j = sum_m g_jm d/dA_m
    condition: float


def _point_data(candidate, p, xi):
    """Jets reused by every metric-path computation at ``p``."""
    dAJ, KJ = candidate.jets_at(p)
    xiJ = xi.jet_at(p)
    frames = [apply_op(K, xiJ) for K in KJ]
    n = candidate.n
    betas = [[op_on_oneform(op_mul(KJ[j], KJ[l]), dAJ) for l in range(n)] for j in range(n)]
    return dAJ, KJ, xiJ, frames, betas


def build_metric(candidate, p, xi=None, fit=None):
    """Metric, inverse, totally symmetric c, and consistency residuals at ``p``."""
    xi = xi if xi is not None else candidate.xi
    n = candidate.n
    dAJ, KJ, xiJ, frames, betas = _point_data(candidate, p, xi)
    g = np.empty((n, n))
    c = np.empty((n, n, n))
    for j in range(n):
        for l in range(n):
            g[j, l] = float(betas[j][l].value @ xiJ.value)
            for m in range(n):
                c[j, l, m] = float(betas[j][l].value @ frames[m].value)
    cond = float(np.linalg.cond(g))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMetric(f"xi(A_jl) singular at {p} (condition {cond:.3g})")
    ginv = np.linalg.inv(g)
    cs = rel_scale(c)
    sym = 0.0
    for perm in ((0, 2, 1), (1, 0, 2), (2, 1, 0)):
        sym = max(sym, float(np.max(np.abs(c - c.transpose(perm)))) / cs)
    E = np.stack([f.value for f in frames])
    J = np.empty((n, n))
    for m in range(n):
        J[m] = np.einsum("ja,j->a", KJ[m].value, dAJ.value)
    # xi_j = sum_m g_jm d/dA_m  <=>  E = g . J^{-T}
    expansion = float(np.max(np.abs(E @ J.T - g))) / rel_scale(E, J, g)
    return MetricData(np.asarray(p, float), g, ginv, c, E, J, sym, expansion, cond)


# -- frame commutators and metric-derivative lemmas -------------------------------


def commutator_lemma_check(candidate, points, fit, xi=None):
    """[xi_j, xi_l] against (gamma_l - gamma_j) sum_m c_jlm d/dA_m."""
    xi = xi if xi is not None else candidate.xi
    n = candidate.n
    worst = 0.0
    for p in points:
        md = build_metric(candidate, p, xi)
        _, _, xiJ, frames, _ = _point_data(candidate, p, xi)
        Jinv = np.linalg.inv(md.achart_jacobian)
        scale = rel_scale(md.frame, md.c) ** 2
        for j in range(n):
            for l in range(n):
                lhs = lie_bracket_jets(frames[j], frames[l])
                rhs = (fit.gamma[l] - fit.gamma[j]) * Jinv @ md.c[j, l]
                worst = max(worst, float(np.max(np.abs(lhs - rhs))) / scale)
    return worst


def lemma_derivative_checks(candidate, points, fit, xi=None):
    """Residuals of the three derivative identities used by the flatness proof.

    1. g(xi_m, [xi_j, xi_l]) = (gamma_l - gamma_j) c_jlm
    2. xi_m(g_jl) = (alpha + gamma_j + gamma_l) c_jlm
    3. xi_j(c_lmp) - xi_l(c_jmp) = (gamma_l - gamma_j) sum c_jls g^{st} c_mpt
    """
    xi = xi if xi is not None else candidate.xi
    n = candidate.n
    r1 = r2 = r3 = 0.0
    for p in points:
        md = build_metric(candidate, p, xi)
        _, _, xiJ, frames, betas = _point_data(candidate, p, xi)
        E = md.frame
        scale = rel_scale(md.g, md.c) * rel_scale(E)
        # gradients of the composite scalars g_jl and c_jlm
        g_jets = [[pair_form_vector(betas[j][l], xiJ) for l in range(n)] for j in range(n)]
        c_jets = [
            [[pair_form_vector(betas[j][l], frames[m]) for m in range(n)] for l in range(n)]
            for j in range(n)
        ]
        for j in range(n):
            for l in range(n):
                br = lie_bracket_jets(frames[j], frames[l])
                br_frame = np.linalg.solve(E.T, br)
                for m in range(n):
                    lhs1 = float(md.g[m] @ br_frame)
                    rhs1 = (fit.gamma[l] - fit.gamma[j]) * md.c[j, l, m]
                    r1 = max(r1, abs(lhs1 - rhs1) / scale)
                    lhs2 = float(E[m] @ g_jets[j][l].grad)
                    rhs2 = (fit.alpha + fit.gamma[j] + fit.gamma[l]) * md.c[j, l, m]
                    r2 = max(r2, abs(lhs2 - rhs2) / scale)
        for m in range(n):
            for q in range(n):
                for j in range(n):
                    for l in range(n):
                        lhs3 = float(E[j] @ c_jets[l][m][q].grad) - float(
                            E[l] @ c_jets[j][m][q].grad
                        )
                        rhs3 = (fit.gamma[l] - fit.gamma[j]) * float(
                            md.c[j, l] @ md.ginv @ md.c[m, q]
                        )
                        r3 = max(r3, abs(lhs3 - rhs3) / (scale * rel_scale(md.c)))
    return r1, r2, r3


# -- connection -------------------------------------------------------------------


def christoffel_koszul(candidate, points, fit, xi=None):
    """Connection coefficients g(nabla_{xi_j} xi_l, xi_m) by two routes.

    (i) closed form (alpha/2 + gamma_l) c_jlm, valid under constant scales;
    (ii) the Koszul formula evaluated from directly computed metric
    derivatives and frame brackets.  Returns (worst disagreement,
    hypothesis_flag) where the flag marks a fit whose constancy failed.
    """
    xi = xi if xi is not None else candidate.xi
    n = candidate.n
    worst = 0.0
    for p in points:
        md = build_metric(candidate, p, xi)
        _, _, xiJ, frames, betas = _point_data(candidate, p, xi)
        E = md.frame
        g_jets = [[pair_form_vector(betas[j][l], xiJ) for l in range(n)] for j in range(n)]

        def dirderiv(a, b, c):
            return float(E[a] @ g_jets[b][c].grad)

        brackets = [[lie_bracket_jets(frames[b], frames[c]) for c in range(n)] for b in range(n)]

        def g_on(a, v):
            return float(md.g[a] @ np.linalg.solve(E.T, v))

        scale = rel_scale(md.g, md.c) * (1.0 + abs(fit.alpha) + float(np.max(np.abs(fit.gamma))))
        for j in range(n):
            for l in range(n):
                for m in range(n):
                    koszul = 0.5 * (
                        dirderiv(j, l, m)
                        + dirderiv(l, j, m)
                        - dirderiv(m, j, l)
                        - g_on(j, brackets[l][m])
                        + g_on(l, brackets[m][j])
                        + g_on(m, brackets[j][l])
                    )
                    closed = (fit.alpha / 2.0 + fit.gamma[l]) * md.c[j, l, m]
                    worst = max(worst, abs(koszul - closed) / scale)
    return worst, not fit.passed


# -- curvature: closed forms -------------------------------------------------------


def riemann_closed_form(candidate, points, fit, xi=None):
    """Frame curvature components R_mpjl by the two closed-form routes.

    Route c: prefactor times sum g^{st} (c_jms c_lpt - c_jpt c_lms).
    Route C: prefactor times sum g_pq (C^q_lt C^t_jm - C^q_jt C^t_lm) with
    C^t_jm = sum_s g^{ts} c_jms.  Returns (max |R| route c, max |R| route C,
    max mutual difference), all scale-relative.
    """
    xi = xi if xi is not None else candidate.xi
    pref_scale = (1.0 + abs(fit.alpha) + float(np.max(np.abs(fit.gamma)))) ** 2
    worst_c = worst_C = worst_diff = 0.0
    for p in points:
        md = build_metric(candidate, p, xi)
        pref = np.add.outer(fit.gamma, fit.gamma)
        pref = (fit.alpha / 2.0 + fit.gamma)[:, None] * (fit.alpha / 2.0 + fit.gamma)[None, :]
        core_c = np.einsum("st,jms,lpt->mpjl", md.ginv, md.c, md.c) - np.einsum(
            "st,jpt,lms->mpjl", md.ginv, md.c, md.c
        )
        R_c = pref[:, :, None, None] * core_c
        Ct = np.einsum("ts,jms->tjm", md.ginv, md.c)
        core_C = np.einsum("pq,qlt,tjm->mpjl", md.g, Ct, Ct) - np.einsum(
            "pq,qjt,tlm->mpjl", md.g, Ct, Ct
        )
        R_C = pref[:, :, None, None] * core_C
        scale = rel_scale(md.c) ** 2 * rel_scale(md.ginv) * pref_scale
        worst_c = max(worst_c, float(np.max(np.abs(R_c))) / scale)
        worst_C = max(worst_C, float(np.max(np.abs(R_C))) / scale)
        worst_diff = max(worst_diff, float(np.max(np.abs(R_c - R_C))) / scale)
    return worst_c, worst_C, worst_diff


# -- curvature: coordinate-metric oracle --------------------------------------------


def _jet_matrix_inverse(M):
    """Gauss-Jordan inverse of a matrix of jets (partial pivoting on values)."""
    n = len(M)
    dim = M[0][0].dim
    work = [[M[i][j] for j in range(n)] for i in range(n)]
    eye = [
        [Jet(1.0 if i == j else 0.0, np.zeros(dim), np.zeros((dim, dim))) for j in range(n)]
        for i in range(n)
    ]
    for col in range(n):
        pivot = max(range(col, n), key=lambda r: abs(work[r][col].value))
        if abs(work[pivot][col].value) < 1e-300:
            raise SingularMetric("jet matrix inverse: zero pivot")
        work[col], work[pivot] = work[pivot], work[col]
        eye[col], eye[pivot] = eye[pivot], eye[col]
        inv = 1.0 / work[col][col]
        work[col] = [x * inv for x in work[col]]
        eye[col] = [x * inv for x in eye[col]]
        for r in range(n):
            if r == col:
                continue
            f = work[r][col]
            work[r] = [a - f * b for a, b in zip(work[r], work[col])]
            eye[r] = [a - f * b for a, b in zip(eye[r], eye[col])]
    return eye


def frame_metric_jets(candidate, xi=None):
    """Provider of exact 2-jets of the coordinate metric E^{-1} G E^{-T}.

    E and G are evaluated as jet-valued matrices (the potentials' derivative
    data enters through dA, never through quadrature), inverted over the jet
    ring, and assembled into plain (g, dg, ddg) arrays.
    """
    xi = xi if xi is not None else candidate.xi
    n = candidate.n

    def provider(p):
        _, _, xiJ, frames, betas = _point_data(candidate, p, xi)
        E = [
            [Jet(frames[j].value[a], frames[j].grad[a], frames[j].hess[a]) for a in range(n)]
            for j in range(n)
        ]
        G = [[None] * n for _ in range(n)]
        for j in range(n):
            for l in range(n):
                s = pair_form_vector(betas[j][l], xiJ)
                G[j][l] = Jet(float(s.value), s.grad, s.hess)
        Einv = _jet_matrix_inverse(E)  # Einv[a][j]: sum_j Einv[a][j] E[j][b] = delta
        g = np.empty((n, n))
        dg = np.empty((n, n, n))
        ddg = np.empty((n, n, n, n))
        for a in range(n):
            for b in range(n):
                acc = None
                for j in range(n):
                    for l in range(n):
                        term = Einv[a][j] * G[j][l] * Einv[b][l]
                        acc = term if acc is None else acc + term
                g[a, b] = acc.value
                dg[a, b] = acc.grad
                ddg[a, b] = acc.hess
        return g, dg, ddg

    return provider


def coordinate_metric_jets(field):
    """Provider from an expression-backed symmetric component matrix."""

    def provider(p):
        J = field.jet_at(p)
        return J.value, J.grad, J.hess

    return provider


def curvature_from_metric_jets(g, dg, ddg):
    """Coordinate Christoffel symbols and covariant Riemann tensor.

    Conventions: dg[i,j,k] = d_k g_ij; R(X,Y)Z = ([nabla_X, nabla_Y] -
    nabla_[X,Y]) Z with R_cov[p,b,c,d] = g(R(e_c, e_d) e_b, e_p).
    """
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMetric(f"coordinate metric singular (condition {cond:.3g})")
    ginv = np.linalg.inv(g)
    term = np.transpose(dg, (0, 2, 1)) + dg - np.transpose(dg, (2, 0, 1))
    Gamma = 0.5 * np.einsum("as,sbc->abc", ginv, term)
    dterm = (
        np.transpose(ddg, (0, 2, 1, 3)) + ddg - np.transpose(ddg, (2, 0, 1, 3))
    )  # [s,b,c,d] = d_d term[s,b,c]
    dginv = -np.einsum("ai,ijd,jb->abd", ginv, dg, ginv)
    dGamma = 0.5 * np.einsum("asd,sbc->abcd", dginv, term) + 0.5 * np.einsum(
        "as,sbcd->abcd", ginv, dterm
    )
    R = (
        np.einsum("adbc->abcd", dGamma)
        - np.einsum("acbd->abcd", dGamma)
        + np.einsum("acs,sdb->abcd", Gamma, Gamma)
        - np.einsum("ads,scb->abcd", Gamma, Gamma)
    )
    Rcov = np.einsum("ae,ebcd->abcd", g, R)
    return Gamma, Rcov


def riemann_from_metric_oracle(provider, points, frame_fn=None):
    """Independent curvature check from coordinate metric jets.

    Returns (max relative |R| over points, frame components at the last
    point or None).  ``frame_fn(p)`` supplies E[j, a] for conversion to frame
    components comparable with the closed forms.
    """
    worst = 0.0
    frame_R = None
    for p in points:
        g, dg, ddg = provider(p)
        _, Rcov = curvature_from_metric_jets(g, dg, ddg)
        scale = rel_scale(g) ** 2 * (1.0 + float(np.max(np.abs(dg))) ** 2 + float(np.max(np.abs(ddg))))
        worst = max(worst, float(np.max(np.abs(Rcov))) / scale)
        if frame_fn is not None:
            E = frame_fn(p)
            frame_R = np.einsum("abcd,pa,mb,jc,ld->mpjl", Rcov, E, E, E, E)
    return worst, frame_R


# -- the flatness certificate --------------------------------------------------------


@dataclass(frozen=True)
class FlatnessCertificate:
    verdict: str  # FLAT, NOT_FLAT or HYPOTHESES_UNMET
    signature: tuple  # (positive, negative, zero) eigenvalue counts at base
    fit: ConformalSymmetryFit
    closed_form_residual: float
    oracle_residual: float
    dual_path_agreement: float
    singular_points: int


def flatness_certificate(candidate, points, fit, tol=1e-7, agreement_tol=1e-9, xi=None):
    """Combine the fit, both curvature routes and the metric oracle."""
    xi = xi if xi is not None else candidate.xi
    chart = candidate.chart
    try:
        base_md = build_metric(candidate, chart.base, xi)
    except SingularMetric:
        return FlatnessCertificate(
            "HYPOTHESES_UNMET", (0, 0, candidate.n), fit, np.nan, np.nan, np.nan, len(points)
        )
    eig = np.linalg.eigvalsh(base_md.g)
    thresh = 1e-10 * (1.0 + float(np.max(np.abs(eig))))
    signature = (
        int(np.sum(eig > thresh)),
        int(np.sum(eig < -thresh)),
        int(np.sum(np.abs(eig) <= thresh)),
    )
    singular = 0
    usable = []
    for p in points:
        try:
            build_metric(candidate, p, xi)
            usable.append(p)
        except SingularMetric:
            singular += 1
    if not fit.passed or not usable:
        wc, wC, diff = (np.nan, np.nan, np.nan)
        if usable:
            wc, wC, diff = riemann_closed_form(candidate, usable, fit, xi)
        return FlatnessCertificate(
            "HYPOTHESES_UNMET", signature, fit, max(wc, wC), np.nan, diff, singular
        )
    wc, wC, diff = riemann_closed_form(candidate, usable, fit, xi)
    provider = frame_metric_jets(candidate, xi)

    def frame_fn(p):
        return build_metric(candidate, p, xi).frame

    oracle, _ = riemann_from_metric_oracle(provider, usable, frame_fn)
    closed = max(wc, wC)
    flat = closed <= tol and oracle <= tol and diff <= agreement_tol
    verdict = "FLAT" if flat else "NOT_FLAT"
    return FlatnessCertificate(verdict, signature, fit, closed, oracle, diff, singular)
