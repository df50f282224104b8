"""Check pipeline: runs certification checks in dependency order.

Each check produces a :class:`~haantjes.report.CheckRecord`; when a
prerequisite failed, dependents are recorded as SKIPPED instead of being
silently dropped, so every requested check appears exactly once in the
report.  Per-point work fans out across threads when HAANTJES_THREADS is set
above 1; results merge by point index, keeping reports deterministic.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from . import certify as cf
from . import symmetry as sm
from .chart import sample_points
from .errors import (
    DegenerateFrame,
    FrameIntegrationFailure,
    HaantjesError,
    NoGenerator,
    QuadratureStall,
    SingularMetric,
    ZeroDenominator,
)
from .report import CertificateReport, CheckRecord

__all__ = ["CHECK_IDS", "run_pipeline", "thread_count", "pmap"]

# spec'd pipeline order
CHECK_IDS = (
    "commute",
    "square-closed",
    "potentials",
    "structure-constants",
    "yano-ako",
    "weak-haantjes",
    "lenard",
    "compatibility",
    "wdvv",
    "conformal-fit",
    "metric",
    "frame-commutators",
    "connection",
    "riemann",
    "flatness",
)

LAWS = {
    "commute": "K_j K_l = K_l K_j",
    "square-closed": "d(K_j K_l dA) = 0",
    "potentials": "K_j K_l dA = d A_jl with A_jl symmetric and path independent",
    "structure-constants": "K_j K_l dA = sum_m C^m_jl dA_m; C symmetric, associative, unital",
    "yano-ako": "[C, C] = 0 for the extracted structure field",
    "weak-haantjes": "Haantjes(K) = 0, d d_K A = 0, d_K d_K A = 0",
    "lenard": "K_j xi independent and pairwise commuting",
    "compatibility": "[K_j xi, K_l xi] - K_j[xi, K_l xi] - K_l[K_j xi, xi] = 0",
    "wdvv": "frame derivatives of A_jl totally symmetric; C_j C_l = C_l C_j",
    "conformal-fit": "L_xi dA = alpha dA, L_xi K_j = gamma_j K_j, constants",
    "metric": "g(xi_j, xi_l) = xi(A_jl) nondegenerate; c_jlm totally symmetric",
    "frame-commutators": "[xi_j, xi_l] = (gamma_l - gamma_j) sum_m c_jlm d/dA_m",
    "connection": "g(nabla_j xi_l, xi_m) = (alpha/2 + gamma_l) c_jlm (vs Koszul)",
    "riemann": "frame curvature: closed forms agree and match the metric oracle",
    "flatness": "g is a flat semiriemannian metric (hypotheses certified)",
}

_REQUIRES_XI = {"lenard", "compatibility", "wdvv", "conformal-fit", "metric",
                "frame-commutators", "connection", "riemann", "flatness"}
_REQUIRES_FULL = {"potentials", "structure-constants", "yano-ako", "lenard", "wdvv",
                  "metric", "frame-commutators", "connection", "riemann", "flatness"}
_DEPENDS = {
    "potentials": ("square-closed",),
    "structure-constants": ("square-closed",),
    "yano-ako": ("structure-constants",),
    "wdvv": ("lenard",),
    "frame-commutators": ("conformal-fit", "metric"),
    "connection": ("conformal-fit", "metric"),
    "riemann": ("conformal-fit", "metric"),
}

FLATNESS_TOL = 1e-7
FLATNESS_AGREEMENT_TOL = 1e-9


def thread_count():
    raw = os.environ.get("HAANTJES_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def pmap(fn, items):
    """Map preserving order; threads capped by HAANTJES_THREADS."""
    workers = thread_count()
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


class _Context:
    def __init__(self, manifest, points, tol):
        self.manifest = manifest
        self.candidate = manifest.candidate
        self.points = points
        self.tol = tol
        self.square = None
        self.fit = None
        self.verdicts = {}

    @property
    def full(self):
        c = self.candidate
        return c is not None and len(c.K_list) == c.chart.dim

    @property
    def has_xi(self):
        return self.candidate is not None and self.candidate.xi is not None

    def ensure_fit(self):
        """Fit on demand so --only subsets need not run conformal-fit first."""
        if self.fit is None:
            c = self.candidate
            self.fit = sm.fit_conformal_symmetry(c.xi, c.A, c.K_list, self.points, self.tol)
        return self.fit


def _record(ctx, cid, residual, details=None, verdict=None, excluded=0, tol=None):
    tol = ctx.tol if tol is None else tol
    if verdict is None:
        verdict = "PASS" if residual <= tol else "FAIL"
    return CheckRecord(
        id=cid,
        law=LAWS[cid],
        verdict=verdict,
        max_residual=residual,
        tolerance=tol,
        points=len(ctx.points),
        excluded=excluded,
        details=details or {},
    )


def _skip(ctx, cid, reason):
    return CheckRecord(
        id=cid, law=LAWS[cid], verdict="SKIPPED", points=0, details={"reason": reason}
    )


def _check_commute(ctx):
    res = cf.check_commuting(ctx.candidate.K_list, ctx.points)
    worst = float(np.max(res))
    return _record(ctx, "commute", worst, {"pair_residuals": res})


def _check_square_closed(ctx):
    res = cf.check_square_closed(ctx.candidate, ctx.points)
    worst = float(np.max(res))
    return _record(ctx, "square-closed", worst, {"pair_residuals": res})


def _check_potentials(ctx):
    try:
        ctx.square = cf.integrate_potentials(ctx.candidate, ctx.points)
    except QuadratureStall as exc:
        return _record(ctx, "potentials", float("inf"), {"error": str(exc)}, verdict="FAIL")
    sub = ctx.points[: min(6, len(ctx.points))]
    order_fwd = list(range(ctx.candidate.n))
    v1 = ctx.square.values(sub, order=order_fwd)
    v2 = ctx.square.values(sub, order=order_fwd[::-1])
    path_dep = float(np.max(np.abs(v1 - v2))) / (1.0 + float(np.max(np.abs(v1))))
    base = ctx.candidate.chart.base
    a_vals = np.array([float(ctx.candidate.A.value_at(p)) for p in sub])
    a_base = float(ctx.candidate.A.value_at(base))
    seed_rt = float(np.max(np.abs(v1[:, 0, 0] - (a_vals - a_base)))) / (
        1.0 + float(np.max(np.abs(a_vals)))
    )
    worst = max(ctx.square.symmetry_defect, path_dep, seed_rt)
    details = {
        "symmetry_defect": ctx.square.symmetry_defect,
        "path_independence": path_dep,
        "seed_roundtrip": seed_rt,
    }
    return _record(ctx, "potentials", worst, details)


def _check_structure(ctx):
    worst, excluded = cf.check_structure_algebra(ctx.candidate, ctx.points)
    residual = max(worst.values())
    if excluded == len(ctx.points):
        return _record(
            ctx, "structure-constants", float("inf"), dict(worst), verdict="FAIL",
            excluded=excluded,
        )
    return _record(ctx, "structure-constants", residual, dict(worst), excluded=excluded)


def _check_yano_ako(ctx):
    worst = cf.check_yano_ako_field(ctx.candidate, ctx.points, tol=ctx.tol)
    return _record(ctx, "yano-ako", worst)


def _check_weak(ctx):
    cand = ctx.candidate
    per_k = {}
    worst = 0.0
    for j, K in enumerate(cand.K_list):
        if j == 0 and ctx.full:
            continue  # identity operator satisfies all three trivially

        def one(p, K=K):
            return cf.check_weak_haantjes(cand.A, K, [p])

        rows = pmap(one, ctx.points)
        res = tuple(float(np.max([r[i] for r in rows])) for i in range(3))
        per_k[f"K{j + 1}"] = {
            "haantjes": res[0], "dd_K_A": res[1], "d_K_d_K_A": res[2]
        }
        worst = max(worst, *res)
    return _record(ctx, "weak-haantjes", worst, per_k)


def _check_lenard(ctx):
    comm, dependent, max_cond = cf.check_lenard_generator(ctx.candidate, ctx.points)
    details = {"commutator": comm, "dependent_points": dependent, "max_condition": max_cond}
    if dependent > 0:
        return _record(ctx, "lenard", float("inf"), details, verdict="FAIL",
                       excluded=dependent)
    return _record(ctx, "lenard", comm, details)


def _check_compatibility(ctx):
    cand = ctx.candidate
    n = len(cand.K_list)
    worst = 0.0
    for j in range(n):
        for l in range(j + 1, n):
            worst = max(worst, cf.check_compatibility_identity(cand, j, l, ctx.points))
    return _record(ctx, "compatibility", worst)


def _check_wdvv(ctx):
    try:
        sym, assoc, flow_pts = cf.wdvv_check(ctx.candidate, ctx.points, lenard_ok=True)
    except (NoGenerator, FrameIntegrationFailure, DegenerateFrame) as exc:
        return _record(ctx, "wdvv", float("inf"), {"error": str(exc)}, verdict="FAIL")
    details = {"hessian_symmetry": sym, "associativity": assoc, "flow_points": len(flow_pts)}
    return _record(ctx, "wdvv", max(sym, assoc), details)


def _check_fit(ctx):
    cand = ctx.candidate
    try:
        ctx.fit = sm.fit_conformal_symmetry(cand.xi, cand.A, cand.K_list, ctx.points, ctx.tol)
    except ZeroDenominator as exc:
        return _record(ctx, "conformal-fit", float("inf"), {"error": str(exc)}, verdict="FAIL")
    fit = ctx.fit
    details = {
        "alpha": fit.alpha,
        "gamma": fit.gamma,
        "residual": fit.residual,
        "constancy_defect": fit.constancy_defect,
    }
    worst = max(fit.residual, fit.constancy_defect)
    return _record(ctx, "conformal-fit", worst, details, excluded=fit.excluded)


def _check_metric(ctx):
    cand = ctx.candidate
    worst = 0.0
    singular = 0
    base_g = None
    for p in ctx.points:
        try:
            md = sm.build_metric(cand, p)
        except SingularMetric:
            singular += 1
            continue
        worst = max(worst, md.c_symmetry_residual, md.frame_expansion_residual)
    try:
        base_g = sm.build_metric(cand, cand.chart.base).g
    except SingularMetric:
        pass
    details = {"singular_points": singular}
    if base_g is not None:
        details["g_at_base"] = base_g
    if singular == len(ctx.points):
        return _record(ctx, "metric", float("inf"), details, verdict="FAIL", excluded=singular)
    return _record(ctx, "metric", worst, details, excluded=singular)


def _usable_points(ctx):
    pts = []
    excluded = 0
    for p in ctx.points:
        try:
            sm.build_metric(ctx.candidate, p)
            pts.append(p)
        except SingularMetric:
            excluded += 1
    return pts, excluded


def _check_frame_commutators(ctx):
    pts, excluded = _usable_points(ctx)
    fit = ctx.ensure_fit()
    worst = sm.commutator_lemma_check(ctx.candidate, pts, fit)
    r1, r2, r3 = sm.lemma_derivative_checks(ctx.candidate, pts, fit)
    details = {
        "bracket_vs_closed_form": worst,
        "metric_on_brackets": r1,
        "metric_derivative": r2,
        "c_derivative_exchange": r3,
    }
    return _record(ctx, "frame-commutators", max(worst, r1, r2, r3), details,
                   excluded=excluded)


def _check_connection(ctx):
    pts, excluded = _usable_points(ctx)
    worst, hypothesis_flag = sm.christoffel_koszul(ctx.candidate, pts, ctx.ensure_fit())
    details = {"koszul_vs_closed_form": worst, "hypotheses_unmet": hypothesis_flag}
    rec = _record(ctx, "connection", worst, details, excluded=excluded)
    if hypothesis_flag and rec.verdict == "PASS":
        rec.verdict = "HYPOTHESES_UNMET"
    return rec


def _check_riemann(ctx):
    pts, excluded = _usable_points(ctx)
    wc, wC, diff = sm.riemann_closed_form(ctx.candidate, pts, ctx.ensure_fit())
    provider = sm.frame_metric_jets(ctx.candidate)
    oracle, _ = sm.riemann_from_metric_oracle(provider, pts)
    details = {
        "closed_form_c": wc,
        "closed_form_C": wC,
        "dual_path_difference": diff,
        "coordinate_oracle": oracle,
    }
    worst = max(wc, wC, oracle, diff)
    return _record(ctx, "riemann", worst, details, excluded=excluded,
                   tol=max(ctx.tol, FLATNESS_TOL))


def _check_flatness(ctx):
    cand = ctx.candidate
    try:
        fit = ctx.ensure_fit()
    except ZeroDenominator as exc:
        return _record(ctx, "flatness", float("nan"), {"error": str(exc)},
                       verdict="HYPOTHESES_UNMET", tol=FLATNESS_TOL)
    cert = sm.flatness_certificate(
        cand, ctx.points, fit, tol=FLATNESS_TOL, agreement_tol=FLATNESS_AGREEMENT_TOL
    )
    details = {
        "signature": list(cert.signature),
        "closed_form_residual": cert.closed_form_residual,
        "oracle_residual": cert.oracle_residual,
        "dual_path_agreement": cert.dual_path_agreement,
        "alpha": fit.alpha,
        "gamma": fit.gamma,
    }
    verdict = "PASS" if cert.verdict == "FLAT" else cert.verdict
    residual = cert.closed_form_residual
    if cert.oracle_residual is not None and not np.isnan(cert.oracle_residual):
        residual = max(residual, cert.oracle_residual)
    return _record(ctx, "flatness", residual, details, verdict=verdict,
                   excluded=cert.singular_points, tol=FLATNESS_TOL)


_CHECKS = {
    "commute": _check_commute,
    "square-closed": _check_square_closed,
    "potentials": _check_potentials,
    "structure-constants": _check_structure,
    "yano-ako": _check_yano_ako,
    "weak-haantjes": _check_weak,
    "lenard": _check_lenard,
    "compatibility": _check_compatibility,
    "wdvv": _check_wdvv,
    "conformal-fit": _check_fit,
    "metric": _check_metric,
    "frame-commutators": _check_frame_commutators,
    "connection": _check_connection,
    "riemann": _check_riemann,
    "flatness": _check_flatness,
}


def run_pipeline(manifest, only=None, points=None, seed=None, tol=None):
    """Run the requested checks and assemble the certificate report.

    ``only`` restricts to a subset of check ids; otherwise the manifest's
    ``checks.run`` list applies, defaulting to the full pipeline.
    """
    cfg = manifest.checks
    count = points if points is not None else cfg.points
    seed = seed if seed is not None else cfg.seed
    tol = tol if tol is not None else cfg.tolerance
    requested = tuple(only) if only else (cfg.run or CHECK_IDS)
    unknown = [c for c in requested if c not in CHECK_IDS]
    if unknown:
        raise HaantjesError(f"unknown check ids: {', '.join(unknown)}")
    pts = sample_points(manifest.chart, count, seed=seed)
    ctx = _Context(manifest, pts, tol)
    records = []
    for cid in CHECK_IDS:
        if cid not in requested:
            continue
        if ctx.candidate is None:
            records.append(_skip(ctx, cid, "manifest has no candidate section"))
            continue
        if cid in _REQUIRES_XI and not ctx.has_xi:
            records.append(_skip(ctx, cid, "candidate declares no xi field"))
            continue
        if cid in _REQUIRES_FULL and not ctx.full:
            records.append(_skip(ctx, cid, "candidate K list shorter than the dimension"))
            continue
        failed_deps = [
            d for d in _DEPENDS.get(cid, ()) if ctx.verdicts.get(d) in ("FAIL", "SKIPPED")
        ]
        if failed_deps:
            records.append(_skip(ctx, cid, f"prerequisite failed: {', '.join(failed_deps)}"))
            ctx.verdicts[cid] = "SKIPPED"
            continue
        if cid == "flatness" and "conformal-fit" in requested and ctx.fit is None:
            pass  # fit record failed hard; flatness computes its own
        record = _CHECKS[cid](ctx)
        ctx.verdicts[cid] = record.verdict
        records.append(record)
    chart = manifest.chart
    report = CertificateReport(
        tool_version=__version__,
        manifest_name=manifest.name,
        manifest_sha256=manifest.sha256,
        chart={
            "dim": chart.dim,
            "label": chart.label,
            "lower": list(chart.lower),
            "upper": list(chart.upper),
            "base_point": list(chart.base_point),
        },
        config={"tolerance": tol, "points": count, "seed": seed, "only": list(requested)},
        records=records,
    )
    return report
