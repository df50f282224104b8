"""Certification of a candidate bundle (dA, K_1..K_n, optional xi).

Checks, in dependency order: pairwise commutation, closedness of the doubly
iterated 1-forms K_j K_l dA, potential integration, structure-constant
extraction with its algebra laws, bracket vanishing for the extracted (1,2)
field, the weak three-condition test, chain-generator and flow-compatibility
tests, and the Hessian-symmetry + associativity form of the WDVV property.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .algebra import apply_op, op_mul, op_on_oneform
from .concomitants import (
    dK_oneform_jets,
    haantjes_from_nijenhuis,
    nijenhuis_torsion_jets,
    rel_scale,
    yano_ako_bracket,
)
from .errors import (
    DegenerateFrame,
    FrameIntegrationFailure,
    NoGenerator,
    NotClosed,
    QuadratureStall,
)
from .fields import TensorField, Valence
from .geometry import COND_LIMIT, lie_bracket_jets

__all__ = [
    "HaantjesCandidate",
    "PotentialSquare",
    "StructureConstants",
    "check_commuting",
    "check_square_closed",
    "integrate_potentials",
    "structure_constants",
    "structure_field",
    "check_structure_algebra",
    "check_yano_ako_field",
    "check_weak_haantjes",
    "check_lenard_generator",
    "check_compatibility_identity",
    "flow_map",
    "wdvv_check",
]


@dataclass(frozen=True)
class HaantjesCandidate:
    """The bundle to certify: seed potential A, operators K_j, optional xi, F."""

    chart: object
    A: TensorField
    K_list: tuple
    xi: TensorField | None = None
    F: TensorField | None = None
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def n(self):
        return self.chart.dim

    def dA_field(self):
        """dA as an expression-backed 1-form (keeps full 2-jets downstream)."""
        if "dA" not in self._cache:
            g = self.A.diff()
            self._cache["dA"] = TensorField(self.chart, Valence.ONEFORM, g)
        return self._cache["dA"]

    def beta_exprs(self, j, l):
        """Symbolic components of beta_jl = K_j K_l dA (vectorizable)."""
        key = ("beta", j, l)
        if key not in self._cache:
            n = self.n
            Kj = self.K_list[j].components
            Kl = self.K_list[l].components
            dA = self.dA_field().components
            out = np.empty(n, dtype=object)
            for p in range(n):
                acc = ex.Num(0.0)
                for q in range(n):
                    for s in range(n):
                        acc = ex.add(acc, ex.mul(ex.mul(Kj[q, p], Kl[s, q]), dA[s]))
                out[p] = acc
            self._cache[key] = out
        return self._cache[key]

    def jets_at(self, p):
        """One evaluation pass: jets of dA and of every K_j at ``p``."""
        dAJ = self.dA_field().jet_at(p)
        KJ = [K.jet_at(p) for K in self.K_list]
        return dAJ, KJ

    def frame_matrix(self, p, dAJ=None, KJ=None):
        """M[a, m] = (dA_m)_a = (K_m dA)_a: columns are the iterated 1-forms."""
        if dAJ is None or KJ is None:
            dAJ, KJ = self.jets_at(p)
        n = self.n
        M = np.empty((n, n))
        for m in range(n):
            M[:, m] = np.einsum("ja,j->a", KJ[m].value, dAJ.value)
        return M


# -- commutation and closedness ----------------------------------------------


def check_commuting(K_list, points):
    """Max over points of |K_j K_l - K_l K_j| per pair, scale-relative."""
    n = K_list[0].chart.dim
    res = np.zeros((len(K_list), len(K_list)))
    for p in points:
        vals = [K.value_at(p) for K in K_list]
        scale = rel_scale(*vals) ** 2
        for j in range(len(K_list)):
            for l in range(j + 1, len(K_list)):
                d = vals[j] @ vals[l] - vals[l] @ vals[j]
                r = float(np.max(np.abs(d))) / scale
                res[j, l] = max(res[j, l], r)
                res[l, j] = res[j, l]
    return res


def check_square_closed(candidate, points):
    """Max |d(K_j K_l dA)| per pair over the sample points."""
    n = len(candidate.K_list)
    res = np.zeros((n, n))
    for p in points:
        dAJ, KJ = candidate.jets_at(p)
        scale = rel_scale(dAJ.value, *[K.value for K in KJ]) ** 3
        for j in range(n):
            for l in range(n):
                beta = op_on_oneform(op_mul(KJ[j], KJ[l]), dAJ)
                dbeta = beta.grad.T - beta.grad
                res[j, l] = max(res[j, l], float(np.max(np.abs(dbeta))) / scale)
    return res


# -- potentials ----------------------------------------------------------------


@dataclass
class PotentialSquare:
    """Potentials A_jl integrated from the base point along axis polylines."""

    candidate: HaantjesCandidate
    symmetry_defect: float = 0.0

    def values(self, points, order=None, rtol=1e-10):
        """A_jl at each point (normalized to zero at the base point).

        ``order`` permutes the polyline axes (default 0..n-1); closedness
        makes the result path independent up to quadrature error.
        """
        cand = self.candidate
        n = cand.n
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros((pts.shape[0], n, n))
        for j in range(n):
            for l in range(n):
                comps = cand.beta_exprs(j, l)
                out[:, j, l] = _polyline_integral(comps, cand.chart.base, pts, order, rtol)
        return out

    def single(self, j, l, points, order=None, rtol=1e-10):
        comps = self.candidate.beta_exprs(j, l)
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return _polyline_integral(comps, self.candidate.chart.base, pts, order, rtol)


def _simpson_batch(f, count):
    """Composite Simpson with ``count`` intervals (count even) on [0, 1]."""
    s = np.linspace(0.0, 1.0, count + 1)
    w = np.ones(count + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return (f(s) * w).sum(axis=-1) / (3.0 * count)


def _polyline_integral(comps, base, targets, order=None, rtol=1e-10, max_levels=20):
    """Integrate a 1-form along axis-aligned polylines from base to targets.

    Vectorized over targets; composite Simpson per segment with adaptive
    interval doubling until successive estimates agree to ``rtol`` relative.
    """
    n = base.shape[0]
    axes = list(order) if order is not None else list(range(n))
    m = targets.shape[0]
    total = np.zeros(m)
    for step, k in enumerate(axes):
        span = targets[:, k] - base[k]

        def integrand(s):
            nodes = s.shape[0]
            coords = []
            for i in range(n):
                if i == k:
                    x = base[k] + span[:, None] * s[None, :]
                elif axes.index(i) < step:
                    x = np.repeat(targets[:, i][:, None], nodes, axis=1)
                else:
                    x = np.full((m, nodes), base[i])
                coords.append(x)
            return np.asarray(comps[k].eval(coords)) * np.ones((m, nodes)) * span[:, None]

        count = 8
        prev = _simpson_batch(integrand, count)
        for _ in range(max_levels):
            count *= 2
            cur = _simpson_batch(integrand, count)
            if np.max(np.abs(cur - prev)) <= rtol * (1.0 + np.max(np.abs(cur))):
                prev = cur
                break
            prev = cur
        else:
            raise QuadratureStall(f"Simpson refinement exceeded {max_levels} levels on axis {k}")
        total += prev
    return total


def integrate_potentials(candidate, points, closed_ok=True, rtol=1e-10):
    """Build the potential square; requires the closedness check to have passed."""
    if not closed_ok:
        raise NotClosed("cannot integrate potentials: closedness check failed")
    square = PotentialSquare(candidate)
    vals = square.values(points, rtol=rtol)
    scale = rel_scale(vals)
    square.symmetry_defect = float(np.max(np.abs(vals - vals.transpose(0, 2, 1)))) / scale
    return square


# -- structure constants -------------------------------------------------------


@dataclass(frozen=True)
class StructureConstants:
    """C^m_{jl} at one point plus the residuals of its defining laws."""

    components: np.ndarray  # [m, j, l]
    reconstruction_residual: float  # Eq-type law K_j K_l = sum_m C^m_jl K_m
    symmetry_residual: float
    associativity_residual: float
    unity_residual: float


def structure_constants(candidate, p, dAJ=None, KJ=None):
    """Solve K_j K_l dA = sum_m C^m_{jl} dA_m for C at ``p``."""
    if dAJ is None or KJ is None:
        dAJ, KJ = candidate.jets_at(p)
    n = candidate.n
    M = candidate.frame_matrix(p, dAJ, KJ)
    if np.linalg.cond(M) > COND_LIMIT:
        raise DegenerateFrame(f"iterated 1-forms dA_m do not form a basis at {p}")
    Kv = [J.value for J in KJ]
    C = np.empty((n, n, n))
    for j in range(n):
        for l in range(n):
            beta = np.einsum("qp,sq,s->p", Kv[j], Kv[l], dAJ.value)
            C[:, j, l] = np.linalg.solve(M, beta)
    scale = rel_scale(*Kv)
    recon = 0.0
    for j in range(n):
        for l in range(n):
            approx = np.einsum("m,mab->ab", C[:, j, l], np.stack(Kv))
            recon = max(recon, float(np.max(np.abs(Kv[j] @ Kv[l] - approx))) / scale**2)
    sym = float(np.max(np.abs(C - C.transpose(0, 2, 1)))) / rel_scale(C)
    left = np.einsum("ljk,slm->jkms", C, C)
    right = np.einsum("lmk,slj->jkms", C, C)
    assoc = float(np.max(np.abs(left - right))) / rel_scale(C, C**2)
    eye = np.eye(n)
    unity = float(np.max(np.abs(C[:, 0, :] - eye))) / rel_scale(C)
    return StructureConstants(C, recon, sym, assoc, unity)


def structure_field(candidate):
    """C^m_{jl} as an expression-backed (1,2) field (Cramer solve).

    Rational in the field components; lets the bracket of C with itself be
    evaluated with exact jets anywhere on the chart.
    """
    if "Cfield" in candidate._cache:
        return candidate._cache["Cfield"]
    n = candidate.n
    dA = candidate.dA_field().components
    M = np.empty((n, n), dtype=object)
    for m in range(n):
        Km = candidate.K_list[m].components
        for a in range(n):
            acc = ex.Num(0.0)
            for jj in range(n):
                acc = ex.add(acc, ex.mul(Km[jj, a], dA[jj]))
            M[a, m] = acc
    det = _sym_det(M)
    comps = np.empty((n, n, n), dtype=object)
    for j in range(n):
        for l in range(n):
            beta = candidate.beta_exprs(j, l)
            for m in range(n):
                # Cramer: replace column m by beta
                Mm = M.copy()
                Mm[:, m] = beta
                comps[m, j, l] = ex.div(_sym_det(Mm), det)
    f = TensorField(candidate.chart, Valence.BILINEAR, comps)
    candidate._cache["Cfield"] = f
    return f


def _sym_det(M):
    """Symbolic determinant by Laplace expansion (small n only)."""
    n = M.shape[0]
    if n == 1:
        return M[0, 0]
    acc = ex.Num(0.0)
    for j in range(n):
        minor = np.delete(np.delete(M, 0, axis=0), j, axis=1)
        term = ex.mul(M[0, j], _sym_det(minor))
        acc = ex.add(acc, term if j % 2 == 0 else ex.neg(term))
    return acc


def check_structure_algebra(candidate, points):
    """Worst residuals of the structure-constant laws over the points."""
    worst = {"reconstruction": 0.0, "symmetry": 0.0, "associativity": 0.0, "unity": 0.0}
    excluded = 0
    for p in points:
        try:
            sc = structure_constants(candidate, p)
        except DegenerateFrame:
            excluded += 1
            continue
        worst["reconstruction"] = max(worst["reconstruction"], sc.reconstruction_residual)
        worst["symmetry"] = max(worst["symmetry"], sc.symmetry_residual)
        worst["associativity"] = max(worst["associativity"], sc.associativity_residual)
        worst["unity"] = max(worst["unity"], sc.unity_residual)
    return worst, excluded


def check_yano_ako_field(candidate, points, tol=1e-8):
    """Bracket of the extracted structure field with itself over the points."""
    C = structure_field(candidate)
    worst = 0.0
    for p in points:
        val = yano_ako_bracket(C, p, enforce_pre=False, tol=tol)
        scale = rel_scale(val.components) * rel_scale(C.jet_at(p).value) ** 2
        worst = max(worst, float(np.max(np.abs(val.components))) / scale)
    return worst


# -- weak conditions -----------------------------------------------------------


def check_weak_haantjes(A, K, points):
    """Residuals of the three weak conditions for a single (dA, K) pair."""
    chart = K.chart
    dA = TensorField(chart, Valence.ONEFORM, A.diff())
    r_h = r_dd = r_dkdk = 0.0
    for p in points:
        KJ = K.jet_at(p)
        dAJ = dA.jet_at(p)
        scale2 = rel_scale(KJ.value, dAJ.value) ** 2
        scale3 = rel_scale(KJ.value, dAJ.value) ** 3
        T = nijenhuis_torsion_jets(KJ)
        H = haantjes_from_nijenhuis(T, KJ.value)
        r_h = max(r_h, float(np.max(np.abs(H))) / scale3)
        beta = op_on_oneform(KJ, dAJ)
        ddk = beta.grad.T - beta.grad
        r_dd = max(r_dd, float(np.max(np.abs(ddk))) / scale2)
        dkdk = dK_oneform_jets(KJ, beta)
        r_dkdk = max(r_dkdk, float(np.max(np.abs(dkdk))) / scale2)
    return r_h, r_dd, r_dkdk


# -- chain generators and compatibility ----------------------------------------


def _frame_jets(candidate, p, xi=None):
    """Value/grad jets of the iterated fields xi_j = K_j xi at ``p``."""
    xi = xi if xi is not None else candidate.xi
    xiJ = xi.jet_at(p)
    return [apply_op(K.jet_at(p), xiJ) for K in candidate.K_list]


def check_lenard_generator(candidate, points, xi=None):
    """Independence and pairwise commutation of the fields K_j xi.

    Returns (independence defect flag data, worst commutator residual,
    excluded point count).
    """
    n = candidate.n
    worst_comm = 0.0
    dependent = 0
    max_cond = 0.0
    for p in points:
        frames = _frame_jets(candidate, p, xi)
        E = np.stack([f.value for f in frames])  # E[j, a]
        cond = np.linalg.cond(E)
        max_cond = max(max_cond, cond)
        if not np.isfinite(cond) or cond > COND_LIMIT:
            dependent += 1
            continue
        scale = rel_scale(E) ** 2
        for j in range(n):
            for l in range(j + 1, n):
                br = lie_bracket_jets(frames[j], frames[l])
                worst_comm = max(worst_comm, float(np.max(np.abs(br))) / scale)
    return worst_comm, dependent, max_cond


def check_compatibility_identity(candidate, j, l, points, xi=None):
    """Residual of [K_j xi, K_l xi] - K_j [xi, K_l xi] - K_l [K_j xi, xi]."""
    xi = xi if xi is not None else candidate.xi
    worst = 0.0
    for p in points:
        xiJ = xi.jet_at(p)
        KjJ = candidate.K_list[j].jet_at(p)
        KlJ = candidate.K_list[l].jet_at(p)
        Xj = apply_op(KjJ, xiJ)
        Xl = apply_op(KlJ, xiJ)
        term = lie_bracket_jets(Xj, Xl)
        term = term - KjJ.value @ lie_bracket_jets(xiJ, Xl)
        term = term - KlJ.value @ lie_bracket_jets(Xj, xiJ)
        scale = rel_scale(KjJ.value, KlJ.value, xiJ.value) ** 3
        worst = max(worst, float(np.max(np.abs(term))) / scale)
    return worst


# -- flows of the frame and the WDVV property -----------------------------------


def flow_map(candidate, t, xi=None, tol=1e-10, h0=0.05, max_steps=100000):
    """Point reached from the base by composing the flows of xi_1..xi_n.

    Flow times ``t[j]`` are applied in fixed index order; the commutation
    check makes the order immaterial up to integration error.  Adaptive RK4
    with step-doubling error control at ``tol``.
    """
    xi = xi if xi is not None else candidate.xi
    chart = candidate.chart
    u = chart.base.copy()
    for j, tj in enumerate(t):
        if tj == 0.0:
            continue
        K = candidate.K_list[j]

        def rhs(q):
            xiJ = xi.jet_at(q, check=False)
            return K.jet_at(q, check=False).value @ xiJ.value

        u = _rk4_adaptive(rhs, u, tj, tol=tol, h0=h0, max_steps=max_steps)
        if not chart.contains(u):
            raise FrameIntegrationFailure(f"flow {j + 1} left the chart box at {u}")
    return u


def _rk4_step(rhs, u, h):
    k1 = rhs(u)
    k2 = rhs(u + 0.5 * h * k1)
    k3 = rhs(u + 0.5 * h * k2)
    k4 = rhs(u + h * k3)
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _rk4_adaptive(rhs, u, T, tol, h0, max_steps):
    t = 0.0
    sign = 1.0 if T >= 0 else -1.0
    h = sign * min(abs(h0), abs(T))
    steps = 0
    while sign * (T - t) > 1e-15 * (1.0 + abs(T)):
        if sign * (t + h) > sign * T:
            h = T - t
        big = _rk4_step(rhs, u, h)
        half = _rk4_step(rhs, u, h / 2.0)
        two = _rk4_step(rhs, half, h / 2.0)
        err = float(np.max(np.abs(big - two))) / 15.0
        budget = tol * (1.0 + float(np.max(np.abs(u))))
        if err <= budget:
            u = two + (two - big) / 15.0  # local extrapolation
            t += h
            if err < budget / 64.0:
                h *= 2.0
        else:
            h /= 2.0
            if abs(h) < 1e-14:
                raise FrameIntegrationFailure("step size underflow in frame flow")
        steps += 1
        if steps > max_steps:
            raise FrameIntegrationFailure("step budget exhausted in frame flow")
    return u


def _c_from_jets(candidate, p, xi=None):
    """c[j, l, m] = (K_j K_l dA)(K_m xi): frame derivatives of the potentials."""
    xi = xi if xi is not None else candidate.xi
    n = candidate.n
    dAJ, KJ = candidate.jets_at(p)
    xiJ = xi.jet_at(p)
    c = np.empty((n, n, n))
    for j in range(n):
        for l in range(n):
            beta = op_on_oneform(op_mul(KJ[j], KJ[l]), dAJ)
            for m in range(n):
                xm = apply_op(KJ[m], xiJ)
                c[j, l, m] = float(beta.value @ xm.value)
    return c


def wdvv_check(candidate, points, lenard_ok=True, t_radius=None, t_samples=5, xi=None):
    """Hessian-form WDVV test in the coordinates of the chain generator.

    (a) total symmetry of the frame derivatives of the potentials (the
    third-derivative symmetry making the potential square a Hessian), checked
    at flow-mapped points around the base; (b) commutativity of the
    multiplication matrices built from the structure constants.  Returns the
    two worst residuals and the flow points used.
    """
    if not lenard_ok:
        raise NoGenerator("wdvv check requires a verified chain generator")
    xi = xi if xi is not None else candidate.xi
    if xi is None:
        raise NoGenerator("wdvv check requires a generator vector field")
    n = candidate.n
    chart = candidate.chart
    if t_radius is None:
        # keep flow excursions well inside the box
        scale = max(
            float(np.max(np.abs(apply_op(K.jet_at(chart.base), xi.jet_at(chart.base)).value)))
            for K in candidate.K_list
        )
        t_radius = 0.1 * float(np.min(chart.widths)) / (1.0 + scale)
    rng = np.random.default_rng(20240601)
    flow_points = [chart.base.copy()]
    for _ in range(t_samples - 1):
        t = rng.uniform(-t_radius, t_radius, n)
        flow_points.append(flow_map(candidate, t, xi=xi))
    sym_res = 0.0
    assoc_res = 0.0
    for p in flow_points:
        c = _c_from_jets(candidate, p, xi)
        scale = rel_scale(c)
        for perm in ((0, 2, 1), (1, 0, 2), (2, 1, 0)):
            sym_res = max(sym_res, float(np.max(np.abs(c - c.transpose(perm)))) / scale)
        sc = structure_constants(candidate, p)
        Cmats = [sc.components[:, j, :] for j in range(n)]
        cscale = rel_scale(sc.components) ** 2
        for j in range(n):
            for l in range(j + 1, n):
                d = Cmats[j] @ Cmats[l] - Cmats[l] @ Cmats[j]
                assoc_res = max(assoc_res, float(np.max(np.abs(d))) / cscale)
    # checked residuals also cover points supplied by the caller
    for p in points:
        sc = structure_constants(candidate, p)
        Cmats = [sc.components[:, j, :] for j in range(n)]
        cscale = rel_scale(sc.components) ** 2
        for j in range(n):
            for l in range(j + 1, n):
                d = Cmats[j] @ Cmats[l] - Cmats[l] @ Cmats[j]
                assoc_res = max(assoc_res, float(np.max(np.abs(d))) / cscale)
    return sym_res, assoc_res, flow_points


def reconstruct_potential_function(candidate, square, t_points, xi=None):
    """Report-only scalar potential values F(t) by double quadrature.

    F(t) = int_0^1 (1-s) sum_jl t_j t_l A_jl(flow(s t)) ds, where the A_jl
    vanish at the base point; the result is therefore normalized to
    F(0) = 0, grad F(0) = 0 and Hess F(0) = 0 (potentials are defined only
    up to constants).  No pass/fail weight.
    """
    out = []
    nodes, weights = np.polynomial.legendre.leggauss(24)
    s = 0.5 * (nodes + 1.0)
    w = 0.5 * weights
    for t in t_points:
        t = np.asarray(t, dtype=float)
        pts = np.array([flow_map(candidate, si * t, xi=xi) for si in s])
        A = square.values(pts)
        vals = np.einsum("j,l,pjl->p", t, t, A)
        out.append(float(np.sum(w * (1.0 - s) * vals)))
    return np.asarray(out)
