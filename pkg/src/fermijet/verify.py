"""Executable checks on a measured Fermi metric jet.

* ``check_conditions``: the four contracted identities (A)-(D) that
  characterize submanifold geodesic normal coordinates.
* ``predict_linear_jet``: the linear-in-curvature table for every derivative
  of the metric at the origin, and comparisons against measured jets.
* ``linearized_compare``: slope extraction along an epsilon family whose
  member at epsilon = 0 is flat with a totally geodesic submanifold.
* ``solve_frame_coefficients``: the coframe coefficients ``a^i_j`` staged by
  homogeneous degree, and ``reassemble_metric_jet`` for the closed loop.

Index conventions: variables of the Fermi chart are ``(x^1..x^k, u^1..u^{n-k})``
and frame indices follow the same order, so frame index ``k + b`` is the
normal index ``b'``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import jets as J
from .coords import FermiChart, GeodesicSolverConfig
from .geometry import (
    MetricChart,
    SubmanifoldChart,
    adapted_frame,
    riemann,
    riemann_expansion,
    second_fundamental_form,
    to_frame,
)
from .jets import Jet, JetError

CONDITIONS = ("A", "B", "C", "D")
RELATIVE_FLOOR = 1e-12


class VerifyError(ValueError):
    pass


def _split_degrees(space, k: int):
    exps = space.exps
    return exps[:, :k].sum(axis=1), exps[:, k:].sum(axis=1)


def _k_from(h: np.ndarray, k: int | None, n: int) -> int:
    if k is None:
        raise VerifyError("the tangential dimension k is required")
    if not 1 <= k < n or h.shape != (n, n):
        raise VerifyError(f"inconsistent dimensions: k={k}, n={n}, h {h.shape}")
    return k


# -- conditions (A)-(D) ---------------------------------------------------

@dataclass
class ConditionReport:
    """Max-abs Taylor-coefficient residual of each contracted condition."""

    order: int
    tol: float
    residuals: dict[str, float]
    worst: dict[str, tuple[tuple[int, ...], tuple[int, ...]]]

    def passed(self, cond: str | None = None) -> bool:
        if cond is not None:
            return self.residuals[cond] <= self.tol
        return all(self.residuals[c] <= self.tol for c in CONDITIONS)

    def as_dict(self) -> dict:
        return {
            "order": self.order,
            "tol": self.tol,
            "residuals": dict(self.residuals),
            "worst": {c: {"component": list(w[0]), "K": list(w[1])} for c, w in self.worst.items()},
            "passed": self.passed(),
        }


def _worst(r: Jet, max_degree: int):
    keep = r.space.degree <= max_degree
    c = np.abs(r.coeffs[..., keep])
    if c.size == 0:
        return 0.0, ((), ())
    flat = int(np.argmax(c))
    idx = np.unravel_index(flat, c.shape)
    K = tuple(int(e) for e in r.space.exps[np.flatnonzero(keep)[idx[-1]]])
    return float(c[idx]), (tuple(int(i) for i in idx[:-1]), K)


def check_conditions(gt: Jet, h: np.ndarray, order: int, tol: float = 1e-8, *, k: int) -> ConditionReport:
    """Residuals of (A)-(D) for a metric jet in Fermi variables ``(x, u)``.

    Every condition is formed at jet level by multiplying with the seeded
    variables.  All metric coefficients of degree <= ``order`` enter: (A), (B)
    and (D) are read to degree ``order + 1``, (C) to degree ``order``
    (it differentiates once in ``u`` before multiplying by ``x``).
    Residuals are Taylor coefficients ``c_K`` of the contracted expressions.
    """
    h = np.asarray(h, float)
    n = gt.nvars
    k = _k_from(h, k, n)
    if gt.order < order:
        raise VerifyError(f"metric jet of order {gt.order} cannot be checked to order {order}")
    q = order + 1
    g = gt.with_order(order).with_order(q)
    z = Jet.seed(np.zeros(n), q)
    x, u = z[:k], z[k:]
    dev = g - h
    T, N = slice(0, k), slice(k, n)

    res_a = J.einsum("ab,b->a", dev[T, T].restrict_zero(range(k, n)), x)
    res_b = J.einsum("ab,b->a", dev[N, N], u)
    res_d = J.einsum("ab,b->a", g[T, N], u)
    # (C): d/du^b' of g_{a a'} on u = 0, contracted with x^a
    dgu = J.stack([g[T, N].deriv(k + b) for b in range(n - k)], axis=-1)     # [a, a', b'] order q-1
    dgu = dgu.with_order(order).restrict_zero(range(k, n))
    xo = Jet.seed(np.zeros(n), order)[:k]
    res_c = J.einsum("apb,a->pb", dgu, xo)

    residuals, worst = {}, {}
    for name, r, deg in (("A", res_a, q), ("B", res_b, q), ("C", res_c, order), ("D", res_d, q)):
        residuals[name], worst[name] = _worst(r, deg)
    return ConditionReport(order, tol, residuals, worst)


# -- symmetrization ---------------------------------------------------------

def symmetrize(T: np.ndarray, slots: Sequence[int]) -> np.ndarray:
    """Average of ``T`` over all permutations of the listed slots."""
    slots = list(slots)
    if len(slots) < 2:
        return np.array(T, float)
    out = np.zeros_like(T, dtype=float)
    perms = list(itertools.permutations(slots))
    for p in perms:
        axes = list(range(T.ndim))
        for src, dst in zip(slots, p):
            axes[dst] = src
        out += np.transpose(T, axes)
    return out / len(perms)


def _sym_entry(T: np.ndarray, template: Sequence[int | None], values: Sequence[int]) -> float:
    """Component of ``T`` averaged over placements of ``values`` into the ``None`` slots."""
    free = [i for i, t in enumerate(template) if t is None]
    if len(free) != len(values):
        raise VerifyError("symmetrization template does not match the index list")
    total, count = 0.0, 0
    idx = list(template)
    for p in itertools.permutations(values):
        for pos, v in zip(free, p):
            idx[pos] = v
        total += T[tuple(idx)]
        count += 1
    return total / count if count else float(T[tuple(idx)])


# -- linear-order prediction ------------------------------------------------

ROWS = {
    1: "g_ab = h_ab",
    2: "g_ab,c = 0",
    3: "g_ab,c1..cM = 2(M-1)/(M+1) R_a(c1c2|b|,c3..cM)",
    4: "g_ab,c1..cMc' = -2 L_abc',c1..cM",
    5: "g_ab,c..c'1..c'N = 2 R_a(c'1c'2|b|,c'3..c'N)c1..cM",
    6: "g_ab',c1..cM = 0",
    7: "g_ab',c' = 0",
    8: "g_ab',c1..cMc' = -M/(M+1) R_b'c'a(c1,c2..cM)",
    9: "g_ab',c..c'1..c'N = 2N/(N+1) R_a(c'1c'2|b'|,c'3..c'N)c1..cM",
    10: "g_a'b' = h_a'b'",
    11: "g_a'b',c1..cM = 0",
    12: "g_a'b',c1..cMc' = 0",
    13: "g_a'b',c..c'1..c'N = 2(N-1)/(N+1) R_a'(c'1c'2|b'|,c'3..c'N)c1..cM",
}


@dataclass
class LinearPrediction:
    """Predicted derivatives ``d^K g_ij`` at the origin, with the table row used."""

    n: int
    k: int
    order: int
    entries: dict[tuple[int, int, tuple[int, ...]], tuple[float, int]] = field(default_factory=dict)

    def value(self, i: int, j: int, K: Sequence[int]) -> float:
        i, j = min(i, j), max(i, j)
        return self.entries[(i, j, tuple(K))][0]

    def row(self, i: int, j: int, K: Sequence[int]) -> int:
        i, j = min(i, j), max(i, j)
        return self.entries[(i, j, tuple(K))][1]

    def as_jet(self) -> Jet:
        """Taylor jet whose derivatives are the predicted values."""
        sp = J.JetSpace.get(self.n, self.order)
        c = np.zeros((self.n, self.n, sp.size))
        for (i, j, K), (v, _) in self.entries.items():
            t = sp.index[K]
            c[i, j, t] = c[j, i, t] = v / sp.factorial[t]
        return Jet(sp, c)


def linear_inputs(g: MetricChart, sub: SubmanifoldChart, frame, order: int):
    """Frame components ``[Rm .. nabla^(order-2) Rm]`` and ``[L .. nabla-bar^(order-1) L]``."""
    E = frame.matrix
    curv = [to_frame(T, [E]).components for T in riemann(g, frame.point, max(order - 2, 0))]
    fund = [T.components for T in second_fundamental_form(g, sub, frame, max(order - 1, 0))]
    return curv, fund


def _predict_entry(i, j, tan, nor, curv, fund, h, k):
    M, N = len(tan), len(nor)
    nor_f = [k + c for c in nor]

    def R(depth):
        if depth >= len(curv):
            raise VerifyError(f"curvature list too short: need nabla^{depth} Rm")
        return curv[depth]

    def curvature_row(a, b):
        # R_{a (c'1 c'2 |b|, c'3..c'N) c1..cM}
        template = [a, None, None, b] + [None] * (N - 2) + list(tan)
        return _sym_entry(R(N - 2 + M), template, nor_f)

    if i < k and j < k:
        if M + N == 0:
            return h[i, j], 1
        if N == 0:
            if M == 1:
                return 0.0, 2
            template = [i, None, None, j] + [None] * (M - 2)
            return 2.0 * (M - 1) / (M + 1) * _sym_entry(R(M - 2), template, tan), 3
        if N == 1:
            if M >= len(fund):
                raise VerifyError(f"second fundamental form list too short: need nabla-bar^{M} L")
            return -2.0 * fund[M][(i, j, nor[0]) + tuple(tan)], 4
        return 2.0 * curvature_row(i, j), 5
    if i < k <= j:
        if N == 0:
            return 0.0, 6
        if N == 1:
            if M == 0:
                return 0.0, 7
            template = [j, nor_f[0], i, None] + [None] * (M - 1)
            return -M / (M + 1) * _sym_entry(R(M - 1), template, tan), 8
        return 2.0 * N / (N + 1) * curvature_row(i, j), 9
    if M + N == 0:
        return h[i, j], 10
    if N == 0:
        return 0.0, 11
    if N == 1:
        return 0.0, 12
    return 2.0 * (N - 1) / (N + 1) * curvature_row(i, j), 13


def predict_linear_jet(curv: Sequence[np.ndarray], fund: Sequence[np.ndarray], h: np.ndarray,
                       order: int) -> LinearPrediction:
    """Linear-order value of every ``d^K g_ij(0)`` with ``|K| <= order``.

    ``curv[m]`` holds frame components of ``nabla^m Rm`` (derivative slots
    last, in order of application); ``fund[m]`` holds ``nabla-bar^m L`` with
    slots (tan, tan, normal, tan...).  Comma indices are read as covariant
    derivatives.  Only the curvature-pair indices are symmetrized; trailing
    tangential derivative indices keep their sorted order.
    """
    h = np.asarray(h, float)
    n = h.shape[0]
    if not fund:
        raise VerifyError("second fundamental form list is empty")
    k = fund[0].shape[0]
    pred = LinearPrediction(n, k, order)
    for K in J.multi_indices(n, order):
        tan = [a for a in range(k) for _ in range(K[a])]
        nor = [b for b in range(n - k) for _ in range(K[k + b])]
        for i in range(n):
            for j in range(i, n):
                pred.entries[(i, j, K)] = _predict_entry(i, j, tan, nor, curv, fund, h, k)
    return pred


# -- comparisons ------------------------------------------------------------

@dataclass
class ComparisonRow:
    i: int
    j: int
    K: tuple[int, ...]
    row: int
    measured: float
    predicted: float
    abs_dev: float
    rel_dev: float
    tol: float
    passed: bool


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow]
    eps: tuple[float, ...] = ()
    note: str = ""

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def max_abs(self) -> float:
        return max((r.abs_dev for r in self.rows), default=0.0)

    @property
    def max_rel(self) -> float:
        return max((r.rel_dev for r in self.rows), default=0.0)

    def failures(self) -> list[ComparisonRow]:
        return [r for r in self.rows if not r.passed]


def _row(i, j, K, row, m, p, atol, rtol=None) -> ComparisonRow:
    ad = abs(m - p)
    rd = ad / max(abs(m), abs(p), RELATIVE_FLOOR)
    ok = ad <= atol or (rtol is not None and rd <= rtol)
    return ComparisonRow(i, j, tuple(K), row, float(m), float(p), ad, rd, rtol if rtol is not None else atol, ok)


def compare_rows(measured: Jet, pred: LinearPrediction, degrees: Sequence[int], atol: float,
                 rtol: float | None = None) -> ComparisonReport:
    rows = []
    for (i, j, K), (p, r) in sorted(pred.entries.items()):
        if sum(K) in degrees:
            rows.append(_row(i, j, K, r, float(measured[i, j].coefficient(K)), p, atol, rtol))
    return ComparisonReport(rows)


def compare_first_order(measured: Jet, pred: LinearPrediction, tol: float = 1e-7) -> ComparisonReport:
    """All ``|K| = 1`` rows, absolute tolerance; these carry no quadratic corrections."""
    if measured.order < 1 or pred.order < 1:
        raise VerifyError("first-order comparison needs jets of order >= 1")
    return compare_rows(measured, pred, (1,), tol)


# -- epsilon families -------------------------------------------------------

Family = Callable[[float], tuple[MetricChart, SubmanifoldChart]]


@dataclass(frozen=True)
class FamilyCase:
    """One epsilon family together with the data needed to build its charts."""

    family: Family
    h: np.ndarray
    solver: GeodesicSolverConfig = field(default_factory=GeodesicSolverConfig)

    def frame(self, eps: float):
        """Adapted frame of the member, aligned with the frame at ``eps = 0``."""
        g0, sub0 = self.family(0.0)
        g, sub = self.family(eps)
        return adapted_frame(g, sub, self.h, reference=adapted_frame(g0, sub0, self.h))

    def measure(self, eps: float, order: int):
        g, sub = self.family(eps)
        frame = self.frame(eps)
        chart = FermiChart(g, sub, frame, self.solver, order)
        gt = chart.metric_jet(order)
        pred = predict_linear_jet(*linear_inputs(g, sub, frame, order), self.h, order)
        return gt, pred


def _entry_table(gt: Jet, pred: LinearPrediction, degrees):
    out = {}
    for (i, j, K), (p, r) in pred.entries.items():
        if sum(K) in degrees:
            out[(i, j, K)] = (float(gt[i, j].coefficient(K)), p, r)
    return out


def linearized_compare(case: FamilyCase, order: int, eps: float = 1e-3, degrees=(2, 3),
                       rtol: float = 1e-3, atol: float = 1e-8) -> ComparisonReport:
    """Compare d/d(eps) at 0 of measured and predicted derivatives.

    Slopes come from central differences at ``eps`` and ``2 eps`` combined by
    Richardson, ``(4 D(eps) - D(2 eps)) / 3``.  A row passes when either the
    relative or the absolute slope deviation is within tolerance.
    """
    tables = {}
    for e in (eps, -eps, 2 * eps, -2 * eps):
        tables[e] = _entry_table(*case.measure(e, order), degrees)

    def slope(key, which):
        d1 = (tables[eps][key][which] - tables[-eps][key][which]) / (2 * eps)
        d2 = (tables[2 * eps][key][which] - tables[-2 * eps][key][which]) / (4 * eps)
        return (4 * d1 - d2) / 3

    rows = []
    for key in sorted(tables[eps]):
        i, j, K = key
        rows.append(_row(i, j, K, tables[eps][key][2], slope(key, 0), slope(key, 1), atol, rtol))
    return ComparisonReport(rows, eps=(eps, 2 * eps))


def eps_scaling(case: FamilyCase, order: int, eps_list=(1e-2, 5e-3, 2.5e-3), degrees=(2, 3)):
    """Max measured-vs-predicted deviation per epsilon and the fitted log-log exponent."""
    devs = []
    for e in eps_list:
        table = _entry_table(*case.measure(e, order), degrees)
        devs.append(max(abs(m - p) for m, p, _ in table.values()))
    slope = np.polyfit(np.log(eps_list), np.log(np.maximum(devs, 1e-300)), 1)[0]
    return devs, float(slope)


# -- frame-coefficient recursion --------------------------------------------

MAX_RECURSION_ORDER = 3


@dataclass
class FrameCoefficientJet:
    """Coframe coefficients ``theta^i = a^i_j dz^j`` as an ``(n, n)`` jet in ``(x, u)``."""

    a: Jet
    h: np.ndarray
    k: int

    def sigma_residual(self) -> float:
        """Largest ``a^a_b'`` and ``a^a'_b`` coefficient on ``u = 0``."""
        n = self.a.shape[0]
        on = self.a.restrict_zero(range(self.k, n))
        return max(on[: self.k, self.k:].max_abs(), on[self.k:, : self.k].max_abs())


def fermi_tensor_jets(chart: FermiChart, order: int):
    """Inputs for the recursion, as jets in ``(x, u)`` at the chart origin.

    Returns ``(Rt, Lc)``: the ambient curvature pulled back through the chart
    (all-lower coordinate components, jet order ``order - 1``) and the
    coordinate second fundamental form ``L_{b d c'}(x) = g(nabla_{d_b} d_d Phi,
    d_c' Phi)`` on ``u = 0`` (jet order ``order - 1``).
    """
    q = max(order - 1, 0)
    Phi = chart.map_jet(order + 1)
    n, k = chart.n, chart.k
    p = Phi.const
    P = Phi.with_order(q)
    D = Phi.gradient().with_order(q)                              # [i, a]
    Rm = J.compose(riemann_expansion(chart.metric, p, q), P, center=p)
    Rt = J.einsum("ijkl,ia,jb,kc,ld->abcd", Rm, D, D, D, D)
    comp = J.Composer(P, center=p)
    gP = comp(chart.metric.expand(p, q))
    Gam = comp(chart.metric.christoffel_expansion(p, q))
    H = Phi.gradient().gradient().with_order(q)                   # [i, a, b]
    Xt, Xn = D[:, :k], D[:, k:]
    nabla = H[:, :k, :k] + J.einsum("ijl,ja,lb->iab", Gam, Xt, Xt)
    Lc = J.einsum("iab,ij,jc->abc", nabla, gP, Xn).restrict_zero(range(k, n))
    return Rt, Lc


def _degree_part(jet: Jet, k: int, M: int, N: int) -> Jet:
    dx, du = _split_degrees(jet.space, k)
    return jet.mask((dx == M) & (du == N))


def solve_frame_coefficients(Rt: Jet, Lc: Jet, h: np.ndarray, order: int, *, k: int) -> FrameCoefficientJet:
    """Coframe coefficients to ``order`` by staging on homogeneous degree ``(M, N)``.

    On an ``(M, N)``-homogeneous term the radial operators act as ``M`` and
    ``N``, so every stage divides a right side assembled from lower degrees:

    * ``N = 0``: ``(M^2 + M) a^a_b = h^{ac} (a^-1)^e_c Rbar_{edsb} x^d x^s``
      with ``Rbar`` from the Gauss relation;
    * ``N = 1``: ``d_c' a^a_b = -h^{ae} L_{bdc'} (a^-1)^d_e`` on ``u = 0``,
      ``(M + 1) d_b' a^a'_b = x^c F_{cb}{}^{a'}{}_{b'}``, and ``a^i_b'`` has no
      part linear in ``u``;
    * ``N >= 2``: ``(N^2 -+ N) a^i_j = h^{il} (a^-1)^p_l Rt_{psmj} u^s u^m``
      with ``-`` for tangential ``j`` and ``+`` for normal ``j``.
    """
    if order > MAX_RECURSION_ORDER:
        raise VerifyError(f"frame recursion supports order <= {MAX_RECURSION_ORDER}")
    h = np.asarray(h, float)
    n = Rt.nvars
    k = _k_from(h, k, n)
    if Rt.order < order - 2 or Lc.order < order - 1:
        raise VerifyError("curvature or second fundamental form jet is too shallow")
    T, Nn = slice(0, k), slice(k, n)
    hinv = np.linalg.inv(h)
    z = Jet.seed(np.zeros(n), order)
    x, u = z[:k], z[k:]
    U = J.stack([Jet.constant(0.0, n, order)] * k + [u[b] for b in range(n - k)])
    Rt = Rt.with_order(order)
    Lc = Lc.with_order(order)
    # Gauss relation in coordinates on Sigma
    gauss = (J.einsum("acp,pq,bdq->abcd", Lc, hinv[Nn, Nn], Lc)
             - J.einsum("adp,pq,bcq->abcd", Lc, hinv[Nn, Nn], Lc))
    Rbar = Rt[T, T, T, T].restrict_zero(range(k, n)) + gauss

    a = Jet.constant(np.eye(n), n, order)
    for d in range(1, order + 1):
        ainv = J.inv(a)
        c = np.zeros(a.coeffs.shape)

        rhs0 = J.einsum("ac,ec,edsb,d,s->ab", hinv[T, T], ainv[T, T], Rbar, x, x)
        c[T, T] += _degree_part(rhs0, k, d, 0).coeffs / (d * d + d)

        rhs1 = -J.einsum("ae,bdp,de,p->ab", hinv[T, T], Lc, ainv[T, T], u)
        c[T, T] += _degree_part(rhs1, k, d - 1, 1).coeffs

        atan = a[T, T].restrict_zero(range(k, n))
        Ginv = J.inv(J.einsum("ea,ef,fb->ab", atan, h[T, T], atan))
        F = J.einsum("pq,qrcb->cbpr", hinv[Nn, Nn], Rt[Nn, Nn, T, T].restrict_zero(range(k, n)))
        F = F + J.einsum("pq,ceq,ef,bfr->cbpr", hinv[Nn, Nn], Lc, Ginv, Lc)
        F = F - J.einsum("pq,beq,ef,cfr->cbpr", hinv[Nn, Nn], Lc, Ginv, Lc)
        rhs_mixed = J.einsum("cbpr,c,r->pb", F, x, u)
        c[Nn, T] += _degree_part(rhs_mixed, k, d - 1, 1).coeffs / d

        if d >= 2:
            rhs2 = J.einsum("il,pl,psmj,s,m->ij", hinv, ainv, Rt, U, U)
            for N in range(2, d + 1):
                part = _degree_part(rhs2, k, d - N, N).coeffs
                c[:, T] += part[:, T] / (N * N - N)
                c[:, Nn] += part[:, Nn] / (N * N + N)
        a = Jet(a.space, a.coeffs + c)
    return FrameCoefficientJet(a, h, k)


def reassemble_metric_jet(frame_coeffs: FrameCoefficientJet) -> Jet:
    """``g_ij = h_kl a^k_i a^l_j``."""
    a = frame_coeffs.a
    return J.einsum("ki,kl,lj->ij", a, frame_coeffs.h, a)


def closed_loop(chart: FermiChart, order: int = 3):
    """Reassembled jet, measured jet, and their max coefficient deviation."""
    Rt, Lc = fermi_tensor_jets(chart, order)
    sol = solve_frame_coefficients(Rt, Lc, chart.frame.h, order, k=chart.k)
    ghat = reassemble_metric_jet(sol)
    gt = chart.metric_jet(order)
    return ghat, gt, float(np.max(np.abs(ghat.coeffs - gt.coeffs)))
