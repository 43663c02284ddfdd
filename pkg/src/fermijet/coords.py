"""Submanifold geodesic normal coordinates by jet-valued geodesic integration.

The chart map is

    Phi(x, u) = exp^g_{q(x)} (u^a' nu_a'(x)),   q(x) = exp^{i*g}_p (x^a e_a),

where ``nu_a'`` is the normal frame transported along the radial geodesics of
``Sigma`` by the induced normal connection.  Seeding ``(x, u)`` as jet
variables and integrating with jet-valued state yields the Taylor expansion
of ``Phi`` at the origin; plain floats give point evaluations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import jets as J
from .geometry import (
    AdaptedFrame,
    GeometryError,
    MetricChart,
    SubmanifoldChart,
    christoffel_from_jet,
    induced_metric_expansion,
)
from .jets import Jet, JetError


class GeodesicError(RuntimeError):
    """Integration failure: step budget exhausted or degenerate metric on the path."""


@dataclass(frozen=True)
class GeodesicSolverConfig:
    """Fixed-step classical RK4 settings.

    Point evaluations use ``steps_per_unit``.  Jets at the chart origin are
    integrated with ``jet_steps`` and ``2 * jet_steps`` and, when
    ``extrapolate`` is set, combined as ``(16 J_2N - J_N) / 15``.  At the
    origin the step error of the jet coefficients is a pure ``h^4`` term, so
    the combination is exact up to rounding.
    """

    method: str = "rk4"
    steps_per_unit: int = 64
    jet_steps: int = 8
    extrapolate: bool = True
    atol: float = 1e-10
    max_steps: int = 200_000

    def __post_init__(self):
        if self.method != "rk4":
            raise ValueError(f"unsupported integrator {self.method!r}")
        if self.steps_per_unit < 8 or self.jet_steps < 8:
            raise ValueError("step counts must be >= 8")
        if self.atol <= 0:
            raise ValueError("atol must be positive")

    def steps_for(self, speed: float) -> int:
        n = self.steps_per_unit * max(1, math.ceil(speed - 1e-12))
        if n > self.max_steps:
            raise GeodesicError(f"step budget exhausted: {n} > {self.max_steps}")
        return n


def _as_jets(*arrays):
    """Promote float arrays to constant order-0 jets sharing one space."""
    if all(isinstance(a, Jet) for a in arrays):
        return arrays
    if any(isinstance(a, Jet) for a in arrays):
        like = next(a for a in arrays if isinstance(a, Jet))
        return tuple(a if isinstance(a, Jet) else Jet.constant(a, like.nvars, like.order) for a in arrays)
    return tuple(Jet.constant(np.asarray(a, float), 1, 0) for a in arrays)


def _rk4(rhs, state: list[Jet], nsteps: int) -> list[Jet]:
    h = 1.0 / nsteps
    for _ in range(nsteps):
        k1 = rhs(state)
        k2 = rhs([y + 0.5 * h * k for y, k in zip(state, k1)])
        k3 = rhs([y + 0.5 * h * k for y, k in zip(state, k2)])
        k4 = rhs([y + h * k for y, k in zip(state, k3)])
        state = [y + (h / 6.0) * (a + 2.0 * b + 2.0 * c + d) for y, a, b, c, d in zip(state, k1, k2, k3, k4)]
    return state


def _speed(v: Jet) -> float:
    return float(np.sqrt(np.sum(v.const ** 2)))


def geodesic_flow(g: MetricChart, z0, v0, cfg: GeodesicSolverConfig | None = None,
                  nsteps: int | None = None, return_velocity: bool = False):
    """Endpoint at parameter 1 of the geodesic with initial point/velocity jets.

    ``z0`` and ``v0`` may be float arrays or vector jets over a common space.
    """
    cfg = cfg or GeodesicSolverConfig()
    real = not isinstance(z0, Jet) and not isinstance(v0, Jet)
    z0, v0 = _as_jets(z0, v0)
    if z0.space is not v0.space:
        raise JetError("point and velocity jets must share a space")
    nsteps = nsteps or cfg.steps_for(_speed(v0))

    def rhs(state):
        z, v = state
        c = z.const
        try:
            Gam = J.compose(g.christoffel_expansion(c, z.order), z, center=c)
        except (JetError, GeometryError) as exc:
            raise GeodesicError(f"metric degenerate along the geodesic near {c}") from exc
        return [v, -J.einsum("kij,i,j->k", Gam, v, v)]

    z, v = _rk4(rhs, [z0, v0], nsteps)
    if real:
        z, v = z.const, v.const
    return (z, v) if return_velocity else z


def richardson_error(g: MetricChart, z0, v0, cfg: GeodesicSolverConfig | None = None) -> float:
    """Step-halving error estimate ``|z_2N - z_N| / 15`` for a real geodesic."""
    cfg = cfg or GeodesicSolverConfig()
    n = cfg.steps_for(float(np.linalg.norm(v0)))
    a = geodesic_flow(g, z0, v0, cfg, nsteps=n)
    b = geodesic_flow(g, z0, v0, cfg, nsteps=2 * n)
    return float(np.max(np.abs(np.asarray(b) - np.asarray(a)))) / 15.0


class _SigmaGeometry:
    """Expansions along Sigma at a parameter point, substituted into parameter jets."""

    def __init__(self, g: MetricChart, sub: SubmanifoldChart):
        self.g = g
        self.sub = sub
        self._cache: dict = {}

    def _expansions(self, c: np.ndarray, q: int):
        key = (c.tobytes(), q)
        hit = self._cache.get(key)
        if hit is None:
            phi = self.sub.expand(c, q + 2)
            p = phi.const
            X = phi.gradient()                                   # (n, k), order q+1
            H = X.gradient()                                     # (n, k, k), order q
            comp = J.Composer(phi.with_order(q + 1), center=p)
            gphi = comp(self.g.expand(p, q + 1))                 # order q+1
            Gam = comp(self.g.christoffel_expansion(p, q))       # order q
            Gbar = christoffel_from_jet(induced_metric_expansion(self.g, self.sub, c, q + 1))
            hit = (phi.with_order(q), X.with_order(q), H, gphi.with_order(q), Gam.with_order(q), Gbar)
            if len(self._cache) > 32:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    def at(self, s: Jet):
        """(phi, X, H, g, Gamma, Gamma-bar) evaluated along the parameter jet ``s``."""
        c = s.const
        exps = self._expansions(c, s.order)
        comp = J.Composer(s, center=c)
        return tuple(comp(e) for e in exps)


def _path_system(geo: _SigmaGeometry, transport: bool):
    def rhs(state):
        s, sd = state[0], state[1]
        phi, X, H, gm, Gam, Gbar = geo.at(s)
        sdd = -J.einsum("cab,a,b->c", Gbar, sd, sd)
        if not transport:
            return [sd, sdd]
        nu = state[2]
        phidot = J.einsum("ia,a->i", X, sd)
        # nabla_{phidot} nu must be tangential: add the Weingarten correction
        nabla_X = J.einsum("iab,b->ia", H, sd) + J.einsum("ijk,j,ka->ia", Gam, phidot, X)
        Gmat = J.einsum("ia,ij,jb->ab", X, gm, X)
        t = -J.einsum("ij,ir,ja->ar", gm, nu, nabla_X)
        corr = J.einsum("ia,ab,br->ir", X, J.inv(Gmat), t)
        nudot = -J.einsum("ijk,j,kr->ir", Gam, phidot, nu) + corr
        return [sd, sdd, nudot]
    return rhs


def _seed_frame_velocity(frame: AdaptedFrame, x: Jet) -> Jet:
    return J.einsum("ab,b->a", frame.param_tan, x)


def intrinsic_exp(g: MetricChart, sub: SubmanifoldChart, frame: AdaptedFrame, x,
                  cfg: GeodesicSolverConfig | None = None):
    """Parameter point ``s(x)`` with ``phi(s(x)) = exp^{i*g}_p(x^a e_a)``."""
    cfg = cfg or GeodesicSolverConfig()
    real = not isinstance(x, Jet)
    (x,) = _as_jets(np.asarray(x, float) if real else x)
    s0 = Jet.constant(sub.base, x.nvars, x.order)
    v0 = _seed_frame_velocity(frame, x)
    geo = _SigmaGeometry(g, sub)
    try:
        s, _ = _rk4(_path_system(geo, False), [s0, v0], cfg.steps_for(_speed(x)))
    except (JetError, GeometryError) as exc:
        raise GeodesicError("induced metric degenerate along the radial geodesic") from exc
    return s.const if real else s


def normal_transport(g: MetricChart, sub: SubmanifoldChart, frame: AdaptedFrame, x,
                     cfg: GeodesicSolverConfig | None = None, return_path: bool = False):
    """Normal frame transported along ``t -> exp(t x^a e_a)`` by the normal connection.

    Returns the ``(n, n-k)`` frame at ``t = 1`` (and the parameter endpoint if
    ``return_path``).
    """
    cfg = cfg or GeodesicSolverConfig()
    real = not isinstance(x, Jet)
    (x,) = _as_jets(np.asarray(x, float) if real else x)
    s0 = Jet.constant(sub.base, x.nvars, x.order)
    v0 = _seed_frame_velocity(frame, x)
    nu0 = Jet.constant(frame.e_nor, x.nvars, x.order)
    geo = _SigmaGeometry(g, sub)
    try:
        s, _, nu = _rk4(_path_system(geo, True), [s0, v0, nu0], cfg.steps_for(_speed(x)))
    except (JetError, GeometryError) as exc:
        raise GeodesicError("degenerate geometry along the radial geodesic") from exc
    if real:
        s, nu = s.const, nu.const
    return (nu, s) if return_path else nu


def projected_normal_frame(g: MetricChart, sub: SubmanifoldChart, frame: AdaptedFrame, s) -> Jet:
    """Normal frame from Gram-Schmidt of coordinate directions projected onto N Sigma.

    Rotated by a constant element so that it equals ``frame.e_nor`` at the base
    point.  It is a genuine orthonormal normal frame but is not parallel; it
    serves as a negative control for the transport condition.
    """
    (s,) = _as_jets(s)
    geo = _SigmaGeometry(g, sub)
    n, k = sub.n, sub.k
    signs = np.diag(frame.h)[k:]

    def build(sj: Jet):
        phi, X, H, gm, Gam, Gbar = geo.at(sj)
        Ginv = J.inv(J.einsum("ia,ij,jb->ab", X, gm, X))
        PT = J.einsum("ia,ab,jb,jp->ip", X, Ginv, X, gm)
        PN = Jet.constant(np.eye(n), sj.nvars, sj.order) - PT
        cands = [J.einsum("ij,j->i", PN, np.eye(n)[i]) for i in range(n)]
        out = []
        for sign in signs:
            chosen = None
            for idx, v in enumerate(cands):
                for b in out:
                    v = v - J.einsum("i,ij,j->", v, gm, b) * sign_of(b, gm) * b
                cands[idx] = v
                nv = J.einsum("i,ij,j->", v, gm, v)
                if chosen is None and abs(float(nv.const)) > 1e-8 and np.sign(nv.const) == sign:
                    chosen = idx
            if chosen is None:
                raise GeometryError("projected normal frame is degenerate")
            v = cands.pop(chosen)
            nv = J.einsum("i,ij,j->", v, gm, v)
            out.append(v / J.sqrt(sign * nv))
        return J.stack(out, axis=1)

    def sign_of(b, gm):
        return float(np.sign(J.einsum("i,ij,j->", b, gm, b).const))

    B0 = build(Jet.constant(sub.base, 1, 0)).const
    gp = g.at(frame.point)
    rot = np.diag(signs) @ B0.T @ gp @ frame.e_nor
    return J.einsum("ir,rq->iq", build(s), rot)


class FermiChart:
    """Submanifold geodesic normal coordinates ``(x, u)`` about the base point.

    ``normal_frame="parallel"`` is the genuine construction; ``"projected"``
    replaces normal transport with :func:`projected_normal_frame`.
    """

    def __init__(self, metric: MetricChart, sub: SubmanifoldChart, frame: AdaptedFrame,
                 solver: GeodesicSolverConfig | None = None, order: int = 4,
                 radius: float = 0.5, normal_frame: str = "parallel"):
        if normal_frame not in ("parallel", "projected"):
            raise ValueError(f"unknown normal frame mode {normal_frame!r}")
        self.metric = metric
        self.sub = sub
        self.frame = frame
        self.solver = solver or GeodesicSolverConfig()
        self.order = order
        self.radius = radius
        self.normal_frame = normal_frame
        self._jets: dict[int, Jet] = {}
        self.jet_error: dict[int, float] = {}

    @property
    def n(self) -> int:
        return self.sub.n

    @property
    def k(self) -> int:
        return self.sub.k

    def __call__(self, x, u, nsteps: int | None = None) -> np.ndarray:
        x = np.asarray(x, float)
        u = np.asarray(u, float)
        if np.sqrt(np.sum(x ** 2) + np.sum(u ** 2)) > self.radius + 1e-12:
            raise ValueError(f"point outside the configured chart radius {self.radius}")
        return fermi_map(self, x, u, nsteps=nsteps)

    def map_jet(self, order: int) -> Jet:
        """Taylor expansion of ``Phi`` at the origin in the ``n`` variables ``(x, u)``."""
        hit = self._jets.get(order)
        if hit is None:
            z = Jet.seed(np.zeros(self.n), order)
            x, u = z[: self.k], z[self.k:]
            n = self.solver.jet_steps
            coarse = fermi_map(self, x, u, nsteps=n)
            fine = fermi_map(self, x, u, nsteps=2 * n)
            diff = (fine - coarse).coeffs
            self.jet_error[order] = float(np.max(np.abs(diff))) / 15.0
            hit = Jet(fine.space, fine.coeffs + diff / 15.0) if self.solver.extrapolate else fine
            self._jets[order] = hit
        return hit

    def metric_jet(self, order: int) -> Jet:
        return fermi_metric_jet(self, order)

    def with_frame_action(self, h_tan: np.ndarray, h_nor: np.ndarray) -> "FermiChart":
        """Chart built from the frames ``e_tan h_tan`` and ``e_nor h_nor``."""
        f = self.frame
        frame = AdaptedFrame(f.e_tan @ h_tan, f.e_nor @ h_nor, f.h, f.point, f.param_tan @ h_tan)
        return FermiChart(self.metric, self.sub, frame, self.solver, self.order, self.radius, self.normal_frame)


def fermi_map(chart: FermiChart, x, u, nsteps: int | None = None):
    """``Phi(x, u)`` for float arrays (a point) or jets (an expansion)."""
    real = not isinstance(x, Jet) and not isinstance(u, Jet)
    x, u = _as_jets(np.asarray(x, float) if not isinstance(x, Jet) else x,
                    np.asarray(u, float) if not isinstance(u, Jet) else u)
    cfg = chart.solver
    if nsteps is not None:
        cfg = replace(cfg, steps_per_unit=nsteps, max_steps=max(cfg.max_steps, nsteps))
    g, sub, frame = chart.metric, chart.sub, chart.frame
    if chart.normal_frame == "parallel":
        nu, s = normal_transport(g, sub, frame, x, cfg, return_path=True)
    else:
        s = intrinsic_exp(g, sub, frame, x, cfg)
        nu = projected_normal_frame(g, sub, frame, s)
    q = sub.expand(s.const, s.order)
    base = J.compose(q, s, center=s.const)
    v0 = J.einsum("ir,r->i", nu, u)
    z = geodesic_flow(g, base, v0, cfg)
    return z.const if real else z


def fermi_metric_jet(chart: FermiChart, order: int) -> Jet:
    """Metric components in the chart, ``g~_ab = g_ij(Phi) d_a Phi^i d_b Phi^j``, to ``order``."""
    Phi = chart.map_jet(order + 1)
    D = Phi.gradient()                                         # (n, n) order `order`
    P = Phi.with_order(order)
    gPhi = J.compose(chart.metric.expand(P.const, order), P, center=P.const)
    return J.einsum("ia,ij,jb->ab", D, gPhi, D)
