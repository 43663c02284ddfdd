"""Chart-level pseudo-Riemannian geometry on jets.

Curvature convention: ``R^i_{jkl} = d_k G^i_{lj} - d_l G^i_{kj} + G^i_{km} G^m_{lj}
- G^i_{lm} G^m_{kj}`` lowered on the first slot, so that a space of constant
sectional curvature ``K`` has ``R_{ijkl} = K (g_ik g_jl - g_il g_jk)``.  With this
sign the normal-coordinate expansion ``g_ab = h_ab + (1/3) R_{acdb} x^c x^d``
holds, which is the calibration the coordinate tests rely on.

Second fundamental form: ``L(X, Y) = (nabla_X Y)^perp``, stored with its
normal slot lowered, ``L_{ab c'} = g(L(X_a, X_b), e_c')``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import jets as J
from .jets import Jet

TAN, NOR, AMB = "tangential", "normal", "ambient"

NONDEGENERACY_TOL = 1e-10


class GeometryError(ValueError):
    """Degenerate metric, bad submanifold data or an insufficient jet order."""


def signature_of(mat: np.ndarray, tol: float = 1e-12) -> tuple[int, int]:
    w = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    scale = max(1.0, float(np.max(np.abs(w))))
    if np.any(np.abs(w) < tol * scale):
        raise GeometryError("degenerate quadratic form")
    return int(np.sum(w > 0)), int(np.sum(w < 0))


class MetricChart:
    """Metric components ``g_ij(z)`` given by a callable that accepts jets.

    ``components(z)`` receives a length-``n`` vector jet and returns an
    ``n x n`` nested list whose entries are jets or plain numbers.  Only the
    operations in :mod:`fermijet.jets` may be used on the coordinates.
    """

    def __init__(self, n: int, signature: tuple[int, int], components: Callable, name: str = ""):
        if sum(signature) != n:
            raise GeometryError(f"signature {signature} does not match dimension {n}")
        self.n = n
        self.signature = tuple(signature)
        self.components = components
        self.name = name
        self._cache: dict = {}

    def __repr__(self):
        return f"MetricChart({self.name or 'anonymous'}, n={self.n}, signature={self.signature})"

    def evaluate(self, z: Jet) -> Jet:
        g = J.from_nested(self.components(z), z.nvars, z.order)
        if g.shape != (self.n, self.n):
            raise GeometryError(f"metric callable returned shape {g.shape}, expected {(self.n, self.n)}")
        if np.max(np.abs(g.coeffs - g.coeffs.swapaxes(0, 1))) > 1e-12 * max(1.0, g.max_abs()):
            raise GeometryError("metric components are not symmetric")
        return g

    def at(self, point) -> np.ndarray:
        return self.expand(point, 0).const

    def expand(self, z0, order: int) -> Jet:
        """Taylor expansion ``g(z0 + w)`` in ``n`` fresh variables ``w``."""
        z0 = np.asarray(z0, dtype=float)
        key = ("g", z0.tobytes(), order)
        hit = self._cache.get(key)
        if hit is None:
            hit = self.evaluate(Jet.seed(z0, order))
            if len(self._cache) > 64:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    def check_signature(self, point) -> None:
        sig = signature_of(self.at(point))
        if sig != self.signature:
            raise GeometryError(f"metric signature {sig} at {point} differs from declared {self.signature}")

    def christoffel_expansion(self, z0, order: int) -> Jet:
        z0 = np.asarray(z0, dtype=float)
        key = ("G", z0.tobytes(), order)
        hit = self._cache.get(key)
        if hit is None:
            hit = christoffel_from_jet(self.expand(z0, order + 1))
            self._cache[key] = hit
        return hit


class SubmanifoldChart:
    """Parametrised embedding ``phi: R^k -> R^n`` with a base parameter point."""

    def __init__(self, k: int, n: int, map: Callable, base: Sequence[float], name: str = ""):
        if not 1 <= k <= n - 1:
            raise GeometryError(f"submanifold dimension must satisfy 1 <= k <= n-1 (got k={k}, n={n})")
        self.k = k
        self.n = n
        self.map = map
        self.base = np.asarray(base, dtype=float)
        if self.base.shape != (k,):
            raise GeometryError(f"base point must have {k} parameters")
        self.name = name
        self._cache: dict = {}

    def __repr__(self):
        return f"SubmanifoldChart({self.name or 'anonymous'}, k={self.k}, n={self.n})"

    def evaluate(self, s: Jet) -> Jet:
        out = J.from_nested(list(self.map(s)), s.nvars, s.order)
        if out.shape != (self.n,):
            raise GeometryError(f"embedding returned shape {out.shape}, expected {(self.n,)}")
        return out

    def expand(self, s0, order: int) -> Jet:
        s0 = np.asarray(s0, dtype=float)
        key = (s0.tobytes(), order)
        hit = self._cache.get(key)
        if hit is None:
            hit = self.evaluate(Jet.seed(s0, order))
            if len(self._cache) > 64:
                self._cache.clear()
            self._cache[key] = hit
        return hit

    def point(self, s=None) -> np.ndarray:
        return self.expand(self.base if s is None else s, 0).const

    def jacobian(self, s=None) -> np.ndarray:
        """``d phi^i / d s^a`` at ``s`` (defaults to the base point), shape (n, k)."""
        e = self.expand(self.base if s is None else s, 1)
        return e.gradient().const


@dataclass
class TensorAtPoint:
    """Numeric all-covariant tensor with per-slot labels."""

    components: np.ndarray
    slot_labels: tuple[str, ...]
    symmetries: tuple = ()
    name: str = ""

    def __post_init__(self):
        self.components = np.asarray(self.components, dtype=float)
        if self.components.ndim != len(self.slot_labels):
            raise GeometryError("one label per slot is required")
        scale = max(1.0, float(np.max(np.abs(self.components)))) if self.components.size else 1.0
        for perm, sign in self.symmetries:
            dev = np.max(np.abs(self.components - sign * self.components.transpose(perm)))
            if dev > 1e-10 * scale:
                raise GeometryError(f"{self.name}: symmetry {perm} violated by {dev:.3g}")

    @property
    def rank(self) -> int:
        return self.components.ndim

    @property
    def slot_dims(self) -> tuple[int, ...]:
        return self.components.shape


RIEMANN_SYMMETRIES = (((1, 0, 2, 3), -1), ((0, 1, 3, 2), -1), ((2, 3, 0, 1), 1))


@dataclass
class AdaptedFrame:
    """Frames for ``T_p Sigma`` and ``N_p Sigma`` with ``g(e, e) = h``."""

    e_tan: np.ndarray          # (n, k) ambient components
    e_nor: np.ndarray          # (n, n-k)
    h: np.ndarray              # (n, n) reference form, tangential block first
    point: np.ndarray          # ambient point p
    param_tan: np.ndarray = field(default=None)  # (k, k) parameter components of e_tan

    @property
    def k(self) -> int:
        return self.e_tan.shape[1]

    @property
    def n(self) -> int:
        return self.e_tan.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        """Columns ``(e_1..e_k, e_{k+1}..e_n)``."""
        return np.hstack([self.e_tan, self.e_nor])

    def gram_error(self, gmat: np.ndarray) -> float:
        E = self.matrix
        return float(np.max(np.abs(E.T @ gmat @ E - self.h)))


def reference_form(type_: Sequence[Sequence[int]]) -> np.ndarray:
    """Diagonal reference form for type ``((p, q), (p', q'))``: +1s before -1s per block."""
    (p, q), (pp, qq) = type_
    return np.diag([1.0] * p + [-1.0] * q + [1.0] * pp + [-1.0] * qq)


# -- connection and curvature on jets ------------------------------------

def christoffel_from_jet(G: Jet) -> Jet:
    """``Gamma^k_{ij}`` (array index ``[k, i, j]``) from a metric jet of order q >= 1.

    The result has order q - 1 and is expanded about the same point as ``G``.
    """
    if G.order < 1:
        raise GeometryError("Christoffel symbols need a metric jet of order >= 1")
    dG = G.gradient()                       # [i, j, l] = d_l g_ij
    Ginv = J.inv(G.with_order(G.order - 1))
    return J.einsum("kl,lij->kij", Ginv, _first_kind(dG))


def _first_kind(dG: Jet) -> Jet:
    """``[l, i, j] -> 1/2 (d_i g_jl + d_j g_il - d_l g_ij)`` with ``dG[a, b, c] = d_c g_ab``."""
    c = dG.coeffs
    # d_i g_jl = dG[j, l, i]; as array over (l, i, j): c[j, l, i] -> transpose to (l, i, j)
    t1 = c.transpose(1, 2, 0, 3)            # [l, i, j] = c[j, l, i]
    t2 = c.transpose(1, 0, 2, 3)            # [l, i, j] = c[i, l, j]
    t3 = c.transpose(2, 0, 1, 3)            # [l, i, j] = c[i, j, l]
    return Jet(dG.space, 0.5 * (t1 + t2 - t3))


def christoffel(g: MetricChart, z0, order: int) -> Jet:
    """Christoffel symbols as jets of the given order about ``z0``."""
    return g.christoffel_expansion(z0, order)


def christoffel_at(g: MetricChart, z: Jet) -> Jet:
    """Christoffel symbols evaluated along a point jet (any constant part)."""
    c = z.const
    return J.compose(g.christoffel_expansion(c, z.order), z, center=c)


def metric_at(g: MetricChart, z: Jet) -> Jet:
    c = z.const
    return J.compose(g.expand(c, z.order), z, center=c)


def riemann_from_jet(G: Jet) -> Jet:
    """All-covariant ``R_{ijkl}`` as a jet of order q - 2 from a metric jet of order q."""
    if G.order < 2:
        raise GeometryError("curvature needs a metric jet of order >= 2")
    Gam = christoffel_from_jet(G)                     # order q-1
    dGam = Gam.gradient()                             # [i, j, k, l] = d_l Gam^i_jk, order q-2
    Gam2 = Gam.with_order(G.order - 2)
    c = dGam.coeffs
    # [i,j,k,l] <- c[i,l,j,k] = d_k Gam^i_lj  and  c[i,k,j,l] = d_l Gam^i_kj
    term_d = Jet(dGam.space, c.transpose(0, 2, 3, 1, 4) - c.transpose(0, 2, 1, 3, 4))
    quad = J.einsum("ikm,mlj->ijkl", Gam2, Gam2) - J.einsum("ilm,mkj->ijkl", Gam2, Gam2)
    Rup = term_d + quad
    return J.einsum("im,mjkl->ijkl", G.with_order(G.order - 2), Rup)


def covariant_derivative(T: Jet, Gam: Jet) -> Jet:
    """``(nabla T)_{i1..ir; l}`` for an all-covariant tensor jet; order drops by one."""
    dT = T.gradient()                                 # trailing axis = l
    Gam = Gam.with_order(dT.order)
    Tl = T.with_order(dT.order)
    r = T.ndim
    letters = "abcdefgh"[:r]
    out = dT
    for s in range(r):
        src = letters[:s] + "p" + letters[s + 1:]
        out = out - J.einsum(f"pzq,{src}->{letters}z".replace("q", letters[s]), Gam, Tl)
    return out


def riemann_expansion(g: MetricChart, z0, order: int) -> Jet:
    return riemann_from_jet(g.expand(z0, order + 2))


def riemann(g: MetricChart, z0, m: int) -> list[TensorAtPoint]:
    """``[Rm, nabla Rm, ..., nabla^m Rm]`` at ``z0``, ambient coordinate components."""
    if m < 0:
        raise GeometryError("m must be >= 0")
    R = riemann_expansion(g, z0, m)
    Gam = g.christoffel_expansion(z0, m)
    out = [TensorAtPoint(R.const, (AMB,) * 4, RIEMANN_SYMMETRIES, "Rm")]
    T = R
    for j in range(1, m + 1):
        T = covariant_derivative(T, Gam)
        out.append(TensorAtPoint(T.const, (AMB,) * (4 + j), name=f"nabla^{j} Rm"))
    return out


def to_frame(T: TensorAtPoint | np.ndarray, frames: Sequence[np.ndarray], labels=None) -> TensorAtPoint:
    """Contract every slot of an ambient tensor with a frame matrix (columns)."""
    comps = T.components if isinstance(T, TensorAtPoint) else np.asarray(T)
    if len(frames) == 1:
        frames = list(frames) * comps.ndim
    out = comps
    for axis, E in enumerate(frames):
        out = np.moveaxis(np.tensordot(out, E, axes=([axis], [0])), -1, axis)
    if labels is None:
        labels = (AMB,) * comps.ndim
    return TensorAtPoint(out, tuple(labels), name=getattr(T, "name", ""))


# -- submanifold data ---------------------------------------------------

def induced_metric_expansion(g: MetricChart, sub: SubmanifoldChart, s0, order: int) -> Jet:
    """``(i*g)_{ab}(s0 + w)`` as a k x k jet of the given order."""
    phi = sub.expand(s0, order + 1)
    X = phi.gradient().with_order(order)                       # (n, k)
    gphi = J.compose(g.expand(phi.const, order), phi.with_order(order), center=phi.const)
    return J.einsum("ia,ij,jb->ab", X, gphi, X)


def induced_metric(g: MetricChart, sub: SubmanifoldChart, s0, order: int) -> Jet:
    G = induced_metric_expansion(g, sub, s0, order)
    G0 = G.const
    scale = max(1.0, float(np.max(np.abs(G0)))) ** G0.shape[0]
    if abs(np.linalg.det(G0)) < NONDEGENERACY_TOL * scale:
        raise GeometryError("degenerate pullback metric")
    return G


def _gram_schmidt(vectors: list[np.ndarray], signs: Sequence[float], gmat: np.ndarray,
                  basis: list[np.ndarray], orient: bool,
                  align: Sequence[np.ndarray] | None = None) -> list[np.ndarray]:
    """Signature-adapted Gram-Schmidt; ``basis`` holds already-chosen vectors."""
    out: list[np.ndarray] = []
    pool = [v.astype(float).copy() for v in vectors]
    scale = max(1.0, float(np.max(np.abs(gmat))))

    def reduce(v):
        for b in basis + out:
            v = v - (v @ gmat @ b) / (b @ gmat @ b) * b
        return v

    for sign in signs:
        pool = [reduce(v) for v in pool]
        pick = None
        for idx, v in enumerate(pool):
            nv = v @ gmat @ v
            if abs(nv) > NONDEGENERACY_TOL * scale * max(1.0, v @ v) and np.sign(nv) == sign:
                pick = (idx, v, nv)
                break
        if pick is None:
            # reordering attempt: combinations of two remaining candidates
            for a in range(len(pool)):
                for b in range(a + 1, len(pool)):
                    for w in (pool[a] + pool[b], pool[a] - pool[b]):
                        nw = w @ gmat @ w
                        if abs(nw) > NONDEGENERACY_TOL * scale * max(1.0, w @ w) and np.sign(nw) == sign:
                            pick = (a, w, nw)
                            break
                    if pick:
                        break
                if pick:
                    break
        if pick is None:
            raise GeometryError(f"cannot find a vector of norm sign {sign:+.0f}: signature mismatch or null directions")
        idx, v, nv = pick
        pool.pop(idx)
        e = v / np.sqrt(abs(nv))
        if align is not None:
            if e @ align[len(out)] < 0:
                e = -e
        elif orient:
            lead = next((x for x in e if abs(x) > 1e-12), 1.0)
            if lead < 0:
                e = -e
        out.append(e)
    return out


def adapted_frame(g: MetricChart, sub: SubmanifoldChart, h: np.ndarray,
                  reference: AdaptedFrame | None = None) -> AdaptedFrame:
    """Frames at the base point: tangential vectors from the parametrisation order,
    normal vectors from ambient coordinate directions (leading component positive).

    With ``reference``, the normal candidates are the reference normals and each
    normal is oriented to agree with its reference vector, so frames of a smooth
    family vary smoothly.
    """
    n, k = sub.n, sub.k
    h = np.asarray(h, dtype=float)
    if h.shape != (n, n):
        raise GeometryError(f"reference form must be {n} x {n}")
    p = sub.point()
    gmat = g.at(p)
    D = sub.jacobian()
    if np.linalg.matrix_rank(D, tol=1e-10) < k:
        raise GeometryError("embedding Jacobian is rank deficient at the base point")
    G0 = D.T @ gmat @ D
    scale = max(1.0, float(np.max(np.abs(G0)))) ** k
    if abs(np.linalg.det(G0)) < NONDEGENERACY_TOL * scale:
        raise GeometryError("degenerate pullback metric at the base point")
    h_tan, h_nor = np.diag(h)[:k], np.diag(h)[k:]
    if signature_of(G0) != (int(np.sum(h_tan > 0)), int(np.sum(h_tan < 0))):
        raise GeometryError("tangential signature differs from the declared type")
    tan = _gram_schmidt([D[:, a] for a in range(k)], h_tan, gmat, [], orient=False)
    if reference is None:
        nor = _gram_schmidt([np.eye(n)[i] for i in range(n)], h_nor, gmat, tan, orient=True)
    else:
        ref = [reference.e_nor[:, r] for r in range(n - k)]
        nor = _gram_schmidt(ref + [np.eye(n)[i] for i in range(n)], h_nor, gmat, tan,
                            orient=True, align=ref)
    e_tan = np.column_stack(tan)
    e_nor = np.column_stack(nor)
    param_tan = np.linalg.lstsq(D, e_tan, rcond=None)[0]
    frame = AdaptedFrame(e_tan, e_nor, h, p, param_tan)
    if frame.gram_error(gmat) > 1e-12 * max(1.0, float(np.max(np.abs(gmat)))):
        raise GeometryError("adapted frame failed the Gram check")
    return frame


class _SurfaceData:
    """Jets along Sigma in the parameter variables, centred at the base point."""

    def __init__(self, g: MetricChart, sub: SubmanifoldChart, s0, order: int):
        self.order = order
        phi = sub.expand(s0, order + 2)
        p = phi.const
        self.X = phi.gradient().with_order(order + 1)                        # (n, k)
        self.H = self.X.gradient().with_order(order)                         # (n, k, k)
        self.g = J.compose(g.expand(p, order + 1), phi.with_order(order + 1), center=p)
        self.Gam = J.compose(g.christoffel_expansion(p, order), phi.with_order(order), center=p)
        Xo = self.X.with_order(order)
        go = self.g.with_order(order)
        self.Ginv = J.inv(J.einsum("ia,ij,jb->ab", Xo, go, Xo))
        self.coframe = J.einsum("ab,jb,jp->ap", self.Ginv, Xo, go)          # theta^a_p
        self.PT = J.einsum("ia,ap->ip", Xo, self.coframe)                    # P_T^i_p
        n = self.PT.shape[0]
        self.PN = Jet.constant(np.eye(n), self.PT.nvars, order) - self.PT
        nablaXX = self.H + J.einsum("ijk,ja,kb->iab", self.Gam, Xo, Xo)
        Lvec = J.einsum("ij,jab->iab", self.PN, nablaXX)                     # normal vector L(X_a, X_b)
        Llow = J.einsum("ij,jab->abi", go, Lvec)                             # L_{ab i}
        self.L = J.einsum("ap,bq,abi->pqi", self.coframe, self.coframe, Llow)


def _project(T: Jet, labels: Sequence[str], PT: Jet, PN: Jet) -> Jet:
    letters = "abcdefgh"[: T.ndim]
    out = T
    for s, lab in enumerate(labels):
        P = (PT if lab == TAN else PN).with_order(out.order)
        src = letters[:s] + "z" + letters[s + 1:]
        out = J.einsum(f"{src},z{letters[s]}->{letters}", out, P)
    return out


def _induced_derivative(T: Jet, labels, data: _SurfaceData) -> Jet:
    """Induced covariant derivative along Sigma; appends a tangential slot."""
    q = T.order - 1
    dT = T.gradient()                                  # d/ds^c, trailing axis c
    X = data.X.with_order(q)
    Gam = data.Gam.with_order(q)
    Tq = T.with_order(q)
    r = T.ndim
    letters = "abcdefgh"[:r]
    out = dT
    for s in range(r):
        src = letters[:s] + "p" + letters[s + 1:]
        out = out - J.einsum(f"pyw,yz,{src}->{letters}z".replace("w", letters[s]), Gam, X, Tq)
    out = J.einsum(f"{letters}z,zq->{letters}q", out, data.coframe.with_order(q))
    return _project(out, tuple(labels) + (TAN,), data.PT, data.PN)


def second_fundamental_form(g: MetricChart, sub: SubmanifoldChart, frame: AdaptedFrame, m: int) -> list[TensorAtPoint]:
    """``[L, nabla-bar L, ..., nabla-bar^m L]`` in frame components at the base point.

    Slots: (tangential, tangential, normal, then m tangential derivative slots).
    """
    if m < 0:
        raise GeometryError("m must be >= 0")
    data = _SurfaceData(g, sub, sub.base, m)
    labels = [TAN, TAN, NOR]
    T = data.L
    out = []
    for j in range(m + 1):
        if j:
            T = _induced_derivative(T, labels, data)
            labels.append(TAN)
        frames = [frame.e_tan if lab == TAN else frame.e_nor for lab in labels]
        sym = (((1, 0) + tuple(range(2, len(labels))), 1),)
        out.append(to_frame(T.const, frames, labels))
        out[-1] = TensorAtPoint(out[-1].components, tuple(labels), sym if j == 0 else (), f"nablabar^{j} L")
    return out


def intrinsic_curvature(g: MetricChart, sub: SubmanifoldChart, frame: AdaptedFrame) -> np.ndarray:
    """``R-bar_{abcd}`` of the induced metric in tangential frame components."""
    G = induced_metric(g, sub, sub.base, 2)
    Rbar = riemann_from_jet(G).const
    return to_frame(Rbar, [frame.param_tan]).components


def gauss_rhs(R_frame: np.ndarray, L: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Projected ambient curvature plus ``h^{a'b'} (L_ac a' L_bd b' - L_ad a' L_bc b')``."""
    k = L.shape[0]
    hn_inv = np.linalg.inv(h[k:, k:])
    quad = np.einsum("acx,bdy,xy->abcd", L, L, hn_inv) - np.einsum("adx,bcy,xy->abcd", L, L, hn_inv)
    return R_frame[:k, :k, :k, :k] + quad


def gauss_residual(g: MetricChart, sub: SubmanifoldChart, frame: AdaptedFrame) -> float:
    Rbar = intrinsic_curvature(g, sub, frame)
    Rm = riemann(g, frame.point, 0)[0]
    R_frame = to_frame(Rm, [frame.matrix]).components
    L = second_fundamental_form(g, sub, frame, 0)[0].components
    return float(np.max(np.abs(Rbar - gauss_rhs(R_frame, L, frame.h))))
