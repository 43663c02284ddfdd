"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` is an array of truncated Taylor polynomials that share one
:class:`JetSpace` (variable count and truncation order).  Coefficients are
stored densely in graded order with the Taylor convention: the stored value
``c_K`` of multi-index ``K`` satisfies ``d^K f = K! * c_K``.

Every arithmetic operation works elementwise over the leading array shape,
so a whole metric matrix or Christoffel array is one ``Jet``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np


class JetError(ValueError):
    """Raised for shape, order or domain violations in jet arithmetic."""


@dataclass(frozen=True)
class JetConfig:
    nvars: int
    order: int
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.nvars < 1:
            raise JetError("nvars must be >= 1")
        if self.order < 0:
            raise JetError("order must be >= 0")
        if self.names is not None and len(self.names) != self.nvars:
            raise JetError("one name per variable is required")

    @property
    def space(self) -> "JetSpace":
        return JetSpace.get(self.nvars, self.order)


def multi_indices(nvars: int, order: int) -> list[tuple[int, ...]]:
    """All exponent tuples of total degree <= order, graded then lex-descending."""
    out = []
    for deg in range(order + 1):
        for combo in itertools.combinations_with_replacement(range(nvars), deg):
            exps = [0] * nvars
            for v in combo:
                exps[v] += 1
            out.append(tuple(exps))
    return out


class JetSpace:
    """Index tables for jets with ``nvars`` variables truncated at ``order``."""

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        self.exps_list = multi_indices(nvars, order)
        self.exps = np.array(self.exps_list, dtype=np.int64).reshape(-1, nvars)
        self.size = len(self.exps_list)
        self.index = {k: i for i, k in enumerate(self.exps_list)}
        self.degree = self.exps.sum(axis=1)
        self.factorial = np.array(
            [math.prod(math.factorial(e) for e in k) for k in self.exps_list], dtype=float
        )

        # Cauchy product: every pair (i, j) whose degrees fit, reduced by a
        # 0/1 matrix onto the destination index.
        pi, pj, pk = [], [], []
        for i, ki in enumerate(self.exps_list):
            di = self.degree[i]
            for j, kj in enumerate(self.exps_list):
                if di + self.degree[j] > order:
                    continue
                pi.append(i)
                pj.append(j)
                pk.append(self.index[tuple(a + b for a, b in zip(ki, kj))])
        order_k = np.argsort(np.array(pk), kind="stable")
        self.pair_i = np.array(pi, dtype=np.int64)[order_k]
        self.pair_j = np.array(pj, dtype=np.int64)[order_k]
        pk_sorted = np.array(pk, dtype=np.int64)[order_k]
        # every destination has at least the pair (k, 0), so no segment is empty
        self.segments = np.searchsorted(pk_sorted, np.arange(self.size))

        # Monomial recipe: each nonconstant index = parent * variable.
        self.parent = np.zeros(self.size, dtype=np.int64)
        self.parent_var = np.zeros(self.size, dtype=np.int64)
        for i, k in enumerate(self.exps_list):
            if self.degree[i] == 0:
                continue
            v = next(idx for idx, e in enumerate(k) if e > 0)
            p = list(k)
            p[v] -= 1
            self.parent[i] = self.index[tuple(p)]
            self.parent_var[i] = v

    def reduce(self, prod: np.ndarray) -> np.ndarray:
        """Sum pair products (trailing axis) onto their destination coefficients."""
        return np.add.reduceat(prod, self.segments, axis=-1)

    @staticmethod
    @lru_cache(maxsize=None)

    def get(nvars: int, order: int) -> "JetSpace":
        return JetSpace(nvars, order)

    def __repr__(self):
        return f"JetSpace(nvars={self.nvars}, order={self.order})"

    @lru_cache(maxsize=None)
    def deriv_table(self, var: int):
        """(src, dst, factor) mapping for d/dz_var into the order-1 space."""
        lower = JetSpace.get(self.nvars, self.order - 1)
        src, dst, fac = [], [], []
        for i, k in enumerate(self.exps_list):
            if k[var] == 0 or self.degree[i] == 0:
                continue
            p = list(k)
            p[var] -= 1
            src.append(i)
            dst.append(lower.index[tuple(p)])
            fac.append(float(k[var]))
        return np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), np.array(fac)

    @lru_cache(maxsize=None)
    def reorder_table(self, order: int):
        """Indices mapping coefficients of this space into the space of another order."""
        other = JetSpace.get(self.nvars, order)
        common = min(order, self.order)
        src = [self.index[k] for k in other.exps_list[: JetSpace.get(self.nvars, common).size]]
        return np.array(src, dtype=np.int64), other


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


class Jet:
    """Array of truncated Taylor polynomials.

    ``coeffs`` has shape ``shape + (space.size,)``.  Jets are treated as
    immutable; every operation returns a new object.
    """

    __slots__ = ("space", "coeffs")
    __array_priority__ = 100

    def __init__(self, space: JetSpace, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim == 0 or coeffs.shape[-1] != space.size:
            raise JetError(f"coefficient array last axis must have length {space.size}")
        self.space = space
        self.coeffs = coeffs

    # -- construction ---------------------------------------------------
    @classmethod
    def constant(cls, value, nvars: int, order: int) -> "Jet":
        space = JetSpace.get(nvars, order)
        value = _as_array(value)
        c = np.zeros(value.shape + (space.size,))
        c[..., 0] = value
        return cls(space, c)

    @classmethod
    def variable(cls, index: int, value: float, nvars: int, order: int) -> "Jet":
        if not 0 <= index < nvars:
            raise JetError(f"variable index {index} out of range for {nvars} variables")
        space = JetSpace.get(nvars, order)
        c = np.zeros(space.size)
        c[0] = value
        if order >= 1:
            unit = [0] * nvars
            unit[index] = 1
            c[space.index[tuple(unit)]] = 1.0
        return cls(space, c)

    @classmethod
    def seed(cls, point, order: int) -> "Jet":
        """Vector jet ``point + w`` in ``len(point)`` fresh variables."""
        point = np.asarray(point, dtype=float).ravel()
        n = point.size
        return stack([cls.variable(i, point[i], n, order) for i in range(n)])

    # -- basic properties -----------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.coeffs.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.coeffs.ndim - 1

    @property
    def nvars(self) -> int:
        return self.space.nvars

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def const(self) -> np.ndarray:
        return self.coeffs[..., 0]

    def __len__(self):
        return self.shape[0]

    def __repr__(self):
        return f"Jet(shape={self.shape}, nvars={self.nvars}, order={self.order})"

    def __getitem__(self, key) -> "Jet":
        if not isinstance(key, tuple):
            key = (key,)
        return Jet(self.space, self.coeffs[key + (slice(None),)])

    def __iter__(self):
        for i in range(self.shape[0]):
            yield self[i]

    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Jet(self.space, self.coeffs.reshape(tuple(shape) + (self.space.size,)))

    def transpose(self, *axes) -> "Jet":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        return Jet(self.space, self.coeffs.transpose(tuple(axes) + (self.ndim,)))

    @property
    def T(self) -> "Jet":
        return self.transpose()

    def sum(self, axis=None) -> "Jet":
        if axis is None:
            axis = tuple(range(self.ndim))
        elif isinstance(axis, int):
            axis = (axis % self.ndim,)
        else:
            axis = tuple(a % self.ndim for a in axis)
        return Jet(self.space, self.coeffs.sum(axis=axis))

    def _check(self, other: "Jet"):
        if other.space is not self.space:
            raise JetError(f"mismatched jet spaces {self.space} and {other.space}")

    # -- arithmetic -----------------------------------------------------
    def __add__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            return Jet(self.space, self.coeffs + other.coeffs)
        other = _as_array(other)
        c = np.array(np.broadcast_to(self.coeffs, np.broadcast_shapes(self.shape, other.shape) + (self.space.size,)))
        c[..., 0] += other
        return Jet(self.space, c)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.space, -self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check(other)
            sp = self.space
            prod = self.coeffs[..., sp.pair_i] * other.coeffs[..., sp.pair_j]
            return Jet(sp, sp.reduce(prod))
        other = _as_array(other)
        return Jet(self.space, self.coeffs * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / _as_array(other))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, n):
        if isinstance(n, (int, np.integer)) or (isinstance(n, float) and n.is_integer()):
            return pow_int(self, int(n))
        raise JetError("jets support integer powers only; use sqrt for n = 1/2")

    def reciprocal(self) -> "Jet":
        return pow_int(self, -1)

    # -- Taylor structure -----------------------------------------------
    def nonconstant(self) -> "Jet":
        c = self.coeffs.copy()
        c[..., 0] = 0.0
        return Jet(self.space, c)

    def deriv(self, var: int) -> "Jet":
        """Partial derivative in variable ``var``; the result has order - 1."""
        if self.order == 0:
            raise JetError("cannot differentiate an order-0 jet")
        if not 0 <= var < self.nvars:
            raise JetError(f"variable index {var} out of range")
        src, dst, fac = self.space.deriv_table(var)
        lower = JetSpace.get(self.nvars, self.order - 1)
        c = np.zeros(self.shape + (lower.size,))
        c[..., dst] = self.coeffs[..., src] * fac
        return Jet(lower, c)

    def gradient(self) -> "Jet":
        """Stack of all first partials along a new trailing array axis."""
        return stack([self.deriv(v) for v in range(self.nvars)], axis=-1)

    def with_order(self, order: int) -> "Jet":
        """Truncate to a lower order, or zero-pad to a higher one."""
        if order == self.order:
            return self
        src, other = self.space.reorder_table(order)
        c = np.zeros(self.shape + (other.size,))
        c[..., : src.size] = self.coeffs[..., src]
        return Jet(other, c)

    def mask(self, keep: np.ndarray) -> "Jet":
        """Zero every coefficient whose multi-index is not selected by ``keep``."""
        return Jet(self.space, self.coeffs * np.asarray(keep, dtype=float))

    def restrict_zero(self, variables: Sequence[int]) -> "Jet":
        """Set the listed variables to zero (keep only multi-indices free of them)."""
        keep = np.all(self.space.exps[:, list(variables)] == 0, axis=1) if len(variables) else np.ones(self.space.size, bool)
        return self.mask(keep)

    def coefficient(self, k: Sequence[int]) -> np.ndarray:
        """Derivative ``d^K f`` at the expansion point (``K! * c_K``)."""
        k = tuple(int(e) for e in k)
        if len(k) != self.nvars or min(k) < 0:
            raise JetError(f"multi-index {k} does not match {self.nvars} variables")
        if sum(k) > self.order:
            raise JetError(f"|K| = {sum(k)} exceeds truncation order {self.order}")
        i = self.space.index[k]
        return self.coeffs[..., i] * self.space.factorial[i]

    def derivatives(self) -> np.ndarray:
        """All coefficients rescaled to derivatives, same layout as ``coeffs``."""
        return self.coeffs * self.space.factorial

    def taylor_dict(self, tol: float = 0.0) -> dict[tuple[int, ...], float]:
        """Scalar jet as ``{multi-index: c_K}`` with entries above ``tol``."""
        if self.shape:
            raise JetError("taylor_dict is defined for scalar jets")
        return {k: float(c) for k, c in zip(self.space.exps_list, self.coeffs) if abs(c) > tol}

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0


def stack(jets: Sequence[Jet], axis: int = 0) -> Jet:
    jets = list(jets)
    if not jets:
        raise JetError("cannot stack an empty sequence")
    space = jets[0].space
    for j in jets[1:]:
        if j.space is not space:
            raise JetError("mismatched jet spaces in stack")
    ndim = jets[0].ndim + 1
    axis = axis % ndim
    return Jet(space, np.stack([j.coeffs for j in jets], axis=axis))


def as_jet(x, like: Jet) -> Jet:
    """Promote a float (array) to a constant jet in the space of ``like``."""
    if isinstance(x, Jet):
        like._check(x)
        return x
    return Jet.constant(x, like.nvars, like.order)


def from_nested(rows, nvars: int, order: int) -> Jet:
    """Build a jet array from a nested list mixing jets and plain numbers."""
    space = JetSpace.get(nvars, order)

    def conv(item):
        if isinstance(item, Jet):
            if item.space is not space:
                raise JetError("entry lives in a different jet space")
            return item.coeffs
        if isinstance(item, (list, tuple)):
            return np.stack([conv(i) for i in item])
        c = np.zeros(space.size)
        c[0] = float(item)
        return c

    return Jet(space, conv(rows))


# -- univariate series composition ----------------------------------------

def _series(a: Jet, derivs: Sequence[float]) -> Jet:
    """sum_k derivs[k]/k! * (a - a0)^k, with ``derivs`` per element or scalar."""
    d = a.nonconstant()
    out_c = np.zeros_like(a.coeffs)
    term = None
    for k, fk in enumerate(derivs):
        if k > a.order:
            break
        fk = np.asarray(fk, dtype=float)
        if k == 0:
            out_c[..., 0] += fk
            continue
        term = d if term is None else term * d
        out_c += (fk / math.factorial(k))[..., None] * term.coeffs
    return Jet(a.space, out_c)


def pow_int(a: Jet, n: int) -> Jet:
    a0 = a.const
    if n == 0:
        return Jet.constant(np.ones(a.shape), a.nvars, a.order)
    if n > 0:
        out = a
        for _ in range(n - 1):
            out = out * a
        return out
    if np.any(a0 == 0.0):
        raise JetError("reciprocal of a jet with zero constant term")
    derivs = []
    coef = 1.0
    for k in range(a.order + 1):
        derivs.append(coef * a0 ** (n - k))
        coef *= n - k
    return _series(a, derivs)


def exp(a):
    if not isinstance(a, Jet):
        return np.exp(a)
    e = np.exp(a.const)
    return _series(a, [e] * (a.order + 1))


def sin(a):
    if not isinstance(a, Jet):
        return np.sin(a)
    s, c = np.sin(a.const), np.cos(a.const)
    cycle = [s, c, -s, -c]
    return _series(a, [cycle[k % 4] for k in range(a.order + 1)])


def cos(a):
    if not isinstance(a, Jet):
        return np.cos(a)
    s, c = np.sin(a.const), np.cos(a.const)
    cycle = [c, -s, -c, s]
    return _series(a, [cycle[k % 4] for k in range(a.order + 1)])


def sqrt(a):
    if not isinstance(a, Jet):
        return np.sqrt(a)
    a0 = a.const
    if np.any(a0 <= 0.0):
        raise JetError("sqrt of a jet with non-positive constant term")
    derivs = []
    coef = 1.0
    for k in range(a.order + 1):
        derivs.append(coef * a0 ** (0.5 - k))
        coef *= 0.5 - k
    return _series(a, derivs)


# -- contractions ----------------------------------------------------------

def _pair_einsum(spec_a: str, a, spec_b: str, b, spec_out: str):
    """Contract two operands; either may be a plain ndarray (constant)."""
    if isinstance(a, Jet) and isinstance(b, Jet):
        a._check(b)
        sp = a.space
        A = a.coeffs[..., sp.pair_i]
        B = b.coeffs[..., sp.pair_j]
        prod = np.einsum(f"{spec_a}Z,{spec_b}Z->{spec_out}Z", A, B)
        return Jet(sp, sp.reduce(prod))
    if isinstance(a, Jet):
        return Jet(a.space, np.einsum(f"{spec_a}Z,{spec_b}->{spec_out}Z", a.coeffs, np.asarray(b, float)))
    if isinstance(b, Jet):
        return Jet(b.space, np.einsum(f"{spec_a},{spec_b}Z->{spec_out}Z", np.asarray(a, float), b.coeffs))
    return np.einsum(f"{spec_a},{spec_b}->{spec_out}", a, b)


def einsum(spec: str, *operands):
    """Einstein summation over jets (and constant arrays), contracted pairwise.

    The axis letter ``Z`` is reserved.  Products between two jets are the
    truncated Cauchy product.
    """
    lhs, out = spec.replace(" ", "").split("->")
    specs = lhs.split(",")
    if len(specs) != len(operands):
        raise JetError("einsum spec does not match operand count")
    if "Z" in spec:
        raise JetError("axis letter Z is reserved")
    if len(operands) == 1:
        a = operands[0]
        if isinstance(a, Jet):
            return Jet(a.space, np.einsum(f"{specs[0]}Z->{out}Z", a.coeffs))
        return np.einsum(spec, a)
    cur, cur_spec = operands[0], specs[0]
    for i in range(1, len(operands)):
        later = "".join(specs[i + 1:]) + out
        keep = "".join(dict.fromkeys(c for c in cur_spec + specs[i] if c in later))
        if i == len(operands) - 1:
            keep = out
        cur = _pair_einsum(cur_spec, cur, specs[i], operands[i], keep)
        cur_spec = keep
    return cur


def matmul(a, b):
    """Matrix product of jet (or constant) matrices and vectors."""
    na = a.ndim if isinstance(a, Jet) else np.ndim(a)
    nb = b.ndim if isinstance(b, Jet) else np.ndim(b)
    sa = "ab" if na == 2 else "b"
    sb = "bc" if nb == 2 else "b"
    out = sa.replace("b", "") + sb.replace("b", "")
    return einsum(f"{sa},{sb}->{out}", a, b)


def inv(a: Jet) -> Jet:
    """Inverse of a square jet matrix: LU of the constant term plus a Neumann series."""
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise JetError("inv expects a square jet matrix")
    a0 = a.const
    try:
        a0inv = np.linalg.inv(a0)
    except np.linalg.LinAlgError as exc:
        raise JetError("singular constant-term matrix") from exc
    if not np.all(np.isfinite(a0inv)) or abs(np.linalg.det(a0)) < 1e-14 * max(1.0, np.max(np.abs(a0))) ** a0.shape[0]:
        raise JetError("singular constant-term matrix")
    d = a.nonconstant()
    step = einsum("ij,jk->ik", -a0inv, d)
    term = Jet.constant(a0inv, a.nvars, a.order)
    total = term
    for _ in range(a.order):
        term = einsum("ij,jk->ik", step, term)
        total = total + term
    return total


class Composer:
    """Substitution of one fixed inner vector jet into many outer expansions.

    The inner monomials are built once; each call is then a matrix product.
    ``center`` is subtracted from the inner jets, whose recentred constant
    terms must vanish.
    """

    def __init__(self, inner: Jet | Sequence[Jet], center=None, tol: float = 1e-12):
        if not isinstance(inner, Jet):
            inner = stack(list(inner))
        if inner.ndim != 1:
            raise JetError("inner jets must form a vector")
        if center is not None:
            inner = inner - np.asarray(center, dtype=float)
        scale = max(1.0, float(np.max(np.abs(inner.coeffs))))
        if np.max(np.abs(inner.const)) > tol * scale:
            raise JetError("inner jets must have zero constant term after recentring")
        c = inner.coeffs.copy()
        c[..., 0] = 0.0
        self.inner = Jet(inner.space, c)
        self.m = inner.shape[0]
        self._monos: dict[int, np.ndarray] = {}

    def monomials(self, order: int) -> np.ndarray:
        hit = self._monos.get(order)
        if hit is not None:
            return hit
        inner = self.inner.with_order(order)
        osp = JetSpace.get(self.m, order)
        monos = np.zeros((osp.size, inner.space.size))
        monos[0, 0] = 1.0
        for deg in range(1, order + 1):
            idx = np.nonzero(osp.degree == deg)[0]
            par = Jet(inner.space, monos[osp.parent[idx]])
            var = Jet(inner.space, inner.coeffs[osp.parent_var[idx]])
            monos[idx] = (par * var).coeffs
        self._monos[order] = monos
        return monos

    def __call__(self, outer: Jet) -> Jet:
        if outer.nvars != self.m:
            raise JetError(f"outer jet has {outer.nvars} variables, inner supplies {self.m}")
        order = min(outer.order, self.inner.order)
        monos = self.monomials(order)
        return Jet(JetSpace.get(self.inner.nvars, order), outer.with_order(order).coeffs @ monos)


def compose(outer: Jet, inners: Sequence[Jet] | Jet, center=None, tol: float = 1e-12) -> Jet:
    """Substitute inner jets for the variables of ``outer``.

    ``outer`` is an expansion about 0 in its ``m`` variables; ``inners`` are
    ``m`` jets over a shared space.  If ``center`` is given it is subtracted
    from the inners first.  The recentred inners must have zero constant
    term.  The result order is ``min(outer.order, inner order)``.
    """
    comp = Composer(inners, center, tol)
    if comp.m != outer.nvars:
        raise JetError(f"expected {outer.nvars} inner jets, got {comp.m}")
    return comp(outer)


def expand(fn, point, order: int) -> Jet:
    """Taylor expansion of ``fn`` about ``point``: ``fn(point + w)`` in ``w``."""
    return fn(Jet.seed(point, order))


# -- operation-level entry points ------------------------------------------

def jet_variable(index: int, value: float, cfg: JetConfig) -> Jet:
    return Jet.variable(index, value, cfg.nvars, cfg.order)


def jet_arith(op: str, a: Jet, b=None) -> Jet:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "scale":
        if isinstance(b, Jet):
            raise JetError("scale expects a real factor")
        return a * b
    if op == "reciprocal":
        return a.reciprocal()
    raise JetError(f"unknown arithmetic op {op!r}")


_ELEMENTARY = {"sin": sin, "cos": cos, "exp": exp, "sqrt": sqrt}


def jet_elementary(kind: str, a: Jet, n: int | None = None) -> Jet:
    if kind == "pow_int":
        if n is None:
            raise JetError("pow_int needs an integer exponent")
        return pow_int(a, n)
    try:
        return _ELEMENTARY[kind](a)
    except KeyError:
        raise JetError(f"unknown elementary function {kind!r}") from None


def jet_compose(outer: Jet, inners: Sequence[Jet]) -> Jet:
    return compose(outer, inners)


def jet_coefficient(a: Jet, k: Sequence[int]):
    return a.coefficient(k)
