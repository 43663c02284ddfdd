"""Built-in example cases, all expressed in the expression language."""

from __future__ import annotations

import inspect
from typing import Callable

import numpy as np

from .config import CaseConfig, ConfigError, _type_tuple
from .geometry import reference_form


def _diag(entries: list[str]) -> list[list[str]]:
    n = len(entries)
    return [[entries[i] if i == j else "0" for j in range(n)] for i in range(n)]


def flat_affine(type=((2, 0), (1, 0)), **_) -> CaseConfig:
    """Flat metric of the matching signature with a coordinate subspace."""
    t = _type_tuple(type)
    k, n = sum(t[0]), sum(t[0]) + sum(t[1])
    signs = [1] * t[0][0] + [-1] * t[0][1] + [1] * t[1][0] + [-1] * t[1][1]
    coords = [f"z{i}" for i in range(n)]
    params = [f"s{a}" for a in range(k)]
    label = f"flat-affine({t[0][0]}{t[0][1]}|{t[1][0]}{t[1][1]})"
    return CaseConfig(label, t, coords, _diag([str(s) for s in signs]), params,
                      params + ["0"] * (n - k), [0.0] * k, {}, "flat metric, coordinate subspace")


def circle_in_plane(**_) -> CaseConfig:
    return CaseConfig("circle-in-plane", ((1, 0), (1, 0)), ["x", "y"], _diag(["1", "1"]), ["t"],
                      ["cos(t)", "sin(t)"], [0.0], {}, "unit circle in the Euclidean plane")


def sphere2_in_r3(**_) -> CaseConfig:
    return CaseConfig("sphere2-in-r3", ((2, 0), (1, 0)), ["x", "y", "z"], _diag(["1"] * 3), ["a", "b"],
                      ["sin(a)*cos(b)", "sin(a)*sin(b)", "cos(a)"], [1.1, 0.4], {},
                      "unit 2-sphere in Euclidean 3-space, polar parametrization")


def graph_quadratic(kappa: float = 1.0, **_) -> CaseConfig:
    return CaseConfig(f"graph-quadratic(kappa={kappa:g})", ((1, 0), (1, 0)), ["x", "y"], _diag(["1", "1"]),
                      ["s"], ["s", "kappa*s^2/2"], [0.0], {"kappa": kappa},
                      "plane curve y = kappa x^2 / 2 at its vertex")


def _random_cubic(rng: np.random.Generator, names: list[str], scale: float) -> str:
    terms = []
    n = len(names)
    for d in range(0, 4):
        for combo in _monomials(n, d):
            c = round(float(rng.uniform(-scale, scale)), 3)
            if c == 0.0:
                continue
            factors = [repr(abs(c))] + [f"{names[i]}^{e}" if e > 1 else names[i] for i, e in enumerate(combo) if e]
            terms.append(("-" if c < 0 else "+", "*".join(factors)))
    src = "".join(f" {s} {t}" for s, t in terms).strip()
    return src[2:] if src.startswith("+ ") else "-" + src[2:]


def _monomials(n: int, d: int):
    if n == 1:
        yield (d,)
        return
    for e in range(d, -1, -1):
        for rest in _monomials(n - 1, d - e):
            yield (e,) + rest


def eps_perturbed_flat(seed: int = 0, eps: float = 0.05, type=((2, 0), (2, 0)), **_) -> CaseConfig:
    """``g = h + eps P(z)`` with ``P`` a seeded random symmetric cubic matrix; flat subspace."""
    t = _type_tuple(type)
    k, n = sum(t[0]), sum(t[0]) + sum(t[1])
    rng = np.random.default_rng(seed)
    coords = [f"z{i}" for i in range(n)]
    signs = np.diag(reference_form(t))
    metric = [["" for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            P = _random_cubic(rng, coords, 0.5)
            base = f"{signs[i]:g}" if i == j else "0"
            metric[i][j] = metric[j][i] = f"{base} + eps*({P})"
    params = [f"s{a}" for a in range(k)]
    label = f"eps-perturbed-flat(seed={seed})" if t == ((2, 0), (2, 0)) else \
        f"eps-perturbed-flat(seed={seed},{t[0][0]}{t[0][1]}|{t[1][0]}{t[1][1]})"
    return CaseConfig(label, t, coords, metric, params, params + ["0"] * (n - k), [0.0] * k,
                      {"eps": eps}, "random cubic perturbation of a flat metric")


def graph_family(eps: float = 0.1, **_) -> CaseConfig:
    f = "s^2 + 0.5*s*r - 0.7*r^2 + 0.3*s^3 - 0.2*s*r^2"
    return CaseConfig("graph-family", ((2, 0), (1, 0)), ["x", "y", "z"], _diag(["1"] * 3), ["s", "r"],
                      ["s", "r", f"eps*({f})"], [0.0, 0.0], {"eps": eps},
                      "graph of eps f over a plane in Euclidean 3-space")


def minkowski_spacelike_line(**_) -> CaseConfig:
    return CaseConfig("minkowski-spacelike-line", ((1, 0), (0, 1)), ["t", "y"], _diag(["-1", "1"]), ["s"],
                      ["0", "s"], [0.0], {}, "spacelike line in 2d Minkowski space")


def minkowski_timelike_line(**_) -> CaseConfig:
    return CaseConfig("minkowski-timelike-line", ((0, 1), (1, 0)), ["t", "y"], _diag(["-1", "1"]), ["s"],
                      ["s", "0"], [0.0], {}, "timelike line in 2d Minkowski space")


def greatcircle_in_s3(**_) -> CaseConfig:
    return CaseConfig("greatcircle-in-s3", ((1, 0), (2, 0)), ["chi", "th", "ph"],
                      _diag(["1", "sin(chi)^2", "sin(chi)^2*sin(th)^2"]), ["s"],
                      ["pi/2", "pi/2", "s"], [0.3], {}, "great circle in the round 3-sphere")


def circle_in_r3(tilt: float = 0.6, **_) -> CaseConfig:
    return CaseConfig("circle-in-r3", ((1, 0), (2, 0)), ["x", "y", "z"], _diag(["1"] * 3), ["t"],
                      ["cos(t)*cos(tilt)", "sin(t)", "-cos(t)*sin(tilt)"], [0.0], {"tilt": tilt},
                      "unit circle in a tilted plane of Euclidean 3-space")


def latitude_in_s2(theta0: float = 1.0, **_) -> CaseConfig:
    return CaseConfig("latitude-in-s2", ((1, 0), (1, 0)), ["th", "ph"], _diag(["1", "sin(th)^2"]), ["s"],
                      ["theta0", "s"], [0.0], {"theta0": theta0}, "latitude circle on the round 2-sphere")


def hyperbola_in_minkowski(**_) -> CaseConfig:
    return CaseConfig("hyperbola-in-minkowski", ((0, 1), (1, 0)), ["t", "y"], _diag(["-1", "1"]), ["s"],
                      ["(exp(s) - exp(-s))/2", "(exp(s) + exp(-s))/2"], [0.2], {},
                      "unit hyperbola (timelike curve) in 2d Minkowski space")


CATALOG: dict[str, Callable[..., CaseConfig]] = {
    "flat-affine": flat_affine,
    "circle-in-plane": circle_in_plane,
    "sphere2-in-r3": sphere2_in_r3,
    "graph-quadratic": graph_quadratic,
    "eps-perturbed-flat": eps_perturbed_flat,
    "graph-family": graph_family,
    "minkowski-spacelike-line": minkowski_spacelike_line,
    "minkowski-timelike-line": minkowski_timelike_line,
    "greatcircle-in-s3": greatcircle_in_s3,
    "circle-in-r3": circle_in_r3,
    "latitude-in-s2": latitude_in_s2,
    "hyperbola-in-minkowski": hyperbola_in_minkowski,
}


def catalog() -> list[tuple[str, str]]:
    """Names and one-line descriptions of the built-in cases."""
    out = []
    for name, fn in CATALOG.items():
        params = [p for p in inspect.signature(fn).parameters if p != "_"]
        label = f"{name}({', '.join(params)})" if params else name
        out.append((label, fn().description))
    return out


def get_case(name: str, **args) -> CaseConfig:
    try:
        fn = CATALOG[name]
    except KeyError:
        raise ConfigError(f"unknown catalog case {name!r}") from None
    accepted = set(inspect.signature(fn).parameters) - {"_"}
    bad = set(args) - accepted - {"seed"}
    if bad:
        raise ConfigError(f"{name} does not take arguments {sorted(bad)}")
    return fn(**args)


def default_cases() -> list[CaseConfig]:
    """Every catalog entry, with the argument sweeps used by the acceptance checks."""
    return [
        flat_affine(((2, 0), (1, 0))),
        flat_affine(((1, 1), (1, 0))),
        circle_in_plane(),
        sphere2_in_r3(),
        graph_quadratic(0.5),
        graph_quadratic(1.0),
        graph_quadratic(2.0),
        eps_perturbed_flat(0),
        eps_perturbed_flat(1),
        eps_perturbed_flat(2),
        graph_family(),
        minkowski_spacelike_line(),
        minkowski_timelike_line(),
        greatcircle_in_s3(),
        circle_in_r3(),
        latitude_in_s2(),
        hyperbola_in_minkowski(),
    ]
