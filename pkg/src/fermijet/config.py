"""Run and case configuration.

A case is fully described by strings: ambient coordinate names, an ``n x n``
matrix of metric expressions, ``k`` parameter names with ``n`` embedding
expressions, a base parameter point and named constants.  A case whose
expressions mention ``eps`` is an epsilon family; ``constants["eps"]`` is the
member used for single-chart checks.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .coords import GeodesicSolverConfig
from .expr import ExprError, evaluate, free_names, parse_expression
from .geometry import MetricChart, SubmanifoldChart, reference_form

SCHEMA_VERSION = 1
FORMATS = ("csv", "json", "both")


class ConfigError(ValueError):
    pass


def _type_tuple(t) -> tuple[tuple[int, int], tuple[int, int]]:
    try:
        (p, q), (pp, qq) = t
        out = ((int(p), int(q)), (int(pp), int(qq)))
    except (TypeError, ValueError):
        raise ConfigError(f"type must look like [[p, q], [p', q']], got {t!r}") from None
    if min(out[0] + out[1]) < 0:
        raise ConfigError(f"type entries must be non-negative, got {t!r}")
    return out


@dataclass
class CaseConfig:
    name: str
    type: tuple[tuple[int, int], tuple[int, int]]
    coords: list[str]
    metric: list[list[str]]
    params: list[str]
    submanifold: list[str]
    base: list[float]
    constants: dict[str, float] = field(default_factory=dict)
    description: str = ""

    def __post_init__(self):
        self.type = _type_tuple(self.type)
        self.base = [float(b) for b in self.base]
        self.constants = {str(k): float(v) for k, v in self.constants.items()}

    @property
    def k(self) -> int:
        return sum(self.type[0])

    @property
    def n(self) -> int:
        return sum(self.type[0]) + sum(self.type[1])

    @property
    def h(self) -> np.ndarray:
        return reference_form(self.type)

    @property
    def signature(self) -> tuple[int, int]:
        (p, q), (pp, qq) = self.type
        return (p + pp, q + qq)

    def _asts(self):
        names_g = list(self.coords) + list(self.constants)
        names_s = list(self.params) + list(self.constants)
        g = [[parse_expression(e, names_g) for e in row] for row in self.metric]
        s = [parse_expression(e, names_s) for e in self.submanifold]
        return g, s

    @property
    def is_family(self) -> bool:
        g, s = self._asts()
        return any("eps" in free_names(a) for row in g for a in row) or any("eps" in free_names(a) for a in s)

    def validate(self) -> None:
        n, k = self.n, self.k
        if not 1 <= k <= n - 1:
            raise ConfigError(f"{self.name}: type {self.type} needs 1 <= k <= n-1")
        if len(self.coords) != n or len(set(self.coords)) != n:
            raise ConfigError(f"{self.name}: expected {n} distinct coordinate names")
        if len(self.params) != k or len(set(self.params)) != k:
            raise ConfigError(f"{self.name}: expected {k} distinct parameter names")
        if len(self.base) != k:
            raise ConfigError(f"{self.name}: base point must have {k} entries")
        if len(self.metric) != n or any(len(row) != n for row in self.metric):
            raise ConfigError(f"{self.name}: metric must be {n} x {n}")
        if len(self.submanifold) != n:
            raise ConfigError(f"{self.name}: submanifold needs {n} expressions")
        clash = (set(self.coords) | set(self.params)) & set(self.constants)
        if clash:
            raise ConfigError(f"{self.name}: constants shadow variables {sorted(clash)}")
        try:
            g, _ = self._asts()
        except ExprError as exc:
            raise ConfigError(f"{self.name}: {exc}") from exc
        for i in range(n):
            for j in range(i + 1, n):
                if g[i][j] != g[j][i]:
                    raise ConfigError(f"{self.name}: metric entries ({i},{j}) and ({j},{i}) differ")

    def build(self, eps: float | None = None) -> tuple[MetricChart, SubmanifoldChart]:
        """Metric and submanifold charts, optionally overriding ``eps``."""
        self.validate()
        consts = dict(self.constants)
        if eps is not None:
            consts["eps"] = float(eps)
        g_ast, s_ast = self._asts()
        coords, params = list(self.coords), list(self.params)

        def metric(z):
            env = dict(consts)
            env.update({c: z[i] for i, c in enumerate(coords)})
            return [[evaluate(a, env) for a in row] for row in g_ast]

        def embed(s):
            env = dict(consts)
            env.update({c: s[i] for i, c in enumerate(params)})
            return [evaluate(a, env) for a in s_ast]

        g = MetricChart(self.n, self.signature, metric, self.name)
        sub = SubmanifoldChart(self.k, self.n, embed, self.base, self.name)
        return g, sub

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["type"] = [list(self.type[0]), list(self.type[1])]
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "CaseConfig":
        required = ("name", "type", "coords", "metric", "params", "submanifold", "base")
        missing = [key for key in required if key not in d]
        if missing:
            raise ConfigError(f"case is missing fields {missing}")
        unknown = set(d) - set(required) - {"constants", "description"}
        if unknown:
            raise ConfigError(f"unknown case fields {sorted(unknown)}")
        case = cls(**{key: d[key] for key in d})
        case.validate()
        return case


@dataclass
class RunConfig:
    cases: list[CaseConfig]
    order: int = 4
    solver: GeodesicSolverConfig = field(default_factory=GeodesicSolverConfig)
    tol: float = 1e-8
    first_order_tol: float = 1e-7
    loop_order: int = 3
    loop_tol: float = 1e-6
    eps: float = 1e-3
    eps_rtol: float = 1e-3
    eps_list: tuple[float, ...] = (1e-2, 5e-3, 2.5e-3)
    seed: int = 0
    out: str | None = None
    format: str = "both"

    def __post_init__(self):
        if not 2 <= self.order <= 5:
            raise ConfigError(f"jet order must be in [2, 5], got {self.order}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.tol <= 0 or self.eps <= 0:
            raise ConfigError("tolerances and eps must be positive")
        self.eps_list = tuple(float(e) for e in self.eps_list)
        for c in self.cases:
            c.validate()

    def to_dict(self) -> dict[str, Any]:
        d = {key: getattr(self, key) for key in self.__dataclass_fields__ if key not in ("cases", "solver")}
        d["eps_list"] = list(self.eps_list)
        d["solver"] = asdict(self.solver)
        d["cases"] = [c.to_dict() for c in self.cases]
        d["schema_version"] = SCHEMA_VERSION
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def resolve_case(obj: Any, seed: int = 0) -> CaseConfig:
    """A case object: either a full description or ``{"catalog": name, "args": {...}}``."""
    from .catalog import get_case

    if isinstance(obj, str):
        return get_case(obj, seed=seed)
    if not isinstance(obj, dict):
        raise ConfigError(f"case must be an object or catalog name, got {type(obj).__name__}")
    if "catalog" in obj:
        args = dict(obj.get("args", {}))
        args.setdefault("seed", seed)
        return get_case(obj["catalog"], **args)
    return CaseConfig.from_dict(obj)


def load_config(data: dict[str, Any], **overrides) -> RunConfig:
    """Build a :class:`RunConfig` from a parsed JSON document and CLI overrides."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    data = dict(data)
    data.pop("schema_version", None)
    for key, val in overrides.items():
        if val is not None:
            data[key] = val
    seed = int(data.get("seed", 0))
    if "cases" in data:
        raw = data.pop("cases")
        if not isinstance(raw, list) or not raw:
            raise ConfigError("'cases' must be a non-empty list")
    else:
        case_keys = {"catalog", "args", "name", "type", "coords", "metric", "params",
                     "submanifold", "base", "constants", "description"}
        raw = [{key: data.pop(key) for key in list(data) if key in case_keys}]
    cases = [resolve_case(c, seed) for c in raw]
    solver = data.pop("solver", {})
    if not isinstance(solver, dict):
        raise ConfigError("'solver' must be an object")
    try:
        solver_cfg = GeodesicSolverConfig(**solver)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad solver settings: {exc}") from exc
    known = set(RunConfig.__dataclass_fields__) - {"cases", "solver"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
    try:
        return RunConfig(cases=cases, solver=solver_cfg, **data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
