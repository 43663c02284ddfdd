"""End-to-end pipeline over a run configuration, and report serialization."""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import verify as V
from .config import SCHEMA_VERSION, CaseConfig, RunConfig
from .coords import FermiChart
from .geometry import adapted_frame, gauss_residual

ALL_CHECKS = ("conditions", "first_order", "linearized", "loop", "gauss")


@dataclass
class OutputRecord:
    case: str
    type: tuple
    order: int
    conditions: dict | None = None
    first_order: list[V.ComparisonRow] = field(default_factory=list)
    linearized: list[V.ComparisonRow] = field(default_factory=list)
    eps: tuple[float, ...] = ()
    eps_exponent: float | None = None
    loop_deviation: float | None = None
    gauss: float | None = None
    checks: dict[str, bool] = field(default_factory=dict)
    error: str | None = None
    timing: float | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(self.checks.values())

    def summary(self, with_timing: bool = False) -> dict[str, Any]:
        d = {
            "case": self.case,
            "type": [list(self.type[0]), list(self.type[1])],
            "order": self.order,
            "passed": self.passed,
            "checks": dict(self.checks),
            "conditions": self.conditions,
            "first_order_max_abs": max((r.abs_dev for r in self.first_order), default=None),
            "linearized_max_rel": max((r.rel_dev for r in self.linearized), default=None),
            "eps": list(self.eps),
            "eps_exponent": self.eps_exponent,
            "loop_deviation": self.loop_deviation,
            "gauss_residual": self.gauss,
            "error": self.error,
        }
        if with_timing:
            d["timing"] = self.timing
        return d


def chart_for(case: CaseConfig, cfg: RunConfig, order: int | None = None) -> FermiChart:
    g, sub = case.build()
    frame = adapted_frame(g, sub, case.h)
    return FermiChart(g, sub, frame, cfg.solver, order or cfg.order)


def run_case(case: CaseConfig, cfg: RunConfig, checks=ALL_CHECKS) -> OutputRecord:
    rec = OutputRecord(case.name, case.type, cfg.order)
    t0 = time.perf_counter()
    try:
        chart = chart_for(case, cfg)
        h, k = case.h, case.k
        gt = chart.metric_jet(cfg.order)
        if "conditions" in checks:
            rep = V.check_conditions(gt, h, cfg.order, cfg.tol, k=k)
            rec.conditions = rep.as_dict()
            rec.checks["conditions"] = rep.passed()
        if "first_order" in checks:
            pred = V.predict_linear_jet(*V.linear_inputs(chart.metric, chart.sub, chart.frame, 1), h, 1)
            comp = V.compare_first_order(gt, pred, cfg.first_order_tol)
            rec.first_order = comp.rows
            rec.checks["first_order"] = comp.passed
        if "gauss" in checks:
            rec.gauss = gauss_residual(chart.metric, chart.sub, chart.frame)
            rec.checks["gauss"] = rec.gauss <= cfg.tol
        if "linearized" in checks and case.is_family:
            fam = V.FamilyCase(lambda e: case.build(eps=e), h, cfg.solver)
            lin_order = min(cfg.order, V.MAX_RECURSION_ORDER)
            comp = V.linearized_compare(fam, lin_order, eps=cfg.eps, rtol=cfg.eps_rtol)
            _, expo = V.eps_scaling(fam, lin_order, cfg.eps_list)
            rec.linearized, rec.eps, rec.eps_exponent = comp.rows, comp.eps, expo
            rec.checks["linearized"] = comp.passed and expo >= 1.8
        if "loop" in checks:
            order = min(cfg.loop_order, cfg.order, V.MAX_RECURSION_ORDER)
            _, _, dev = V.closed_loop(chart, order)
            rec.loop_deviation = dev
            rec.checks["loop"] = dev <= cfg.loop_tol
    except Exception as exc:  # recorded per case; the run continues
        rec.error = f"{type(exc).__name__}: {exc}"
    rec.timing = time.perf_counter() - t0
    return rec


def run(cfg: RunConfig, checks=ALL_CHECKS) -> list[OutputRecord]:
    """One record per case, sorted by case name."""
    records = [run_case(c, cfg, checks) for c in cfg.cases]
    return sorted(records, key=lambda r: r.case)


# -- serialization ------------------------------------------------------------

CSV_HEADER = ["case", "check", "i", "j", "K", "row", "measured", "predicted", "deviation", "tolerance", "pass"]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _K(K) -> str:
    return "-".join(str(e) for e in K)


def records_csv(records: list[OutputRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rec in records:
        if rec.conditions:
            for c in V.CONDITIONS:
                worst = rec.conditions["worst"][c]
                w.writerow([rec.case, f"condition-{c}", _K(worst["component"]), "", _K(worst["K"]), "",
                            _fmt(rec.conditions["residuals"][c]), "0.0", _fmt(rec.conditions["residuals"][c]),
                            _fmt(rec.conditions["tol"]), _fmt(rec.conditions["residuals"][c] <= rec.conditions["tol"])])
        for name, rows in (("first-order", rec.first_order), ("linearized", rec.linearized)):
            for r in rows:
                dev = r.abs_dev if name == "first-order" else r.rel_dev
                w.writerow([rec.case, name, r.i, r.j, _K(r.K), r.row, _fmt(r.measured), _fmt(r.predicted),
                            _fmt(dev), _fmt(r.tol), _fmt(r.passed)])
        if rec.loop_deviation is not None:
            w.writerow([rec.case, "loop", "", "", "", "", "", "", _fmt(rec.loop_deviation), "", _fmt(rec.checks.get("loop"))])
        if rec.gauss is not None:
            w.writerow([rec.case, "gauss", "", "", "", "", "", "", _fmt(rec.gauss), "", _fmt(rec.checks.get("gauss"))])
        if rec.error:
            w.writerow([rec.case, "error", "", "", "", "", rec.error, "", "", "", "false"])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def records_json(records: list[OutputRecord], cfg: RunConfig | None = None, with_timing: bool = False) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "passed": all(r.passed for r in records),
        "records": [r.summary(with_timing) for r in records],
    }
    if cfg is not None:
        # the destination directory is not part of the result
        doc["config"] = {k: v for k, v in cfg.to_dict().items() if k != "out"}
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def write_reports(records: list[OutputRecord], out: str | Path, fmt: str = "both", cfg: RunConfig | None = None,
                  stem: str = "report", with_timing: bool = False) -> list[Path]:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("csv", "both"):
        p = out / f"{stem}.csv"
        p.write_text(records_csv(records))
        written.append(p)
    if fmt in ("json", "both"):
        p = out / f"{stem}.json"
        p.write_text(records_json(records, cfg, with_timing))
        written.append(p)
    return written
