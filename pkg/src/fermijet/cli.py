"""Command line entry point: ``fermijet <subcommand> [config] [flags]``.

Exit status is 0 when every enabled check passes, 1 on any check failure and
2 on configuration or parse errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import verify as V
from .catalog import catalog
from .config import ConfigError, RunConfig, load_config
from .expr import ExprError
from .pipeline import ALL_CHECKS, chart_for, records_csv, records_json, run, write_reports

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--order", type=int, help="jet order (2..5)")
    common.add_argument("--tol", type=float, help="tolerance for conditions and the Gauss residual")
    common.add_argument("--seed", type=int, help="seed for randomized catalog cases")
    common.add_argument("--out", help="directory for report files (default: print to stdout)")
    common.add_argument("--format", choices=("csv", "json", "both"), help="report format")

    p = argparse.ArgumentParser(prog="fermijet", description="Fermi-coordinate metric jets and their checks.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("catalog", parents=[common], help="list built-in cases")
    for name, text in (("run", "full pipeline"), ("verify", "conditions (A)-(D) only"),
                       ("taylor", "dump the measured metric jet"), ("predict", "dump the linear prediction"),
                       ("loop", "frame-coefficient closed loop")):
        sp = sub.add_parser(name, parents=[common], help=text)
        sp.add_argument("config", help="JSON configuration file")
    return p


def _load(args) -> RunConfig:
    try:
        data = json.loads(Path(args.config).read_text())
    except FileNotFoundError:
        raise ConfigError(f"no such configuration file: {args.config}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {args.config}: {exc}") from None
    return load_config(data, order=args.order, tol=args.tol, seed=args.seed, out=args.out, format=args.format)


def _emit(text: str, out: str | None, name: str) -> None:
    if out:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / name).write_text(text)
    else:
        sys.stdout.write(text)


def _table(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _cmd_catalog(args) -> int:
    entries = catalog()
    if args.format == "json":
        _emit(json.dumps([{"name": n, "description": d} for n, d in entries], indent=2) + "\n", args.out, "catalog.json")
    else:
        _emit("".join(f"{n:40s} {d}\n" for n, d in entries), args.out, "catalog.txt")
    return EXIT_OK


def _cmd_checks(args, checks) -> int:
    cfg = _load(args)
    records = run(cfg, checks)
    fmt = cfg.format
    if cfg.out:
        write_reports(records, cfg.out, fmt, cfg)
    else:
        if fmt in ("csv", "both"):
            sys.stdout.write(records_csv(records))
        if fmt in ("json", "both"):
            sys.stdout.write(records_json(records, cfg))
    for r in records:
        status = "PASS" if r.passed else "FAIL"
        sys.stderr.write(f"{status} {r.case}" + (f" ({r.error})" if r.error else "") + "\n")
    return EXIT_OK if all(r.passed for r in records) else EXIT_FAIL


def _cmd_taylor(args) -> int:
    cfg = _load(args)
    rows = []
    for case in sorted(cfg.cases, key=lambda c: c.name):
        gt = chart_for(case, cfg).metric_jet(cfg.order)
        for t, K in enumerate(gt.space.exps_list):
            for i in range(case.n):
                for j in range(i, case.n):
                    c = gt.coeffs[i, j, t]
                    rows.append([case.name, i, j, "-".join(map(str, K)), repr(float(c)),
                                 repr(float(c * gt.space.factorial[t]))])
    _emit(_table(["case", "i", "j", "K", "taylor_coefficient", "derivative"], rows), cfg.out, "taylor.csv")
    return EXIT_OK


def _cmd_predict(args) -> int:
    cfg = _load(args)
    rows = []
    for case in sorted(cfg.cases, key=lambda c: c.name):
        chart = chart_for(case, cfg)
        pred = V.predict_linear_jet(*V.linear_inputs(chart.metric, chart.sub, chart.frame, cfg.order),
                                    case.h, cfg.order)
        for (i, j, K), (v, row) in sorted(pred.entries.items()):
            rows.append([case.name, i, j, "-".join(map(str, K)), row, repr(float(v))])
    _emit(_table(["case", "i", "j", "K", "row", "predicted_derivative"], rows), cfg.out, "prediction.csv")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "catalog":
            return _cmd_catalog(args)
        if args.command == "run":
            return _cmd_checks(args, ALL_CHECKS)
        if args.command == "verify":
            return _cmd_checks(args, ("conditions",))
        if args.command == "loop":
            return _cmd_checks(args, ("loop",))
        if args.command == "taylor":
            return _cmd_taylor(args)
        return _cmd_predict(args)
    except (ConfigError, ExprError) as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
