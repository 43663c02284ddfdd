"""Run every check over a configuration and write CSV/JSON reports.

    python3 scripts/catalog_report.py scripts/configs/catalog.json --out reports
"""

import argparse
import json
import sys
from pathlib import Path

from fermijet.config import load_config
from fermijet.pipeline import run, write_reports


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("config", nargs="?", default=str(Path(__file__).parent / "configs" / "catalog.json"))
    p.add_argument("--out", default="reports")
    p.add_argument("--timing", action="store_true", help="include per-case timing in the JSON report")
    args = p.parse_args(argv)

    cfg = load_config(json.loads(Path(args.config).read_text()), out=args.out)
    records = run(cfg)
    for r in records:
        checks = " ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in r.checks.items())
        print(f"{r.case:36s} {r.timing:6.2f}s  {checks}{'  ' + r.error if r.error else ''}")
    for path in write_reports(records, cfg.out, cfg.format, cfg, with_timing=args.timing):
        print(f"wrote {path}")
    return 0 if all(r.passed for r in records) else 1


if __name__ == "__main__":
    sys.exit(main())
