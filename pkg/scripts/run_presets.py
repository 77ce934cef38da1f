"""Run every shipped sweep preset and write one CSV per preset.

usage: python3 scripts/run_presets.py [OUTDIR] [--only NAME ...]
"""

import argparse
import time
from pathlib import Path

from tubewalk.config import load_preset, preset_names
from tubewalk.transport import reports_to_csv, sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("outdir", nargs="?", default="results")
    ap.add_argument("--only", nargs="*", default=None)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.only or preset_names():
        cfg = load_preset(name)
        t0 = time.perf_counter()
        reports = sweep(cfg.specs(), cfg.regimes, cfg.flavors, workers=args.workers)
        (out / f"{name}.csv").write_text(reports_to_csv(reports))
        failed = sum(bool(r.error) for r in reports)
        print(f"{name:8s} {len(reports):4d} rows  {failed} failed  {time.perf_counter() - t0:6.1f}s")


if __name__ == "__main__":
    main()
