"""Command-line entry point.

Subcommands expose the pipeline stages individually (train, sweep-ber,
map, energy, report) plus the monolithic run; stage outputs land under
--out so any sequence of subcommands reproduces the monolithic run
bit-for-bit.  Set SPARKXD_LOG to control log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import energy as energy_mod
from . import pipeline
from .config import ConfigError, ExperimentConfig
from .dram import AccessTrace
from .storage import BASELINE, SPARKXD
from .voltage import operating_point


def _setup_logging():
    level = os.environ.get("SPARKXD_LOG", "INFO").upper()
    logging.basicConfig(level=getattr(logging, level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--seed", type=int, default=0, help="master seed (u64)")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel (size, voltage) cells")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sparkxd",
                                 description="approximate-DRAM SNN co-simulation")
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="full experiment over all sizes and voltages")
    _add_common(run)

    train = sub.add_parser("train", help="train the clean baseline model")
    _add_common(train)
    train.add_argument("--size", type=int, required=True, help="excitatory neurons")

    sweep = sub.add_parser("sweep-ber", help="fault-aware training + BER_th search")
    _add_common(sweep)
    sweep.add_argument("--size", type=int, required=True)

    mp = sub.add_parser("map", help="build a mapping plan")
    _add_common(mp)
    mp.add_argument("--size", type=int, required=True)
    mp.add_argument("--voltage", type=float, required=True)
    mp.add_argument("--flavor", choices=(BASELINE, SPARKXD), default=SPARKXD)

    en = sub.add_parser("energy", help="trace plans and account energy")
    _add_common(en)
    en.add_argument("--size", type=int)
    en.add_argument("--voltage", type=float, required=True)
    en.add_argument("--trace", help="account an exported trace CSV instead of a cell")

    rep = sub.add_parser("report", help="aggregate per-cell results")
    _add_common(rep)

    return ap


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.from_json(args.config)
    except ConfigError as e:
        print(str(e), file=sys.stderr)
        return 2
    out = Path(args.out)

    try:
        if args.cmd == "run":
            manifest = pipeline.run_experiment(cfg, out, args.seed, jobs=args.jobs)
            print(json.dumps({"manifest": str(out / "manifest.json"),
                              "config_hash": manifest["config_hash"]}))
        elif args.cmd == "train":
            paths = pipeline.stage_train(cfg, out, args.seed, args.size)
            print("\n".join(str(p) for p in paths))
        elif args.cmd == "sweep-ber":
            paths = pipeline.stage_sweep(cfg, out, args.seed, args.size)
            print("\n".join(str(p) for p in paths))
        elif args.cmd == "map":
            paths = pipeline.stage_map(cfg, out, args.seed, args.size,
                                       args.voltage, args.flavor)
            print("\n".join(str(p) for p in paths))
        elif args.cmd == "energy":
            if args.trace:
                op = operating_point(args.voltage, cfg.voltage_model,
                                     cfg.ber_profile, cfg.energy_calibration)
                trace = AccessTrace.from_csv(args.trace, cfg.geometry)
                report = energy_mod.energy_of(trace, cfg.energy_table, op,
                                              workload=f"trace:{args.trace}",
                                              n_burst_banks=cfg.n_burst_banks)
                print(json.dumps(report.to_dict(), sort_keys=True, indent=2))
            else:
                if args.size is None:
                    print("energy: --size required unless --trace is given",
                          file=sys.stderr)
                    return 2
                paths = pipeline.stage_energy(cfg, out, args.seed, args.size,
                                              args.voltage)
                print("\n".join(str(p) for p in paths))
        elif args.cmd == "report":
            paths = pipeline.stage_report(cfg, out)
            print("\n".join(str(p) for p in paths))
    except (ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
