#!/usr/bin/env python3
"""Run every bundled sweep config into a results directory.

Full trial counts take roughly 15 minutes (the crosstalk scan dominates);
--quick caps every sweep at 30 trials for a ~2 minute smoke run.
"""
import argparse
import os
import sys

from ramseyopt.cli import main as cli_main

CONFIGS = ("budget_sweep", "robustness_scan", "crosstalk_scaling",
           "shot_ratio")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--configs-dir",
                    default=os.path.join(os.path.dirname(__file__), "..",
                                         "configs"))
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--quick", action="store_true",
                    help="cap trials at 30 for a fast smoke run")
    args = ap.parse_args()
    os.makedirs(args.out_dir, exist_ok=True)

    for name in CONFIGS:
        argv = ["sweep", "--config",
                os.path.join(args.configs_dir, f"{name}.json"),
                "--out-dir", args.out_dir, "--threads", str(args.threads)]
        if args.quick and name != "shot_ratio":
            argv += ["--trials", "30"]
        print(f"== {name} ==")
        rc = cli_main(argv)
        if rc != 0:
            return rc
    return 0


if __name__ == "__main__":
    sys.exit(main())
