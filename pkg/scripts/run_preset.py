#!/usr/bin/env python3
"""Run a shipped preset end to end and render its trajectory figures.

Usage:
    python scripts/run_preset.py vp2d --output out/vp2d
    python scripts/run_preset.py ac3d --output out/ac3d --full-scale

Figures require the companion ttflow-plots package (plots/ directory).
"""

import argparse
import shutil
import subprocess
import sys
from pathlib import Path

from ttflow.cli import main as ttflow_main


def run(argv=None) -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("preset", help="preset name, e.g. vp2d, ac3d_ci, adr4d_ci")
    parser.add_argument("--output", default=None)
    parser.add_argument("--full-scale", action="store_true")
    args = parser.parse_args(argv)

    out = Path(args.output or f"out/{args.preset}")
    cli_args = ["run", args.preset, "--output", str(out)]
    if args.full_scale:
        cli_args.append("--full-scale")
    rc = ttflow_main(cli_args)
    if rc != 0:
        return rc

    csv = out / "results.csv"
    if shutil.which("plots"):
        for kind in ("error", "rank", "conditioning"):
            subprocess.run(["plots", kind, str(csv), "-o", str(out / f"{kind}.svg")],
                           check=True)
        print(f"figures written to {out}")
    else:
        print("plots command not found; install the plots/ package to render figures")
    return 0


if __name__ == "__main__":
    sys.exit(run())
