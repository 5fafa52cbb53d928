#!/usr/bin/env python3
"""Run the full ubiquity pipeline for a chosen fiber point and psi.

Selects the block base k, verifies conditions (U)/(R)/(D) with c = 2k, and
writes the per-block report as CSV next to a replayable .run.json sidecar.

Usage: run_ubiquity_pipeline.py [outdir]
"""

import sys
from pathlib import Path

from diophlab.cli import main

OUTDIR = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("out")


def run() -> None:
    OUTDIR.mkdir(parents=True, exist_ok=True)
    out = OUTDIR / "ubiquity_pipeline.csv"
    code = main([
        "select-k",
        "--x", "sqrt2m1",
        "--psi", "q^-0.45",
        "--d", "2",
        "--k-search", "2:64",
        "--j-range", "1:14",
        "--out", str(out),
        "--format", "csv",
    ])
    if code != 0:
        sys.exit(code)
    print(f"wrote {out} and {out}.run.json")
    print((out.with_suffix(".csv")).read_text())


if __name__ == "__main__":
    run()
