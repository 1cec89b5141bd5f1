#!/usr/bin/env python3
"""Run every CLI command against a demo project directory.

Usage: python scripts/run_demo_pipeline.py [demo_dir]
(generate the inputs first with scripts/generate_demo_inputs.py)
"""

import sys
from pathlib import Path

from defect_forge.cli import main as cli


def main(base: Path) -> int:
    out = base / "out"
    commands = [
        ["diagram", "--manifest", base / "run.manifest", "--out", out],
        ["check-table1", "--out", out],
        ["tdm", "--psi-i", base / "psi_i.grid", "--psi-f", base / "psi_f.grid",
         "--cell", base / "box.cell", "--out", out],
        ["fitpl", "--data", base / "pl.csv", "--max-peaks", "5", "--out", out],
        ["lifetime", "--data", base / "trpl.csv", "--out", out],
        ["saturation", "--data", base / "saturation.csv", "--out", out],
        ["dose", "--data", base / "dose.csv", "--label", "G",
         "--classify", "16,30,44.5,300", "--damage-threshold", "100", "--out", out],
        ["raster", "--data", base / "raster.csv", "--out", out],
    ]
    for argv in commands:
        print(f"\n$ defect-forge {' '.join(str(a) for a in argv)}")
        code = cli([str(a) for a in argv])
        if code != 0:
            print(f"command failed with exit code {code}", file=sys.stderr)
            return code
    print(f"\nall artifacts under {out}/")
    return 0


if __name__ == "__main__":
    raise SystemExit(main(Path(sys.argv[1] if len(sys.argv) > 1 else "demo")))
