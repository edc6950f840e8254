"""The command-line pipeline end to end: evolve, verify, reconstruct.

Equivalent shell session::

    mcflab evolve --config circle.json --out run
    mcflab verify --run run
    mcflab reconstruct --run run --levels 64
"""

import json
import tempfile
from pathlib import Path

from mcflab.cli import main

config = {
    "datum": {"kind": "circle", "params": {"R": 1.0}},
    "grid": {"center": [0, 0], "half_width": 2.2, "n": 129},
    "solver": {"T": 0.3, "frame_dt": 0.01},
    "levels": {"values": [0.0]},
    "checks": ["variational", "viscosity", "comparison", "avoidance"],
    "partner": {"offset": 0.25},
    "seed": 1,
}

work = Path(tempfile.mkdtemp(prefix="mcflab-"))
(work / "circle.json").write_text(json.dumps(config, indent=2))
run = work / "run"
print("evolve      ->", main(["evolve", "--config", str(work / "circle.json"), "--out", str(run)]))
print("verify      ->", main(["verify", "--run", str(run)]))
print("reconstruct ->", main(["reconstruct", "--run", str(run), "--levels", "64"]))
report = json.loads((run / "verify" / "report.json").read_text())
print(f"\nverdict {report['verdict']}; outputs under {run}")
for c in report["checks"]:
    print(f"  {c['name']:12s} {c['verdict']}")
