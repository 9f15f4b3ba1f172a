"""End-to-end command-line workflow, driven from Python.

Simulates a series to CSV, fits it, scores the estimate against the
simulated truth, and prints the resulting files.  The same steps work
from a shell with the ``covseg`` executable.
"""

import json
import tempfile
from pathlib import Path

from covseg.cli import main

workdir = Path(tempfile.mkdtemp(prefix="covseg_demo_"))
series = workdir / "series.csv"
fit = workdir / "fit.json"
metrics = workdir / "metrics.json"

main(["simulate", "--output", str(series), "--setting", "1",
      "--T", "60", "--p", "4", "--m", "1", "--seed", "9"])
print(f"wrote {series} and {series.name}.truth.json")

main(["fit", "--input", str(series), "--output", str(fit),
      "--lambda", "0.2", "--lambda1", "4e-4", "--lambda2", "0.2",
      "--tol", "1e-3"])
bundle = json.loads(fit.read_text())
print(f"fit found change points at {bundle['changepoints']}")

main(["metrics", "--input", str(fit), "--truth", str(series) + ".truth.json",
      "--output", str(metrics)])
print("metrics vs truth:", json.loads(metrics.read_text()))

print(f"\nartifacts in {workdir}:")
for f in sorted(workdir.iterdir()):
    print(f"  {f.name}")
