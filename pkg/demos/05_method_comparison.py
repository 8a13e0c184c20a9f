#!/usr/bin/env python3
"""Small-scale method comparison through the benchmark harness.

Pits the coordinate-descent BO loop against CMA-ES and random search on the
oval with a tight lap budget, writing the same CSV artifacts the full-size
experiments produce. Takes a minute or two.
"""

import tempfile
from pathlib import Path

from racebo import ExperimentConfig, aggregate, run_experiment
from racebo.harness import emit_outputs, method_label

LAPS = 60
SEEDS = (1, 2)

rows = []
out_dir = Path(tempfile.mkdtemp(prefix="racebo-demo-"))
for method in ("cdbo", "cmaes", "random"):
    config = ExperimentConfig(
        track="oval-500", method=method, kernels=10, laps=LAPS,
        warm_starts=10, repeats=len(SEEDS), seeds=SEEDS, sigma0=0.02,
        af_budget=5000,
    )
    records = run_experiment(config)
    curve = aggregate(records)
    emit_outputs({(method_label(method), 10): curve}, records,
                 out_dir / method, config=config)
    rows.append((method_label(method), curve))
    finals = [round(r.final_reward, 3) for r in records]
    print(f"{method_label(method):10s} per-seed finals: {finals}")

print(f"\naverage best reward by lap (mean over {len(SEEDS)} seeds):")
header = "lap " + " ".join(f"{name:>10s}" for name, _ in rows)
print(header)
for lap in range(9, LAPS, 10):
    cells = " ".join(f"{curve.mean[lap]:10.3f}" for _, curve in rows)
    print(f"{lap + 1:3d} {cells}")

print(f"\nCSV artifacts written under {out_dir}")
for path in sorted(out_dir.rglob("*.csv"))[:6]:
    print(" ", path.relative_to(out_dir))
