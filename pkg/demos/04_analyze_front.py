"""Dissect an optimisation run: Pareto extraction, clustering, attribution.

Expects tune_output/ from 03_tune_scheduler.py (runs it via the CLI if
missing). Shows the three headline parameter sets (minimum overhead, minimum
energy, best equal-weight combination), the density clusters of the front,
and which scaled parameters the sparse regression blames for each objective.
"""

import json
import os

from paretune.cli import main as paretune_cli

if not os.path.exists("tune_output/results.csv"):
    raise SystemExit("run demos/03_tune_scheduler.py first to produce tune_output/")

code = paretune_cli(
    [
        "analyze",
        "--results", "tune_output/results.csv",
        "--eps", "8.0",
        "--min-pts", "3",
        "--weights", "1,1",
    ]
)
assert code == 0

with open("tune_output/summary.json") as fh:
    summary = json.load(fh)
print("\nheadline points:")
for name in ("min_overhead", "min_energy", "combined"):
    p = summary[name]
    print(
        f"  {name:<13} energy {p['energy_wh'] / 1000:8.1f} kWh   "
        f"overhead {p['overhead_s']:8.0f} s   "
        f"(generation {p['generation']}, individual {p['individual']})"
    )

import csv

with open("tune_output/clusters.csv") as fh:
    labels = [row["label"] for row in csv.DictReader(fh)]
print(f"\nfront clusters: {sorted(set(labels))} over {len(labels)} Pareto points")

with open("tune_output/lasso.csv") as fh:
    rows = [r for r in csv.DictReader(fh) if float(r["coefficient"]) != 0.0]
rows.sort(key=lambda r: abs(float(r["coefficient"])), reverse=True)
print("\nstrongest attribution coefficients (scaled parameters):")
for r in rows[:8]:
    print(f"  {r['objective']:<12} {r['feature']:<16} {float(r['coefficient']):10.3f}")
