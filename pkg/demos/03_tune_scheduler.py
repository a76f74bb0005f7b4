"""Search the scheduler's 20-parameter space for the energy/overhead front.

A deliberately small run (16 individuals, 12 generations on a 7-day trace) so
it finishes in about a minute; scale the trace and generation count up for
real experiments. Prints the front at the start and end of the search and
leaves results.csv / genomes.jsonl in tune_output/ for 04_analyze_front.py.
"""

import numpy as np

from paretune import EvolutionConfig, SchedulerTuningProblem, TraceConfig, generate, run
from paretune.cli import main as paretune_cli

traces = generate(
    TraceConfig(horizon_days=7, computer_count=20, cluster_count=4, task_count=400, seed=8)
)
problem = SchedulerTuningProblem(traces)
config = EvolutionConfig(
    population_size=16,
    generations=12,
    crossover_rate=0.9,
    mutation_rate=0.05,
    seed=7,
)

history = run(problem, config)

def show(pop, label):
    front = sorted(set(m.objectives for m in pop.front0()))
    print(f"{label}: {len(front)} non-dominated point(s)")
    for energy, overhead in front:
        print(f"  {energy / 1000:8.1f} kWh   {overhead:8.0f} s")

show(history[0], "generation 0")
show(history[-1], f"generation {history[-1].generation}")

# The same search through the command line, leaving analysable artifacts:
import json, os

os.makedirs("tune_output", exist_ok=True)
with open("tune_output/config.json", "w") as fh:
    json.dump(
        {
            "evolution": {
                "population_size": 16,
                "generations": 12,
                "crossover_rate": 0.9,
                "mutation_rate": 0.05,
                "seed": 7,
            },
            "traces": {
                "generate": {
                    "horizon_days": 7,
                    "computer_count": 20,
                    "cluster_count": 4,
                    "task_count": 400,
                    "seed": 8,
                }
            },
            "output_dir": "tune_output",
            "checkpoint_interval": 4,
        },
        fh,
        indent=2,
    )
paretune_cli(["optimize", "--config", "tune_output/config.json"])
print("artifacts in tune_output/ (results.csv, genomes.jsonl, checkpoint.json)")
