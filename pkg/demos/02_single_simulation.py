"""Replay one synthetic week through the simulator, twice.

Compares a plain first-free placement baseline against the learning scheduler
with hand-picked parameters, printing the energy attributed to the batch
workload and the mean task overhead for each.
"""

import numpy as np

from paretune import (
    FifoScheduler,
    RlParameterSet,
    RlScheduler,
    TraceConfig,
    generate,
    run_simulation,
)

traces = generate(
    TraceConfig(horizon_days=7, computer_count=20, cluster_count=4, task_count=400, seed=8)
)
print(
    f"scenario: {len(traces.computers)} computers, {len(traces.sessions)} sessions, "
    f"{len(traces.tasks)} tasks over {traces.horizon_s // 86_400} days"
)

baseline = run_simulation(traces, FifoScheduler())
print(
    f"first-free baseline: {baseline.total_energy_wh / 1000:.1f} kWh, "
    f"overhead {baseline.average_overhead_s:.0f} s, "
    f"{baseline.completed_count}/{len(baseline.tasks)} completed"
)

params = RlParameterSet(
    week=False,
    entity_level="cluster",
    epsilon_policy="previous",
    ranges=(0, 30, 999_999),
    reward_boundaries=(-0.58, 0.0, 0.45),
    epsilon_levels=(0.9, 0.4, 0.05),
    sigma=0.2,
    days=0,
    delta=0.0,
    history=500,
    gaussian=False,
    prior=True,
    threshold=0.9,
    defer=True,
)
scheduler = RlScheduler(params, traces.computers, np.random.default_rng(0))
learned = run_simulation(traces, scheduler)
print(
    f"learning scheduler:  {learned.total_energy_wh / 1000:.1f} kWh, "
    f"overhead {learned.average_overhead_s:.0f} s, "
    f"{learned.completed_count}/{len(learned.tasks)} completed"
)

for row in scheduler.diary[:5]:
    avg = "n/a" if row["avg_reward"] is None else f"{row['avg_reward']:.3f}"
    print(
        f"  day {row['day']}: epsilon {row['epsilon']:.3f} "
        f"({row['policy_branch']}, mean reward {avg})"
    )
