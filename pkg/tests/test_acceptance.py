"""Acceptance gate: every release criterion, at its stated tolerance.

Each test prints one PASS line on success (run with `pytest -v -s` to see
them); a failing criterion fails its test. Oracles here are independent
reimplementations (definition-level peeling, interval arithmetic, closed-form
least squares), never the code paths they check.
"""

import csv
import hashlib
import json
import math
import os
import time

import numpy as np
import pytest

from conftest import make_traces
from paretune import analysis, moo
from paretune.cli import main
from paretune.genome import default_spec, sample
from paretune.problems import make_zdt1, SchedulerTuningProblem
from paretune.scheduler import EpsilonState, FifoScheduler, RlScheduler, end_of_day_epsilon, note_reward
from paretune.sim import (
    Computer,
    InteractiveSession,
    TaskSubmission,
    average_overhead,
    run_simulation,
    total_energy,
)
from paretune.traces import TraceConfig, generate


def announce(n: int, name: str) -> None:
    print(f"ACCEPTANCE {n} ({name}): PASS")


# ---------------------------------------------------------------------------
# 1. non-dominated sorting against a definition-level oracle


def peel_fronts(arr: np.ndarray) -> list[list[int]]:
    """Oracle: repeatedly strip the non-dominated subset, by definition.

    Each round recomputes domination from scratch over the remaining points;
    no bookkeeping is shared with the engine's single-pass algorithm.
    """
    remaining = np.arange(len(arr))
    fronts = []
    while remaining.size:
        sub = arr[remaining]
        le = (sub[:, None, :] <= sub[None, :, :]).all(axis=2)
        lt = (sub[:, None, :] < sub[None, :, :]).any(axis=2)
        dominated = (le & lt).any(axis=0)
        fronts.append([int(i) for i in remaining[~dominated]])
        remaining = remaining[dominated]
    return fronts


def test_criterion_1_sorting_oracle():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    for trial in range(1000):
        n = int(rng.integers(1, 201))
        m = int(rng.integers(2, 5))
        # mixed continuous and low-cardinality grids so duplicates occur
        if trial % 3 == 0:
            arr = rng.integers(0, 6, size=(n, m)).astype(float)
        else:
            arr = rng.random((n, m))
        got = moo.fast_non_dominated_sort(arr)
        assert got == peel_fronts(arr), f"partition mismatch on trial {trial}"
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0, f"sorting oracle took {elapsed:.1f}s (limit 10s)"
    announce(1, f"sorting oracle, 1000 instances in {elapsed:.1f}s")


# ---------------------------------------------------------------------------
# 2. crowding distance correctness


def test_criterion_2_crowding():
    fixture = moo.crowding_distance([(0, 2), (1, 1), (2, 0)])
    assert fixture[0] == math.inf and fixture[2] == math.inf
    assert fixture[1] == 2.0

    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(3, 30))
        f1 = np.sort(rng.choice(10_000, size=n, replace=False)).astype(float)
        f2 = np.sort(rng.choice(10_000, size=n, replace=False))[::-1].astype(float)
        front = list(zip(f1, f2))
        base = moo.crowding_distance(front)
        assert base[0] == math.inf  # objective boundary points
        perm = rng.permutation(n)
        permuted = moo.crowding_distance([front[i] for i in perm])
        for k, i in enumerate(perm):
            assert permuted[k] == pytest.approx(base[i]), "permutation variance"
    announce(2, "crowding fixture exact, permutation-invariant on 100 fronts")


# ---------------------------------------------------------------------------
# 3. ZDT1 convergence


def igd(front, reference) -> float:
    front = np.asarray(front)
    reference = np.asarray(reference)
    d = np.sqrt(((reference[:, None, :] - front[None, :, :]) ** 2).sum(axis=2))
    return float(d.min(axis=1).mean())


def test_criterion_3_zdt1_convergence():
    f1 = np.linspace(0.0, 1.0, 1000)
    reference = np.column_stack([f1, 1.0 - np.sqrt(f1)])
    scores = []
    for seed in (11, 42, 1234):
        start = time.perf_counter()
        config = moo.EvolutionConfig(
            population_size=100,
            generations=250,
            crossover_rate=0.9,
            mutation_rate=1.0 / 30.0,
            seed=seed,
        )
        history = moo.run(make_zdt1(30), config)
        elapsed = time.perf_counter() - start
        assert elapsed < 60.0, f"seed {seed} took {elapsed:.0f}s (limit 60s)"
        front = [m.objectives for m in history[-1].front0()]
        scores.append(igd(front, reference))
    median = sorted(scores)[1]
    assert median <= 0.05, f"median IGD {median:.4f} exceeds 0.05 ({scores})"
    announce(3, f"ZDT1 median IGD {median:.4f} over 3 seeds")


# ---------------------------------------------------------------------------
# 4. ledger conservation and independent energy recomputation


def _energy_from_intervals(result, traces, mode: str) -> float:
    """Oracle: rebuild each computer's timeline from task segments and the
    session trace, then price the states directly."""
    horizon = traces.horizon_s
    by_id = {c.id: c for c in traces.computers}
    htc_seconds = {c.id: 0 for c in traces.computers}
    for task in result.tasks:
        for cid, start, end in task.segments:
            htc_seconds[cid] += end - start
    user_seconds = {c.id: 0 for c in traces.computers}
    for s in traces.sessions:
        user_seconds[s.computer_id] += min(s.logout_time, horizon) - s.login_time

    wh = 0.0
    for comp in traces.computers:
        htc = htc_seconds[comp.id]
        user = user_seconds[comp.id]
        idle = horizon - htc - user
        assert idle >= 0, "timeline overflow"
        wh += (htc / 3600.0) * comp.watts_active
        if mode == "facility":
            wh += (user / 3600.0) * comp.watts_active
            wh += (idle / 3600.0) * comp.watts_idle
    return wh


def test_criterion_4_conservation_and_energy():
    spec = default_spec()
    rng = np.random.default_rng(99)
    for scenario in range(100):
        config = TraceConfig(
            horizon_days=int(rng.integers(1, 5)),
            computer_count=int(rng.integers(3, 11)),
            cluster_count=int(rng.integers(1, 4)),
            task_count=int(rng.integers(5, 60)),
            seed=int(rng.integers(0, 2**32)),
        )
        traces = generate(config)
        params = sample(spec, np.random.default_rng(scenario))
        for mode in ("htc", "facility"):
            sched = RlScheduler(params, traces.computers, np.random.default_rng(scenario))
            result = run_simulation(traces, sched, accounting=mode)
            for cid in result.ledger.time_in_state:
                assert result.ledger.total_seconds(cid) == traces.horizon_s, (
                    f"scenario {scenario}: ledger does not cover the horizon"
                )
            oracle = _energy_from_intervals(result, traces, mode)
            if oracle == 0.0:
                assert result.total_energy_wh == 0.0
            else:
                rel = abs(result.total_energy_wh - oracle) / abs(oracle)
                assert rel < 1e-9, f"scenario {scenario} {mode}: rel err {rel:.2e}"
    announce(4, "ledger exact and interval-arithmetic energy agrees on 100 scenarios")


# ---------------------------------------------------------------------------
# 5. objective formula fixtures


def test_criterion_5_objective_fixtures():
    from paretune.sim import TaskRecord

    recs = [
        TaskRecord("a", 0, 5, 0, 10, "completed"),
        TaskRecord("b", 2, 8, 0, 20, "completed"),
    ]
    assert average_overhead(recs) == 7.5

    computer = Computer(
        id="c0", cluster_id="k0", watts_sleep=1.0, watts_idle=10.0,
        watts_active=100.0, efficiency=1.0, suspendable=False,
    )
    traces = make_traces(
        sessions=[InteractiveSession("c0", 50, 80)],
        tasks=[TaskSubmission("t0", 0, 100)],
        computers=[computer],
        horizon_s=86_400,
    )
    result = run_simulation(traces, FifoScheduler())
    task = result.tasks[0]
    assert task.overhead_s == 80
    assert task.attempts == 1
    announce(5, "overhead fixtures: mean 7.5s, eviction 80s/1 attempt")


# ---------------------------------------------------------------------------
# 6. end-to-end front progress on the desk-scale scenario


def test_criterion_6_end_to_end_front_progress():
    traces = generate(TraceConfig(horizon_days=28, computer_count=50,
                                  cluster_count=5, task_count=2000, seed=3))
    problem = SchedulerTuningProblem(traces)
    start = time.perf_counter()
    for seed in (1, 2, 3):
        config = moo.EvolutionConfig(
            population_size=24,
            generations=30,
            crossover_rate=0.9,
            mutation_rate=0.05,
            seed=seed,
        )
        history = moo.run(problem, config)
        initial, final = history[0], history[-1]
        worst = initial.objective_array().max(axis=0)
        reference = (1.1 * worst[0], 1.1 * worst[1])
        hv_initial = moo.hypervolume_2d(
            [m.objectives for m in initial.front0()], reference
        )
        hv_final = moo.hypervolume_2d(
            [m.objectives for m in final.front0()], reference
        )
        assert hv_final >= hv_initial, (
            f"seed {seed}: hypervolume regressed {hv_initial:.4g} -> {hv_final:.4g}"
        )
        unique_front = sorted(set(m.objectives for m in final.front0()))
        assert len(unique_front) >= 2, f"seed {seed}: no trade-off on the final front"
        for a in unique_front:
            assert not any(moo.dominates(b, a) for b in unique_front if b != a)
    elapsed = time.perf_counter() - start
    assert elapsed < 900.0, f"end-to-end runs took {elapsed:.0f}s (limit 900s)"
    announce(6, f"front hypervolume improved in all 3 seeds ({elapsed:.0f}s)")


# ---------------------------------------------------------------------------
# 7. epsilon machinery boundary behaviour


def test_criterion_7_epsilon_machinery():
    rng = np.random.default_rng(13)
    policies = ["days", "previous", "ratio", "hit"]
    updates_done = 0
    trial = 0
    while updates_done < 1_000_000:
        trial += 1
        policy = sample(default_spec(), rng)
        eps = EpsilonState.initial(policy)
        for day in range(1, 15):
            for _ in range(int(rng.integers(0, 200))):
                note_reward(policy, eps, float(rng.uniform(-1.0, 1.0)))
                updates_done += 1
                assert 0.0 <= eps.epsilon <= 1.0
            end_of_day_epsilon(policy, eps, day)
            assert 0.0 <= eps.epsilon <= 1.0

    # +0.1 prior boost clamps at 1.0
    from test_scheduler import make_policy

    boosted = make_policy(epsilon_policy="previous", prior=True,
                          epsilon_levels=(0.95, 0.95, 0.95))
    eps = EpsilonState.initial(boosted)
    note_reward(boosted, eps, -0.9)
    end_of_day_epsilon(boosted, eps)
    assert eps.epsilon == 1.0

    # delta never fires when the days gene is zero
    inert = make_policy(epsilon_policy="previous", days=0, delta=1.0)
    eps = EpsilonState.initial(inert)
    note_reward(inert, eps, 0.9)
    end_of_day_epsilon(inert, eps, day=1)
    assert eps.epsilon == inert.epsilon_levels[2]
    announce(7, f"epsilon in [0,1] through {updates_done:,} updates; clamps verified")


# ---------------------------------------------------------------------------
# 8. analysis oracles


def dbscan_reachability_oracle(pts: np.ndarray, eps: float, min_pts: int) -> list[int]:
    n = len(pts)
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    within = d2 <= eps * eps
    core = within.sum(axis=1) >= min_pts
    labels = [-1] * n
    cluster = 0
    for i in range(n):
        if not core[i] or labels[i] != -1:
            continue
        member = {i}
        frontier = {i}
        while frontier:
            nxt = set()
            for a in frontier:
                for b in np.nonzero(within[a])[0]:
                    if core[b] and b not in member:
                        member.add(int(b))
                        nxt.add(int(b))
            frontier = nxt
        for a in member:
            labels[a] = cluster
        cluster += 1
    for i in range(n):
        if core[i] or labels[i] != -1:
            continue
        near = [labels[j] for j in np.nonzero(within[i])[0] if core[j]]
        if near:
            labels[i] = min(near)
    return labels


def test_criterion_8_analysis_oracles():
    rng = np.random.default_rng(2025)
    for trial in range(500):
        n = int(rng.integers(2, 101))
        pts = rng.random((n, 2)) * 20.0
        eps = float(rng.uniform(0.3, 4.0))
        min_pts = int(rng.integers(1, 6))
        assert analysis.dbscan(pts, eps, min_pts) == dbscan_reachability_oracle(
            pts, eps, min_pts
        ), f"dbscan mismatch on trial {trial}"

    rng2 = np.random.default_rng(4)
    X = rng2.normal(size=(50, 4))
    y = X @ np.array([1.5, -2.0, 0.0, 0.7]) + 2.0 + rng2.normal(scale=0.01, size=50)
    model = analysis.lasso_fit(X, y, 0.0)
    design = np.column_stack([np.ones(50), X])
    ols, *_ = np.linalg.lstsq(design, y, rcond=None)
    assert abs(model.intercept - ols[0]) < 1e-6
    assert np.abs(np.asarray(model.coefficients) - ols[1:]).max() < 1e-6

    lam_max = analysis.lasso_lambda_max(X, y)
    dead = analysis.lasso_fit(X, y, lam_max * 1.0001)
    assert dead.coefficients == (0.0, 0.0, 0.0, 0.0)

    for trial in range(1000):
        k = int(rng.integers(1, 25))
        objs = [tuple(rng.random(2).tolist()) for _ in range(k)]
        pts = [analysis.FrontPoint(objectives=o) for o in objs]
        chosen = analysis.combined_optimum(pts)
        s0 = analysis.min_max_scale([o[0] for o in objs])
        s1 = analysis.min_max_scale([o[1] for o in objs])
        sums = [a + b for a, b in zip(s0, s1)]
        assert sums[pts.index(chosen)] == pytest.approx(min(sums))
    announce(8, "dbscan/lasso/combined-optimum all match their oracles")


# ---------------------------------------------------------------------------
# 9. reproducibility across process parallelism


def _run_optimize(tmp_path, name: str, jobs: int) -> dict[str, str]:
    config = {
        "evolution": {
            "population_size": 6,
            "generations": 3,
            "crossover_rate": 0.9,
            "mutation_rate": 0.1,
            "seed": 1312,
        },
        "traces": {
            "generate": {
                "horizon_days": 2,
                "computer_count": 6,
                "cluster_count": 2,
                "task_count": 30,
                "seed": 4,
            }
        },
        "output_dir": str(tmp_path / name),
        "checkpoint_interval": 2,
    }
    cfg_path = tmp_path / f"{name}.json"
    with open(cfg_path, "w") as fh:
        json.dump(config, fh)
    assert main(["optimize", "--config", str(cfg_path), "--jobs", str(jobs)]) == 0
    digests = {}
    for artifact in ("results.csv", "genomes.jsonl", "checkpoint.json"):
        with open(tmp_path / name / artifact, "rb") as fh:
            digests[artifact] = hashlib.sha256(fh.read()).hexdigest()
    return digests


def test_criterion_9_parallel_determinism(tmp_path):
    serial_1 = _run_optimize(tmp_path, "serial1", jobs=1)
    serial_2 = _run_optimize(tmp_path, "serial2", jobs=1)
    parallel = _run_optimize(tmp_path, "parallel8", jobs=8)
    assert serial_1 == serial_2, "serial rerun hash mismatch"
    assert serial_1 == parallel, "parallel run hash differs from serial"
    announce(9, "identical output hashes at --jobs 1 (twice) and --jobs 8")
