"""Elitist multi-objective genetic algorithm (NSGA-II) over pluggable problems.

The engine is generic: a problem supplies genome sampling, variation operators
and an evaluation function returning a fixed-length vector of minimisation
objectives. All randomness is derived from one 64-bit seed through named
substreams keyed by (seed, stream, generation, index), so a run is bit-for-bit
reproducible regardless of how many worker processes evaluate individuals.
"""

from __future__ import annotations

import copy
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Protocol, Sequence

import numpy as np

Objectives = tuple[float, ...]

# Substream tags (second entry of the SeedSequence entropy key).
_STREAM_INIT = 0
_STREAM_VARIATION = 1
_STREAM_EVAL = 2

_SEED_MASK = 0xFFFFFFFFFFFFFFFF

# Fallback sentinel when an evaluation fails before any success was observed.
_FAILURE_FALLBACK = 1e18


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a named point in the run (seed, *key)."""
    return np.random.default_rng(np.random.SeedSequence((seed & _SEED_MASK, *key)))


class Problem(Protocol):
    """Contract a problem must satisfy to be driven by the engine."""

    def sample(self, rng: np.random.Generator) -> Any: ...

    def evaluate(self, genome: Any, rng: np.random.Generator) -> Sequence[float]: ...

    def crossover(
        self, a: Any, b: Any, rng: np.random.Generator
    ) -> tuple[Any, Any]: ...

    def mutate(self, genome: Any, rate: float, rng: np.random.Generator) -> Any: ...


@dataclass
class Individual:
    """One candidate solution plus the attributes the selection machinery needs.

    `rank` is 1-based (1 = Pareto front of its population); `crowding` is the
    NSGA-II density estimate, +inf on front boundaries. Both are only
    meaningful after a ranking pass.
    """

    genome: Any
    objectives: Objectives | None = None
    rank: int | None = None
    crowding: float | None = None
    failed: bool = False


@dataclass
class Population:
    members: list[Individual]
    generation: int = 0

    def __len__(self) -> int:
        return len(self.members)

    def objective_array(self) -> np.ndarray:
        return np.asarray([m.objectives for m in self.members], dtype=float)

    def front0(self) -> list[Individual]:
        """Members of the current first front (requires ranks assigned)."""
        return [m for m in self.members if m.rank == 1]


@dataclass
class EvolutionConfig:
    population_size: int
    generations: int
    crossover_rate: float = 0.9
    mutation_rate: float = 0.05
    seed: int = 0
    stall_window: int | None = None

    def __post_init__(self) -> None:
        if self.population_size < 4 or self.population_size % 2 != 0:
            raise ValueError("population_size must be an even integer >= 4")
        if self.generations < 1:
            raise ValueError("generations must be >= 1")
        for name in ("crossover_rate", "mutation_rate"):
            r = getattr(self, name)
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {r}")
        if self.stall_window is not None and self.stall_window < 1:
            raise ValueError("stall_window must be None or >= 1")


def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True iff `a` is no worse than `b` everywhere and strictly better somewhere.

    All objectives are minimised. Raises on length mismatch.
    """
    if len(a) != len(b):
        raise ValueError(f"objective length mismatch: {len(a)} vs {len(b)}")
    no_worse = True
    better = False
    for x, y in zip(a, b):
        if x > y:
            no_worse = False
            break
        if x < y:
            better = True
    return no_worse and better


def fast_non_dominated_sort(objectives: Sequence[Sequence[float]]) -> list[list[int]]:
    """Partition objective vectors into successive non-domination fronts.

    Returns an ordered list of index lists; front 0 is the Pareto front of the
    input. Index order is preserved within every front, so the result is a
    deterministic function of the input sequence. Empty input yields an empty
    partition; NaN entries or ragged rows are rejected.
    """
    n = len(objectives)
    if n == 0:
        return []
    arr = np.asarray(objectives, dtype=float)
    if arr.ndim != 2:
        raise ValueError("objective vectors must share one common length")
    if np.isnan(arr).any():
        raise ValueError("objective vectors must not contain NaN")

    # dom[i, j] == True iff i dominates j.
    le = (arr[:, None, :] <= arr[None, :, :]).all(axis=2)
    lt = (arr[:, None, :] < arr[None, :, :]).any(axis=2)
    dom = le & lt

    dominated_by = dom.sum(axis=0)
    fronts: list[list[int]] = []
    current = [int(i) for i in np.nonzero(dominated_by == 0)[0]]
    counts = dominated_by.copy()
    while current:
        fronts.append(current)
        nxt: list[int] = []
        for p in current:
            for q in np.nonzero(dom[p])[0]:
                counts[q] -= 1
                if counts[q] == 0:
                    nxt.append(int(q))
        current = sorted(nxt)
    return fronts


def crowding_distance(front: Sequence[Sequence[float]]) -> list[float]:
    """Density estimate for each member of one non-domination front.

    Per objective, the front is stably sorted; both extreme points receive
    +inf and each interior point accumulates the normalised gap between its
    sorted neighbours. An objective with zero range contributes nothing.
    Output order matches input order.
    """
    n = len(front)
    if n == 0:
        return []
    if n <= 2:
        return [math.inf] * n
    arr = np.asarray(front, dtype=float)
    dist = np.zeros(n)
    for j in range(arr.shape[1]):
        order = np.argsort(arr[:, j], kind="stable")
        vals = arr[order, j]
        dist[order[0]] = math.inf
        dist[order[-1]] = math.inf
        span = vals[-1] - vals[0]
        if span == 0.0:
            continue
        dist[order[1:-1]] += (vals[2:] - vals[:-2]) / span
    return dist.tolist()


def crowded_compare(i: Individual, j: Individual) -> int:
    """Preference order on ranked individuals: -1 if i wins, 1 if j wins, 0 tie.

    Lower rank wins; equal ranks fall back to larger crowding distance. Ties
    are reported as 0 and left to the caller (tournaments flip a seeded coin).
    """
    for ind in (i, j):
        if ind.rank is None or ind.crowding is None:
            raise ValueError("crowded_compare requires ranked, crowded individuals")
    if i.rank != j.rank:
        return -1 if i.rank < j.rank else 1
    if i.crowding != j.crowding:
        return -1 if i.crowding > j.crowding else 1
    return 0


def binary_tournament(pop: Population, rng: np.random.Generator) -> Individual:
    """Draw two members uniformly (with replacement) and keep the preferred one.

    The comparison ties are resolved by one extra coin flip from `rng`.
    """
    n = len(pop.members)
    if n < 2:
        raise ValueError("binary tournament needs a population of at least 2")
    a, b = rng.integers(0, n, size=2)
    mi, mj = pop.members[a], pop.members[b]
    cmp = crowded_compare(mi, mj)
    if cmp < 0:
        return mi
    if cmp > 0:
        return mj
    return mi if rng.random() < 0.5 else mj


def make_new_population(
    parents: Population,
    problem: Problem,
    config: EvolutionConfig,
    rng: np.random.Generator,
) -> Population:
    """Produce N offspring via tournament selection, crossover and mutation.

    Crossover fires with probability `crossover_rate` per selected pair;
    otherwise the winners are copied through. Mutation is always invoked with
    the per-gene rate, so `mutation_rate = 0` leaves genomes untouched.
    Offspring are unevaluated.
    """
    n = config.population_size
    offspring: list[Individual] = []
    while len(offspring) < n:
        p1 = binary_tournament(parents, rng)
        p2 = binary_tournament(parents, rng)
        if rng.random() < config.crossover_rate:
            g1, g2 = problem.crossover(p1.genome, p2.genome, rng)
        else:
            g1, g2 = copy.deepcopy(p1.genome), copy.deepcopy(p2.genome)
        for g in (g1, g2):
            if len(offspring) < n:
                offspring.append(Individual(problem.mutate(g, config.mutation_rate, rng)))
    return Population(offspring, parents.generation + 1)


def assign_ranks_and_crowding(members: list[Individual]) -> list[list[int]]:
    """Recompute rank (1-based) and crowding distance in place; returns the fronts."""
    objs = [m.objectives for m in members]
    fronts = fast_non_dominated_sort(objs)
    for level, front in enumerate(fronts):
        dists = crowding_distance([objs[i] for i in front])
        for i, d in zip(front, dists):
            members[i].rank = level + 1
            members[i].crowding = d
    return fronts


def nsga2_step(
    parents: Population, offspring: Population, config: EvolutionConfig
) -> Population:
    """Environmental selection: merge parents and offspring, keep the best N.

    Whole fronts are admitted while they fit; the straddling front is sorted
    by descending crowding distance (stable, so front order breaks ties) and
    truncated to fill the population exactly. Ranks and crowding are then
    recomputed on the survivors.
    """
    n = config.population_size
    if len(parents) != n or len(offspring) != n:
        raise ValueError(
            f"nsga2_step needs two populations of size {n}, "
            f"got {len(parents)} and {len(offspring)}"
        )
    merged = parents.members + offspring.members
    for m in merged:
        if m.objectives is None:
            raise ValueError("nsga2_step requires fully evaluated populations")
    objs = [m.objectives for m in merged]
    fronts = fast_non_dominated_sort(objs)

    selected: list[Individual] = []
    for front in fronts:
        if len(selected) + len(front) <= n:
            selected.extend(merged[i] for i in front)
            if len(selected) == n:
                break
        else:
            dists = crowding_distance([objs[i] for i in front])
            order = np.argsort(-np.asarray(dists), kind="stable")
            selected.extend(merged[front[k]] for k in order[: n - len(selected)])
            break

    survivors = [
        Individual(m.genome, m.objectives, failed=m.failed) for m in selected
    ]
    assign_ranks_and_crowding(survivors)
    return Population(survivors, parents.generation + 1)


def hypervolume_2d(
    points: Sequence[Sequence[float]], reference: Sequence[float]
) -> float:
    """Area dominated by a set of 2-D minimisation points up to a reference point.

    Points not strictly better than the reference in both coordinates
    contribute nothing.
    """
    rx, ry = float(reference[0]), float(reference[1])
    inside = sorted((float(p[0]), float(p[1])) for p in points if p[0] < rx and p[1] < ry)
    hv = 0.0
    cur_y = ry
    for x, y in inside:
        if y < cur_y:
            hv += (rx - x) * (cur_y - y)
            cur_y = y
    return hv


class _WorkerState:
    problem: Problem | None = None


def _init_worker(problem: Problem) -> None:
    _WorkerState.problem = problem


def _evaluate_remote(args: tuple[int, Any, int, int]) -> tuple[int, Objectives | None]:
    idx, genome, seed, generation = args
    rng = substream(seed, _STREAM_EVAL, generation, idx)
    try:
        objs = tuple(float(v) for v in _WorkerState.problem.evaluate(genome, rng))
        if not all(math.isfinite(v) for v in objs):
            return idx, None
        return idx, objs
    except Exception:
        return idx, None


def _evaluate_population(
    pop: Population,
    problem: Problem,
    seed: int,
    worst_seen: list[float],
    executor: ProcessPoolExecutor | None,
) -> None:
    """Evaluate all members in place, using (seed, generation, index) substreams.

    Failed or non-finite evaluations receive sentinel objectives of 10x the
    worst value observed so far per objective (a large constant before any
    success), so a crashing genome loses every comparison instead of aborting
    the run.
    """
    gen = pop.generation
    results: dict[int, Objectives | None] = {}
    if executor is not None:
        jobs = [(i, m.genome, seed, gen) for i, m in enumerate(pop.members)]
        for idx, objs in executor.map(_evaluate_remote, jobs):
            results[idx] = objs
    else:
        for i, m in enumerate(pop.members):
            rng = substream(seed, _STREAM_EVAL, gen, i)
            try:
                objs = tuple(float(v) for v in problem.evaluate(m.genome, rng))
                results[i] = objs if all(math.isfinite(v) for v in objs) else None
            except Exception:
                results[i] = None

    succeeded = [objs for objs in results.values() if objs is not None]
    if succeeded:
        m_len = len(succeeded[0])
        while len(worst_seen) < m_len:
            worst_seen.append(-math.inf)
        for objs in succeeded:
            for j, v in enumerate(objs):
                worst_seen[j] = max(worst_seen[j], v)

    sentinel = tuple(
        10.0 * w if math.isfinite(w) and w > 0 else _FAILURE_FALLBACK
        for w in (worst_seen or [-math.inf, -math.inf])
    )
    for i, member in enumerate(pop.members):
        objs = results[i]
        if objs is None:
            member.objectives = sentinel
            member.failed = True
        else:
            member.objectives = objs


def run(
    problem: Problem,
    config: EvolutionConfig,
    *,
    n_jobs: int = 1,
    initial: Population | None = None,
    on_generation: Callable[[Population], None] | None = None,
) -> list[Population]:
    """Evolve a population and return the per-generation history.

    Generation 0 is sampled uniformly from the problem's genome sampler (or
    taken from `initial`, already evaluated and ranked, when resuming). Each
    subsequent generation applies tournament selection, crossover, mutation
    and elitist environmental selection. The optional `stall_window` stops
    early when the first-front hypervolume has not improved over that many
    generations. The returned history holds one ranked population per
    generation, including generation 0.
    """
    seed = config.seed
    executor: ProcessPoolExecutor | None = None
    if n_jobs > 1:
        executor = ProcessPoolExecutor(
            max_workers=n_jobs, initializer=_init_worker, initargs=(problem,)
        )
    try:
        worst_seen: list[float] = []
        if initial is None:
            init_rng = substream(seed, _STREAM_INIT)
            members = [
                Individual(problem.sample(init_rng))
                for _ in range(config.population_size)
            ]
            pop = Population(members, 0)
            _evaluate_population(pop, problem, seed, worst_seen, executor)
            assign_ranks_and_crowding(pop.members)
        else:
            pop = initial
            arr = pop.objective_array()
            for j in range(arr.shape[1]):
                while len(worst_seen) <= j:
                    worst_seen.append(-math.inf)
                worst_seen[j] = max(worst_seen[j], float(arr[:, j].max()))

        history = [pop]
        if on_generation is not None and initial is None:
            on_generation(pop)

        hv_reference: tuple[float, float] | None = None
        hv_track: list[float] = []
        if config.stall_window is not None:
            arr = pop.objective_array()
            worst = arr.max(axis=0)
            hv_reference = tuple(
                1.1 * w if w > 0 else w + 1.0 for w in worst[:2]
            )
            front = [m.objectives for m in pop.front0()]
            hv_track.append(hypervolume_2d(front, hv_reference))

        for gen in range(pop.generation + 1, config.generations + 1):
            var_rng = substream(seed, _STREAM_VARIATION, gen)
            children = make_new_population(pop, problem, config, var_rng)
            _evaluate_population(children, problem, seed, worst_seen, executor)
            pop = nsga2_step(pop, children, config)
            history.append(pop)
            if on_generation is not None:
                on_generation(pop)

            if hv_reference is not None:
                front = [m.objectives for m in pop.front0()]
                hv_track.append(hypervolume_2d(front, hv_reference))
                w = config.stall_window
                if len(hv_track) > w and hv_track[-1] - hv_track[-1 - w] <= 1e-12:
                    break
        return history
    finally:
        if executor is not None:
            executor.shutdown()
