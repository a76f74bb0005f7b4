"""Problem definitions for the genetic engine.

`SchedulerTuningProblem` maps a scheduler parameter set to the two objectives
(energy attributed to the batch workload, mean task overhead) by running one
simulation per evaluation. `FloatVectorProblem` wraps any vector function of
box-bounded reals, which is how the benchmark functions used in the demos and
tests are driven.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import genome
from .operators import polynomial_mutation_vector, sbx_vector
from .scheduler import RlScheduler
from .sim import SimResult, run_simulation
from .traces import TraceSet


def overhead_objective(result: SimResult) -> float:
    """Mean overhead with unfinished work charged as waiting until the horizon.

    Completed tasks contribute finish - submit - duration. A task still queued,
    suspended or running at the end of the simulation contributes
    max(0, horizon - submit - duration): the overhead it would have if it
    finished right at the horizon. Without this charge a policy that never
    runs anything would score a perfect overhead of zero.
    """
    if not result.tasks:
        return 0.0
    total = 0.0
    for t in result.tasks:
        if t.finish_time is not None:
            total += t.finish_time - t.submit_time - t.duration
        else:
            total += max(0, result.horizon_s - t.submit_time - t.duration)
    return total / len(result.tasks)


@dataclass
class SchedulerTuningProblem:
    """Genomes are RlParameterSet instances; objectives are (energy Wh, overhead s)."""

    traces: TraceSet
    spec: genome.GenomeSpec = None
    suspend_timeout: int = 600
    accounting: str = "htc"

    def __post_init__(self) -> None:
        if self.spec is None:
            self.spec = genome.default_spec()

    def sample(self, rng: np.random.Generator) -> genome.RlParameterSet:
        return genome.sample(self.spec, rng)

    def crossover(
        self,
        a: genome.RlParameterSet,
        b: genome.RlParameterSet,
        rng: np.random.Generator,
    ) -> tuple[genome.RlParameterSet, genome.RlParameterSet]:
        return genome.crossover(a, b, rng, self.spec)

    def mutate(
        self, x: genome.RlParameterSet, rate: float, rng: np.random.Generator
    ) -> genome.RlParameterSet:
        return genome.mutate(x, rate, rng, self.spec)

    def simulate(
        self, params: genome.RlParameterSet, rng: np.random.Generator
    ) -> SimResult:
        scheduler = RlScheduler(params, self.traces.computers, rng)
        return run_simulation(
            self.traces,
            scheduler,
            suspend_timeout=self.suspend_timeout,
            accounting=self.accounting,
        )

    def evaluate(
        self, params: genome.RlParameterSet, rng: np.random.Generator
    ) -> tuple[float, float]:
        result = self.simulate(params, rng)
        return (result.total_energy_wh, overhead_objective(result))


@dataclass
class FloatVectorProblem:
    """Box-bounded real vector problem with SBX crossover and polynomial mutation."""

    evaluate_fn: Callable[[np.ndarray], Sequence[float]]
    lower: np.ndarray
    upper: np.ndarray
    sbx_eta: float = 15.0
    mutation_eta: float = 20.0

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.lower + rng.random(len(self.lower)) * (self.upper - self.lower)

    def crossover(
        self, a: np.ndarray, b: np.ndarray, rng: np.random.Generator
    ) -> tuple[np.ndarray, np.ndarray]:
        return sbx_vector(a, b, self.lower, self.upper, self.sbx_eta, rng)

    def mutate(self, x: np.ndarray, rate: float, rng: np.random.Generator) -> np.ndarray:
        return polynomial_mutation_vector(
            x, self.lower, self.upper, self.mutation_eta, rate, rng
        )

    def evaluate(self, x: np.ndarray, rng: np.random.Generator) -> Sequence[float]:
        return self.evaluate_fn(x)


def zdt1(x: np.ndarray) -> tuple[float, float]:
    """Convex two-objective benchmark on [0,1]^n; optimal front f2 = 1 - sqrt(f1)."""
    f1 = float(x[0])
    g = 1.0 + 9.0 * float(np.sum(x[1:])) / (len(x) - 1)
    return f1, g * (1.0 - np.sqrt(f1 / g))


def make_zdt1(n_var: int = 30) -> FloatVectorProblem:
    return FloatVectorProblem(zdt1, np.zeros(n_var), np.ones(n_var))
