"""paretune: multi-objective tuning of an energy-aware HTC scheduler.

A trace-driven simulator replays interactive sessions and batch submissions
over a desktop fleet; an epsilon-greedy learning scheduler decides placements;
the NSGA-II engine searches the scheduler's parameter space for the Pareto
frontier between workload energy and mean task overhead; the analysis tools
dissect the resulting front.
"""

from .analysis import (
    FrontPoint,
    LassoModel,
    combined_optimum,
    dbscan,
    extract_pareto,
    lasso_fit,
    min_max_scale,
)
from .genome import GenomeSpec, RlParameterSet, default_spec, space_size
from .moo import (
    EvolutionConfig,
    Individual,
    Population,
    binary_tournament,
    crowded_compare,
    crowding_distance,
    dominates,
    fast_non_dominated_sort,
    hypervolume_2d,
    make_new_population,
    nsga2_step,
    run,
)
from .problems import FloatVectorProblem, SchedulerTuningProblem, make_zdt1, zdt1
from .scheduler import (
    EpsilonState,
    FifoScheduler,
    RlScheduler,
    action_estimate,
    compute_reward,
    end_of_day_epsilon,
)
from .sim import (
    Computer,
    EnergyLedger,
    InteractiveSession,
    SimResult,
    TaskRecord,
    TaskSubmission,
    TraceValidationError,
    average_overhead,
    run_simulation,
    total_energy,
)
from .traces import TraceConfig, TraceSet, generate, load, save

__version__ = "0.1.0"

__all__ = [
    "Computer",
    "EnergyLedger",
    "EpsilonState",
    "EvolutionConfig",
    "FifoScheduler",
    "FloatVectorProblem",
    "FrontPoint",
    "GenomeSpec",
    "Individual",
    "InteractiveSession",
    "LassoModel",
    "Population",
    "RlParameterSet",
    "RlScheduler",
    "SchedulerTuningProblem",
    "SimResult",
    "TaskRecord",
    "TaskSubmission",
    "TraceConfig",
    "TraceSet",
    "TraceValidationError",
    "action_estimate",
    "average_overhead",
    "binary_tournament",
    "combined_optimum",
    "compute_reward",
    "crowded_compare",
    "crowding_distance",
    "dbscan",
    "default_spec",
    "dominates",
    "end_of_day_epsilon",
    "extract_pareto",
    "fast_non_dominated_sort",
    "generate",
    "hypervolume_2d",
    "lasso_fit",
    "load",
    "make_new_population",
    "make_zdt1",
    "min_max_scale",
    "nsga2_step",
    "run",
    "run_simulation",
    "save",
    "space_size",
    "total_energy",
    "zdt1",
]
