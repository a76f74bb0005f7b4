"""Mixed-type genome for the reinforcement-learning scheduler's tuning knobs.

Twenty genes: booleans, two categorical choices, integers and reals, with two
ordered triples (day thresholds and reward boundaries) kept sorted by repair.
The genome is the unit the genetic engine samples, crosses and mutates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Any, Iterator

import numpy as np

from .operators import polynomial_mutation, sbx_pair

SBX_ETA = 15.0
MUTATION_ETA = 20.0

ENTITY_LEVELS = ("computer", "cluster", "whole")
EPSILON_POLICIES = ("days", "previous", "ratio", "hit")


class ParameterError(ValueError):
    """A parameter value violates its declared bounds or ordering."""


@dataclass(frozen=True)
class Gene:
    name: str
    kind: str  # "bool" | "cat" | "int" | "float"
    lo: float | int | None = None
    hi: float | int | None = None
    choices: tuple[str, ...] | None = None
    group: str | None = None


@dataclass(frozen=True)
class GenomeSpec:
    """Per-gene kinds, bounds and ordering-constraint groups."""

    genes: tuple[Gene, ...]

    def __post_init__(self) -> None:
        for g in self.genes:
            if g.kind in ("int", "float") and (g.lo is None or g.hi is None or g.lo > g.hi):
                raise ValueError(f"gene {g.name}: invalid bounds {g.lo}..{g.hi}")
            if g.kind == "cat" and not g.choices:
                raise ValueError(f"gene {g.name}: categorical gene needs choices")

    def __iter__(self) -> Iterator[Gene]:
        return iter(self.genes)

    def groups(self) -> dict[str, list[Gene]]:
        out: dict[str, list[Gene]] = {}
        for g in self.genes:
            if g.group is not None:
                out.setdefault(g.group, []).append(g)
        return out

    def gene(self, name: str) -> Gene:
        for g in self.genes:
            if g.name == name:
                return g
        raise KeyError(name)

    def replace_bounds(self, name: str, lo: float, hi: float) -> "GenomeSpec":
        """New spec with one numeric gene's bounds overridden."""
        target = self.gene(name)
        if target.kind not in ("int", "float"):
            raise ValueError(f"gene {name} is {target.kind}; only numeric bounds can be overridden")
        genes = tuple(
            Gene(g.name, g.kind, lo, hi, g.choices, g.group) if g.name == name else g
            for g in self.genes
        )
        return GenomeSpec(genes)


def default_spec() -> GenomeSpec:
    """The scheduler tuning space: 20 genes, two ordered triples."""
    genes = (
        Gene("week", "bool"),
        Gene("entity_level", "cat", choices=ENTITY_LEVELS),
        Gene("epsilon_policy", "cat", choices=EPSILON_POLICIES),
        Gene("ranges_1", "int", 0, 999_999, group="ranges"),
        Gene("ranges_2", "int", 0, 999_999, group="ranges"),
        Gene("ranges_3", "int", 0, 999_999, group="ranges"),
        # Reward boundaries span negatives: learned boundaries routinely sit
        # below zero, so a (0, 1] domain would be unrepresentable.
        Gene("reward_1", "float", -1.0, 1.0, group="reward_boundaries"),
        Gene("reward_2", "float", -1.0, 1.0, group="reward_boundaries"),
        Gene("reward_3", "float", -1.0, 1.0, group="reward_boundaries"),
        Gene("epsilon_1", "float", 0.0, 1.0),
        Gene("epsilon_2", "float", 0.0, 1.0),
        Gene("epsilon_3", "float", 0.0, 1.0),
        Gene("sigma", "float", 0.0, 1.0),
        Gene("days", "int", 0, 365),
        Gene("delta", "float", 0.0, 1.0),
        Gene("history", "int", -1, 999_999),
        Gene("gaussian", "bool"),
        Gene("prior", "bool"),
        Gene("threshold", "float", 0.0, 1.0),
        Gene("defer", "bool"),
    )
    return GenomeSpec(genes)


DEFAULT_SPEC = default_spec()


@dataclass(frozen=True)
class RlParameterSet:
    """Decoded scheduler policy: one value per tuning knob.

    week          -- state clock spans a week (hours 0..167) instead of a day
    entity_level  -- placement granularity: computer, cluster or whole system
    epsilon_policy-- what drives the daily epsilon update
    ranges        -- non-decreasing day thresholds for the "days" policy
    reward_boundaries -- non-decreasing reward brackets for epsilon selection
    epsilon_levels-- the three epsilon values the schedule switches between
    sigma         -- weight of computer efficiency in the reward blend
    days          -- apply the delta boost while day <= days (0 disables)
    delta         -- epsilon boost added during the early-days window
    history       -- reward window length per (state, action); -1 = unbounded
    gaussian      -- recency-weight the reward window with a gaussian decay
    prior         -- boost epsilon by 0.1 after an all-negative day
    threshold     -- best/average reward ratio below which epsilon reverts
    defer         -- never place onto a computer during its reboot hour
    """

    week: bool
    entity_level: str
    epsilon_policy: str
    ranges: tuple[int, int, int]
    reward_boundaries: tuple[float, float, float]
    epsilon_levels: tuple[float, float, float]
    sigma: float
    days: int
    delta: float
    history: int
    gaussian: bool
    prior: bool
    threshold: float
    defer: bool

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "week": self.week,
            "entity_level": self.entity_level,
            "epsilon_policy": self.epsilon_policy,
            "ranges": list(self.ranges),
            "reward_boundaries": list(self.reward_boundaries),
            "epsilon_levels": list(self.epsilon_levels),
            "sigma": self.sigma,
            "days": self.days,
            "delta": self.delta,
            "history": self.history,
            "gaussian": self.gaussian,
            "prior": self.prior,
            "threshold": self.threshold,
            "defer": self.defer,
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "RlParameterSet":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ParameterError(f"unknown parameter field(s): {sorted(unknown)}")
        missing = known - set(data)
        if missing:
            raise ParameterError(f"missing parameter field(s): {sorted(missing)}")
        params = cls(
            week=bool(data["week"]),
            entity_level=str(data["entity_level"]),
            epsilon_policy=str(data["epsilon_policy"]),
            ranges=tuple(int(v) for v in data["ranges"]),
            reward_boundaries=tuple(float(v) for v in data["reward_boundaries"]),
            epsilon_levels=tuple(float(v) for v in data["epsilon_levels"]),
            sigma=float(data["sigma"]),
            days=int(data["days"]),
            delta=float(data["delta"]),
            history=int(data["history"]),
            gaussian=bool(data["gaussian"]),
            prior=bool(data["prior"]),
            threshold=float(data["threshold"]),
            defer=bool(data["defer"]),
        )
        params.validate()
        return params

    def validate(self, spec: GenomeSpec = DEFAULT_SPEC) -> None:
        flat = encode(self)
        for g in spec:
            v = flat[g.name]
            if g.kind == "cat" and v not in g.choices:
                raise ParameterError(f"{g.name}: {v!r} not one of {g.choices}")
            if g.kind == "int" and not (isinstance(v, int) and g.lo <= v <= g.hi):
                raise ParameterError(f"{g.name}: {v!r} outside [{g.lo}, {g.hi}]")
            if g.kind == "float" and not (g.lo <= float(v) <= g.hi):
                raise ParameterError(f"{g.name}: {v!r} outside [{g.lo}, {g.hi}]")
        for name, genes in spec.groups().items():
            vals = [flat[g.name] for g in genes]
            if any(a > b for a, b in zip(vals, vals[1:])):
                raise ParameterError(f"{name}: values {vals} must be non-decreasing")


def encode(params: RlParameterSet) -> dict[str, Any]:
    """Flatten a parameter set to one value per gene name."""
    flat: dict[str, Any] = {
        "week": params.week,
        "entity_level": params.entity_level,
        "epsilon_policy": params.epsilon_policy,
        "sigma": params.sigma,
        "days": params.days,
        "delta": params.delta,
        "history": params.history,
        "gaussian": params.gaussian,
        "prior": params.prior,
        "threshold": params.threshold,
        "defer": params.defer,
    }
    for i, v in enumerate(params.ranges, start=1):
        flat[f"ranges_{i}"] = v
    for i, v in enumerate(params.reward_boundaries, start=1):
        flat[f"reward_{i}"] = v
    for i, v in enumerate(params.epsilon_levels, start=1):
        flat[f"epsilon_{i}"] = v
    return flat


def decode(flat: dict[str, Any]) -> RlParameterSet:
    return RlParameterSet(
        week=bool(flat["week"]),
        entity_level=flat["entity_level"],
        epsilon_policy=flat["epsilon_policy"],
        ranges=(int(flat["ranges_1"]), int(flat["ranges_2"]), int(flat["ranges_3"])),
        reward_boundaries=(flat["reward_1"], flat["reward_2"], flat["reward_3"]),
        epsilon_levels=(flat["epsilon_1"], flat["epsilon_2"], flat["epsilon_3"]),
        sigma=flat["sigma"],
        days=int(flat["days"]),
        delta=flat["delta"],
        history=int(flat["history"]),
        gaussian=bool(flat["gaussian"]),
        prior=bool(flat["prior"]),
        threshold=flat["threshold"],
        defer=bool(flat["defer"]),
    )


def repair(flat: dict[str, Any], spec: GenomeSpec = DEFAULT_SPEC) -> dict[str, Any]:
    """Sort every ordering-constraint group ascending; idempotent."""
    out = dict(flat)
    for genes in spec.groups().values():
        names = [g.name for g in genes]
        vals = sorted(out[n] for n in names)
        for n, v in zip(names, vals):
            out[n] = v
    return out


def sample(spec: GenomeSpec, rng: np.random.Generator) -> RlParameterSet:
    """Uniform draw per gene within bounds, then repair."""
    flat: dict[str, Any] = {}
    for g in spec:
        if g.kind == "bool":
            flat[g.name] = bool(rng.random() < 0.5)
        elif g.kind == "cat":
            flat[g.name] = g.choices[int(rng.integers(0, len(g.choices)))]
        elif g.kind == "int":
            flat[g.name] = int(rng.integers(g.lo, g.hi + 1))
        else:
            flat[g.name] = float(g.lo + rng.random() * (g.hi - g.lo))
    return decode(repair(flat, spec))


def crossover(
    a: RlParameterSet,
    b: RlParameterSet,
    rng: np.random.Generator,
    spec: GenomeSpec = DEFAULT_SPEC,
) -> tuple[RlParameterSet, RlParameterSet]:
    """Two children: SBX on numeric genes, uniform exchange on discrete genes.

    Integer genes go through SBX and are rounded back; both children are
    repaired, so ordered triples stay sorted.
    """
    fa, fb = encode(a), encode(b)
    ca, cb = dict(fa), dict(fb)
    for g in spec:
        if g.kind in ("float", "int"):
            x, y = sbx_pair(float(fa[g.name]), float(fb[g.name]), g.lo, g.hi, SBX_ETA, rng)
            if rng.random() < 0.5:
                x, y = y, x
            if g.kind == "int":
                x = int(min(max(round(x), g.lo), g.hi))
                y = int(min(max(round(y), g.lo), g.hi))
            ca[g.name], cb[g.name] = x, y
        else:
            if rng.random() < 0.5:
                ca[g.name], cb[g.name] = fb[g.name], fa[g.name]
    return decode(repair(ca, spec)), decode(repair(cb, spec))


def mutate(
    x: RlParameterSet,
    rate: float,
    rng: np.random.Generator,
    spec: GenomeSpec = DEFAULT_SPEC,
) -> RlParameterSet:
    """Mutate each gene independently with probability `rate`, then repair.

    Reals use polynomial mutation, integers take a uniform signed step within
    the gene span (clamped), booleans flip and categoricals resample among the
    other values.
    """
    flat = encode(x)
    for g in spec:
        if rng.random() >= rate:
            continue
        if g.kind == "float":
            flat[g.name] = polynomial_mutation(flat[g.name], g.lo, g.hi, MUTATION_ETA, rng)
        elif g.kind == "int":
            span = g.hi - g.lo
            step = int(rng.integers(1, span + 1)) if span > 0 else 0
            if rng.random() < 0.5:
                step = -step
            flat[g.name] = int(min(max(flat[g.name] + step, g.lo), g.hi))
        elif g.kind == "bool":
            flat[g.name] = not flat[g.name]
        else:
            others = [c for c in g.choices if c != flat[g.name]]
            flat[g.name] = others[int(rng.integers(0, len(others)))]
    return decode(repair(flat, spec))


def space_size(spec: GenomeSpec, discretisation: int = 100) -> float:
    """Approximate number of distinct genomes.

    Each gene contributes its cardinality (booleans 2, categoricals their
    choice count, integers their range width + 1, reals `discretisation`);
    ordered triples are counted as combinations with repetition since only
    sorted value sets are distinct.
    """
    if discretisation < 2:
        raise ValueError("discretisation must be >= 2")

    def cardinality(g: Gene) -> int:
        if g.kind == "bool":
            return 2
        if g.kind == "cat":
            return len(g.choices)
        if g.kind == "int":
            return int(g.hi) - int(g.lo) + 1
        return discretisation

    total = 1
    grouped = spec.groups()
    grouped_names = {g.name for genes in grouped.values() for g in genes}
    for g in spec:
        if g.name not in grouped_names:
            total *= cardinality(g)
    for name, genes in grouped.items():
        cards = {cardinality(g) for g in genes}
        if len(cards) != 1:
            raise ValueError(f"group {name}: members must share bounds to be counted")
        total *= math.comb(cards.pop() + len(genes) - 1, len(genes))
    return float(total)


def feature_names(spec: GenomeSpec = DEFAULT_SPEC) -> list[str]:
    return [g.name for g in spec]


def to_feature_vector(
    params: RlParameterSet, spec: GenomeSpec = DEFAULT_SPEC
) -> np.ndarray:
    """Numeric view of a genome for regression: booleans 0/1, categoricals by index."""
    flat = encode(params)
    out = []
    for g in spec:
        v = flat[g.name]
        if g.kind == "bool":
            out.append(1.0 if v else 0.0)
        elif g.kind == "cat":
            out.append(float(g.choices.index(v)))
        else:
            out.append(float(v))
    return np.asarray(out)
