"""Command-line entry points: optimise, simulate, generate traces, analyse.

Exit codes: 0 success, 2 configuration/validation problems, 1 internal errors.
Every command is reproducible from its config and seed; output files are
written atomically (temp file then rename).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from typing import Any, Sequence

import numpy as np

from . import analysis, genome, moo, traces
from .problems import SchedulerTuningProblem
from .scheduler import RlScheduler
from .sim import TraceValidationError, run_simulation

CHECKPOINT_FORMAT = "paretune-checkpoint-1"
RESULTS_HEADER = ["generation", "individual", "energy_wh", "overhead_s", "rank", "crowding"]


class CliError(Exception):
    """User-facing validation problem; maps to exit code 2."""


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _load_json(path: str) -> Any:
    if not os.path.exists(path):
        raise CliError(f"file not found: {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON ({exc})") from None


# ---------------------------------------------------------------------------
# optimize


def _evolution_config(data: dict, seed_override: int | None) -> moo.EvolutionConfig:
    if not isinstance(data, dict):
        raise CliError("config: 'evolution' must be an object")
    allowed = {
        "population_size", "generations", "crossover_rate",
        "mutation_rate", "seed", "stall_window",
    }
    unknown = set(data) - allowed
    if unknown:
        raise CliError(f"config: unknown evolution field(s): {sorted(unknown)}")
    merged = dict(data)
    if seed_override is not None:
        merged["seed"] = seed_override
    try:
        return moo.EvolutionConfig(**merged)
    except (TypeError, ValueError) as exc:
        raise CliError(f"config: {exc}") from None


def _build_spec(overrides: dict | None) -> genome.GenomeSpec:
    spec = genome.default_spec()
    if not overrides:
        return spec
    for name, bounds in overrides.items():
        try:
            lo, hi = bounds
            spec = spec.replace_bounds(name, lo, hi)
        except (KeyError, ValueError, TypeError) as exc:
            raise CliError(f"config: genome override {name!r}: {exc}") from None
    return spec


def _load_traces(spec: dict) -> traces.TraceSet:
    if not isinstance(spec, dict) or not ({"generate", "dir"} & set(spec)):
        raise CliError("config: 'traces' must contain 'generate' or 'dir'")
    if "dir" in spec:
        return traces.load(spec["dir"])
    try:
        cfg = traces.TraceConfig.from_json_dict(spec["generate"])
    except (TypeError, ValueError) as exc:
        raise CliError(f"config: traces.generate: {exc}") from None
    return traces.generate(cfg)


def _format_float(v: float) -> str:
    return repr(float(v))


def _results_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(RESULTS_HEADER)
    for r in rows:
        writer.writerow(
            [
                r["generation"],
                r["individual"],
                _format_float(r["energy_wh"]),
                _format_float(r["overhead_s"]),
                r["rank"],
                _format_float(r["crowding"]),
            ]
        )
    return buf.getvalue()


def _genomes_text(lines: list[dict]) -> str:
    return "".join(
        json.dumps(entry, sort_keys=True, separators=(",", ":")) + "\n"
        for entry in lines
    )


def _checkpoint_text(seed: int, pop: moo.Population) -> str:
    payload = {
        "format": CHECKPOINT_FORMAT,
        "seed": seed,
        "population_size": len(pop),
        "generation": pop.generation,
        "population": [
            {
                "params": m.genome.to_json_dict(),
                "objectives": list(m.objectives),
                "rank": m.rank,
                "crowding": m.crowding,
            }
            for m in pop.members
        ],
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def _load_checkpoint(path: str, config: moo.EvolutionConfig) -> moo.Population:
    if not os.path.exists(path):
        raise CliError(f"cannot resume: checkpoint not found at {path}")
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        if data.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"unexpected format {data.get('format')!r}")
        if data["seed"] != config.seed:
            raise ValueError(
                f"checkpoint seed {data['seed']} != configured seed {config.seed}"
            )
        if data["population_size"] != config.population_size:
            raise ValueError("population size mismatch")
        members = [
            moo.Individual(
                genome=genome.RlParameterSet.from_json_dict(entry["params"]),
                objectives=tuple(float(v) for v in entry["objectives"]),
                rank=int(entry["rank"]),
                crowding=float(entry["crowding"]),
            )
            for entry in data["population"]
        ]
        if len(members) != config.population_size:
            raise ValueError("population entry count mismatch")
        return moo.Population(members, int(data["generation"]))
    except CliError:
        raise
    except Exception as exc:
        raise CliError(f"refusing to resume from corrupt checkpoint {path}: {exc}") from None


def _read_existing_rows(path: str, up_to_generation: int) -> list[dict]:
    if not os.path.exists(path):
        raise CliError(f"cannot resume: missing {path}")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULTS_HEADER:
            raise CliError(f"cannot resume: {path} has unexpected columns")
        for raw in reader:
            if int(raw["generation"]) <= up_to_generation:
                rows.append(
                    {
                        "generation": int(raw["generation"]),
                        "individual": int(raw["individual"]),
                        "energy_wh": float(raw["energy_wh"]),
                        "overhead_s": float(raw["overhead_s"]),
                        "rank": int(raw["rank"]),
                        "crowding": float(raw["crowding"]),
                    }
                )
    return rows


def _read_existing_genomes(path: str, up_to_generation: int) -> list[dict]:
    if not os.path.exists(path):
        raise CliError(f"cannot resume: missing {path}")
    lines = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                entry = json.loads(line)
                if entry["generation"] <= up_to_generation:
                    lines.append(entry)
    return lines


def cmd_optimize(args: argparse.Namespace) -> int:
    config_data = _load_json(args.config)
    if not isinstance(config_data, dict):
        raise CliError("config: top level must be an object")
    evo = _evolution_config(config_data.get("evolution", {}), args.seed)
    spec = _build_spec(config_data.get("genome_overrides"))
    trace_set = _load_traces(config_data.get("traces", {}))
    sim_cfg = config_data.get("simulator", {})
    out_dir = config_data.get("output_dir")
    if not out_dir:
        raise CliError("config: 'output_dir' is required")
    interval = int(config_data.get("checkpoint_interval", 5))
    if interval < 1:
        raise CliError("config: checkpoint_interval must be >= 1")

    problem = SchedulerTuningProblem(
        traces=trace_set,
        spec=spec,
        suspend_timeout=int(sim_cfg.get("suspend_timeout", 600)),
        accounting=sim_cfg.get("accounting", "htc"),
    )
    os.makedirs(out_dir, exist_ok=True)
    results_path = os.path.join(out_dir, "results.csv")
    genomes_path = os.path.join(out_dir, "genomes.jsonl")
    checkpoint_path = os.path.join(out_dir, "checkpoint.json")

    initial = None
    rows: list[dict] = []
    genome_lines: list[dict] = []
    if args.resume:
        initial = _load_checkpoint(checkpoint_path, evo)
        rows = _read_existing_rows(results_path, initial.generation)
        genome_lines = _read_existing_genomes(genomes_path, initial.generation)

    def flush(pop: moo.Population) -> None:
        _atomic_write(results_path, _results_text(rows))
        _atomic_write(genomes_path, _genomes_text(genome_lines))
        _atomic_write(checkpoint_path, _checkpoint_text(evo.seed, pop))

    def on_generation(pop: moo.Population) -> None:
        for i, member in enumerate(pop.members):
            rows.append(
                {
                    "generation": pop.generation,
                    "individual": i,
                    "energy_wh": member.objectives[0],
                    "overhead_s": member.objectives[1],
                    "rank": member.rank,
                    "crowding": member.crowding,
                }
            )
            genome_lines.append(
                {
                    "generation": pop.generation,
                    "individual": i,
                    "params": member.genome.to_json_dict(),
                }
            )
        if pop.generation % interval == 0:
            flush(pop)

    history = moo.run(
        problem, evo, n_jobs=args.jobs, initial=initial, on_generation=on_generation
    )
    flush(history[-1])
    front = history[-1].front0()
    print(
        f"completed generation {history[-1].generation}: "
        f"{len(front)} point(s) on the first front, results in {out_dir}"
    )
    return 0


# ---------------------------------------------------------------------------
# simulate


def cmd_simulate(args: argparse.Namespace) -> int:
    params_data = _load_json(args.params)
    try:
        params = genome.RlParameterSet.from_json_dict(params_data)
    except genome.ParameterError as exc:
        raise CliError(f"{args.params}: {exc}") from None
    trace_set = traces.load(args.traces)
    rng = moo.substream(args.seed, 3)
    scheduler = RlScheduler(params, trace_set.computers, rng)
    result = run_simulation(
        trace_set,
        scheduler,
        suspend_timeout=args.suspend_timeout,
        accounting=args.accounting,
    )
    text = json.dumps(result.to_json_dict(), sort_keys=True, indent=2) + "\n"
    if args.out:
        _atomic_write(args.out, text)
    else:
        sys.stdout.write(text)
    if args.diary:
        scheduler.write_diary(args.diary)
    return 0


# ---------------------------------------------------------------------------
# gen-traces


def cmd_gen_traces(args: argparse.Namespace) -> int:
    if args.config:
        data = _load_json(args.config)
        try:
            cfg = traces.TraceConfig.from_json_dict(data)
        except (TypeError, ValueError) as exc:
            raise CliError(f"{args.config}: {exc}") from None
    else:
        cfg = traces.TraceConfig()
    if args.seed is not None:
        cfg = traces.TraceConfig.from_json_dict(
            {**cfg.__dict__, "session_intensity": cfg.session_intensity, "seed": args.seed}
        )
    trace_set = traces.generate(cfg)
    traces.save(trace_set, args.out)
    print(
        f"wrote {len(trace_set.computers)} computers, {len(trace_set.sessions)} sessions, "
        f"{len(trace_set.tasks)} tasks to {args.out}"
    )
    return 0


# ---------------------------------------------------------------------------
# analyze


def _read_results(path: str) -> list[dict]:
    if not os.path.exists(path):
        raise CliError(f"results file not found: {path}")
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULTS_HEADER:
            raise CliError(f"{path}: unexpected columns {reader.fieldnames}")
        for raw in reader:
            rows.append(
                {
                    "generation": int(raw["generation"]),
                    "individual": int(raw["individual"]),
                    "energy_wh": float(raw["energy_wh"]),
                    "overhead_s": float(raw["overhead_s"]),
                }
            )
    if not rows:
        raise CliError(f"{path}: no data rows")
    return rows


def _read_genomes(path: str) -> dict[tuple[int, int], genome.RlParameterSet]:
    if not os.path.exists(path):
        raise CliError(f"genome file not found: {path} (written by `optimize`)")
    table = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            entry = json.loads(line)
            key = (int(entry["generation"]), int(entry["individual"]))
            table[key] = genome.RlParameterSet.from_json_dict(entry["params"])
    return table


def _point_payload(p: analysis.FrontPoint) -> dict:
    return {
        "generation": p.generation,
        "individual": p.individual,
        "energy_wh": p.objectives[0],
        "overhead_s": p.objectives[1],
        "parameters": p.parameters.to_json_dict(),
    }


def _summary_table(named: list[tuple[str, analysis.FrontPoint]]) -> str:
    lines = []
    header = f"{'parameter':<18}" + "".join(f"{name:>16}" for name, _ in named)
    lines.append(header)
    lines.append("-" * len(header))
    lines.append(
        f"{'energy_wh':<18}"
        + "".join(f"{p.objectives[0]:>16.2f}" for _, p in named)
    )
    lines.append(
        f"{'overhead_s':<18}"
        + "".join(f"{p.objectives[1]:>16.2f}" for _, p in named)
    )
    for field_name in genome.feature_names():
        row = f"{field_name:<18}"
        for _, p in named:
            value = genome.encode(p.parameters)[field_name]
            if isinstance(value, float):
                row += f"{value:>16.4f}"
            else:
                row += f"{str(value):>16}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def cmd_analyze(args: argparse.Namespace) -> int:
    rows = _read_results(args.results)
    genomes_path = args.genomes or os.path.join(
        os.path.dirname(os.path.abspath(args.results)), "genomes.jsonl"
    )
    params_table = _read_genomes(genomes_path)
    try:
        weights = tuple(float(w) for w in args.weights.split(","))
    except ValueError:
        raise CliError(f"--weights must be two comma-separated numbers, got {args.weights!r}")
    if len(weights) != 2:
        raise CliError("--weights must contain exactly two values")

    points = []
    for r in rows:
        key = (r["generation"], r["individual"])
        if key not in params_table:
            raise CliError(f"{genomes_path}: missing parameters for {key}")
        points.append(
            analysis.FrontPoint(
                objectives=(r["energy_wh"], r["overhead_s"]),
                parameters=params_table[key],
                generation=r["generation"],
                individual=r["individual"],
            )
        )

    out_dir = args.out_dir or os.path.dirname(os.path.abspath(args.results))
    os.makedirs(out_dir, exist_ok=True)

    front_buf = io.StringIO()
    w = csv.writer(front_buf)
    w.writerow(["energy_wh", "overhead_s", "generation"])
    for p in points:
        w.writerow([_format_float(p.objectives[0]), _format_float(p.objectives[1]), p.generation])
    _atomic_write(os.path.join(out_dir, "front.csv"), front_buf.getvalue())

    pareto = analysis.extract_pareto(points)
    _atomic_write(
        os.path.join(out_dir, "pareto.json"),
        json.dumps(
            {"points": [_point_payload(p) for p in pareto]}, sort_keys=True, indent=2
        )
        + "\n",
    )

    scaled = np.column_stack(
        [
            analysis.min_max_scale([p.objectives[0] for p in pareto]),
            analysis.min_max_scale([p.objectives[1] for p in pareto]),
        ]
    )
    labels = analysis.dbscan(scaled, eps=args.eps, min_pts=args.min_pts)
    cluster_buf = io.StringIO()
    w = csv.writer(cluster_buf)
    w.writerow(["point_id", "generation", "individual", "label"])
    for i, (p, label) in enumerate(zip(pareto, labels)):
        w.writerow([i, p.generation, p.individual, label])
    _atomic_write(os.path.join(out_dir, "clusters.csv"), cluster_buf.getvalue())

    lasso_buf = io.StringIO()
    w = csv.writer(lasso_buf)
    w.writerow(["objective", "feature", "coefficient"])
    if len(pareto) >= 2:
        raw = np.vstack([genome.to_feature_vector(p.parameters) for p in pareto])
        X = analysis.scale_feature_matrix(raw, 1.0, 100.0)
        for obj_idx, obj_name in enumerate(["energy_wh", "overhead_s"]):
            y = [p.objectives[obj_idx] for p in pareto]
            model = analysis.lasso_fit(X, y, args.lasso_lambda)
            for fname, coef in zip(genome.feature_names(), model.coefficients):
                w.writerow([obj_name, fname, _format_float(coef)])
    _atomic_write(os.path.join(out_dir, "lasso.csv"), lasso_buf.getvalue())

    min_energy = min(pareto, key=lambda p: p.objectives[0])
    min_overhead = min(pareto, key=lambda p: p.objectives[1])
    combined = analysis.combined_optimum(pareto, weights)
    summary = {
        "weights": list(weights),
        "min_energy": _point_payload(min_energy),
        "min_overhead": _point_payload(min_overhead),
        "combined": _point_payload(combined),
    }
    _atomic_write(
        os.path.join(out_dir, "summary.json"),
        json.dumps(summary, sort_keys=True, indent=2) + "\n",
    )
    sys.stdout.write(
        _summary_table(
            [("min_overhead", min_overhead), ("min_energy", min_energy), ("combined", combined)]
        )
    )
    print(f"{len(pareto)} Pareto point(s); outputs in {out_dir}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="paretune",
        description="Tune an energy-aware scheduler with a multi-objective GA.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="run the genetic optimisation")
    p_opt.add_argument("--config", required=True, help="run configuration JSON")
    p_opt.add_argument("--resume", action="store_true", help="continue from checkpoint")
    p_opt.add_argument("--jobs", type=int, default=1, help="parallel evaluation workers")
    p_opt.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_opt.set_defaults(func=cmd_optimize)

    p_sim = sub.add_parser("simulate", help="run one simulation with fixed parameters")
    p_sim.add_argument("--params", required=True, help="scheduler parameter JSON")
    p_sim.add_argument("--traces", required=True, help="trace directory")
    p_sim.add_argument("--suspend-timeout", type=int, default=600)
    p_sim.add_argument("--accounting", choices=["htc", "facility"], default="htc")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out", help="write the result JSON here instead of stdout")
    p_sim.add_argument("--diary", help="write the per-day epsilon diary CSV here")
    p_sim.set_defaults(func=cmd_simulate)

    p_gen = sub.add_parser("gen-traces", help="generate a synthetic trace directory")
    p_gen.add_argument("--config", help="trace configuration JSON (defaults apply)")
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_gen.set_defaults(func=cmd_gen_traces)

    p_ana = sub.add_parser("analyze", help="extract and analyse the Pareto front")
    p_ana.add_argument("--results", required=True, help="results.csv from optimize")
    p_ana.add_argument("--genomes", help="genomes.jsonl (default: next to results)")
    p_ana.add_argument("--eps", type=float, default=5.0, help="DBSCAN radius (scaled units)")
    p_ana.add_argument("--min-pts", type=int, default=4, help="DBSCAN core threshold")
    p_ana.add_argument("--weights", default="1,1", help="objective weights, e.g. 1,0")
    p_ana.add_argument("--lasso-lambda", type=float, default=0.1)
    p_ana.add_argument("--out-dir", help="output directory (default: alongside results)")
    p_ana.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, TraceValidationError, genome.ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
