"""Synthetic workload generation and CSV ingestion for the simulator.

Three files describe a scenario: `computers.csv` (the fleet), `sessions.csv`
(interactive logins) and `tasks.csv` (batch submissions). The generator draws
a desk-scale scenario with a diurnal login profile, damped weekends and
heavy-tailed task durations; everything is reproducible from one seed.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .sim import (
    DAY,
    HOUR,
    Computer,
    InteractiveSession,
    TaskSubmission,
    TraceValidationError,
)

SESSIONS_HEADER = ["computer_id", "login_time", "logout_time"]
TASKS_HEADER = ["task_id", "submit_time", "duration", "batch_id"]
COMPUTERS_HEADER = [
    "computer_id",
    "cluster_id",
    "watts_sleep",
    "watts_idle",
    "watts_active",
    "efficiency",
    "suspendable",
    "reboot_hour",
]

# Hourly login probability profile: quiet nights, busy office hours.
DEFAULT_INTENSITY = (
    0.02, 0.01, 0.01, 0.01, 0.02, 0.05,
    0.12, 0.25, 0.45, 0.60, 0.65, 0.60,
    0.55, 0.60, 0.65, 0.60, 0.50, 0.35,
    0.20, 0.12, 0.08, 0.05, 0.04, 0.03,
)


@dataclass(frozen=True)
class TraceConfig:
    horizon_days: int = 28
    computer_count: int = 50
    cluster_count: int = 5
    task_count: int = 2000
    session_intensity: tuple[float, ...] = DEFAULT_INTENSITY
    weekend_damping: float = 0.35
    duration_log_mu: float = math.log(900.0)
    duration_log_sigma: float = 1.1
    batch_mean: float = 4.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.horizon_days < 1:
            raise ValueError("horizon_days must be >= 1")
        if self.computer_count < 1 or self.cluster_count < 1:
            raise ValueError("computer_count and cluster_count must be >= 1")
        if self.cluster_count > self.computer_count:
            raise ValueError("cannot have more clusters than computers")
        if self.task_count < 0:
            raise ValueError("task_count must be >= 0")
        if len(self.session_intensity) != 24:
            raise ValueError("session_intensity needs 24 hourly values")
        if any(not 0.0 <= v <= 1.0 for v in self.session_intensity):
            raise ValueError("session_intensity values must lie in [0, 1]")
        if not 0.0 <= self.weekend_damping <= 1.0:
            raise ValueError("weekend_damping must lie in [0, 1]")
        if self.duration_log_sigma <= 0:
            raise ValueError("duration_log_sigma must be positive")
        if self.batch_mean < 1.0:
            raise ValueError("batch_mean must be >= 1")

    @classmethod
    def from_json_dict(cls, data: dict) -> "TraceConfig":
        kwargs = dict(data)
        if "session_intensity" in kwargs:
            kwargs["session_intensity"] = tuple(kwargs["session_intensity"])
        return cls(**kwargs)


@dataclass(frozen=True)
class TraceSet:
    sessions: tuple[InteractiveSession, ...]
    tasks: tuple[TaskSubmission, ...]
    computers: tuple[Computer, ...]
    horizon_s: int


def generate(config: TraceConfig) -> TraceSet:
    """Draw a full scenario from the config; identical seeds give identical traces."""
    rng = np.random.default_rng(np.random.SeedSequence((config.seed & (2**64 - 1), 77)))
    horizon = config.horizon_days * DAY

    computers = []
    width = len(str(config.computer_count - 1))
    cluster_active = rng.uniform(80.0, 200.0, size=config.cluster_count)
    for i in range(config.computer_count):
        cluster = i % config.cluster_count
        computers.append(
            Computer(
                id=f"c{i:0{width}d}",
                cluster_id=f"k{cluster}",
                watts_sleep=round(float(rng.uniform(1.0, 4.0)), 2),
                watts_idle=round(float(rng.uniform(5.0, 25.0)), 2),
                watts_active=round(float(cluster_active[cluster] + rng.uniform(-10, 10)), 2),
                efficiency=round(float(rng.uniform(0.5, 1.0)), 4),
                suspendable=bool(rng.random() < 0.5),
                reboot_hour=int(rng.integers(0, 168)),
            )
        )

    sessions: list[InteractiveSession] = []
    for comp in computers:
        cursor = 0
        for day in range(config.horizon_days):
            damp = config.weekend_damping if day % 7 in (5, 6) else 1.0
            for hour in range(24):
                p = config.session_intensity[hour] * damp
                if rng.random() >= p:
                    continue
                block = day * DAY + hour * HOUR
                login = max(cursor, block + int(rng.integers(0, HOUR)))
                length = int(rng.lognormal(math.log(2400.0), 0.8))
                logout = min(login + max(length, 300), horizon)
                if login >= horizon or logout <= login:
                    continue
                sessions.append(InteractiveSession(comp.id, login, logout))
                cursor = logout + 60
    sessions.sort(key=lambda s: (s.login_time, s.computer_id))

    tasks: list[TaskSubmission] = []
    if config.task_count > 0:
        submit_span = max(1, horizon - DAY) if horizon > DAY else max(1, int(horizon * 0.8))
        batch_no = 0
        while len(tasks) < config.task_count:
            batch_no += 1
            size = 1 + int(rng.poisson(config.batch_mean - 1.0))
            submit = int(rng.integers(0, submit_span))
            for _ in range(size):
                if len(tasks) >= config.task_count:
                    break
                dur = int(rng.lognormal(config.duration_log_mu, config.duration_log_sigma))
                dur = min(max(dur, 60), 6 * HOUR)
                tasks.append(
                    TaskSubmission(
                        id=f"t{len(tasks):05d}",
                        submit_time=submit,
                        duration=dur,
                        batch_id=f"b{batch_no:04d}",
                    )
                )
        tasks.sort(key=lambda t: (t.submit_time, t.id))

    return TraceSet(tuple(sessions), tuple(tasks), tuple(computers), horizon)


def save(traces: TraceSet, out_dir: str) -> None:
    """Write the three CSV files (loadable back to an equal TraceSet)."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "computers.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COMPUTERS_HEADER)
        for c in traces.computers:
            w.writerow(
                [
                    c.id,
                    c.cluster_id,
                    repr(c.watts_sleep),
                    repr(c.watts_idle),
                    repr(c.watts_active),
                    repr(c.efficiency),
                    int(c.suspendable),
                    "" if c.reboot_hour is None else c.reboot_hour,
                ]
            )
    with open(os.path.join(out_dir, "sessions.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SESSIONS_HEADER)
        for s in traces.sessions:
            w.writerow([s.computer_id, s.login_time, s.logout_time])
    with open(os.path.join(out_dir, "tasks.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TASKS_HEADER)
        for t in traces.tasks:
            w.writerow(
                [t.id, t.submit_time, t.duration, "" if t.batch_id is None else t.batch_id]
            )


def _read_rows(path: str, expected_header: list[str]) -> list[tuple[int, list[str]]]:
    if not os.path.exists(path):
        raise TraceValidationError(f"trace file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceValidationError(f"{path}: empty file, expected header") from None
        if header != expected_header:
            raise TraceValidationError(
                f"{path}: header {header!r} does not match required {expected_header!r}"
            )
        return [(lineno, row) for lineno, row in enumerate(reader, start=2) if row]


def _int_field(path: str, lineno: int, name: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise TraceValidationError(
            f"{path} row {lineno}: {name} must be an integer, got {raw!r}"
        ) from None


def load(trace_dir: str, horizon_s: int | None = None) -> TraceSet:
    """Load and validate a trace directory written by `save` (or by hand).

    Validation errors name the file and row. When `horizon_s` is omitted it
    is inferred as the smallest whole day covering every trace timestamp.
    """
    comp_path = os.path.join(trace_dir, "computers.csv")
    computers: list[Computer] = []
    for lineno, row in _read_rows(comp_path, COMPUTERS_HEADER):
        if len(row) != len(COMPUTERS_HEADER):
            raise TraceValidationError(f"{comp_path} row {lineno}: wrong column count")
        cid, cluster, w_sleep, w_idle, w_active, eff, susp, reboot = row
        try:
            computers.append(
                Computer(
                    id=cid,
                    cluster_id=cluster,
                    watts_sleep=float(w_sleep),
                    watts_idle=float(w_idle),
                    watts_active=float(w_active),
                    efficiency=float(eff),
                    suspendable=susp.strip().lower() in ("1", "true", "yes"),
                    reboot_hour=None if reboot.strip() == "" else int(reboot),
                )
            )
        except TraceValidationError as exc:
            raise TraceValidationError(f"{comp_path} row {lineno}: {exc}") from None
        except ValueError:
            raise TraceValidationError(
                f"{comp_path} row {lineno}: malformed numeric field"
            ) from None
    known = {c.id for c in computers}
    if len(known) != len(computers):
        raise TraceValidationError(f"{comp_path}: duplicate computer ids")

    sess_path = os.path.join(trace_dir, "sessions.csv")
    sessions: list[InteractiveSession] = []
    for lineno, row in _read_rows(sess_path, SESSIONS_HEADER):
        if len(row) != 3:
            raise TraceValidationError(f"{sess_path} row {lineno}: wrong column count")
        cid = row[0]
        if cid not in known:
            raise TraceValidationError(
                f"{sess_path} row {lineno}: unknown computer_id {cid!r}"
            )
        login = _int_field(sess_path, lineno, "login_time", row[1])
        logout = _int_field(sess_path, lineno, "logout_time", row[2])
        if login < 0:
            raise TraceValidationError(f"{sess_path} row {lineno}: negative login_time")
        if logout <= login:
            raise TraceValidationError(
                f"{sess_path} row {lineno}: logout_time {logout} must exceed "
                f"login_time {login}"
            )
        sessions.append(InteractiveSession(cid, login, logout))

    task_path = os.path.join(trace_dir, "tasks.csv")
    tasks: list[TaskSubmission] = []
    for lineno, row in _read_rows(task_path, TASKS_HEADER):
        if len(row) != 4:
            raise TraceValidationError(f"{task_path} row {lineno}: wrong column count")
        tid, submit_raw, dur_raw, batch = row
        submit = _int_field(task_path, lineno, "submit_time", submit_raw)
        dur = _int_field(task_path, lineno, "duration", dur_raw)
        if submit < 0:
            raise TraceValidationError(f"{task_path} row {lineno}: negative submit_time")
        if dur <= 0:
            raise TraceValidationError(
                f"{task_path} row {lineno}: duration must be positive, got {dur}"
            )
        tasks.append(TaskSubmission(tid, submit, dur, batch if batch else None))
    if len({t.id for t in tasks}) != len(tasks):
        raise TraceValidationError(f"{task_path}: duplicate task ids")

    sessions.sort(key=lambda s: (s.login_time, s.computer_id))
    tasks.sort(key=lambda t: (t.submit_time, t.id))

    if horizon_s is None:
        last = max(
            [s.logout_time for s in sessions] + [t.submit_time + 1 for t in tasks],
            default=DAY,
        )
        horizon_s = ((last + DAY - 1) // DAY) * DAY
    return TraceSet(tuple(sessions), tuple(tasks), tuple(computers), horizon_s)
