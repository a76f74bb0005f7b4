"""Event-driven simulator of a shared high-throughput computing system.

Interactive users own their desktops: a login suspends the running batch task
when the machine supports it and evicts it (losing all work) otherwise. The
simulator replays session and submission traces, consults a pluggable
scheduler at every placement opportunity, and accounts wall-clock seconds per
(computer, power state) so energy totals are exact integer arithmetic.

All event timestamps are integer seconds. Simultaneous events process in a
fixed priority order -- session/reboot events, then task events, then
scheduler wake-ups -- with FIFO order inside each class.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

HOUR = 3600
DAY = 86_400
WEEK = 604_800

# Power states.
STATE_NAMES = ("sleep", "idle", "active_htc", "active_user", "active_both")
_SLEEP, _IDLE, _HTC, _USER, _BOTH = range(5)
HTC_STATES = ("active_htc", "active_both")

# Terminal outcomes of a scheduling decision, as reported back to the scheduler.
OUTCOME_COMPLETED = "completed"
OUTCOME_EVICTED = "evicted"
OUTCOME_SUSPENDED_COMPLETED = "suspended_completed"
OUTCOME_QUEUE_EXPIRED = "queue_expired"

# Event kinds, ordered by their same-timestamp priority class.
_EV_SESSION_START = 0
_EV_SESSION_END = 1
_EV_REBOOT = 2
_EV_SUBMIT = 3
_EV_COMPLETE = 4
_EV_SUSPEND_TIMEOUT = 5
_EV_TICK = 6
_PRIORITY = {
    _EV_SESSION_START: 0,
    _EV_SESSION_END: 0,
    _EV_REBOOT: 0,
    _EV_SUBMIT: 1,
    _EV_COMPLETE: 1,
    _EV_SUSPEND_TIMEOUT: 1,
    _EV_TICK: 2,
}


class TraceValidationError(ValueError):
    """A trace record is malformed; the message names the offending record."""


@dataclass(frozen=True)
class Computer:
    """One desktop resource.

    `efficiency` is a relative work rate against a reference machine of 1.0;
    it may not exceed 1.0, so a task never finishes faster than its nominal
    duration. `reboot_hour` is an hour-of-week (0..167); the maintenance
    reboot fires at the end of that hour each week and kills any task on the
    machine.
    """

    id: str
    cluster_id: str
    watts_sleep: float
    watts_idle: float
    watts_active: float
    efficiency: float = 1.0
    suspendable: bool = False
    reboot_hour: int | None = None

    def __post_init__(self) -> None:
        for name in ("watts_sleep", "watts_idle", "watts_active"):
            if getattr(self, name) < 0:
                raise TraceValidationError(f"computer {self.id}: {name} must be >= 0")
        if not 0.0 < self.efficiency <= 1.0:
            raise TraceValidationError(
                f"computer {self.id}: efficiency must be in (0, 1], got {self.efficiency}"
            )
        if self.reboot_hour is not None and not 0 <= self.reboot_hour < 168:
            raise TraceValidationError(
                f"computer {self.id}: reboot_hour must be in 0..167"
            )

    def power_rate(self, state: str) -> float:
        if state == "sleep":
            return self.watts_sleep
        if state == "idle":
            return self.watts_idle
        if state in ("active_htc", "active_user", "active_both"):
            return self.watts_active
        raise ValueError(f"unknown power state {state!r}")


@dataclass(frozen=True)
class InteractiveSession:
    computer_id: str
    login_time: int
    logout_time: int


@dataclass(frozen=True)
class TaskSubmission:
    id: str
    submit_time: int
    duration: int
    batch_id: str | None = None


@dataclass
class EnergyLedger:
    """Accumulated seconds per (computer, power state)."""

    time_in_state: dict[str, dict[str, int]]

    def total_seconds(self, computer_id: str) -> int:
        return sum(self.time_in_state[computer_id].values())


@dataclass
class TaskRecord:
    """Final per-task accounting: timing, attempts and actual run segments."""

    id: str
    submit_time: int
    duration: int
    attempts: int
    finish_time: int | None
    state: str  # "completed" | "queued" | "running" | "suspended"
    segments: list[tuple[str, int, int]] = field(default_factory=list)

    @property
    def completed(self) -> bool:
        return self.finish_time is not None

    @property
    def overhead_s(self) -> int | None:
        if self.finish_time is None:
            return None
        return self.finish_time - self.submit_time - self.duration


@dataclass
class SimResult:
    horizon_s: int
    accounting: str
    total_energy_wh: float
    average_overhead_s: float
    tasks: list[TaskRecord]
    ledger: EnergyLedger
    completed_count: int

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "horizon_s": self.horizon_s,
            "accounting": self.accounting,
            "energy_wh": self.total_energy_wh,
            "overhead_s": self.average_overhead_s,
            "task_count": len(self.tasks),
            "completed": self.completed_count,
            "tasks": [
                {
                    "id": t.id,
                    "submit_time": t.submit_time,
                    "duration": t.duration,
                    "attempts": t.attempts,
                    "finish_time": t.finish_time,
                    "overhead_s": t.overhead_s,
                    "state": t.state,
                }
                for t in self.tasks
            ],
            "ledger": {
                cid: dict(states) for cid, states in self.ledger.time_in_state.items()
            },
        }


@dataclass
class Decision:
    """A scheduler's answer for one task: place on `computer_id` or keep queued."""

    computer_id: str | None
    token: Any = None


def average_overhead(tasks: Sequence[TaskRecord]) -> float:
    """Mean of (finish - submit - duration) over completed tasks; 0 when empty."""
    if not tasks:
        return 0.0
    total = 0
    for t in tasks:
        if t.finish_time is None:
            raise ValueError(f"task {t.id} is not completed")
        total += t.finish_time - t.submit_time - t.duration
    return total / len(tasks)


def total_energy(
    ledger: EnergyLedger, computers: Iterable[Computer], accounting: str = "htc"
) -> float:
    """Watt-hours from the per-state time ledger.

    `accounting="htc"` rates non-HTC states at zero, so the figure is the
    energy attributable to the batch workload; `accounting="facility"` rates
    every state, giving total draw.
    """
    if accounting not in ("htc", "facility"):
        raise ValueError(f"unknown accounting mode {accounting!r}")
    by_id = {c.id: c for c in computers}
    wh = 0.0
    for cid, states in ledger.time_in_state.items():
        comp = by_id[cid]
        for state, seconds in states.items():
            if state not in STATE_NAMES:
                raise ValueError(f"unknown power state {state!r} for computer {cid}")
            if accounting == "htc" and state not in HTC_STATES:
                continue
            wh += (seconds / 3600.0) * comp.power_rate(state)
    return wh


def scaled_runtime(duration: int, efficiency: float) -> int:
    """Integer seconds the task occupies a machine of the given efficiency."""
    # The tiny relative shave keeps exact ratios (e.g. 100/0.1) from being
    # pushed up a whole second by float representation error.
    return max(1, math.ceil((duration / efficiency) * (1.0 - 1e-12)))


class _ComputerRt:
    __slots__ = (
        "comp", "sessions", "task", "state", "last_change", "ledger",
    )

    def __init__(self, comp: Computer):
        self.comp = comp
        self.sessions = 0
        self.task: "_TaskRt | None" = None
        self.state = _IDLE
        self.last_change = 0
        self.ledger = [0, 0, 0, 0, 0]

    def set_state(self, t: int, new_state: int) -> None:
        self.ledger[self.state] += t - self.last_change
        self.last_change = t
        self.state = new_state

    @property
    def free(self) -> bool:
        return self.sessions == 0 and self.task is None


class _TaskRt:
    __slots__ = (
        "sub", "attempts", "state", "computer", "run_epoch", "suspend_epoch",
        "segment_start", "remaining", "completion_due", "suspensions",
        "finish", "segments", "placement_token", "queue_token",
    )

    def __init__(self, sub: TaskSubmission):
        self.sub = sub
        self.attempts = 0
        self.state = "queued"
        self.computer: _ComputerRt | None = None
        self.run_epoch = 0
        self.suspend_epoch = 0
        self.segment_start = 0
        self.remaining = 0
        self.completion_due = 0
        self.suspensions = 0
        self.finish: int | None = None
        self.segments: list[tuple[str, int, int]] = []
        self.placement_token: Any = None
        self.queue_token: Any = None


def _validate_inputs(
    sessions: Sequence[InteractiveSession],
    tasks: Sequence[TaskSubmission],
    computers: Sequence[Computer],
    horizon_s: int,
) -> None:
    if not computers:
        raise TraceValidationError("at least one computer is required")
    ids = [c.id for c in computers]
    if len(set(ids)) != len(ids):
        raise TraceValidationError("duplicate computer ids in fleet")
    known = set(ids)
    for s in sessions:
        if s.computer_id not in known:
            raise TraceValidationError(
                f"session on unknown computer {s.computer_id!r} at t={s.login_time}"
            )
        if s.login_time < 0 or s.logout_time <= s.login_time:
            raise TraceValidationError(
                f"session on {s.computer_id}: bad interval "
                f"[{s.login_time}, {s.logout_time})"
            )
        if s.logout_time > horizon_s:
            raise TraceValidationError(
                f"session on {s.computer_id} ends at {s.logout_time}, "
                f"beyond horizon {horizon_s}"
            )
    for t in tasks:
        if t.submit_time < 0 or t.submit_time >= horizon_s:
            raise TraceValidationError(
                f"task {t.id}: submit_time {t.submit_time} outside [0, {horizon_s})"
            )
        if t.duration <= 0:
            raise TraceValidationError(f"task {t.id}: duration must be positive")


def run_simulation(
    traces: Any,
    scheduler: Any,
    *,
    computers: Sequence[Computer] | None = None,
    suspend_timeout: int = 600,
    accounting: str = "htc",
) -> SimResult:
    """Replay a trace set under the given scheduler and account energy exactly.

    `traces` needs `sessions`, `tasks`, `computers` and `horizon_s` attributes
    (see `paretune.traces.TraceSet`). The scheduler must provide
    `decide(t, task_id, free_ids, free_by_cluster) -> Decision`,
    `report(token, outcome)` and `on_day_end(day)`; `paretune.scheduler`
    supplies both the learning implementation and a first-free baseline.

    A login over a running task suspends it when the machine allows it and
    evicts it back to the queue otherwise; suspensions longer than
    `suspend_timeout` seconds evict too, and evicted work is lost entirely.
    Results are deterministic for fixed traces and scheduler state.
    """
    fleet = list(computers) if computers is not None else list(traces.computers)
    horizon = int(traces.horizon_s)
    if horizon <= 0:
        raise TraceValidationError("horizon must be positive")
    suspend_timeout = int(suspend_timeout)
    _validate_inputs(traces.sessions, traces.tasks, fleet, horizon)

    comps = {c.id: _ComputerRt(c) for c in fleet}
    comp_order = sorted(comps)
    tasks = {sub.id: _TaskRt(sub) for sub in traces.tasks}
    if len(tasks) != len(traces.tasks):
        raise TraceValidationError("duplicate task ids in trace")

    heap: list[tuple[int, int, int, int, Any]] = []
    seq = 0

    def push(t: int, kind: int, payload: Any) -> None:
        nonlocal seq
        heapq.heappush(heap, (t, _PRIORITY[kind], seq, kind, payload))
        seq += 1

    for s in traces.sessions:
        push(s.login_time, _EV_SESSION_START, s.computer_id)
        push(s.logout_time, _EV_SESSION_END, s.computer_id)
    for sub in traces.tasks:
        push(sub.submit_time, _EV_SUBMIT, sub.id)
    for c in fleet:
        if c.reboot_hour is not None:
            t = (c.reboot_hour + 1) * HOUR
            while t <= horizon:
                push(t, _EV_REBOOT, c.id)
                t += WEEK
    for t in range(HOUR, horizon + 1, HOUR):
        push(t, _EV_TICK, None)

    queue: list[str] = []  # FIFO of task ids
    queue_head = 0

    def free_view() -> tuple[list[str], dict[str, list[str]]]:
        free_ids = [cid for cid in comp_order if comps[cid].free]
        by_cluster: dict[str, list[str]] = {}
        for cid in free_ids:
            by_cluster.setdefault(comps[cid].comp.cluster_id, []).append(cid)
        return free_ids, by_cluster

    def place(t: int, task: _TaskRt, cs: _ComputerRt, token: Any) -> None:
        runtime = scaled_runtime(task.sub.duration, cs.comp.efficiency)
        task.state = "running"
        task.computer = cs
        task.run_epoch += 1
        task.segment_start = t
        task.remaining = runtime
        task.completion_due = t + runtime
        task.suspensions = 0
        task.placement_token = token
        task.queue_token = None
        cs.task = task
        cs.set_state(t, _HTC)
        push(task.completion_due, _EV_COMPLETE, (task.sub.id, task.run_epoch))

    def drain(t: int) -> None:
        nonlocal queue_head
        if t >= horizon:
            return
        while queue_head < len(queue):
            free_ids, by_cluster = free_view()
            if not free_ids:
                return
            task = tasks[queue[queue_head]]
            decision = scheduler.decide(t, task.sub.id, free_ids, by_cluster)
            if decision.computer_id is None:
                task.queue_token = decision.token
                return
            queue_head += 1
            place(t, task, comps[decision.computer_id], decision.token)

    def evict(t: int, task: _TaskRt, record_segment: bool) -> None:
        nonlocal queue_head
        if record_segment:
            task.segments.append((task.computer.comp.id, task.segment_start, t))
        if task.placement_token is not None:
            scheduler.report(task.placement_token, OUTCOME_EVICTED)
            task.placement_token = None
        task.attempts += 1
        task.state = "queued"
        task.computer.task = None
        task.computer = None
        queue.append(task.sub.id)
        # Compact the consumed queue prefix occasionally.
        if queue_head > 1024:
            del queue[:queue_head]
            queue_head = 0

    while heap:
        t, _prio, _seq, kind, payload = heapq.heappop(heap)
        if t > horizon:
            break

        if kind == _EV_SESSION_START:
            cs = comps[payload]
            cs.sessions += 1
            if cs.sessions == 1:
                task = cs.task
                if task is not None and task.state == "running":
                    if cs.comp.suspendable:
                        task.segments.append((cs.comp.id, task.segment_start, t))
                        task.state = "suspended"
                        task.remaining = task.completion_due - t
                        task.suspend_epoch += 1
                        task.suspensions += 1
                        push(
                            t + suspend_timeout,
                            _EV_SUSPEND_TIMEOUT,
                            (task.sub.id, task.suspend_epoch),
                        )
                    else:
                        evict(t, task, record_segment=True)
                cs.set_state(t, _USER)

        elif kind == _EV_SESSION_END:
            cs = comps[payload]
            cs.sessions -= 1
            if cs.sessions == 0:
                task = cs.task
                if task is not None and task.state == "suspended":
                    task.state = "running"
                    task.run_epoch += 1
                    task.segment_start = t
                    task.completion_due = t + task.remaining
                    push(task.completion_due, _EV_COMPLETE, (task.sub.id, task.run_epoch))
                    cs.set_state(t, _HTC)
                else:
                    cs.set_state(t, _IDLE)
                    drain(t)

        elif kind == _EV_REBOOT:
            cs = comps[payload]
            task = cs.task
            if task is not None:
                evict(t, task, record_segment=task.state == "running")
                cs.set_state(t, _USER if cs.sessions > 0 else _IDLE)
                drain(t)

        elif kind == _EV_SUBMIT:
            queue.append(payload)
            drain(t)

        elif kind == _EV_COMPLETE:
            task_id, epoch = payload
            task = tasks[task_id]
            if task.state != "running" or task.run_epoch != epoch:
                continue
            cs = task.computer
            task.segments.append((cs.comp.id, task.segment_start, t))
            task.finish = t
            task.state = "completed"
            outcome = (
                OUTCOME_SUSPENDED_COMPLETED if task.suspensions > 0 else OUTCOME_COMPLETED
            )
            if task.placement_token is not None:
                scheduler.report(task.placement_token, outcome)
                task.placement_token = None
            task.queue_token = None
            task.computer = None
            cs.task = None
            cs.set_state(t, _IDLE)
            drain(t)

        elif kind == _EV_SUSPEND_TIMEOUT:
            task_id, sepoch = payload
            task = tasks[task_id]
            if task.state != "suspended" or task.suspend_epoch != sepoch:
                continue
            evict(t, task, record_segment=False)
            drain(t)

        else:  # _EV_TICK
            if t % DAY == 0:
                scheduler.on_day_end(t // DAY - 1)
            drain(t)

    ledger_map: dict[str, dict[str, int]] = {}
    for cid in comp_order:
        cs = comps[cid]
        cs.set_state(horizon, cs.state)
        ledger_map[cid] = {name: cs.ledger[i] for i, name in enumerate(STATE_NAMES)}
    ledger = EnergyLedger(ledger_map)

    records: list[TaskRecord] = []
    completed: list[TaskRecord] = []
    for sub in traces.tasks:
        task = tasks[sub.id]
        if task.state == "running":
            task.segments.append((task.computer.comp.id, task.segment_start, horizon))
        if task.finish is None and task.queue_token is not None:
            scheduler.report(task.queue_token, OUTCOME_QUEUE_EXPIRED)
            task.queue_token = None
        rec = TaskRecord(
            id=sub.id,
            submit_time=sub.submit_time,
            duration=sub.duration,
            attempts=task.attempts,
            finish_time=task.finish,
            state=task.state,
            segments=task.segments,
        )
        records.append(rec)
        if rec.completed:
            completed.append(rec)

    return SimResult(
        horizon_s=horizon,
        accounting=accounting,
        total_energy_wh=total_energy(ledger, fleet, accounting),
        average_overhead_s=average_overhead(completed),
        tasks=records,
        ledger=ledger,
        completed_count=len(completed),
    )
