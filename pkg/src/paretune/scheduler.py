"""Epsilon-greedy placement scheduler with a per-day epsilon schedule.

The scheduler treats each (state, action) pair as a bandit arm. The state is
the hour of the day (or week) plus a coarse bucket of how much of the system
is free; actions place a task on a specific computer, on any computer of a
cluster, anywhere, or keep it queued. Rewards blend the outcome of the
attempt with the chosen computer's energy efficiency, and the exploration
rate epsilon is revised once per simulated day under one of four policies.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .genome import RlParameterSet
from .sim import (
    HOUR,
    Computer,
    Decision,
    OUTCOME_COMPLETED,
    OUTCOME_EVICTED,
    OUTCOME_QUEUE_EXPIRED,
    OUTCOME_SUSPENDED_COMPLETED,
)

Action = tuple
QUEUE_ACTION: Action = ("queue",)

_BASE_REWARD = {
    OUTCOME_COMPLETED: 1.0,
    OUTCOME_EVICTED: -1.0,
    OUTCOME_SUSPENDED_COMPLETED: 0.5,
    OUTCOME_QUEUE_EXPIRED: -0.5,
}

StateKey = tuple[int, int]  # (hour index, availability bucket)


def availability_bucket(free_fraction: float) -> int:
    """Bucket a free fraction into {0: none, 1: <25%, 2: <50%, 3: <75%, 4: >=75%}."""
    if free_fraction <= 0.0:
        return 0
    if free_fraction < 0.25:
        return 1
    if free_fraction < 0.5:
        return 2
    if free_fraction < 0.75:
        return 3
    return 4


def build_actions(policy: RlParameterSet, computers: Sequence[Computer]) -> list[Action]:
    """Placement actions at the configured entity level, plus the queue action."""
    if policy.entity_level == "computer":
        actions = [("computer", c.id) for c in sorted(computers, key=lambda c: c.id)]
    elif policy.entity_level == "cluster":
        clusters = sorted({c.cluster_id for c in computers})
        actions = [("cluster", k) for k in clusters]
    elif policy.entity_level == "whole":
        actions = [("any",)]
    else:
        raise ValueError(f"unknown entity level {policy.entity_level!r}")
    actions.append(QUEUE_ACTION)
    return actions


class RewardWindow:
    """Bounded reward history for one (state, action) arm.

    `limit` < 0 keeps everything. The plain estimate is the window mean; the
    gaussian estimate weights reward at age rank k by exp(-k^2 / (2 (w/3)^2))
    with w the current window length, so recent rewards dominate.
    """

    __slots__ = ("values", "limit", "_sum")

    def __init__(self, limit: int):
        self.limit = limit
        self.values: deque[float] = deque()
        self._sum = 0.0

    def append(self, reward: float) -> None:
        self.values.append(reward)
        self._sum += reward
        if self.limit >= 0 and len(self.values) > self.limit:
            self._sum -= self.values.popleft()

    def __len__(self) -> int:
        return len(self.values)


def action_estimate(rewards: Sequence[float], gaussian: bool) -> float:
    """Estimated value of an action from its reward history; 0 when empty."""
    n = len(rewards)
    if n == 0:
        return 0.0
    if not gaussian:
        return sum(rewards) / n
    # rewards are stored oldest-first; age rank 0 is the newest.
    scale = n / 3.0
    wsum = 0.0
    total = 0.0
    for idx, r in enumerate(rewards):
        k = n - 1 - idx
        w = math.exp(-(k * k) / (2.0 * scale * scale))
        wsum += w
        total += w * r
    return total / wsum


def compute_reward(outcome: str, efficiency_score: float | None, sigma: float) -> float:
    """Blend outcome and machine efficiency into a reward in [-1, 1].

    `efficiency_score` is the computer's min-max normalised efficiency in
    [0, 1] (None for queue outcomes, treated as neutral). The blend is
    (1 - sigma) * outcome_reward + sigma * (2 * score - 1).
    """
    try:
        r_out = _BASE_REWARD[outcome]
    except KeyError:
        raise ValueError(f"unknown outcome {outcome!r}") from None
    r_eff = 0.0 if efficiency_score is None else 2.0 * efficiency_score - 1.0
    return (1.0 - sigma) * r_out + sigma * r_eff


@dataclass
class EpsilonState:
    """Current exploration rate plus the per-day accounting it is revised from."""

    epsilon: float
    previous_epsilon: float
    day: int = 0
    day_sum: float = 0.0
    day_count: int = 0
    day_best: float = -math.inf
    day_hit_level: int = 0

    @classmethod
    def initial(cls, policy: RlParameterSet) -> "EpsilonState":
        e0 = policy.epsilon_levels[0]
        return cls(epsilon=e0, previous_epsilon=e0)


def _bracket_level(value: float, boundaries: Sequence[float]) -> int:
    """0-based epsilon level from a reward against sorted boundaries."""
    if value < boundaries[0]:
        return 0
    if value < boundaries[1]:
        return 1
    return 2


def note_reward(policy: RlParameterSet, eps: EpsilonState, reward: float) -> None:
    """Fold one reward into the day accumulators (and hit-policy crossings)."""
    eps.day_sum += reward
    eps.day_count += 1
    if reward > eps.day_best:
        eps.day_best = reward
    if policy.epsilon_policy == "hit":
        running = eps.day_sum / eps.day_count
        level = 0
        for i, b in enumerate(policy.reward_boundaries, start=1):
            if running >= b:
                level = i
        if level > eps.day_hit_level:
            eps.day_hit_level = level
            eps.epsilon = min(1.0, policy.epsilon_levels[level - 1])


def end_of_day_epsilon(
    policy: RlParameterSet, eps: EpsilonState, day: int | None = None
) -> str:
    """Revise epsilon at a day boundary; returns the branch taken (diagnostics).

    `day` is the day the new epsilon applies to (defaults to the next day).
    Policy branches:
      days     -- epsilon level from the first day-threshold >= day
      previous -- level from yesterday's mean reward against the boundaries
      ratio    -- as `previous`, unless best/mean < threshold, which reverts
                  to the previously stored epsilon
      hit      -- epsilon already moved intra-day at boundary crossings
    All policies then add `delta` while day <= the days gene (0 disables) and
    add 0.1 when every reward yesterday was negative and `prior` is set.
    Epsilon is clamped to [0, 1] on every path.
    """
    finished_count = eps.day_count
    avg = eps.day_sum / eps.day_count if eps.day_count else None
    best = eps.day_best if eps.day_count else None
    if day is None:
        day = eps.day + 1
    entry_epsilon = eps.epsilon

    kind = policy.epsilon_policy
    if kind == "days":
        level = 2
        for i, bound in enumerate(policy.ranges):
            if day <= bound:
                level = i
                break
        eps.epsilon = policy.epsilon_levels[level]
        branch = f"days:{level + 1}"
    elif kind == "previous":
        if avg is not None:
            level = _bracket_level(avg, policy.reward_boundaries)
            eps.epsilon = policy.epsilon_levels[level]
            branch = f"previous:{level + 1}"
        else:
            branch = "previous:hold"
    elif kind == "ratio":
        if avg is not None and best is not None:
            ratio = math.inf if avg == 0 else best / avg
            if ratio < policy.threshold:
                eps.epsilon = eps.previous_epsilon
                branch = "ratio:revert"
            else:
                level = _bracket_level(avg, policy.reward_boundaries)
                eps.epsilon = policy.epsilon_levels[level]
                branch = f"ratio:{level + 1}"
        else:
            branch = "ratio:hold"
    elif kind == "hit":
        branch = "hit"
    else:
        raise ValueError(f"unknown epsilon policy {kind!r}")

    if policy.days > 0 and day <= policy.days:
        eps.epsilon = min(1.0, eps.epsilon + policy.delta)
        branch += "+delta"
    if policy.prior and finished_count > 0 and best < 0:
        eps.epsilon = min(1.0, eps.epsilon + 0.1)
        branch += "+prior"

    eps.epsilon = min(1.0, max(0.0, eps.epsilon))
    eps.previous_epsilon = entry_epsilon
    eps.day = day
    eps.day_sum = 0.0
    eps.day_count = 0
    eps.day_best = -math.inf
    eps.day_hit_level = 0
    return branch


@dataclass
class _Pending:
    state: StateKey
    action: Action
    computer_id: str | None


class RlScheduler:
    """Learning scheduler: epsilon-greedy over (state, action) reward windows.

    One instance serves one simulation run; it keeps per-arm reward windows,
    the epsilon schedule state, and an optional per-day diary of epsilon
    decisions.
    """

    def __init__(
        self,
        policy: RlParameterSet,
        computers: Sequence[Computer],
        rng: np.random.Generator,
    ):
        self.policy = policy
        self.rng = rng
        self.computers = {c.id: c for c in computers}
        self.cluster_count = len({c.cluster_id for c in computers})
        self.computer_count = len(computers)
        self.actions = build_actions(policy, computers)
        self.eps = EpsilonState.initial(policy)
        self.tables: dict[StateKey, dict[Action, RewardWindow]] = {}
        self.diary: list[dict[str, Any]] = []

        effs = [c.efficiency for c in computers]
        lo, hi = min(effs), max(effs)
        if hi > lo:
            self.eff_score = {c.id: (c.efficiency - lo) / (hi - lo) for c in computers}
        else:
            self.eff_score = {c.id: 0.5 for c in computers}

    # -- state construction -------------------------------------------------

    def state_key(self, t: int, free_ids: Sequence[str], free_by_cluster: dict) -> StateKey:
        hours = 168 if self.policy.week else 24
        hour = (t // HOUR) % hours
        if self.policy.entity_level == "cluster":
            frac = len(free_by_cluster) / self.cluster_count
        else:
            frac = len(free_ids) / self.computer_count
        return (hour, availability_bucket(frac))

    def _arm(self, state: StateKey, action: Action) -> RewardWindow:
        table = self.tables.get(state)
        if table is None:
            table = {a: RewardWindow(self.policy.history) for a in self.actions}
            self.tables[state] = table
        return table[action]

    def select_action(self, state: StateKey, rng: np.random.Generator | None = None) -> Action:
        """Epsilon-greedy choice over the full action list for this state.

        Exploration draws uniformly over all actions; exploitation takes the
        action with the best windowed estimate, breaking ties uniformly.
        """
        rng = rng if rng is not None else self.rng
        if rng.random() < self.eps.epsilon:
            return self.actions[int(rng.integers(0, len(self.actions)))]
        table = self.tables.get(state)
        if table is None:
            # All arms identical (empty); lazy-init and pick uniformly.
            self._arm(state, QUEUE_ACTION)
            return self.actions[int(rng.integers(0, len(self.actions)))]
        best_val = -math.inf
        best: list[Action] = []
        for action in self.actions:
            window = table[action]
            val = action_estimate(window.values, self.policy.gaussian)
            if val > best_val:
                best_val = val
                best = [action]
            elif val == best_val:
                best.append(action)
        if len(best) == 1:
            return best[0]
        return best[int(rng.integers(0, len(best)))]

    # -- simulator interface -------------------------------------------------

    def decide(
        self,
        t: int,
        task_id: str,
        free_ids: Sequence[str],
        free_by_cluster: dict[str, list[str]],
    ) -> Decision:
        state = self.state_key(t, free_ids, free_by_cluster)
        action = self.select_action(state)

        target: str | None = None
        if action[0] == "computer":
            target = action[1] if action[1] in free_ids else None
        elif action[0] == "cluster":
            in_cluster = free_by_cluster.get(action[1])
            target = in_cluster[0] if in_cluster else None
        elif action[0] == "any":
            target = free_ids[0] if free_ids else None

        if (
            target is not None
            and self.policy.defer
            and self.computers[target].reboot_hour is not None
            and (t // HOUR) % 168 == self.computers[target].reboot_hour
        ):
            # The machine reboots at the end of this hour; hold the task back.
            action = QUEUE_ACTION
            target = None

        token = _Pending(state, action, target)
        return Decision(computer_id=target, token=token)

    def report(self, token: _Pending, outcome: str) -> None:
        score = None if token.computer_id is None else self.eff_score[token.computer_id]
        reward = compute_reward(outcome, score, self.policy.sigma)
        self._arm(token.state, token.action).append(reward)
        note_reward(self.policy, self.eps, reward)

    def on_day_end(self, day: int) -> None:
        avg = self.eps.day_sum / self.eps.day_count if self.eps.day_count else None
        best = self.eps.day_best if self.eps.day_count else None
        branch = end_of_day_epsilon(self.policy, self.eps, day + 1)
        self.diary.append(
            {
                "day": day,
                "epsilon": self.eps.epsilon,
                "avg_reward": avg,
                "best_reward": best,
                "policy_branch": branch,
            }
        )

    def write_diary(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("day,epsilon,avg_reward,best_reward,policy_branch\n")
            for row in self.diary:
                avg = "" if row["avg_reward"] is None else repr(row["avg_reward"])
                best = "" if row["best_reward"] is None else repr(row["best_reward"])
                fh.write(
                    f"{row['day']},{row['epsilon']!r},{avg},{best},{row['policy_branch']}\n"
                )


class FifoScheduler:
    """Baseline: always place the queue head on the first free computer."""

    def decide(
        self,
        t: int,
        task_id: str,
        free_ids: Sequence[str],
        free_by_cluster: dict[str, list[str]],
    ) -> Decision:
        return Decision(computer_id=free_ids[0] if free_ids else None)

    def report(self, token: Any, outcome: str) -> None:
        pass

    def on_day_end(self, day: int) -> None:
        pass
