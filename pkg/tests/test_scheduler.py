"""Tests for the epsilon-greedy scheduler: estimates, rewards, epsilon schedule."""

import math

import numpy as np
import pytest

from paretune.genome import RlParameterSet
from paretune.scheduler import (
    EpsilonState,
    QUEUE_ACTION,
    RewardWindow,
    RlScheduler,
    action_estimate,
    availability_bucket,
    build_actions,
    compute_reward,
    end_of_day_epsilon,
    note_reward,
)
from paretune.sim import (
    Computer,
    OUTCOME_COMPLETED,
    OUTCOME_EVICTED,
    OUTCOME_QUEUE_EXPIRED,
    OUTCOME_SUSPENDED_COMPLETED,
)


def make_policy(**overrides) -> RlParameterSet:
    base = dict(
        week=False,
        entity_level="computer",
        epsilon_policy="previous",
        ranges=(10, 20, 999_999),
        reward_boundaries=(-0.5, 0.0, 0.5),
        epsilon_levels=(0.9, 0.5, 0.1),
        sigma=0.0,
        days=0,
        delta=0.0,
        history=-1,
        gaussian=False,
        prior=False,
        threshold=0.5,
        defer=False,
    )
    base.update(overrides)
    return RlParameterSet(**base)


def make_fleet(n=3, cluster_size=None, **kw):
    fleet = []
    for i in range(n):
        cluster = f"k{i // (cluster_size or n)}"
        fleet.append(
            Computer(
                id=f"c{i}",
                cluster_id=cluster,
                watts_sleep=1.0,
                watts_idle=10.0,
                watts_active=100.0,
                efficiency=kw.get("efficiencies", [1.0] * n)[i],
                suspendable=False,
                reboot_hour=kw.get("reboot_hours", [None] * n)[i],
            )
        )
    return fleet


class TestActionEstimate:
    def test_constant_history(self):
        assert action_estimate([1.0, 1.0, 1.0], gaussian=False) == 1.0
        assert action_estimate([1.0, 1.0, 1.0], gaussian=True) == pytest.approx(1.0)

    def test_empty_history_prior_zero(self):
        assert action_estimate([], gaussian=False) == 0.0
        assert action_estimate([], gaussian=True) == 0.0

    def test_recency_weighting_sign(self):
        # stored oldest-first: the newest (+1) must outweigh the oldest (-1)
        assert action_estimate([-1.0, 1.0], gaussian=True) > 0.0

    def test_windowed_mean(self):
        assert action_estimate([0.5, 0.9], gaussian=False) == pytest.approx(0.7)

    def test_gaussian_matches_hand_formula(self):
        rewards = [0.2, -0.4, 0.9]
        n = 3
        scale = n / 3.0
        ws = [math.exp(-((n - 1 - i) ** 2) / (2 * scale * scale)) for i in range(n)]
        expected = sum(w * r for w, r in zip(ws, rewards)) / sum(ws)
        assert action_estimate(rewards, gaussian=True) == pytest.approx(expected)

    def test_plain_estimate_is_the_mean(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            rewards = rng.uniform(-1, 1, size=int(rng.integers(1, 50))).tolist()
            assert action_estimate(rewards, gaussian=False) == pytest.approx(
                sum(rewards) / len(rewards)
            )


class TestRewardWindow:
    def test_drops_oldest_when_full(self):
        w = RewardWindow(2)
        for r in (0.1, 0.2, 0.3):
            w.append(r)
        assert list(w.values) == [0.2, 0.3]

    def test_unbounded_never_drops(self):
        w = RewardWindow(-1)
        for r in range(1000):
            w.append(float(r))
        assert len(w) == 1000

    def test_length_never_exceeds_limit(self):
        rng = np.random.default_rng(0)
        w = RewardWindow(5)
        for _ in range(200):
            w.append(float(rng.random()))
            assert len(w) <= 5


class TestComputeReward:
    def test_sigma_zero_pure_outcome(self):
        for outcome, expected in [
            (OUTCOME_COMPLETED, 1.0),
            (OUTCOME_EVICTED, -1.0),
            (OUTCOME_SUSPENDED_COMPLETED, 0.5),
            (OUTCOME_QUEUE_EXPIRED, -0.5),
        ]:
            assert compute_reward(outcome, 0.123, 0.0) == expected

    def test_sigma_one_most_efficient(self):
        assert compute_reward(OUTCOME_EVICTED, 1.0, 1.0) == 1.0

    def test_blend_median_efficiency(self):
        assert compute_reward(OUTCOME_COMPLETED, 0.5, 0.5) == pytest.approx(0.5)

    def test_queue_outcome_neutral_efficiency(self):
        assert compute_reward(OUTCOME_QUEUE_EXPIRED, None, 1.0) == 0.0

    def test_unknown_outcome_rejected(self):
        with pytest.raises(ValueError):
            compute_reward("exploded", 0.5, 0.5)

    def test_range_bound(self):
        rng = np.random.default_rng(1)
        outcomes = [
            OUTCOME_COMPLETED,
            OUTCOME_EVICTED,
            OUTCOME_SUSPENDED_COMPLETED,
            OUTCOME_QUEUE_EXPIRED,
        ]
        for _ in range(2000):
            r = compute_reward(
                outcomes[rng.integers(0, 4)], float(rng.random()), float(rng.random())
            )
            assert -1.0 <= r <= 1.0


class TestEpsilonSchedule:
    def test_days_policy_bracket(self):
        policy = make_policy(epsilon_policy="days")
        eps = EpsilonState.initial(policy)
        end_of_day_epsilon(policy, eps, day=15)
        assert eps.epsilon == policy.epsilon_levels[1]

    def test_days_policy_first_bracket(self):
        policy = make_policy(epsilon_policy="days")
        eps = EpsilonState.initial(policy)
        end_of_day_epsilon(policy, eps, day=5)
        assert eps.epsilon == policy.epsilon_levels[0]

    def test_days_policy_beyond_all_ranges(self):
        policy = make_policy(epsilon_policy="days", ranges=(1, 2, 3))
        eps = EpsilonState.initial(policy)
        end_of_day_epsilon(policy, eps, day=100)
        assert eps.epsilon == policy.epsilon_levels[2]

    def test_previous_policy_brackets(self):
        policy = make_policy(epsilon_policy="previous")
        for avg, expected_level in [(-0.9, 0), (-0.2, 1), (0.7, 2)]:
            eps = EpsilonState.initial(policy)
            note_reward(policy, eps, avg)
            end_of_day_epsilon(policy, eps)
            assert eps.epsilon == policy.epsilon_levels[expected_level]

    def test_previous_policy_holds_without_rewards(self):
        policy = make_policy(epsilon_policy="previous")
        eps = EpsilonState.initial(policy)
        eps.epsilon = 0.42
        end_of_day_epsilon(policy, eps)
        assert eps.epsilon == 0.42

    def test_ratio_policy_reverts(self):
        # best/avg = 0.8/0.8 = 1.0 under threshold 2.0 -> revert
        policy = make_policy(epsilon_policy="ratio", threshold=1.0)
        eps = EpsilonState.initial(policy)
        eps.epsilon = 0.33
        eps.previous_epsilon = 0.77
        note_reward(policy, eps, 0.7)
        note_reward(policy, eps, 0.9)  # avg 0.8, best 0.9, ratio 1.125 >= 1.0
        end_of_day_epsilon(policy, eps)
        assert eps.epsilon == policy.epsilon_levels[2]  # avg 0.8 >= R2 -> level 3

        eps2 = EpsilonState.initial(policy)
        eps2.epsilon = 0.33
        eps2.previous_epsilon = 0.77
        note_reward(policy, eps2, 0.8)
        note_reward(policy, eps2, 0.8)  # ratio exactly 1.0, not < 1.0
        end_of_day_epsilon(policy, eps2)
        assert eps2.epsilon == policy.epsilon_levels[2]

        policy3 = make_policy(epsilon_policy="ratio", threshold=1.0)
        eps3 = EpsilonState.initial(policy3)
        eps3.epsilon = 0.33
        eps3.previous_epsilon = 0.77
        note_reward(policy3, eps3, 0.9)
        note_reward(policy3, eps3, -0.1)  # avg 0.4, best 0.9, ratio 2.25
        # now make ratio small: avg 0.85, best 0.9 -> 1.058 still >= 1
        eps4 = EpsilonState.initial(policy3)
        eps4.epsilon = 0.33
        eps4.previous_epsilon = 0.77
        note_reward(policy3, eps4, 0.9)
        note_reward(policy3, eps4, 1.0)  # avg 0.95, best 1.0, ratio ~1.05
        # threshold 1.0: not reverted; use a higher threshold policy to force revert
        policy5 = make_policy(epsilon_policy="ratio", threshold=0.9)
        eps5 = EpsilonState.initial(policy5)
        eps5.epsilon = 0.33
        eps5.previous_epsilon = 0.77
        note_reward(policy5, eps5, -0.5)
        note_reward(policy5, eps5, 0.1)  # avg -0.2, best 0.1 -> ratio -0.5 < 0.9
        end_of_day_epsilon(policy5, eps5)
        assert eps5.epsilon == 0.77  # reverted to the stored previous epsilon

    def test_hit_policy_moves_at_crossing(self):
        policy = make_policy(
            epsilon_policy="hit",
            reward_boundaries=(0.2, 0.5, 0.8),
            epsilon_levels=(0.9, 0.5, 0.1),
        )
        eps = EpsilonState.initial(policy)
        note_reward(policy, eps, 0.1)  # running avg 0.1: below every boundary
        assert eps.epsilon == 0.9
        note_reward(policy, eps, 0.5)  # running avg 0.3 >= R1 -> level 1
        assert eps.epsilon == 0.9  # epsilon_1 selected (level 1)
        note_reward(policy, eps, 1.0)  # running avg ~0.533 >= R2 -> level 2
        assert eps.epsilon == 0.5

    def test_delta_applied_within_days_window(self):
        policy = make_policy(epsilon_policy="previous", days=10, delta=0.2)
        eps = EpsilonState.initial(policy)
        note_reward(policy, eps, 0.7)  # selects level 3 (0.1)
        end_of_day_epsilon(policy, eps, day=5)
        assert eps.epsilon == pytest.approx(0.3)  # 0.1 + 0.2

    def test_delta_clamped_at_one(self):
        policy = make_policy(epsilon_policy="previous", days=10, delta=0.9)
        eps = EpsilonState.initial(policy)
        note_reward(policy, eps, -0.9)  # selects level 1 (0.9)
        end_of_day_epsilon(policy, eps, day=1)
        assert eps.epsilon == 1.0

    def test_delta_inactive_when_days_zero(self):
        policy = make_policy(epsilon_policy="previous", days=0, delta=0.9)
        eps = EpsilonState.initial(policy)
        note_reward(policy, eps, 0.7)
        end_of_day_epsilon(policy, eps, day=1)
        assert eps.epsilon == policy.epsilon_levels[2]  # no delta added

    def test_delta_inactive_beyond_window(self):
        policy = make_policy(epsilon_policy="previous", days=3, delta=0.5)
        eps = EpsilonState.initial(policy)
        note_reward(policy, eps, 0.7)
        end_of_day_epsilon(policy, eps, day=4)
        assert eps.epsilon == policy.epsilon_levels[2]

    def test_prior_boost_clamps(self):
        policy = make_policy(epsilon_policy="previous", prior=True)
        eps = EpsilonState.initial(policy)
        eps.epsilon = 0.95
        note_reward(policy, eps, -0.3)
        note_reward(policy, eps, -0.8)  # every reward negative
        end_of_day_epsilon(policy, eps)
        # bracket selection runs first (avg -0.55 < R1 -> 0.9), then +0.1
        assert eps.epsilon == pytest.approx(1.0)

    def test_prior_requires_all_negative(self):
        policy = make_policy(epsilon_policy="previous", prior=True)
        eps = EpsilonState.initial(policy)
        note_reward(policy, eps, -0.3)
        note_reward(policy, eps, 0.2)
        end_of_day_epsilon(policy, eps)
        assert eps.epsilon == policy.epsilon_levels[1]  # avg -0.05: level 2, no boost

    def test_epsilon_always_in_unit_interval(self):
        rng = np.random.default_rng(5)
        policies = ["days", "previous", "ratio", "hit"]
        for trial in range(30):
            policy = make_policy(
                epsilon_policy=policies[trial % 4],
                days=int(rng.integers(0, 30)),
                delta=float(rng.random()),
                prior=bool(rng.random() < 0.5),
                threshold=float(rng.random()),
            )
            eps = EpsilonState.initial(policy)
            for day in range(1, 50):
                for _ in range(int(rng.integers(0, 20))):
                    note_reward(policy, eps, float(rng.uniform(-1, 1)))
                    assert 0.0 <= eps.epsilon <= 1.0
                end_of_day_epsilon(policy, eps, day)
                assert 0.0 <= eps.epsilon <= 1.0

    def test_day_accumulators_reset(self):
        policy = make_policy()
        eps = EpsilonState.initial(policy)
        note_reward(policy, eps, 0.5)
        assert eps.day_count == 1
        end_of_day_epsilon(policy, eps)
        assert eps.day_count == 0 and eps.day_sum == 0.0


class TestActionSpace:
    def test_whole_level_two_actions(self):
        policy = make_policy(entity_level="whole")
        assert len(build_actions(policy, make_fleet(5))) == 2

    def test_cluster_level(self):
        policy = make_policy(entity_level="cluster")
        fleet = make_fleet(6, cluster_size=2)  # 3 clusters
        assert len(build_actions(policy, fleet)) == 4

    def test_computer_level(self):
        policy = make_policy(entity_level="computer")
        assert len(build_actions(policy, make_fleet(5))) == 6

    def test_queue_action_present(self):
        for level in ("computer", "cluster", "whole"):
            policy = make_policy(entity_level=level)
            assert QUEUE_ACTION in build_actions(policy, make_fleet(4))

    def test_availability_buckets(self):
        assert availability_bucket(0.0) == 0
        assert availability_bucket(0.1) == 1
        assert availability_bucket(0.3) == 2
        assert availability_bucket(0.6) == 3
        assert availability_bucket(0.75) == 4
        assert availability_bucket(1.0) == 4


class TestSelectAction:
    def _scheduler(self, policy, fleet=None, seed=0):
        fleet = fleet or make_fleet(3)
        return RlScheduler(policy, fleet, np.random.default_rng(seed))

    def test_pure_exploitation_picks_best(self):
        policy = make_policy(epsilon_levels=(0.0, 0.0, 0.0))
        sched = self._scheduler(policy)
        state = (9, 4)
        best = ("computer", "c1")
        sched._arm(state, best).append(1.0)
        for _ in range(50):
            assert sched.select_action(state) == best

    def test_full_exploration_uniform(self):
        policy = make_policy(epsilon_levels=(1.0, 1.0, 1.0))
        sched = self._scheduler(policy)
        state = (9, 4)
        counts = {}
        n = 10_000
        for _ in range(n):
            a = sched.select_action(state)
            counts[a] = counts.get(a, 0) + 1
        expected = 1.0 / len(sched.actions)
        for action in sched.actions:
            assert abs(counts.get(action, 0) / n - expected) < 0.02

    def test_defer_substitutes_queue(self):
        fleet = make_fleet(1, reboot_hours=[5])
        policy = make_policy(
            defer=True, entity_level="computer", epsilon_levels=(0.0, 0.0, 0.0)
        )
        sched = RlScheduler(policy, fleet, np.random.default_rng(0))
        sched._arm((5, 4), ("computer", "c0")).append(1.0)
        sched._arm((6, 4), ("computer", "c0")).append(1.0)
        during = sched.decide(5 * 3600 + 10, "t", ["c0"], {"k0": ["c0"]})
        assert during.computer_id is None
        assert during.token.action == QUEUE_ACTION
        after = sched.decide(6 * 3600 + 10, "t", ["c0"], {"k0": ["c0"]})
        assert after.computer_id == "c0"

    def test_defer_disabled_places_anyway(self):
        fleet = make_fleet(1, reboot_hours=[5])
        policy = make_policy(
            defer=False, entity_level="computer", epsilon_levels=(0.0, 0.0, 0.0)
        )
        sched = RlScheduler(policy, fleet, np.random.default_rng(0))
        sched._arm((5, 4), ("computer", "c0")).append(1.0)
        assert sched.decide(5 * 3600 + 10, "t", ["c0"], {"k0": ["c0"]}).computer_id == "c0"

    def test_week_state_uses_hour_of_week(self):
        policy = make_policy(week=True, epsilon_levels=(0.0, 0.0, 0.0))
        sched = self._scheduler(policy)
        key = sched.state_key(30 * 3600, ["c0"], {"k0": ["c0"]})
        assert key[0] == 30  # hour 30 of the week, not 6 of the day

    def test_day_state_wraps_at_24(self):
        policy = make_policy(week=False)
        sched = self._scheduler(policy)
        key = sched.state_key(30 * 3600, ["c0"], {"k0": ["c0"]})
        assert key[0] == 6

    def test_report_updates_estimate(self):
        policy = make_policy(epsilon_levels=(0.0, 0.0, 0.0), sigma=0.0)
        sched = self._scheduler(policy)
        decision = sched.decide(0, "t", ["c0", "c1", "c2"], {"k0": ["c0", "c1", "c2"]})
        assert decision.computer_id is not None
        sched.report(decision.token, OUTCOME_COMPLETED)
        arm = sched._arm(decision.token.state, decision.token.action)
        assert list(arm.values) == [1.0]

    def test_cluster_action_resolves_lowest_free(self):
        policy = make_policy(entity_level="cluster", epsilon_levels=(0.0, 0.0, 0.0))
        fleet = make_fleet(4, cluster_size=2)
        sched = RlScheduler(policy, fleet, np.random.default_rng(1))
        state = sched.state_key(0, ["c1", "c2"], {"k0": ["c1"], "k1": ["c2"]})
        sched._arm(state, ("cluster", "k0")).append(1.0)
        decision = sched.decide(0, "t", ["c1", "c2"], {"k0": ["c1"], "k1": ["c2"]})
        assert decision.computer_id == "c1"

    def test_unrealizable_placement_queues(self):
        policy = make_policy(entity_level="computer", epsilon_levels=(0.0, 0.0, 0.0))
        sched = self._scheduler(policy)
        state = sched.state_key(0, ["c1"], {"k0": ["c1"]})
        sched._arm(state, ("computer", "c0")).append(1.0)  # best arm not free
        decision = sched.decide(0, "t", ["c1"], {"k0": ["c1"]})
        assert decision.computer_id is None


class TestEfficiencyNormalisation:
    def test_scores_span_unit_interval(self):
        fleet = make_fleet(3, efficiencies=[0.5, 0.75, 1.0])
        sched = RlScheduler(make_policy(), fleet, np.random.default_rng(0))
        assert sched.eff_score["c0"] == 0.0
        assert sched.eff_score["c1"] == 0.5
        assert sched.eff_score["c2"] == 1.0

    def test_uniform_fleet_neutral(self):
        fleet = make_fleet(3, efficiencies=[0.8, 0.8, 0.8])
        sched = RlScheduler(make_policy(), fleet, np.random.default_rng(0))
        assert all(v == 0.5 for v in sched.eff_score.values())
