"""Scheduler, threshold, and allocator tests."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pushpull.model import (
    BinaryMajorityScenario,
    DriftClusterModel,
    build_binary_scenario,
)
from pushpull.scheduling import (
    BinaryPullScheduler,
    FrameConfig,
    FramePlan,
    FsaState,
    afsa_update,
    anomaly_urgency,
    binary_entropy,
    cra_pull_schedule,
    drift_urgency,
    expected_posterior_entropy,
    fsa_p_tx,
    fsa_p_tx_per_frame,
    information_gain,
    maf_pull_schedule,
    pps_pull_schedule,
    pps_push_threshold,
    push_collision_probability,
    rsm_allocate,
    slot_collision_probability,
    ssm_allocate,
)


def single_node_model() -> DriftClusterModel:
    # one binary node, state 1 = drift, perfect observation
    return build_binary_scenario(BinaryMajorityScenario(1, 1, (1.0,), 3.0, 0.01))[0]


def mirrored_model() -> DriftClusterModel:
    """Two positions that always observe the same underlying bit."""
    obs = np.array([[1.0, 0.0], [0.0, 1.0]])
    return DriftClusterModel(
        transition=np.array([[0.9, 0.1], [0.0, 1.0]]),
        drift_mask=np.array([False, True]),
        initial_state=0,
        obs_probs=[obs.copy(), obs.copy()],
    )


def delta(size: int, where: int) -> np.ndarray:
    out = np.zeros(size)
    out[where] = 1.0
    return out


class TestEntropyAndGain:
    def test_point_mass_prior_has_zero_entropy(self):
        model = single_node_model()
        assert expected_posterior_entropy(np.array([1.0, 0.0]), model, []) == 0.0
        assert expected_posterior_entropy(np.array([1.0, 0.0]), model, [0]) == 0.0

    def test_perfect_observation_removes_all_entropy(self):
        model = single_node_model()
        assert expected_posterior_entropy(np.array([0.5, 0.5]), model, [0]) == pytest.approx(0.0)

    def test_empty_schedule_is_prior_risk_entropy(self):
        model = single_node_model()
        assert expected_posterior_entropy(np.array([0.5, 0.5]), model, []) == pytest.approx(1.0)

    def test_gain_of_coin_flip_cluster(self):
        model = single_node_model()
        assert information_gain(np.array([0.5, 0.5]), model, [], 0) == pytest.approx(1.0)

    def test_duplicate_information_gains_nothing(self):
        model = mirrored_model()
        prior = np.array([0.4, 0.6])
        assert information_gain(prior, model, [0], 1) == pytest.approx(0.0, abs=1e-12)

    def test_already_scheduled_candidate_rejected(self):
        with pytest.raises(ValueError):
            information_gain(np.array([0.5, 0.5]), single_node_model(), [0], 0)

    def test_gain_nonnegative_over_random_priors(self):
        model = build_binary_scenario(
            BinaryMajorityScenario(1, 4, (1.0, 7.0, 7.25, 7.5), 3.0, 0.01)
        )[0]
        rng = np.random.default_rng(5)
        for _ in range(1000):
            prior = rng.dirichlet(np.ones(16))
            scheduled = list(rng.choice(4, size=rng.integers(0, 3), replace=False))
            candidate = next(j for j in range(4) if j not in scheduled)
            assert information_gain(prior, model, scheduled, candidate) >= -1e-12


class TestPpsPullSchedule:
    @pytest.fixture()
    def setup(self):
        models = build_binary_scenario(
            BinaryMajorityScenario(3, 2, (1.0, 2.0), 3.0, 0.01)
        )
        clusters = [(0, 1), (2, 3), (4, 5)]
        return models, clusters

    def test_all_point_mass_ties_break_low_ids(self, setup):
        models, clusters = setup
        priors = [delta(4, 0) for _ in range(3)]
        assert pps_pull_schedule(priors, models, clusters, 4) == [0, 1, 2, 3]

    def test_only_uncertain_cluster_wins(self, setup):
        models, clusters = setup
        priors = [delta(4, 0), np.full(4, 0.25), delta(4, 0)]
        picked = pps_pull_schedule(priors, models, clusters, 1)
        assert picked[0] in clusters[1]

    def test_full_budget_schedules_everyone(self, setup):
        models, clusters = setup
        priors = [np.full(4, 0.25)] * 3
        assert sorted(pps_pull_schedule(priors, models, clusters, 6)) == list(range(6))

    def test_overfull_budget_rejected(self, setup):
        models, clusters = setup
        with pytest.raises(ValueError):
            pps_pull_schedule([delta(4, 0)] * 3, models, clusters, 7)

    def test_fast_scheduler_matches_reference(self, setup):
        models, clusters = setup
        fast = BinaryPullScheduler(models[0].state_bits, models[0].drift_mask, clusters)
        rng = np.random.default_rng(17)
        for _ in range(200):
            priors = rng.dirichlet(np.ones(4), size=3)
            q = int(rng.integers(1, 7))
            ref = pps_pull_schedule([priors[i] for i in range(3)], models, clusters, q)
            assert fast.schedule(priors, q) == ref


class TestBenchmarkSchedules:
    def test_maf_fresh_start_lowest_ids(self):
        aoi = np.zeros(6, dtype=int)
        assert maf_pull_schedule(aoi, np.arange(6), 3) == [0, 1, 2]

    def test_maf_sorts_by_age(self):
        aoi = np.array([5, 1, 7, 3])
        assert maf_pull_schedule(aoi, np.arange(4), 2) == [2, 0]

    def test_maf_round_robin_under_resets(self):
        n, q = 6, 2
        aoi = np.zeros(n, dtype=int)
        seen = []
        for _ in range(n // q):
            picked = maf_pull_schedule(aoi, np.arange(n), q)
            seen.extend(picked)
            aoi += 1
            aoi[picked] = 0
        assert sorted(seen) == list(range(n))

    def test_cra_takes_top_risk_cluster(self):
        clusters = [(0, 1), (2, 3)]
        rng = np.random.default_rng(0)
        out = cra_pull_schedule(np.array([0.1, 0.9]), clusters, 2, rng)
        assert out == [2, 3]

    def test_cra_equal_risks_id_order(self):
        clusters = [(0, 1), (2, 3)]
        rng = np.random.default_rng(0)
        assert cra_pull_schedule(np.array([0.5, 0.5]), clusters, 2, rng) == [0, 1]

    def test_cra_partial_cluster_random_fill(self):
        clusters = [(0, 1), (2, 3)]
        rng = np.random.default_rng(0)
        out = cra_pull_schedule(np.array([0.9, 0.1]), clusters, 3, rng)
        assert out[:2] == [0, 1] and out[2] in (2, 3)


class TestPushThreshold:
    def test_all_fresh_beliefs(self):
        priors = np.tile(delta(5, 0), (3, 1))
        assert pps_push_threshold(priors, push_res=4, collision_cap=0.2) == 0

    def test_direct_collision_arithmetic(self):
        priors = np.stack([delta(6, 5), delta(6, 3), delta(6, 0)])
        # theta*=3: one certain transmitter, no collision risk;
        # theta*=2: two certain transmitters over P=2, Pr(chi)=0.5 > sigma
        assert push_collision_probability(priors, 3, 2) == pytest.approx(0.0)
        assert push_collision_probability(priors, 2, 2) == pytest.approx(0.5)
        assert pps_push_threshold(priors, push_res=2, collision_cap=0.2) == 3

    def test_slot_collision_arithmetic(self):
        # two certain transmitters over 2 slots: 1 - (1/2)^2 - (2/2)*(1/2) = 1/4
        priors = np.stack([delta(6, 5), delta(6, 3)])
        assert slot_collision_probability(priors, 0, 2) == pytest.approx(0.25)
        assert slot_collision_probability(priors, 4, 2) == 0.0

    def test_slot_measure_below_frame_measure(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            priors = rng.dirichlet(np.full(6, 0.3), size=5)
            theta = int(rng.integers(0, 4))
            p = int(rng.integers(2, 8))
            assert (slot_collision_probability(priors, theta, p)
                    <= push_collision_probability(priors, theta, p) + 1e-12)

    def test_permissive_cap_admits_zero(self):
        # sigma -> 1 admits every candidate, so the smallest (0) is selected
        priors = np.stack([delta(6, 5), delta(6, 3), delta(6, 2)])
        assert pps_push_threshold(priors, push_res=2, collision_cap=1.0) == 0

    def test_fallback_when_nothing_admissible(self):
        priors = np.tile(delta(8, 7), (10, 1))  # ten certain transmitters
        theta = pps_push_threshold(priors, push_res=2, collision_cap=0.01)
        assert theta == 5  # theta_max - 2


class TestFsaPolicies:
    def test_printed_formula_at_defaults(self):
        assert fsa_p_tx(0.01, 10, 0.9, 100, 3.0) == pytest.approx(3e-4)

    def test_zero_load(self):
        assert fsa_p_tx(0.01, 10, 0.0, 100, 3.0) == 0.0

    def test_clamped_to_one(self):
        assert fsa_p_tx(10.0, 20, 1.0, 1, 0.1) == 1.0

    def test_per_frame_normalization(self):
        # 100 nodes at 3 Hz over 10 ms frames: 3 arrivals/frame, target 9 attempts
        assert fsa_p_tx_per_frame(0.01, 10, 0.9, 100, 3.0) == 1.0
        assert fsa_p_tx_per_frame(0.01, 10, 0.9, 100, 60.0) == pytest.approx(0.15)

    def test_afsa_additive_update(self):
        state = FsaState(p_tx=0.5)
        out = afsa_update(state, num_collided=3, num_silent=2, push_res=10, gain=0.1)
        assert out.p_tx == pytest.approx(0.51)

    def test_afsa_balance_keeps_probability(self):
        state = FsaState(p_tx=0.4)
        out = afsa_update(state, 2, 2, 10, 0.1)
        assert out.p_tx == pytest.approx(0.4)

    def test_afsa_all_silent_converges_to_floor(self):
        state = FsaState(p_tx=0.9, p_min=0.2, p_max=1.0)
        for _ in range(200):
            state = afsa_update(state, 0, 10, 10, 0.1)
        assert state.p_tx == pytest.approx(0.2)

    def test_afsa_slot_count_validation(self):
        with pytest.raises(ValueError):
            afsa_update(FsaState(p_tx=0.5), 6, 6, 10, 0.1)


class TestUrgenciesAndAllocators:
    def test_quiet_system_zero_urgency(self):
        assert drift_urgency(np.zeros(4)) == 0.0
        assert anomaly_urgency(np.tile(delta(4, 0), (10, 1)), risk_frames=2) == 0.0

    def test_mean_drift_risk(self):
        assert drift_urgency(np.array([0.2, 0.6])) == pytest.approx(0.4)

    def test_single_violator(self):
        beliefs = np.tile(delta(5, 0), (100, 1))
        beliefs[0] = delta(5, 3)  # age above the 2-frame tolerance
        assert anomaly_urgency(beliefs, risk_frames=2) == pytest.approx(0.01)

    def test_rsm_symmetry(self):
        assert rsm_allocate(0.3, 0.3, 20, 5) == 10

    def test_rsm_floor_then_clamp(self):
        assert rsm_allocate(0.08, 0.02, 20, 5) == 5

    def test_rsm_zero_anomaly_urgency(self):
        assert rsm_allocate(0.5, 0.0, 20, 5) == 5

    def test_rsm_idle_split(self):
        assert rsm_allocate(0.0, 0.0, 20, 5) == 10

    def test_ssm_hysteresis_band(self):
        assert ssm_allocate(10, 0.301, 0.300, 0.005, 20, 5) == 10

    def test_ssm_steps_by_one(self):
        assert ssm_allocate(10, 0.30, 0.31, 0.005, 20, 5) == 11
        assert ssm_allocate(10, 0.31, 0.30, 0.005, 20, 5) == 9

    def test_ssm_clamped_at_edges(self):
        assert ssm_allocate(15, 0.0, 1.0, 0.005, 20, 5) == 15
        assert ssm_allocate(5, 1.0, 0.0, 0.005, 20, 5) == 5


class TestConfigObjects:
    def test_r_min_validation(self):
        with pytest.raises(ValueError):
            FrameConfig(total_res=20, r_min=11)

    def test_frame_plan_validation(self):
        with pytest.raises(ValueError):
            FramePlan(pull_res=1, push_res=19, scheduled=(1, 2), push_threshold=0)
        with pytest.raises(ValueError):
            FramePlan(pull_res=2, push_res=18, scheduled=(1, 1), push_threshold=0)

    def test_fsa_state_clips(self):
        assert FsaState(p_tx=1.7).p_tx == 1.0
        assert FsaState(p_tx=0.1, p_min=0.2).p_tx == 0.2

    @given(st.floats(0.0, 1.0))
    @settings(max_examples=50, deadline=None)
    def test_binary_entropy_bounds(self, p):
        h = binary_entropy(p)
        assert 0.0 <= h <= 1.0
        assert binary_entropy(0.5) == 1.0
