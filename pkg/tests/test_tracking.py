"""Belief machinery tests: drift filtering and anomaly-age updates."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pushpull.model import BinaryMajorityScenario, build_binary_scenario
from pushpull.tracking import (
    ERASED,
    BeliefInconsistencyError,
    PushOutcome,
    activation_stats,
    active_count_posterior,
    active_count_prior,
    anomaly_posterior_collision,
    anomaly_posterior_silent,
    anomaly_posterior_success,
    anomaly_prior,
    anomaly_prior_matrix,
    collider_probability,
    compatible_states,
    drift_posterior,
    drift_prior,
    drift_risk,
    enumerate_outcome_distribution,
    outcome_likelihood,
)


@pytest.fixture(scope="module")
def pair_model():
    # two binary nodes, drift once at least one is set (majority of 2)
    return build_binary_scenario(BinaryMajorityScenario(1, 2, (1.0, 1.0), 3.0, 0.01))[0]


def random_pmfs(rng, n, size):
    return rng.dirichlet(np.ones(size), size=n)


class TestDriftPrior:
    def test_identity_transition(self):
        pmf = np.array([0.3, 0.7])
        assert np.allclose(drift_prior(pmf, np.eye(2)), pmf)

    def test_matrix_vector_oracle(self):
        out = drift_prior(np.array([1.0, 0.0]), np.array([[0.9, 0.1], [0.0, 1.0]]))
        assert np.allclose(out, [0.9, 0.1])

    def test_uniform_fixed_by_doubly_stochastic(self):
        t = np.array([[0.5, 0.5], [0.5, 0.5]])
        assert np.allclose(drift_prior(np.array([0.5, 0.5]), t), [0.5, 0.5])


class TestDriftObservation:
    def test_all_erased_compatible_with_everything(self, pair_model):
        assert compatible_states(pair_model, [ERASED, ERASED]).all()

    def test_partial_observation_filters_states(self, pair_model):
        # node 0 reports 1: states with bit0 = 1 are y=1 and y=3
        mask = compatible_states(pair_model, [1, ERASED])
        assert np.array_equal(mask, [False, True, False, True])

    def test_full_observation_is_singleton(self, pair_model):
        mask = compatible_states(pair_model, [0, 1])
        assert np.array_equal(mask, [False, False, True, False])

    def test_all_erased_posterior_is_prior(self, pair_model):
        prior = np.array([0.1, 0.2, 0.3, 0.4])
        assert np.allclose(drift_posterior(prior, pair_model, [ERASED, ERASED]), prior)

    def test_uniform_prior_partial_obs(self, pair_model):
        post = drift_posterior(np.full(4, 0.25), pair_model, [1, ERASED])
        assert np.allclose(post, [0.0, 0.5, 0.0, 0.5])

    def test_full_observation_point_mass(self, pair_model):
        post = drift_posterior(np.full(4, 0.25), pair_model, [0, 1])
        assert np.allclose(post, [0.0, 0.0, 1.0, 0.0])

    def test_impossible_observation_raises(self, pair_model):
        prior = np.array([1.0, 0.0, 0.0, 0.0])
        with pytest.raises(BeliefInconsistencyError):
            drift_posterior(prior, pair_model, [1, ERASED])


class TestDriftRisk:
    def test_point_mass_on_aligned_state(self, pair_model):
        pmf = np.array([1.0, 0.0, 0.0, 0.0])
        assert drift_risk(pmf, pair_model.drift_mask) == 0.0

    def test_uniform_over_pair_states(self, pair_model):
        assert drift_risk(np.full(4, 0.25), pair_model.drift_mask) == pytest.approx(0.75)

    def test_posterior_fully_in_drift_set(self, pair_model):
        post = drift_posterior(np.full(4, 0.25), pair_model, [1, ERASED])
        assert drift_risk(post, pair_model.drift_mask) == pytest.approx(1.0)


class TestAnomalyPrior:
    def test_scheduled_node_resets(self):
        out = anomaly_prior(np.array([0.2, 0.3, 0.5]), 0.1, 0.0, scheduled_in_pull=True)
        assert np.allclose(out, [1.0, 0.0, 0.0])

    def test_fresh_belief_with_onset(self):
        out = anomaly_prior(np.array([1.0, 0.0, 0.0]), 0.1, 0.0)
        assert np.allclose(out, [0.9, 0.1, 0.0])

    def test_mixed_case_evaluation(self):
        out = anomaly_prior(np.array([0.5, 0.5, 0.0]), 0.1, 0.5)
        assert np.allclose(out, [0.7, 0.05, 0.25])
        assert out.sum() == pytest.approx(1.0)

    def test_top_bin_pools_overflow(self):
        out = anomaly_prior(np.array([0.0, 0.0, 1.0]), 0.1, 0.0)
        assert out[-1] == pytest.approx(1.0)

    def test_matrix_form_matches_scalar(self):
        rng = np.random.default_rng(3)
        pmfs = random_pmfs(rng, 8, 6)
        lam = rng.uniform(0, 0.3, 8)
        mu = rng.uniform(0, 0.3, 8)
        batch = anomaly_prior_matrix(pmfs, lam, mu)
        for i in range(8):
            assert np.allclose(batch[i], anomaly_prior(pmfs[i], lam[i], mu[i]))

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_normalization_preserved(self, seed):
        rng = np.random.default_rng(seed)
        pmf = rng.dirichlet(np.ones(10))
        lam = rng.uniform(0, 0.5)
        mu = rng.uniform(0, 1 - lam)
        assert anomaly_prior(pmf, lam, mu).sum() == pytest.approx(1.0, abs=1e-9)


class TestAnomalyPosteriors:
    def test_success_idempotent(self):
        once = anomaly_posterior_success(5)
        assert np.allclose(once, anomaly_posterior_success(5))
        assert once[0] == 1.0

    def test_success_then_prior_composition(self):
        out = anomaly_prior(anomaly_posterior_success(4), 0.2, 0.0)
        assert np.allclose(out, [0.8, 0.2, 0.0, 0.0])

    def test_silent_truncation_arithmetic(self):
        out = anomaly_posterior_silent(np.array([0.5, 0.3, 0.2]), theta_star=1)
        assert np.allclose(out, [0.625, 0.375, 0.0])

    def test_silent_point_mass_unchanged(self):
        pmf = np.array([1.0, 0.0, 0.0])
        assert np.allclose(anomaly_posterior_silent(pmf, 1), pmf)

    def test_silent_no_mass_raises(self):
        with pytest.raises(BeliefInconsistencyError):
            anomaly_posterior_silent(np.array([0.0, 0.0, 1.0]), theta_star=1)

    def test_collision_all_mass_above(self):
        out = anomaly_posterior_collision(np.array([0.5, 0.3, 0.2]), 1, p_collider=1.0)
        assert np.allclose(out, [0.0, 0.0, 1.0])

    def test_collision_two_bin_bayes(self):
        out = anomaly_posterior_collision(np.array([0.5, 0.5]), 0, p_collider=0.4)
        assert np.allclose(out, [0.6, 0.4])

    def test_collision_with_zero_p_matches_silent(self):
        rng = np.random.default_rng(9)
        for pmf in random_pmfs(rng, 1000, 8):
            pmf[0] += 1e-6  # keep some mass below any threshold
            pmf /= pmf.sum()
            theta = int(rng.integers(0, 7))
            a = anomaly_posterior_collision(pmf, theta, 0.0)
            b = anomaly_posterior_silent(pmf, theta)
            assert np.allclose(a, b, atol=1e-12)

    def test_collision_empty_region_raises(self):
        with pytest.raises(BeliefInconsistencyError):
            anomaly_posterior_collision(np.array([1.0, 0.0, 0.0]), 0, p_collider=0.5)


class TestActivation:
    def test_all_fresh(self):
        priors = np.tile(anomaly_posterior_success(4), (3, 1))
        alpha, count, mean = activation_stats(priors, theta_star=0)
        assert count == 0 and mean == 0.0 and np.allclose(alpha, 0.0)

    def test_point_mass_ages(self):
        d5 = np.zeros(6); d5[5] = 1.0
        d3 = np.zeros(6); d3[3] = 1.0
        d0 = np.zeros(6); d0[0] = 1.0
        alpha, count, mean = activation_stats(np.stack([d5, d3, d0]), theta_star=3)
        assert np.allclose(alpha, [1.0, 0.0, 0.0])
        assert count == 1 and mean == 1.0

    def test_mixed_beliefs(self):
        priors = np.array([[0.5, 0.5], [0.8, 0.2]])
        alpha, count, mean = activation_stats(priors, theta_star=0)
        assert count == 2 and mean == pytest.approx(0.35)


class TestActiveCountPrior:
    def test_no_potential_transmitters(self):
        assert np.allclose(active_count_prior(0, 0.0), [1.0])

    def test_binomial_table(self):
        assert np.allclose(active_count_prior(2, 0.5), [0.25, 0.5, 0.25])

    def test_certain_activation(self):
        pmf = active_count_prior(3, 1.0)
        assert np.allclose(pmf, [0.0, 0.0, 0.0, 1.0])

    def test_matches_reference_binomial(self):
        from math import comb
        n, p = 17, 0.23
        ref = [comb(n, k) * p**k * (1 - p) ** (n - k) for k in range(n + 1)]
        assert np.allclose(active_count_prior(n, p), ref, atol=1e-12)


class TestOutcomeLikelihood:
    def test_zero_transmitters(self):
        assert outcome_likelihood(0, 0, 0, 4) == 1.0
        assert outcome_likelihood(1, 0, 0, 4) == 0.0

    def test_two_transmitters_two_slots(self):
        assert outcome_likelihood(2, 0, 2, 2) == pytest.approx(0.5)
        assert outcome_likelihood(0, 1, 2, 2) == pytest.approx(0.5)

    def test_three_transmitters_enumeration(self):
        assert outcome_likelihood(1, 1, 3, 2) == pytest.approx(0.75)
        exact = enumerate_outcome_distribution(3, 2)
        assert outcome_likelihood(1, 1, 3, 2) == pytest.approx(exact[(1, 1)])

    def test_exact_on_pairwise_collisions(self):
        # closed form is exact whenever every collision has exactly 2 nodes
        for num_slots in range(1, 6):
            for a in range(0, 7):
                exact = enumerate_outcome_distribution(a, num_slots)
                for (s, c), p in exact.items():
                    if a == s + 2 * c:
                        assert outcome_likelihood(s, c, a, num_slots) == pytest.approx(
                            p, abs=1e-12
                        )

    def test_out_of_support_is_zero(self):
        assert outcome_likelihood(0, 1, 5, 4) == 0.0  # 4-way pileup unsupported
        assert outcome_likelihood(3, 1, 5, 3) == 0.0  # s + c > P


class TestActiveCountPosterior:
    def test_single_feasible_term(self):
        post = active_count_posterior(active_count_prior(2, 0.5), s=0, c=1, num_slots=2)
        assert np.allclose(post, [0.0, 0.0, 1.0])

    def test_quiet_frame_with_no_potential(self):
        post = active_count_posterior(active_count_prior(0, 0.0), s=0, c=0, num_slots=2)
        assert np.allclose(post, [1.0])

    def test_oracle_restricts_support(self):
        post = active_count_posterior(active_count_prior(3, 0.5), s=1, c=1, num_slots=2)
        assert np.allclose(post, [0.0, 0.0, 0.0, 1.0])

    def test_impossible_outcome_raises(self):
        with pytest.raises(BeliefInconsistencyError):
            active_count_posterior(active_count_prior(1, 0.5), s=0, c=1, num_slots=4)

    def test_proportional_to_prior_times_likelihood(self):
        prior = active_count_prior(6, 0.4)
        post = active_count_posterior(prior, s=1, c=1, num_slots=5)
        ref = np.array(
            [prior[a] * outcome_likelihood(1, 1, a, 5) for a in range(7)]
        )
        assert np.allclose(post, ref / ref.sum(), atol=1e-12)


class TestColliderProbability:
    def test_certain_collision(self):
        post = np.array([0.0, 0.0, 1.0])
        assert collider_probability(post, s=0, num_potential=2) == pytest.approx(1.0)

    def test_no_colliders(self):
        post = np.array([0.0, 1.0, 0.0])
        assert collider_probability(post, s=1, num_potential=3) == 0.0

    def test_mixture_expectation(self):
        post = np.array([0.0, 0.0, 0.5, 0.5])
        assert collider_probability(post, s=1, num_potential=4) == pytest.approx(0.5)


class TestPushOutcome:
    def test_counters(self):
        out = PushOutcome(slots=np.array([0, -1, 3, 7, 0]))
        assert out.successes == 2 and out.collisions == 1
        assert set(out.success_nodes.tolist()) == {3, 7}

    def test_duplicate_success_rejected(self):
        with pytest.raises(ValueError):
            PushOutcome(slots=np.array([4, 4]))
