"""Base-station beliefs: per-cluster drift PMFs and per-node anomaly-age PMFs.

Drift beliefs are forward-filtered HMM distributions conditioned on partially
erased cluster observations. Anomaly beliefs track each node's anomaly age
under a threshold-gated contention channel, including the collision-censored
Bayesian update that splits the belief mass at the transmission threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, xlogy

from .model import DriftClusterModel

__all__ = [
    "BeliefInconsistencyError",
    "DriftBelief",
    "AnomalyBelief",
    "PushOutcome",
    "ERASED",
    "drift_prior",
    "compatible_states",
    "observation_likelihood",
    "drift_posterior",
    "drift_risk",
    "anomaly_prior",
    "anomaly_prior_matrix",
    "anomaly_posterior_success",
    "anomaly_posterior_silent",
    "activation_stats",
    "active_count_prior",
    "outcome_likelihood",
    "enumerate_outcome_distribution",
    "active_count_posterior",
    "collider_probability",
    "anomaly_posterior_collision",
]

PMF_TOL = 1e-9

# erasure mark for a node that did not report this frame
ERASED = None


class BeliefInconsistencyError(RuntimeError):
    """An observation has zero probability under the current belief."""


def _check_pmf(pmf: np.ndarray) -> None:
    if np.any(pmf < -PMF_TOL) or abs(pmf.sum() - 1.0) > PMF_TOL:
        raise ValueError("belief PMF must be normalized and non-negative")


@dataclass
class DriftBelief:
    """PMF over one cluster's hidden states, tagged prior or posterior."""

    cluster_id: int
    pmf: np.ndarray
    stage: str = "posterior"

    def __post_init__(self) -> None:
        self.pmf = np.asarray(self.pmf, dtype=float)
        _check_pmf(self.pmf)


@dataclass
class AnomalyBelief:
    """PMF over one node's anomaly age, truncated at a support cap."""

    node_id: int
    pmf: np.ndarray
    stage: str = "posterior"

    def __post_init__(self) -> None:
        self.pmf = np.asarray(self.pmf, dtype=float)
        _check_pmf(self.pmf)

    @property
    def age_cap(self) -> int:
        return self.pmf.shape[0] - 1


@dataclass
class PushOutcome:
    """Per-slot outcome of one push subframe: 0 empty, -1 collision, node id."""

    slots: np.ndarray

    def __post_init__(self) -> None:
        self.slots = np.asarray(self.slots)
        ids = self.slots[self.slots > 0]
        if len(ids) != len(set(ids.tolist())):
            raise ValueError("a node cannot succeed in two slots")

    @property
    def successes(self) -> int:
        return int(np.count_nonzero(self.slots > 0))

    @property
    def collisions(self) -> int:
        return int(np.count_nonzero(self.slots == -1))

    @property
    def success_nodes(self) -> np.ndarray:
        return self.slots[self.slots > 0]


# ---------------------------------------------------------------------------
# drift tracking


def drift_prior(pmf: np.ndarray, transition: np.ndarray) -> np.ndarray:
    """Push the previous posterior through the transition matrix."""
    prior = np.asarray(pmf, dtype=float) @ transition
    return prior / prior.sum()


def observation_likelihood(model: DriftClusterModel, obs) -> np.ndarray:
    """Per-state likelihood of a partially erased observation vector.

    Erased positions marginalize out of the per-node observation model, so the
    likelihood is the product of the reported symbols' probabilities.
    """
    if len(obs) != model.num_positions:
        raise ValueError("observation length must equal the cluster size")
    lik = np.ones(model.num_states)
    for j, o in enumerate(obs):
        if o is not ERASED:
            lik *= model.obs_probs[j][o]
    return lik


def compatible_states(model: DriftClusterModel, obs) -> np.ndarray:
    """States with nonzero likelihood under the partial observation."""
    return observation_likelihood(model, obs) > 0.0


def drift_posterior(prior: np.ndarray, model: DriftClusterModel, obs) -> np.ndarray:
    """Condition the prior on the reported symbols; erasures carry no weight."""
    post = np.asarray(prior, dtype=float) * observation_likelihood(model, obs)
    total = post.sum()
    if total <= 0.0:
        raise BeliefInconsistencyError("observation impossible under the drift prior")
    return post / total


def drift_risk(pmf: np.ndarray, drift_mask: np.ndarray) -> float:
    """Probability that the cluster currently occupies a drift state."""
    return float(np.asarray(pmf)[np.asarray(drift_mask, dtype=bool)].sum())


# ---------------------------------------------------------------------------
# anomaly tracking


def anomaly_prior(
    pmf: np.ndarray, lam: float, mu: float, scheduled_in_pull: bool = False
) -> np.ndarray:
    """One-frame predictive update of an anomaly-age PMF.

    A node scheduled in the pull subframe reports unconditionally, so its age
    is known to reset. Otherwise the mass at 0 feeds new anomalies, resolved
    anomalies return to 0, and surviving anomalies age by one frame with
    overflow mass pooled in the top bin.
    """
    pmf = np.asarray(pmf, dtype=float)
    out = np.zeros_like(pmf)
    if scheduled_in_pull:
        out[0] = 1.0
        return out
    out[0] = (1.0 - lam - mu) * pmf[0] + mu
    out[1] = lam * pmf[0]
    out[2:] = (1.0 - mu) * pmf[1:-1]
    out[-1] += (1.0 - mu) * pmf[-1]
    return out


def anomaly_prior_matrix(
    pmfs: np.ndarray, lam: np.ndarray, mu: np.ndarray, scheduled: np.ndarray | None = None
) -> np.ndarray:
    """Vectorized `anomaly_prior` over a (nodes, ages) belief matrix."""
    lam = lam[:, None]
    mu = mu[:, None]
    out = np.empty_like(pmfs)
    out[:, 0] = ((1.0 - lam - mu) * pmfs[:, :1] + mu)[:, 0]
    out[:, 1] = (lam * pmfs[:, :1])[:, 0]
    out[:, 2:] = (1.0 - mu) * pmfs[:, 1:-1]
    out[:, -1] += ((1.0 - mu) * pmfs[:, -1:])[:, 0]
    if scheduled is not None and scheduled.any():
        out[scheduled] = 0.0
        out[scheduled, 0] = 1.0
    return out


def anomaly_posterior_success(size: int) -> np.ndarray:
    """A successful report pins the age to zero."""
    out = np.zeros(size)
    out[0] = 1.0
    return out


def anomaly_posterior_silent(prior: np.ndarray, theta_star: int) -> np.ndarray:
    """Silence in a collision-free subframe bounds the age by the threshold."""
    prior = np.asarray(prior, dtype=float)
    kept = prior[: theta_star + 1].sum()
    if kept <= 0.0:
        raise BeliefInconsistencyError(
            "silent node has no belief mass at or below the threshold"
        )
    out = np.zeros_like(prior)
    out[: theta_star + 1] = prior[: theta_star + 1] / kept
    return out


def activation_stats(priors: np.ndarray, theta_star: int) -> tuple[np.ndarray, int, float]:
    """Per-node transmission probabilities and their shared approximation.

    Returns the tail mass above the threshold per node, the count of
    potentially active nodes, and their mean activation probability.
    """
    priors = np.atleast_2d(np.asarray(priors, dtype=float))
    alpha = np.clip(priors[:, theta_star + 1 :].sum(axis=1), 0.0, 1.0)
    active = alpha > 0.0
    count = int(active.sum())
    mean = float(alpha[active].mean()) if count else 0.0
    return alpha, count, mean


def active_count_prior(num_potential: int, mean_alpha: float) -> np.ndarray:
    """Binomial PMF over the number of transmitting nodes."""
    if not 0.0 <= mean_alpha <= 1.0:
        raise ValueError("mean activation probability must be in [0, 1]")
    k = np.arange(num_potential + 1)
    log_pmf = (
        gammaln(num_potential + 1) - gammaln(k + 1) - gammaln(num_potential - k + 1)
        + xlogy(k, mean_alpha) + xlogy(num_potential - k, 1.0 - mean_alpha)
    )
    return np.exp(log_pmf)


def outcome_likelihood(s: int, c: int, a: int, num_slots: int) -> float:
    """Probability of seeing s singles and c collisions from a transmitters.

    Closed form under the approximation that no slot collects more than three
    transmitters: a - s - 2c collisions hold three nodes, the rest hold two.
    The slot profile is a multinomial over the P slots and the node split is a
    multinomial over the a transmitters. Exact whenever a = s + 2c;
    combinations outside the three-per-collision support return 0.
    """
    if s < 0 or c < 0 or a < 0 or s + c > num_slots:
        return 0.0
    extra = a - s - 2 * c  # number of three-node collisions
    if extra < 0 or extra > c:
        return 0.0
    log_slots = (
        math.lgamma(num_slots + 1)
        - math.lgamma(num_slots - s - c + 1)
        - math.lgamma(s + 1)
        - math.lgamma(c - extra + 1)
        - math.lgamma(extra + 1)
    )
    log_nodes = (
        math.lgamma(a + 1)
        - (c - extra) * math.log(2.0)
        - extra * math.log(6.0)
        - a * math.log(num_slots)
    )
    return math.exp(log_slots + log_nodes)


@lru_cache(maxsize=None)
def enumerate_outcome_distribution(a: int, num_slots: int) -> dict[tuple[int, int], float]:
    """Exact outcome distribution by enumerating all slot assignments.

    Brute-force oracle: each of the a transmitters picks one of the slots
    uniformly; returns Pr(s singles, c collisions) for every outcome.
    """
    counts: dict[tuple[int, int], int] = {}
    for assignment in np.ndindex(*([num_slots] * a)):
        occupancy = np.bincount(np.asarray(assignment, dtype=int), minlength=num_slots)
        key = (int((occupancy == 1).sum()), int((occupancy >= 2).sum()))
        counts[key] = counts.get(key, 0) + 1
    total = num_slots**a if a else 1
    return {key: n / total for key, n in counts.items()}


def active_count_posterior(
    prior: np.ndarray, s: int, c: int, num_slots: int
) -> np.ndarray:
    """Condition the transmitter-count PMF on the observed subframe outcome."""
    prior = np.asarray(prior, dtype=float)
    if s + c > num_slots:
        raise BeliefInconsistencyError(
            f"outcome (s={s}, c={c}) does not fit in {num_slots} slots"
        )
    a = np.arange(prior.shape[0])
    extra = a - s - 2 * c
    valid = (extra >= 0) & (extra <= c)
    safe_extra = np.where(valid, extra, 0)
    log_lik = (
        math.lgamma(num_slots + 1) - math.lgamma(num_slots - s - c + 1)
        - math.lgamma(s + 1) - gammaln(c - safe_extra + 1) - gammaln(safe_extra + 1)
        + gammaln(a + 1)
        - (c - safe_extra) * math.log(2.0) - safe_extra * math.log(6.0)
        - a * math.log(num_slots)
    )
    post = np.where(valid, prior * np.exp(log_lik), 0.0)
    total = post.sum()
    if total <= 0.0:
        raise BeliefInconsistencyError(
            f"outcome (s={s}, c={c}) impossible under the transmitter-count prior"
        )
    return post / total


def collider_probability(posterior: np.ndarray, s: int, num_potential: int) -> float:
    """Probability that a given non-success potentially-active node collided."""
    if num_potential <= s:
        return 0.0
    posterior = np.asarray(posterior, dtype=float)
    expected_colliders = float(
        ((np.arange(posterior.shape[0]) - s) * posterior)[s:].sum()
    )
    return expected_colliders / (num_potential - s)


def anomaly_posterior_collision(
    prior: np.ndarray, theta_star: int, p_collider: float
) -> np.ndarray:
    """Split the belief at the threshold according to the collider probability.

    Mass at or below the threshold is consistent with staying silent; mass
    above it is consistent with having collided. Each side is rescaled to its
    posterior weight.
    """
    prior = np.asarray(prior, dtype=float)
    below = prior[: theta_star + 1].sum()
    above = prior[theta_star + 1 :].sum()
    out = np.zeros_like(prior)
    if 1.0 - p_collider > 0.0:
        if below <= 0.0:
            raise BeliefInconsistencyError("no belief mass available below the threshold")
        out[: theta_star + 1] = prior[: theta_star + 1] * ((1.0 - p_collider) / below)
    if p_collider > 0.0:
        if above <= 0.0:
            raise BeliefInconsistencyError("no belief mass available above the threshold")
        out[theta_star + 1 :] = prior[theta_star + 1 :] * (p_collider / above)
    return out
