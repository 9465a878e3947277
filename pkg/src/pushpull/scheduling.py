"""Schedulers and allocators: information-gain pull scheduling, the threshold
push policy, the benchmark access schemes, and the pull/push split rules."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import xlogy

from .model import DriftClusterModel
from .tracking import activation_stats, active_count_prior

__all__ = [
    "FrameConfig",
    "FramePlan",
    "AllocationState",
    "FsaState",
    "binary_entropy",
    "expected_posterior_entropy",
    "information_gain",
    "pps_pull_schedule",
    "BinaryPullScheduler",
    "maf_pull_schedule",
    "cra_pull_schedule",
    "pps_push_threshold",
    "push_collision_probability",
    "fsa_p_tx",
    "fsa_p_tx_per_frame",
    "afsa_update",
    "drift_urgency",
    "anomaly_urgency",
    "rsm_allocate",
    "ssm_allocate",
]


@dataclass
class FrameConfig:
    """Frame-level knobs shared by every policy."""

    total_res: int = 20
    frame_duration: float = 0.01
    r_min: int = 5
    collision_cap: float = 0.2
    aoii_risk_frames: int = 2
    reset_confidence: float = 0.95
    hysteresis: float = 0.005

    def __post_init__(self) -> None:
        if 2 * self.r_min > self.total_res:
            raise ValueError("r_min cannot exceed half the resources per frame")
        if not 0.0 < self.collision_cap < 1.0:
            raise ValueError("collision cap must be in (0, 1)")
        if not 0.0 < self.reset_confidence < 1.0:
            raise ValueError("reset confidence must be in (0, 1)")


@dataclass
class FramePlan:
    """Resolved per-frame allocation: pull slots, push slots, schedule, threshold."""

    pull_res: int
    push_res: int
    scheduled: tuple[int, ...]
    push_threshold: int

    def __post_init__(self) -> None:
        if len(set(self.scheduled)) != len(self.scheduled):
            raise ValueError("scheduled node ids must be distinct")
        if len(self.scheduled) > self.pull_res:
            raise ValueError("cannot schedule more nodes than pull slots")


@dataclass
class AllocationState:
    """Mutable state of an adaptive pull/push allocator."""

    push_res: int
    last_drift_urgency: float = 0.0
    last_anomaly_urgency: float = 0.0


@dataclass
class FsaState:
    """Transmission probability of the (adaptive) slotted random access policy."""

    p_tx: float
    p_min: float = 0.0
    p_max: float = 1.0

    def __post_init__(self) -> None:
        self.p_tx = float(np.clip(self.p_tx, self.p_min, self.p_max))


_LN2 = math.log(2.0)


def binary_entropy(p: float | np.ndarray) -> float | np.ndarray:
    p = np.asarray(p, dtype=float)
    h = (-xlogy(p, p) - xlogy(1.0 - p, 1.0 - p)) / _LN2
    return float(h) if h.ndim == 0 else h


def _grouped_entropy(mass: np.ndarray, risk_mass: np.ndarray) -> float:
    """Sum of mass-weighted binary entropies of per-group conditional risks.

    Uses sum_g m_g H(r_g / m_g) = (sum m ln m - sum r ln r - sum (m-r) ln (m-r)) / ln 2,
    which needs no division and is exact at empty or pure groups.
    """
    return float(
        (xlogy(mass, mass) - xlogy(risk_mass, risk_mass)
         - xlogy(mass - risk_mass, mass - risk_mass)).sum()
    ) / _LN2


def _observation_weights(model: DriftClusterModel, scheduled) -> np.ndarray:
    """Rows are per-state likelihoods of each joint observation of `scheduled`."""
    weights = np.ones((1, model.num_states))
    for j in scheduled:
        obs = model.obs_probs[j]
        weights = (weights[:, None, :] * obs[None, :, :]).reshape(-1, model.num_states)
    return weights


def _expected_entropy_from_weights(
    weights: np.ndarray, prior: np.ndarray, drift_mask: np.ndarray
) -> float:
    mass = weights @ prior
    risk_mass = weights @ (prior * drift_mask)
    keep = mass > 0.0
    cond_risk = risk_mass[keep] / mass[keep]
    return float(mass[keep] @ binary_entropy(cond_risk))


def expected_posterior_entropy(
    prior: np.ndarray, model: DriftClusterModel, scheduled
) -> float:
    """Expected post-observation entropy of the drift risk for a schedule.

    Averages the binary entropy of the conditional drift risk over the joint
    observations the scheduled nodes can report. An empty schedule returns the
    entropy of the prior risk.
    """
    prior = np.asarray(prior, dtype=float)
    weights = _observation_weights(model, scheduled)
    return _expected_entropy_from_weights(weights, prior, model.drift_mask.astype(float))


def information_gain(
    prior: np.ndarray, model: DriftClusterModel, scheduled, candidate: int
) -> float:
    """Expected drift-risk entropy reduction from adding one node to a schedule."""
    if candidate in scheduled:
        raise ValueError("candidate is already scheduled")
    before = expected_posterior_entropy(prior, model, scheduled)
    after = expected_posterior_entropy(prior, model, list(scheduled) + [candidate])
    return before - after


def pps_pull_schedule(
    priors: list[np.ndarray],
    models: list[DriftClusterModel],
    clusters: list[tuple[int, ...]],
    pull_res: int,
) -> list[int]:
    """Greedy highest-information-gain pull schedule over all twin nodes.

    Each pick maximizes the entropy reduction given the nodes already chosen
    from the same cluster; only that cluster's gains are then recomputed.
    Ties break toward the lowest node id.
    """
    node_cluster: dict[int, tuple[int, int]] = {}
    for i, members in enumerate(clusters):
        for pos, node in enumerate(members):
            node_cluster[node] = (i, pos)
    if pull_res > len(node_cluster):
        raise ValueError("cannot schedule more nodes than available")

    drift = [m.drift_mask.astype(float) for m in models]
    weights = [np.ones((1, m.num_states)) for m in models]
    base_entropy = [
        _expected_entropy_from_weights(weights[i], priors[i], drift[i])
        for i in range(len(models))
    ]

    nodes = sorted(node_cluster)
    gains = {}

    def candidate_gain(node: int) -> float:
        i, pos = node_cluster[node]
        expanded = (
            weights[i][:, None, :] * models[i].obs_probs[pos][None, :, :]
        ).reshape(-1, models[i].num_states)
        after = _expected_entropy_from_weights(expanded, priors[i], drift[i])
        return max(base_entropy[i] - after, 0.0)

    for node in nodes:
        gains[node] = candidate_gain(node)

    schedule: list[int] = []
    for _ in range(pull_res):
        best = max(gains, key=lambda n: (gains[n], -n))
        i, pos = node_cluster[best]
        weights[i] = (
            weights[i][:, None, :] * models[i].obs_probs[pos][None, :, :]
        ).reshape(-1, models[i].num_states)
        base_entropy[i] = _expected_entropy_from_weights(weights[i], priors[i], drift[i])
        schedule.append(best)
        del gains[best]
        for node in clusters[i]:
            if node in gains:
                gains[node] = candidate_gain(node)
    return schedule


class BinaryPullScheduler:
    """Fast equivalent of `pps_pull_schedule` for error-free binary reports.

    When each node reports its true bit, a joint observation of a scheduled
    set simply partitions the hidden states by those bits, so the expected
    posterior entropy is a grouped entropy over precomputed state labels
    instead of a likelihood-matrix product.
    """

    def __init__(
        self, bits: np.ndarray, drift_mask: np.ndarray, clusters: list[tuple[int, ...]]
    ) -> None:
        self.bits = np.asarray(bits)
        self.drift = np.asarray(drift_mask, dtype=float)
        self.clusters = clusters
        self.node_cluster: dict[int, tuple[int, int]] = {}
        for i, members in enumerate(clusters):
            for pos, node in enumerate(members):
                self.node_cluster[node] = (i, pos)
        c = self.bits.shape[1]
        num_states = self.bits.shape[0]
        self.num_groups = 1 << c
        powers = 1 << np.arange(c)
        # group label of each state under every subset of scheduled positions,
        # stored as one-hot (mask, state, group) tensors for batched grouping
        self.onehot = np.zeros((1 << c, num_states, self.num_groups))
        for mask in range(1 << c):
            labels = (self.bits @ (powers * ((mask >> np.arange(c)) & 1))).astype(np.intp)
            self.onehot[mask, np.arange(num_states), labels] = 1.0
        self.node_pos = np.zeros(1 + max(self.node_cluster), dtype=np.intp)
        for node, (_, pos) in self.node_cluster.items():
            self.node_pos[node] = pos

    @staticmethod
    def _entropies(mass: np.ndarray, risk_mass: np.ndarray) -> np.ndarray:
        return (
            xlogy(mass, mass) - xlogy(risk_mass, risk_mass)
            - xlogy(mass - risk_mass, mass - risk_mass)
        ).sum(axis=-1) / _LN2

    def schedule(self, priors: np.ndarray, pull_res: int) -> list[int]:
        priors = np.asarray(priors, dtype=float)
        if pull_res > len(self.node_cluster):
            raise ValueError("cannot schedule more nodes than available")
        risk = priors * self.drift
        b = self.bits.astype(float)
        tot, rtot = priors.sum(axis=1), risk.sum(axis=1)
        base = (
            xlogy(tot, tot) - xlogy(rtot, rtot) - xlogy(tot - rtot, tot - rtot)
        ) / _LN2
        # singleton gains for every node in one pass
        m1, r1 = priors @ b, risk @ b
        m0, r0 = tot[:, None] - m1, rtot[:, None] - r1
        after = (
            xlogy(m1, m1) - xlogy(r1, r1) - xlogy(m1 - r1, m1 - r1)
            + xlogy(m0, m0) - xlogy(r0, r0) - xlogy(m0 - r0, m0 - r0)
        ) / _LN2
        gains = np.full(self.node_pos.shape[0], -np.inf)
        for node, (i, pos) in self.node_cluster.items():
            gains[node] = max(base[i] - after[i, pos], 0.0)

        masks = [0] * len(self.clusters)
        schedule: list[int] = []
        for _ in range(pull_res):
            best = int(np.argmax(gains))  # ties fall to the lowest node id
            i, _ = self.node_cluster[best]
            masks[i] |= 1 << self.node_pos[best]
            gains[best] = -np.inf
            schedule.append(best)
            rest = [n for n in self.clusters[i] if gains[n] > -np.inf]
            cand = [masks[i]] + [masks[i] | (1 << self.node_pos[n]) for n in rest]
            grouping = self.onehot[cand]  # (1 + len(rest), states, groups)
            both = np.stack([priors[i], risk[i]]) @ grouping  # (cand, 2, groups)
            entropies = self._entropies(both[:, 0], both[:, 1])
            if rest:
                gains[rest] = np.maximum(entropies[0] - entropies[1:], 0.0)
        return schedule


def maf_pull_schedule(aoi: np.ndarray, candidates: np.ndarray, count: int) -> list[int]:
    """Pick the `count` highest-age candidates, oldest first, ties by lowest id."""
    candidates = np.asarray(candidates)
    order = np.lexsort((candidates, -np.asarray(aoi, dtype=np.int64)[candidates]))
    return candidates[order[:count]].tolist()


def cra_pull_schedule(
    risks: np.ndarray,
    clusters: list[tuple[int, ...]],
    pull_res: int,
    rng: np.random.Generator,
) -> list[int]:
    """Whole clusters in decreasing drift risk; leftover slots filled randomly
    from the next cluster in the priority order."""
    order = np.lexsort((np.arange(len(clusters)), -np.asarray(risks, dtype=float)))
    schedule: list[int] = []
    for i in order:
        members = clusters[i]
        remaining = pull_res - len(schedule)
        if remaining <= 0:
            break
        if remaining >= len(members):
            schedule.extend(members)
        else:
            picks = rng.choice(len(members), size=remaining, replace=False)
            schedule.extend(members[p] for p in sorted(picks))
    return schedule


def push_collision_probability(priors: np.ndarray, theta_star: int, push_res: int) -> float:
    """Collision probability of the push subframe under a given threshold."""
    _, count, mean_alpha = activation_stats(priors, theta_star)
    if count < 2:
        return 0.0
    pmf = active_count_prior(count, mean_alpha)
    a = np.arange(count + 1)
    no_collision = np.zeros(count + 1)
    top = min(count, push_res)
    log_p = math.log(push_res)
    for k in range(top + 1):
        no_collision[k] = math.exp(
            math.lgamma(push_res + 1) - math.lgamma(push_res - k + 1) - k * log_p
        )
    collide = (1.0 - no_collision) * pmf
    return float(collide[a >= 2].sum())


def slot_collision_probability(priors: np.ndarray, theta_star: int, push_res: int) -> float:
    """Probability that a given push slot is hit by two or more transmitters."""
    _, count, mean_alpha = activation_stats(priors, theta_star)
    if count < 2:
        return 0.0
    pmf = active_count_prior(count, mean_alpha)
    a = np.arange(count + 1)
    miss = 1.0 - 1.0 / push_res
    # per-slot: 1 - Pr(no transmitter picks it) - Pr(exactly one picks it)
    collide = 1.0 - miss**a - (a / push_res) * miss ** np.maximum(a - 1, 0)
    return float(np.clip(pmf @ collide, 0.0, 1.0))


def pps_push_threshold(priors: np.ndarray, push_res: int, collision_cap: float) -> int:
    """Smallest anomaly-age threshold keeping the slot collision risk capped.

    Scans candidates upward from zero and stops at the first admissible one, so
    reports flow as early as the collision budget allows; if no candidate
    qualifies, falls back to two below the highest age the beliefs allow so the
    most urgent nodes still contend.
    """
    priors = np.atleast_2d(np.asarray(priors, dtype=float))
    support = priors > 0.0
    if not support.any():
        return 0
    theta_max = int(np.max(np.nonzero(support.any(axis=0))[0]))
    fallback = max(0, theta_max - 2)
    for theta in range(0, theta_max - 1):
        if slot_collision_probability(priors, theta, push_res) <= collision_cap:
            return theta
    return fallback


def fsa_p_tx(
    frame_duration: float,
    push_res: int,
    target_load: float,
    num_anomaly_nodes: int,
    anomaly_rate_hz: float,
) -> float:
    """Static transmission probability from the target load, as published."""
    if num_anomaly_nodes <= 0 or anomaly_rate_hz <= 0:
        raise ValueError("need a positive node count and anomaly rate")
    value = frame_duration * push_res * target_load / (num_anomaly_nodes * anomaly_rate_hz)
    return float(np.clip(value, 0.0, 1.0))


def fsa_p_tx_per_frame(
    frame_duration: float,
    push_res: int,
    target_load: float,
    num_anomaly_nodes: int,
    anomaly_rate_hz: float,
) -> float:
    """Transmission probability normalized by per-frame anomaly arrivals.

    Targets `target_load * push_res` transmission attempts per frame given the
    expected number of new anomalies per frame, which keeps the load finite
    and dimensionless regardless of the frame duration.
    """
    arrivals_per_frame = num_anomaly_nodes * anomaly_rate_hz * frame_duration
    if arrivals_per_frame <= 0:
        raise ValueError("need a positive anomaly arrival rate")
    return float(np.clip(push_res * target_load / arrivals_per_frame, 0.0, 1.0))


def afsa_update(
    state: FsaState, num_collided: int, num_silent: int, push_res: int, gain: float
) -> FsaState:
    """Additive-increase rate adaptation from last frame's slot outcomes."""
    if num_collided + num_silent > push_res:
        raise ValueError("slot counts exceed the subframe size")
    p = state.p_tx + gain * (num_collided - num_silent) / push_res
    return FsaState(p_tx=p, p_min=state.p_min, p_max=state.p_max)


def drift_urgency(risks: np.ndarray) -> float:
    """Mean drift risk over clusters."""
    risks = np.asarray(risks, dtype=float)
    return float(risks.mean()) if risks.size else 0.0


def anomaly_urgency(posteriors: np.ndarray, risk_frames: int) -> float:
    """Mean probability that a node's anomaly age exceeds the tolerance."""
    posteriors = np.atleast_2d(np.asarray(posteriors, dtype=float))
    if posteriors.size == 0:
        return 0.0
    return float(posteriors[:, risk_frames + 1 :].sum(axis=1).mean())


def _clamp_res(push_res: int, total_res: int, r_min: int) -> int:
    return int(np.clip(push_res, r_min, total_res - r_min))


def rsm_allocate(
    drift_urg: float, anomaly_urg: float, total_res: int, r_min: int
) -> int:
    """Proportional split of the frame by the two urgency signals."""
    if drift_urg == 0.0 and anomaly_urg == 0.0:
        raw = total_res // 2
    else:
        raw = math.floor(total_res * anomaly_urg / (anomaly_urg + drift_urg))
    return _clamp_res(raw, total_res, r_min)


def ssm_allocate(
    current_push_res: int,
    drift_urg: float,
    anomaly_urg: float,
    hysteresis: float,
    total_res: int,
    r_min: int,
) -> int:
    """One-slot-per-frame adjustment toward the more urgent subframe."""
    p = current_push_res
    if anomaly_urg - drift_urg > hysteresis:
        p += 1
    elif drift_urg - anomaly_urg > hysteresis:
        p -= 1
    return _clamp_res(p, total_res, r_min)
