"""Ground-truth stochastic processes: cluster drift HMMs and per-node anomaly chains.

The binary majority scenario builds one hidden-Markov model per cluster whose
state is the vector of per-node binary conditions; the twin is considered
drifting once at least half of the cluster nodes are in state 1. Flip-up
probabilities are calibrated so that each cluster generates drift events at a
target frequency.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "NetworkTopology",
    "DriftClusterModel",
    "AnomalyProcess",
    "BinaryMajorityScenario",
    "CalibrationError",
    "step_cluster",
    "step_anomaly",
    "build_binary_scenario",
    "calibrate_drift_rate",
    "expected_absorption_time",
    "binary_transition_matrix",
]

ROW_SUM_TOL = 1e-12


class CalibrationError(ValueError):
    """Raised when no flip-probability scale can reach the target drift rate."""


@dataclass
class NetworkTopology:
    """Node sets: which nodes feed the twin clusters and which report anomalies."""

    num_nodes: int
    dt_nodes: tuple[int, ...]
    anomaly_nodes: tuple[int, ...]
    clusters: tuple[tuple[int, ...], ...]
    cluster_size: int

    def __post_init__(self) -> None:
        flat = [n for c in self.clusters for n in c]
        if len(flat) != len(set(flat)):
            raise ValueError("clusters must be pairwise disjoint")
        if set(flat) != set(self.dt_nodes):
            raise ValueError("cluster union must equal the set of twin nodes")
        if set(self.dt_nodes) | set(self.anomaly_nodes) != set(range(self.num_nodes)):
            raise ValueError("every node must be a twin node, an anomaly node, or both")
        for c in self.clusters:
            if len(c) != self.cluster_size:
                raise ValueError("all clusters must have exactly cluster_size members")

    @property
    def num_clusters(self) -> int:
        return len(self.clusters)


@dataclass
class DriftClusterModel:
    """One cluster's HMM over an enumerated state space.

    ``transition`` is row-stochastic over states, ``drift_mask`` marks the
    states where the twin is considered drifting, and ``obs_probs[j][o, y]``
    gives the probability that the cluster's j-th node observes symbol ``o``
    in hidden state ``y``.  ``state_bits`` is set for the binary scenario,
    where state ``y`` encodes the per-node bits.
    """

    transition: np.ndarray
    drift_mask: np.ndarray
    initial_state: int
    obs_probs: list[np.ndarray]
    state_bits: np.ndarray | None = None

    def __post_init__(self) -> None:
        self.transition = np.asarray(self.transition, dtype=float)
        self.drift_mask = np.asarray(self.drift_mask, dtype=bool)
        s = self.transition.shape[0]
        if self.transition.shape != (s, s):
            raise ValueError("transition matrix must be square")
        row_sums = self.transition.sum(axis=1)
        if np.any(np.abs(row_sums - 1.0) > ROW_SUM_TOL):
            raise ValueError("transition rows must sum to 1 within 1e-12")
        if self.drift_mask.shape != (s,):
            raise ValueError("drift mask length must match the state count")
        if self.drift_mask[self.initial_state]:
            raise ValueError("initial state must not be a drift state")
        for probs in self.obs_probs:
            if probs.shape[1] != s:
                raise ValueError("observation matrices must have one column per state")

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_positions(self) -> int:
        return len(self.obs_probs)

    def is_drifting(self, state: int) -> bool:
        return bool(self.drift_mask[state])


@dataclass
class AnomalyProcess:
    """Independent two-state chains: per-node anomaly onset and resolution."""

    lam: np.ndarray
    mu: np.ndarray
    state: np.ndarray = field(init=False)
    true_aoii: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.lam = np.asarray(self.lam, dtype=float)
        self.mu = np.asarray(self.mu, dtype=float)
        if self.lam.shape != self.mu.shape:
            raise ValueError("lambda and mu vectors must have equal length")
        if np.any((self.lam < 0) | (self.mu < 0) | (self.lam + self.mu > 1)):
            raise ValueError("rates must satisfy 0 <= lambda, mu and lambda + mu <= 1")
        self.state = np.zeros(self.lam.shape, dtype=bool)
        self.true_aoii = np.zeros(self.lam.shape, dtype=np.int64)

    @property
    def num_nodes(self) -> int:
        return self.lam.shape[0]


@dataclass
class BinaryMajorityScenario:
    """Spec of the binary per-node scenario with majority-rule drift."""

    num_clusters: int
    cluster_size: int
    heterogeneity: tuple[float, ...]
    target_drift_rate_hz: float
    frame_duration_s: float
    stay_one: float = 0.9

    def __post_init__(self) -> None:
        if self.num_clusters < 1 or self.cluster_size < 1:
            raise ValueError("need at least one cluster with at least one node")
        if len(self.heterogeneity) != self.cluster_size:
            raise ValueError("heterogeneity vector length must equal cluster_size")
        if any(h <= 0 for h in self.heterogeneity):
            raise ValueError("heterogeneity entries must be positive")
        if not 0.0 <= self.stay_one <= 1.0:
            raise ValueError("stay_one must be a probability")
        if self.target_drift_rate_hz * self.frame_duration_s >= 1.0:
            raise ValueError("target drift rate must be below one event per frame")


def step_cluster(model: DriftClusterModel, state: int, rng: np.random.Generator) -> int:
    """Sample the next hidden state from the transition row of ``state``."""
    if not 0 <= state < model.num_states:
        raise ValueError(f"unknown state id {state}")
    return int(rng.choice(model.num_states, p=model.transition[state]))


def step_anomaly(
    proc: AnomalyProcess, node: int, resolved: bool, rng: np.random.Generator
) -> tuple[bool, int]:
    """Advance one node's anomaly chain; ``resolved`` is last frame's report flag.

    Returns the new state and the new true anomaly age, which increments while
    the anomaly persists and drops to zero otherwise.
    """
    if not 0 <= node < proc.num_nodes:
        raise ValueError(f"unknown node id {node}")
    x = bool(proc.state[node])
    if x:
        exit_prob = 1.0 if resolved else proc.mu[node]
        new_x = rng.random() >= exit_prob
    else:
        new_x = rng.random() < proc.lam[node]
    new_age = int(proc.true_aoii[node]) + 1 if new_x else 0
    proc.state[node] = new_x
    proc.true_aoii[node] = new_age
    return bool(new_x), new_age


def _majority_drift_mask(num_nodes: int) -> np.ndarray:
    bits = _state_bits(num_nodes)
    return bits.sum(axis=1) >= num_nodes / 2.0


def _state_bits(num_nodes: int) -> np.ndarray:
    """(num_states, num_nodes) matrix of per-node bits; bit j of state y."""
    states = np.arange(2**num_nodes)
    return (states[:, None] >> np.arange(num_nodes)[None, :]) & 1


def binary_transition_matrix(flip_up: np.ndarray, stay_one: float) -> np.ndarray:
    """Transition matrix over {0,1}^C with independent per-node flips.

    Outside drift states each node moves 0->1 with its flip_up probability and
    stays at 1 with probability ``stay_one``; inside drift states the nodes at
    1 are frozen until the twin is re-aligned.
    """
    flip_up = np.asarray(flip_up, dtype=float)
    c = flip_up.shape[0]
    bits = _state_bits(c).astype(float)
    drift = _majority_drift_mask(c)
    # per-node probability of the target bit given the source bit
    p_one_normal = np.where(bits == 1.0, stay_one, flip_up[None, :])
    p_one_drift = np.where(bits == 1.0, 1.0, flip_up[None, :])
    p_one = np.where(drift[:, None], p_one_drift, p_one_normal)
    tgt = bits[None, :, :]  # (1, S, C)
    per_node = np.where(tgt == 1.0, p_one[:, None, :], 1.0 - p_one[:, None, :])
    matrix = per_node.prod(axis=2)
    matrix /= matrix.sum(axis=1, keepdims=True)
    return matrix


def expected_absorption_time(transition: np.ndarray, drift_mask: np.ndarray, start: int) -> float:
    """Mean frames to reach any drift state, treating drift states as absorbing."""
    transient = ~np.asarray(drift_mask, dtype=bool)
    q_sub = transition[np.ix_(transient, transient)]
    t = np.linalg.solve(np.eye(q_sub.shape[0]) - q_sub, np.ones(q_sub.shape[0]))
    idx = np.flatnonzero(transient)
    return float(t[np.searchsorted(idx, start)])


def calibrate_drift_rate(
    base_u: np.ndarray,
    stay_one: float,
    num_nodes: int,
    target_rate_hz: float,
    frame_duration_s: float,
    rel_tol: float = 1e-6,
    max_iter: int = 200,
) -> np.ndarray:
    """Scale the flip-up vector so drift events occur at the target frequency.

    Finds the scalar s such that the expected absorption time into the drift
    set from the all-zeros state equals 1 / (rate * frame duration) frames;
    the scale is found by bisection, which preserves heterogeneity ratios.
    """
    base_u = np.asarray(base_u, dtype=float)
    if base_u.shape != (num_nodes,):
        raise ValueError("base flip vector length must equal the cluster size")
    if np.any((base_u <= 0) | (base_u > 1)):
        raise ValueError("base flip probabilities must be in (0, 1]")
    if target_rate_hz * frame_duration_s >= 1.0:
        raise ValueError("target rate must be below one drift event per frame")

    target = 1.0 / (target_rate_hz * frame_duration_s)
    drift = _majority_drift_mask(num_nodes)
    s_hi = 1.0 / float(base_u.max())

    def absorption(scale: float) -> float:
        m = binary_transition_matrix(scale * base_u, stay_one)
        return expected_absorption_time(m, drift, start=0)

    t_hi = absorption(s_hi)
    if t_hi > target * (1 + rel_tol):
        raise CalibrationError(
            f"target absorption time {target:.6g} frames unreachable: fastest "
            f"achievable is {t_hi:.6g} frames at full flip probability"
        )
    s_lo = s_hi
    t_lo = t_hi
    while t_lo < target:
        s_lo /= 2.0
        t_lo = absorption(s_lo)
    for _ in range(max_iter):
        s_mid = 0.5 * (s_lo + s_hi)
        t_mid = absorption(s_mid)
        if abs(t_mid - target) <= rel_tol * target:
            return s_mid * base_u
        if t_mid > target:
            s_lo = s_mid
        else:
            s_hi = s_mid
    raise CalibrationError("bisection failed to converge on the target drift rate")


def build_binary_scenario(spec: BinaryMajorityScenario) -> list[DriftClusterModel]:
    """Build one calibrated cluster model per cluster for the binary scenario.

    All clusters share the same per-position dynamics, so the same calibrated
    transition matrix is used for each; observations are the nodes' true bits,
    error-free.
    """
    c = spec.cluster_size
    flip_up = calibrate_drift_rate(
        np.asarray(spec.heterogeneity, dtype=float) / max(spec.heterogeneity),
        spec.stay_one,
        c,
        spec.target_drift_rate_hz,
        spec.frame_duration_s,
    )
    transition = binary_transition_matrix(flip_up, spec.stay_one)
    bits = _state_bits(c)
    obs_probs = [
        np.stack([(bits[:, j] == 0).astype(float), (bits[:, j] == 1).astype(float)])
        for j in range(c)
    ]
    drift = _majority_drift_mask(c)
    return [
        DriftClusterModel(
            transition=transition.copy(),
            drift_mask=drift.copy(),
            initial_state=0,
            obs_probs=[p.copy() for p in obs_probs],
            state_bits=bits.copy(),
        )
        for _ in range(spec.num_clusters)
    ]
