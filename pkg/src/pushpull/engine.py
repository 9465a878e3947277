"""Frame loop and Monte Carlo harness.

Each frame: split the resources, schedule the pull subframe, gate the push
subframe by the anomaly-age threshold, resolve the collision channel, update
all beliefs, re-align any twin whose drift risk crosses the confidence bar,
sample the ground-truth age metrics, and step the hidden processes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import scheduling, tracking
from .model import BinaryMajorityScenario, DriftClusterModel, build_binary_scenario
from .scheduling import FrameConfig, FsaState
from .tracking import BeliefInconsistencyError

__all__ = [
    "SimConfig",
    "FrameLog",
    "MetricsLedger",
    "SimulationError",
    "FrameSimulator",
    "run_episode",
    "run_monte_carlo",
    "summarize",
]

PULL_POLICIES = ("pps", "maf", "cra", "none")
PUSH_POLICIES = ("pps", "maf", "fsa", "afsa", "none")
ALLOCATORS = ("fixed", "rsm", "ssm")
SCENARIOS = ("homogeneous", "heterogeneous")

HETEROGENEITY = (1.0, 7.0, 7.25, 7.5)


class SimulationError(RuntimeError):
    """An episode aborted, e.g. on a belief inconsistency."""


@dataclass
class SimConfig:
    """Full description of one simulation run."""

    num_clusters: int = 20
    cluster_size: int = 4
    num_anomaly_nodes: int = 100
    scenario: str = "heterogeneous"
    stay_one: float = 0.9
    rho_d_hz: float = 3.0
    rho_a_hz: float = 3.0
    resolution_rate: float = 0.0
    total_res: int = 20
    frame_duration: float = 0.01
    r_min: int = 5
    collision_cap: float = 0.2
    aoii_risk_frames: int = 2
    reset_confidence: float = 0.95
    hysteresis: float = 0.005
    pull_policy: str = "pps"
    push_policy: str = "pps"
    alloc: str = "fixed"
    push_res: int = 10
    fsa_load: float = 0.9
    afsa_gain: float = 0.1
    afsa_load_min: float = 0.2
    afsa_load_max: float = 1.0
    fsa_p_tx_override: float | None = None
    theta_cap: int = 100
    episodes: int = 100
    frames_per_episode: int = 1000
    seed: int = 1

    def __post_init__(self) -> None:
        if self.pull_policy not in PULL_POLICIES:
            raise ValueError(f"unknown pull policy {self.pull_policy!r}")
        if self.push_policy not in PUSH_POLICIES:
            raise ValueError(f"unknown push policy {self.push_policy!r}")
        if self.alloc not in ALLOCATORS:
            raise ValueError(f"unknown allocator {self.alloc!r}")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        if self.frames_per_episode < 1 or self.episodes < 1:
            raise ValueError("need at least one frame and one episode")
        if not 0 <= self.push_res <= self.total_res:
            raise ValueError("push_res must lie within the frame")
        self.frame_config()  # validates R_min and thresholds

    def frame_config(self) -> FrameConfig:
        return FrameConfig(
            total_res=self.total_res,
            frame_duration=self.frame_duration,
            r_min=self.r_min,
            collision_cap=self.collision_cap,
            aoii_risk_frames=self.aoii_risk_frames,
            reset_confidence=self.reset_confidence,
            hysteresis=self.hysteresis,
        )

    @property
    def num_dt_nodes(self) -> int:
        return self.num_clusters * self.cluster_size

    @property
    def num_nodes(self) -> int:
        return max(self.num_dt_nodes, self.num_anomaly_nodes)

    @property
    def heterogeneity(self) -> tuple[float, ...]:
        if self.scenario == "homogeneous":
            return (1.0,) * self.cluster_size
        return tuple(HETEROGENEITY[: self.cluster_size]) if self.cluster_size <= 4 else (
            tuple(np.linspace(1.0, 7.5, self.cluster_size))
        )

    def build_models(self) -> list[DriftClusterModel]:
        if self.num_clusters == 0:
            return []
        spec = BinaryMajorityScenario(
            num_clusters=self.num_clusters,
            cluster_size=self.cluster_size,
            heterogeneity=self.heterogeneity,
            target_drift_rate_hz=self.rho_d_hz,
            frame_duration_s=self.frame_duration,
            stay_one=self.stay_one,
        )
        return build_binary_scenario(spec)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class FrameLog:
    """Compact record of one simulated frame."""

    frame: int
    pull_res: int
    push_res: int
    scheduled: tuple[int, ...]
    push_threshold: int
    successes: int
    collisions: int
    resets: int


@dataclass
class MetricsLedger:
    """Per-frame ground-truth age samples and channel counters."""

    psi: np.ndarray  # (frames, clusters)
    theta: np.ndarray  # (frames, anomaly nodes)
    push_res: np.ndarray  # (frames,)
    successes: int = 0
    collided_slots: int = 0
    silent_slots: int = 0
    resets: int = 0
    frame_logs: list[FrameLog] = field(default_factory=list)


class FrameSimulator:
    """Mutable world + belief state for one episode."""

    def __init__(
        self,
        config: SimConfig,
        models: list[DriftClusterModel],
        rng: np.random.Generator,
    ) -> None:
        self.cfg = config
        self.models = models
        self.rng = rng
        cfg = config

        self.num_clusters = cfg.num_clusters
        self.clusters = [
            tuple(range(i * cfg.cluster_size, (i + 1) * cfg.cluster_size))
            for i in range(cfg.num_clusters)
        ]
        self.cluster_of: dict[int, tuple[int, int]] = {}
        for i, members in enumerate(self.clusters):
            for pos, node in enumerate(members):
                self.cluster_of[node] = (i, pos)
        self.n_nodes = cfg.num_nodes
        self.n_dt = cfg.num_dt_nodes
        self.n_anom = cfg.num_anomaly_nodes
        self.dt_nodes = np.arange(self.n_dt)
        self.anomaly_nodes = np.arange(self.n_anom)

        if models:
            self.transition = models[0].transition
            self.cum_transition = np.cumsum(self.transition, axis=1)
            self.drift_mask = models[0].drift_mask
            self.bits = models[0].state_bits
            self.cluster_state = np.zeros(cfg.num_clusters, dtype=np.int64)
            self.zeta = np.zeros((cfg.num_clusters, models[0].num_states))
            self.zeta[:, 0] = 1.0
            self.psi = np.zeros(cfg.num_clusters, dtype=np.int64)

        n_a = self.n_anom
        self.lam = np.full(n_a, cfg.rho_a_hz * cfg.frame_duration)
        self.mu = np.full(n_a, cfg.resolution_rate)
        self.x = np.zeros(n_a, dtype=bool)
        self.theta = np.zeros(n_a, dtype=np.int64)
        self.track_anomaly_beliefs = cfg.push_policy == "pps" or cfg.alloc in ("rsm", "ssm")
        if self.track_anomaly_beliefs:
            self.phi = np.zeros((n_a, cfg.theta_cap + 1))
            self.phi[:, 0] = 1.0

        self.pull_scheduler = None
        if cfg.pull_policy == "pps" and models and models[0].state_bits is not None:
            self.pull_scheduler = scheduling.BinaryPullScheduler(
                models[0].state_bits, models[0].drift_mask, self.clusters
            )

        # the two age-based schedulers keep independent staleness ledgers: the
        # push poller does not see pull contacts, so it cycles its own pool
        self.pull_aoi = np.zeros(self.n_nodes, dtype=np.int64)
        self.push_aoi = np.zeros(self.n_anom, dtype=np.int64)
        self.drift_urg = 0.0
        self.anomaly_urg = 0.0
        self.alloc_push_res = int(np.clip(cfg.total_res // 2, cfg.r_min, cfg.total_res - cfg.r_min))

        if cfg.push_policy in ("fsa", "afsa"):
            base = cfg.fsa_p_tx_override
            if base is None:
                base = scheduling.fsa_p_tx_per_frame(
                    cfg.frame_duration, cfg.push_res, cfg.fsa_load,
                    n_a, cfg.rho_a_hz,
                )
            p_lo = scheduling.fsa_p_tx_per_frame(
                cfg.frame_duration, cfg.push_res, cfg.afsa_load_min, n_a, cfg.rho_a_hz
            )
            p_hi = scheduling.fsa_p_tx_per_frame(
                cfg.frame_duration, cfg.push_res, cfg.afsa_load_max, n_a, cfg.rho_a_hz
            )
            if cfg.push_policy == "fsa":
                self.fsa = FsaState(p_tx=base)
            else:
                self.fsa = FsaState(p_tx=base, p_min=p_lo, p_max=p_hi)

    # -- subroutines --------------------------------------------------------

    def _allocate(self) -> int:
        cfg = self.cfg
        if cfg.alloc == "fixed":
            return cfg.push_res
        if cfg.alloc == "rsm":
            p = scheduling.rsm_allocate(
                self.drift_urg, self.anomaly_urg, cfg.total_res, cfg.r_min
            )
        else:
            p = scheduling.ssm_allocate(
                self.alloc_push_res, self.drift_urg, self.anomaly_urg,
                cfg.hysteresis, cfg.total_res, cfg.r_min,
            )
        self.alloc_push_res = p
        return p

    def _pull_schedule(self, zeta_pri: np.ndarray | None, pull_res: int) -> list[int]:
        cfg = self.cfg
        if cfg.pull_policy == "none" or cfg.num_clusters == 0 or pull_res <= 0:
            return []
        count = min(pull_res, self.n_dt)
        if cfg.pull_policy == "maf":
            return scheduling.maf_pull_schedule(self.pull_aoi, self.dt_nodes, count)
        if cfg.pull_policy == "cra":
            risks = zeta_pri @ self.drift_mask
            return scheduling.cra_pull_schedule(risks, self.clusters, count, self.rng)
        if self.pull_scheduler is not None:
            return self.pull_scheduler.schedule(zeta_pri, count)
        priors = [zeta_pri[i] for i in range(self.num_clusters)]
        return scheduling.pps_pull_schedule(priors, self.models, self.clusters, count)

    def _push_transmitters(
        self, phi_pri: np.ndarray | None, pulled: np.ndarray, push_res: int
    ) -> tuple[np.ndarray, int, np.ndarray]:
        """Returns (transmitter ids, threshold, polled ids) for this frame."""
        cfg = self.cfg
        none = np.empty(0, dtype=np.int64)
        if cfg.push_policy == "none" or push_res <= 0:
            return none, 0, none
        theta_now = np.where(self.x, self.theta + 1, 0)
        if cfg.push_policy == "pps":
            theta_star = scheduling.pps_push_threshold(
                phi_pri, push_res, cfg.collision_cap
            )
            mask = self.x & (theta_now > theta_star) & ~pulled[: self.n_anom]
            return np.flatnonzero(mask), theta_star, none
        if cfg.push_policy == "maf":
            free = np.flatnonzero(~pulled[: self.n_anom])
            polled = np.asarray(
                scheduling.maf_pull_schedule(self.push_aoi, free, min(push_res, free.size)),
                dtype=np.int64,
            )
            responders = polled[self.x[polled]]
            return responders, 0, polled
        draws = self.rng.random(self.n_anom)
        mask = self.x & (draws < self.fsa.p_tx) & ~pulled[: self.n_anom]
        return np.flatnonzero(mask), 0, none

    # -- the frame pipeline -------------------------------------------------

    def run_frame(self, k: int) -> FrameLog:
        cfg = self.cfg
        rng = self.rng
        has_drift = cfg.num_clusters > 0

        # 1) split the frame using last frame's posterior urgencies
        push_res = self._allocate()
        pull_res = cfg.total_res - push_res

        # 2) predictive beliefs
        zeta_pri = None
        if has_drift:
            zeta_pri = self.zeta @ self.transition
            zeta_pri /= zeta_pri.sum(axis=1, keepdims=True)
        phi_pri = None
        if self.track_anomaly_beliefs:
            phi_pri = tracking.anomaly_prior_matrix(self.phi, self.lam, self.mu)

        # 3) pull subframe: scheduled nodes always report
        scheduled = self._pull_schedule(zeta_pri, pull_res)
        pulled = np.zeros(self.n_nodes, dtype=bool)
        if scheduled:
            pulled[scheduled] = True
        if phi_pri is not None and scheduled:
            in_anomaly = [n for n in scheduled if n < self.n_anom]
            phi_pri[in_anomaly] = 0.0
            phi_pri[in_anomaly, 0] = 1.0

        # 4-5) push subframe and collision channel
        transmitters, theta_star, polled = self._push_transmitters(
            phi_pri, pulled, push_res
        )
        if cfg.push_policy == "maf":
            success_nodes = transmitters
            collided = 0
            silent = push_res - transmitters.size
        elif transmitters.size:
            slots = rng.integers(0, push_res, transmitters.size)
            occupancy = np.bincount(slots, minlength=push_res)
            success_nodes = transmitters[occupancy[slots] == 1]
            collided = int(np.count_nonzero(occupancy >= 2))
            silent = int(np.count_nonzero(occupancy == 0))
        else:
            success_nodes = np.empty(0, dtype=np.int64)
            collided = 0
            silent = push_res

        # 6) drift posterior from every received observation, pull or push
        resets = 0
        if has_drift:
            # polled nodes answer contention-free, so their measurement arrives
            # even when they have no anomaly to report
            reporters = sorted(
                set(scheduled)
                | {int(n) for n in success_nodes if n < self.n_dt}
                | {int(n) for n in polled if n < self.n_dt}
            )
            lik = np.ones_like(zeta_pri)
            for node in reporters:
                i, pos = self.cluster_of[node]
                bit = self.bits[self.cluster_state[i], pos]
                lik[i] *= self.bits[:, pos] == bit
            post = zeta_pri * lik
            norm = post.sum(axis=1, keepdims=True)
            if np.any(norm <= 0.0):
                raise BeliefInconsistencyError("drift observation impossible under prior")
            self.zeta = post / norm

        # anomaly posterior: success, silent, or collision-censored
        if phi_pri is not None:
            phi = phi_pri
            if cfg.push_policy == "pps" and push_res > 0:
                if collided == 0:
                    kept = phi[:, : theta_star + 1].sum(axis=1)
                    # the shared-collider approximation can leave a silent node
                    # with no mass below the threshold; silence proves its age
                    # is at most theta*, so restart it at the least-informative
                    # belief consistent with that
                    bankrupt = kept <= 0.0
                    if bankrupt.any():
                        phi[bankrupt] = 0.0
                        phi[bankrupt, : theta_star + 1] = 1.0 / (theta_star + 1)
                    phi[:, theta_star + 1 :] = 0.0
                    phi /= phi.sum(axis=1, keepdims=True)
                else:
                    alpha, count, mean_alpha = tracking.activation_stats(
                        phi, theta_star
                    )
                    s = int(success_nodes.size)
                    count_prior = tracking.active_count_prior(count, mean_alpha)
                    try:
                        count_post = tracking.active_count_posterior(
                            count_prior, s, collided, push_res
                        )
                        p_chi = tracking.collider_probability(count_post, s, count)
                    except BeliefInconsistencyError:
                        # outcome outside the three-per-collision support (a real
                        # pileup was larger); fall back to the prior-mean share
                        prior_mean = float(count_prior @ np.arange(count + 1))
                        p_chi = (
                            np.clip((prior_mean - s) / (count - s), 0.0, 1.0)
                            if count > s
                            else 0.0
                        )
                    censored = (alpha > 0.0).copy()
                    censored[success_nodes] = False
                    below = phi[censored, : theta_star + 1].sum(axis=1)
                    above = 1.0 - below
                    # nodes with no mass below the threshold are certain
                    # transmitters by belief: all their mass stays above
                    p_node = np.where(below > 0.0, p_chi, 1.0)
                    block = phi[censored]
                    block[:, : theta_star + 1] *= (
                        np.divide(
                            1.0 - p_node, below,
                            out=np.zeros_like(below), where=below > 0,
                        )
                    )[:, None]
                    block[:, theta_star + 1 :] *= (
                        np.divide(
                            p_node, above, out=np.zeros_like(above), where=above > 0
                        )
                    )[:, None]
                    phi[censored] = block
                    phi /= phi.sum(axis=1, keepdims=True)
            elif cfg.push_policy == "maf" and polled.size:
                phi[polled] = 0.0
                phi[polled, 0] = 1.0
            if success_nodes.size:
                phi[success_nodes] = 0.0
                phi[success_nodes, 0] = 1.0
            self.phi = phi

        # 7) re-align any twin past the confidence bar
        if has_drift:
            risks = self.zeta @ self.drift_mask
            reset_mask = risks > cfg.reset_confidence
            resets = int(reset_mask.sum())
            if resets:
                self.cluster_state[reset_mask] = 0
                self.zeta[reset_mask] = 0.0
                self.zeta[reset_mask, 0] = 1.0
                risks = np.where(reset_mask, 0.0, risks)
            self.drift_urg = scheduling.drift_urgency(risks)
        if phi_pri is not None:
            self.anomaly_urg = scheduling.anomaly_urgency(self.phi, cfg.aoii_risk_frames)

        # 8) sample ground-truth ages after resets, before stepping
        theta_now = np.where(self.x, self.theta + 1, 0)
        if has_drift:
            drifting = self.drift_mask[self.cluster_state]
            self.psi = np.where(drifting, self.psi + 1, 0)

        # 9) report resolution and process stepping
        resolved = np.zeros(self.n_anom, dtype=bool)
        resolved[pulled[: self.n_anom] & self.x] = True
        if success_nodes.size:
            resolved[success_nodes] = True
        draws = rng.random(self.n_anom)
        self.theta = theta_now
        self.x = np.where(
            self.x,
            ~resolved & (draws >= self.mu),
            draws < self.lam,
        )
        if has_drift:
            rows = self.cum_transition[self.cluster_state]
            self.cluster_state = (
                rng.random(cfg.num_clusters)[:, None] < rows
            ).argmax(axis=1)

        self.pull_aoi += 1
        contacted = pulled.copy()
        if success_nodes.size:
            contacted[success_nodes] = True
        if polled.size:
            contacted[polled] = True
        self.pull_aoi[contacted] = 0
        self.push_aoi += 1
        if success_nodes.size:
            self.push_aoi[success_nodes] = 0
        if polled.size:
            self.push_aoi[polled] = 0

        # afsa reacts to last frame's slot outcomes
        if cfg.push_policy == "afsa" and push_res > 0:
            self.fsa = scheduling.afsa_update(
                self.fsa, collided, silent, push_res, cfg.afsa_gain
            )

        return FrameLog(
            frame=k,
            pull_res=pull_res,
            push_res=push_res,
            scheduled=tuple(scheduled),
            push_threshold=theta_star,
            successes=int(success_nodes.size),
            collisions=collided,
            resets=resets,
        )


def run_episode(
    config: SimConfig,
    seed: int | np.random.SeedSequence,
    models: list[DriftClusterModel] | None = None,
    keep_frame_logs: bool = False,
) -> MetricsLedger:
    """Simulate one episode and return its ground-truth metric samples."""
    if models is None:
        models = config.build_models()
    rng = np.random.default_rng(seed)
    sim = FrameSimulator(config, models, rng)
    frames = config.frames_per_episode
    ledger = MetricsLedger(
        psi=np.zeros((frames, config.num_clusters), dtype=np.int32),
        theta=np.zeros((frames, config.num_anomaly_nodes), dtype=np.int32),
        push_res=np.zeros(frames, dtype=np.int32),
    )
    for k in range(frames):
        try:
            log = sim.run_frame(k)
        except BeliefInconsistencyError as err:
            raise SimulationError(
                f"episode aborted at frame {k} "
                f"(pull={config.pull_policy}, push={config.push_policy}, "
                f"alloc={config.alloc}): {err}"
            ) from err
        if config.num_clusters:
            ledger.psi[k] = sim.psi
        ledger.theta[k] = sim.theta
        ledger.push_res[k] = log.push_res
        ledger.successes += log.successes
        ledger.collided_slots += log.collisions
        ledger.silent_slots += log.push_res - log.successes - log.collisions
        ledger.resets += log.resets
        if keep_frame_logs:
            ledger.frame_logs.append(log)
    return ledger


def _nearest_rank(counts: np.ndarray, q: float) -> float:
    total = int(counts.sum())
    if total == 0:
        return float("nan")
    rank = int(np.ceil(q / 100.0 * total))
    return float(np.searchsorted(np.cumsum(counts), rank))


def summarize(config: SimConfig, ledgers: list[MetricsLedger]) -> dict:
    """Pool per-frame samples across episodes into the reporting metrics."""
    ms = config.frame_duration * 1000.0
    max_psi = max((int(l.psi.max()) for l in ledgers if l.psi.size), default=0)
    max_theta = max((int(l.theta.max()) for l in ledgers if l.theta.size), default=0)
    psi_counts = np.zeros(max_psi + 1, dtype=np.int64)
    theta_counts = np.zeros(max_theta + 1, dtype=np.int64)
    push_total = 0
    collided = 0
    successes = 0
    for ledger in ledgers:
        if ledger.psi.size:
            psi_counts += np.bincount(ledger.psi.ravel(), minlength=max_psi + 1)
        if ledger.theta.size:
            theta_counts += np.bincount(ledger.theta.ravel(), minlength=max_theta + 1)
        push_total += int(ledger.push_res.sum())
        collided += ledger.collided_slots
        successes += ledger.successes

    def mean(counts: np.ndarray) -> float:
        total = counts.sum()
        if total == 0:
            return float("nan")
        return float((np.arange(counts.shape[0]) * counts).sum() / total)

    has_psi = config.num_clusters > 0
    has_theta = config.num_anomaly_nodes > 0
    mean_push = float(np.mean([ledger.push_res.mean() for ledger in ledgers]))
    return {
        "psi_avg_ms": mean(psi_counts) * ms if has_psi else float("nan"),
        "psi_p99_ms": _nearest_rank(psi_counts, 99.0) * ms if has_psi else float("nan"),
        "theta_avg_ms": mean(theta_counts) * ms if has_theta else float("nan"),
        "theta_p99_ms": _nearest_rank(theta_counts, 99.0) * ms if has_theta else float("nan"),
        "mean_push_res": mean_push,
        "collision_rate": collided / push_total if push_total else float("nan"),
        "successes": successes,
        "episodes": len(ledgers),
        "seed": config.seed,
    }


def run_monte_carlo(config: SimConfig) -> dict:
    """Run all episodes with independent substreams and pool their samples."""
    models = config.build_models()
    streams = np.random.SeedSequence(config.seed).spawn(config.episodes)
    ledgers = [run_episode(config, stream, models) for stream in streams]
    return summarize(config, ledgers)
