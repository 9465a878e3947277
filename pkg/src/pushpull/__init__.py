"""Frame-level simulator for a combined push-pull medium access system.

Pull scheduling keeps per-cluster digital twins aligned by polling the nodes
whose reports most reduce drift-risk uncertainty; push access lets nodes report
anomalies through a threshold-gated contention subframe. The engine runs the
two side by side under several scheduling, access, and resource-split policies
and reports ground-truth age-of-incorrect-information statistics.
"""

from __future__ import annotations

from .engine import (
    ALLOCATORS,
    PULL_POLICIES,
    PUSH_POLICIES,
    FrameLog,
    FrameSimulator,
    MetricsLedger,
    SimConfig,
    SimulationError,
    run_episode,
    run_monte_carlo,
    summarize,
)
from .model import (
    AnomalyProcess,
    BinaryMajorityScenario,
    CalibrationError,
    DriftClusterModel,
    NetworkTopology,
    build_binary_scenario,
    calibrate_drift_rate,
    expected_absorption_time,
)
from .scheduling import (
    FrameConfig,
    FramePlan,
    FsaState,
    afsa_update,
    cra_pull_schedule,
    fsa_p_tx,
    fsa_p_tx_per_frame,
    information_gain,
    maf_pull_schedule,
    pps_pull_schedule,
    pps_push_threshold,
    push_collision_probability,
    slot_collision_probability,
    rsm_allocate,
    ssm_allocate,
)
from .tracking import (
    AnomalyBelief,
    BeliefInconsistencyError,
    DriftBelief,
    PushOutcome,
    anomaly_posterior_collision,
    anomaly_posterior_silent,
    anomaly_posterior_success,
    anomaly_prior,
    drift_posterior,
    drift_prior,
    drift_risk,
)

__version__ = "1.0.0"

__all__ = [
    "ALLOCATORS",
    "PULL_POLICIES",
    "PUSH_POLICIES",
    "AnomalyBelief",
    "AnomalyProcess",
    "BeliefInconsistencyError",
    "BinaryMajorityScenario",
    "CalibrationError",
    "DriftBelief",
    "DriftClusterModel",
    "FrameConfig",
    "FrameLog",
    "FramePlan",
    "FrameSimulator",
    "FsaState",
    "MetricsLedger",
    "NetworkTopology",
    "PushOutcome",
    "SimConfig",
    "SimulationError",
    "afsa_update",
    "anomaly_posterior_collision",
    "anomaly_posterior_silent",
    "anomaly_posterior_success",
    "anomaly_prior",
    "build_binary_scenario",
    "calibrate_drift_rate",
    "cra_pull_schedule",
    "drift_posterior",
    "drift_prior",
    "drift_risk",
    "expected_absorption_time",
    "fsa_p_tx",
    "fsa_p_tx_per_frame",
    "information_gain",
    "maf_pull_schedule",
    "pps_pull_schedule",
    "pps_push_threshold",
    "push_collision_probability",
    "slot_collision_probability",
    "rsm_allocate",
    "run_episode",
    "run_monte_carlo",
    "ssm_allocate",
    "summarize",
]
