"""Per-fiducial linear Kalman filtering for optical array tracking.

Library layout:
    kalman     - single-fiducial filter (9-state constant acceleration)
    bank       - per-fiducial filter bank with NIS occlusion gating
    rigidbody  - rigid-array trajectory simulator with seeded noise
    metrics    - MSE / error-variance evaluation against ground truth
    session_io - CSV session recordings and JSON configuration
    cli        - command-line pipeline (simulate / filter / evaluate / report / bench)
"""

__version__ = "0.1.0"

from .bank import FilteredFrame, FilteredSession, Frame, TrackerBank, filter_session, new_bank
from .kalman import FilterConfig, FilterState, StepOutput, init_state, step
from .metrics import MetricsReport, build_report, error_variance, mse
from .rigidbody import OcclusionBias, SessionData, SimConfig, simulate_session

__all__ = [
    "__version__",
    "FilterConfig",
    "FilterState",
    "StepOutput",
    "init_state",
    "step",
    "TrackerBank",
    "Frame",
    "FilteredFrame",
    "FilteredSession",
    "new_bank",
    "filter_session",
    "SimConfig",
    "OcclusionBias",
    "SessionData",
    "simulate_session",
    "MetricsReport",
    "build_report",
    "mse",
    "error_variance",
]
