"""Rigid-body trajectory simulator for a multi-fiducial array.

Ground truth: the array pose starts at identity and evolves under a
constant translational acceleration (exact constant-acceleration update
per step) and a constant angular velocity integrated first order,
R_k = R_{k-1} + dt * skew(omega) * R_{k-1}. Each fiducial's truth is its
initial position mapped through the pose. Measurements add seeded
anisotropic Gaussian noise, with optional bias segments emulating a
partially occluded fiducial (constant offset plus single-step spikes at
the segment boundaries).
"""

from dataclasses import dataclass, field

import numpy as np

from . import noise

# Default array mirrors the four-fiducial geometry used throughout the
# test suite: consecutive-pair distances 481.04, 121.66, 28.28, 382.88 mm.
DEFAULT_FIDUCIALS = (
    (-180.0, 180.0, 1230.0),
    (170.0, -150.0, 1230.0),
    (50.0, -130.0, 1230.0),
    (70.0, -110.0, 1230.0),
)
DEFAULT_NOISE_STD = (0.15, 0.15, 0.21)
DEFAULT_SPIKE = (0.5, 0.5, 0.7)


def skew(omega) -> np.ndarray:
    """Skew-symmetric cross-product matrix of a 3-vector."""
    w = np.asarray(omega, dtype=np.float64)
    return np.array([
        [0.0, -w[2], w[1]],
        [w[2], 0.0, -w[0]],
        [-w[1], w[0], 0.0],
    ])


def orthonormalize_rotation(R: np.ndarray) -> np.ndarray:
    """Project a near-rotation onto the closest proper rotation (polar)."""
    U, _, Vt = np.linalg.svd(R)
    D = np.eye(3)
    D[2, 2] = np.sign(np.linalg.det(U @ Vt))
    return U @ D @ Vt


def propagate_rotation(R_prev, omega, dt, orthonormalize=False) -> np.ndarray:
    """First-order rotation update R + dt * skew(omega) * R."""
    R = R_prev + dt * skew(omega) @ R_prev
    if orthonormalize:
        R = orthonormalize_rotation(R)
    return R


def propagate_translation(t, v, a, dt):
    """Exact constant-acceleration update of (position, velocity, accel)."""
    t = np.asarray(t, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    t_new = t + v * dt + 0.5 * a * dt * dt
    v_new = v + a * dt
    return t_new, v_new, a.copy()


@dataclass
class Pose:
    """Rigid placement of the array: rotation plus translation (mm)."""

    R: np.ndarray
    t: np.ndarray

    @classmethod
    def identity(cls) -> "Pose":
        return cls(R=np.eye(3), t=np.zeros(3))


def transform_point(pose: Pose, x0) -> np.ndarray:
    """Map a body-frame point through the pose: R x0 + t."""
    return pose.R @ np.asarray(x0, dtype=np.float64) + pose.t


def pairwise_distances(points) -> np.ndarray:
    """Euclidean distances of the cyclic consecutive pairs 1-2, 2-3, ..., n-1."""
    pts = [np.asarray(p, dtype=np.float64) for p in points]
    if len(pts) < 2:
        raise ValueError("need at least 2 points")
    return np.array([
        np.linalg.norm(pts[(i + 1) % len(pts)] - pts[i]) for i in range(len(pts))
    ])


@dataclass
class OcclusionBias:
    """Step-like measurement bias on one fiducial over [start_k, end_k].

    `offset` is added throughout the window; `spike_magnitude` is added
    on top at the two boundary steps only. The occluded flag is set for
    the whole window.
    """

    fiducial_id: int
    start_k: int
    end_k: int
    offset: tuple = (0.0, 0.0, 0.0)
    spike_magnitude: tuple = DEFAULT_SPIKE

    def validate(self, n_fiducials: int, n_steps: int):
        if not 0 <= self.fiducial_id < n_fiducials:
            raise ValueError(f"bias fiducial_id {self.fiducial_id} out of range")
        if not self.start_k < self.end_k:
            raise ValueError("bias segment requires start_k < end_k")
        if self.start_k < 0 or self.end_k >= n_steps:
            raise ValueError("bias segment outside session range")


@dataclass
class SimConfig:
    """Full parameterization of a synthetic tracking session."""

    fiducial_initials: tuple = DEFAULT_FIDUCIALS
    v0: tuple = (0.0, 0.0, 0.0)
    a0: tuple = (0.1, 0.1, 0.1)
    omega: tuple = (0.001, 0.001, 0.001)
    fps: float = 200.0
    duration: float = 5.0
    noise_std: tuple = DEFAULT_NOISE_STD
    seed: int = 0
    bias_segments: list = field(default_factory=list)
    orthonormalize: bool = False

    @property
    def n_steps(self) -> int:
        return int(round(self.fps * self.duration))

    @property
    def n_fiducials(self) -> int:
        return len(self.fiducial_initials)

    @property
    def dt(self) -> float:
        return 1.0 / self.fps

    def validate(self):
        if not (np.isfinite(self.fps) and self.fps > 0):
            raise ValueError("fps must be positive")
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise ValueError("duration must be positive")
        if self.n_fiducials < 1:
            raise ValueError("need at least one fiducial")
        std = np.asarray(self.noise_std, dtype=np.float64)
        if std.shape != (3,) or np.any(std < 0) or not np.all(np.isfinite(std)):
            raise ValueError("noise_std must be 3 non-negative values")
        for vec, name in ((self.v0, "v0"), (self.a0, "a0"), (self.omega, "omega")):
            arr = np.asarray(vec, dtype=np.float64)
            if arr.shape != (3,) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be a finite 3-vector")
        for f in self.fiducial_initials:
            arr = np.asarray(f, dtype=np.float64)
            if arr.shape != (3,) or not np.all(np.isfinite(arr)):
                raise ValueError("fiducial initial positions must be finite 3-vectors")
        for seg in self.bias_segments:
            seg.validate(self.n_fiducials, self.n_steps)


@dataclass(eq=False)
class SessionData:
    """Per-step, per-fiducial recording of a session.

    truth/measured are (n_steps, n_fiducials, 3) mm; occluded marks steps
    inside a bias window. truth is None for real recordings. `meta` echoes
    the generating configuration (or the file header on load).
    """

    dt: float
    measured: np.ndarray
    truth: np.ndarray | None = None
    occluded: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.occluded is None:
            self.occluded = np.zeros(self.measured.shape[:2], dtype=bool)

    @property
    def n_steps(self) -> int:
        return self.measured.shape[0]

    @property
    def n_fiducials(self) -> int:
        return self.measured.shape[1]

    @property
    def has_truth(self) -> bool:
        return self.truth is not None

    def __eq__(self, other):
        if not isinstance(other, SessionData):
            return NotImplemented
        if self.dt != other.dt or self.has_truth != other.has_truth:
            return False
        if not np.array_equal(self.measured, other.measured, equal_nan=True):
            return False
        if self.has_truth and not np.array_equal(self.truth, other.truth, equal_nan=True):
            return False
        return np.array_equal(self.occluded, other.occluded) and self.meta == other.meta


def _config_meta(config: SimConfig) -> dict:
    return {
        "fiducial_initials": [list(map(float, f)) for f in config.fiducial_initials],
        "v0": list(map(float, config.v0)),
        "a0": list(map(float, config.a0)),
        "omega": list(map(float, config.omega)),
        "fps": float(config.fps),
        "duration": float(config.duration),
        "noise_std": list(map(float, config.noise_std)),
        "seed": int(config.seed),
        "orthonormalize": bool(config.orthonormalize),
        "bias_segments": [
            {
                "fiducial_id": seg.fiducial_id,
                "start_k": seg.start_k,
                "end_k": seg.end_k,
                "offset": list(map(float, seg.offset)),
                "spike_magnitude": list(map(float, seg.spike_magnitude)),
            }
            for seg in config.bias_segments
        ],
    }


def simulate_session(config: SimConfig) -> SessionData:
    """Generate ground truth and noisy measurements for one session.

    Deterministic for a fixed config (including seed). Noise draw order
    is step-major, fiducial-minor, axis x->y->z, one draw per axis.
    """
    config.validate()
    n = config.n_steps
    nf = config.n_fiducials
    dt = config.dt
    initials = np.asarray(config.fiducial_initials, dtype=np.float64)

    truth = np.empty((n, nf, 3))
    pose = Pose.identity()
    t = pose.t
    v = np.asarray(config.v0, dtype=np.float64)
    a = np.asarray(config.a0, dtype=np.float64)
    R = pose.R
    for k in range(n):
        truth[k] = initials @ R.T + t
        t, v, a = propagate_translation(t, v, a, dt)
        R = propagate_rotation(R, config.omega, dt, orthonormalize=config.orthonormalize)

    draws = noise.normal_stream(config.seed, n * nf * 3).reshape(n, nf, 3)
    measured = truth + draws * np.asarray(config.noise_std, dtype=np.float64)

    occluded = np.zeros((n, nf), dtype=bool)
    for seg in config.bias_segments:
        f = seg.fiducial_id
        measured[seg.start_k : seg.end_k + 1, f] += np.asarray(seg.offset, dtype=np.float64)
        for edge in (seg.start_k, seg.end_k):
            measured[edge, f] += np.asarray(seg.spike_magnitude, dtype=np.float64)
        occluded[seg.start_k : seg.end_k + 1, f] = True

    return SessionData(dt=dt, measured=measured, truth=truth, occluded=occluded,
                       meta=_config_meta(config))
