"""Linear Kalman filter for a single fiducial.

State is 9-dimensional, interleaved per axis:
    [tx vx ax  ty vy ay  tz vz az]
with units mm, mm/s, mm/s^2. The motion model is constant acceleration;
the measurement is the 3-D position of the fiducial center.

All operations are pure functions of their inputs; `FilterState` is a
value and may be moved freely between threads. Vectors and matrices are
plain float64 numpy arrays of fixed size (3, 9, 3x3, 9x9).
"""

from dataclasses import dataclass

import numpy as np

from .errors import NumericalOverflowError, SingularInnovationError

# Rows of the observation matrix select these state components.
POS_IDX = (0, 3, 6)

# Default initial covariance: positions at measurement accuracy;
# velocity/acceleration priors sized for slow instrument motion
# (~1 mm/s, ~0.1 mm/s^2) so the filter settles within the standard
# 100-sample burnout instead of chasing noise with a vague prior.
DEFAULT_VEL_VAR = 1.0
DEFAULT_ACC_VAR = 0.01
DEFAULT_DT = 0.005
# Process noise std 0.001 mm per component -> variance 1e-6; small
# because the constant-acceleration model matches the motion closely.
DEFAULT_Q_VAR = 1e-6
DEFAULT_R_VAR = (0.0225, 0.0225, 0.0441)

_SYM_TOL = 1e-9


def _require_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise NumericalOverflowError(f"{what} contains non-finite values")


def as_vec3(v) -> np.ndarray:
    """Coerce to a finite shape-(3,) float vector."""
    a = np.asarray(v, dtype=np.float64)
    if a.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("vector contains non-finite values")
    return a


def _check_covariance(M, size, name, positive_definite=False):
    M = np.asarray(M, dtype=np.float64)
    if M.shape != (size, size):
        raise ValueError(f"{name} must be {size}x{size}, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite values")
    scale = max(1.0, np.abs(M).max())
    if np.abs(M - M.T).max() > _SYM_TOL * scale:
        raise ValueError(f"{name} is not symmetric")
    eigs = np.linalg.eigvalsh(M)
    if positive_definite:
        if eigs.min() <= 0.0:
            raise ValueError(f"{name} must be positive definite")
    elif eigs.min() < -_SYM_TOL * scale:
        raise ValueError(f"{name} must be positive semidefinite")
    return M


@dataclass(frozen=True)
class FilterConfig:
    """Time step and noise model shared by every fiducial filter.

    Q and R are the process and measurement covariances; P0 seeds the
    state covariance of a freshly initialized filter.
    """

    dt: float
    Q: np.ndarray
    R: np.ndarray
    P0: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.dt) or self.dt < 0.0:
            raise ValueError("dt must be finite and >= 0")
        object.__setattr__(self, "Q", _check_covariance(self.Q, 9, "Q"))
        object.__setattr__(self, "R", _check_covariance(self.R, 3, "R", positive_definite=True))
        object.__setattr__(self, "P0", _check_covariance(self.P0, 9, "P0"))

    @classmethod
    def from_variances(
        cls,
        dt: float = DEFAULT_DT,
        q_var: float = DEFAULT_Q_VAR,
        r_var_xyz=DEFAULT_R_VAR,
        pos_var=None,
        vel_var: float = DEFAULT_VEL_VAR,
        acc_var: float = DEFAULT_ACC_VAR,
    ) -> "FilterConfig":
        """Build diagonal Q/R/P0 from scalar variances.

        When `pos_var` is None the initial position variances track the
        per-axis measurement variances.
        """
        r = np.asarray(r_var_xyz, dtype=np.float64)
        if r.shape != (3,):
            raise ValueError("r_var_xyz must have 3 entries")
        p_pos = r.copy() if pos_var is None else np.full(3, float(pos_var))
        p0 = np.zeros(9)
        p0[0::3] = p_pos
        p0[1::3] = vel_var
        p0[2::3] = acc_var
        return cls(dt=dt, Q=q_var * np.eye(9), R=np.diag(r), P0=np.diag(p0))

    @classmethod
    def default(cls) -> "FilterConfig":
        return cls.from_variances()


@dataclass(frozen=True)
class FilterState:
    """Evolving belief for one fiducial: state, covariance, step index."""

    x: np.ndarray
    P: np.ndarray
    k: int = 0


@dataclass(frozen=True)
class StepOutput:
    """Result of one filter step."""

    state: FilterState
    refined: np.ndarray
    innovation: np.ndarray
    nis: float
    predicted_only: bool


def build_transition(dt: float) -> np.ndarray:
    """9x9 constant-acceleration transition: three identical 3x3 blocks
    [[1, dt, dt^2/2], [0, 1, dt], [0, 0, 1]] on the diagonal."""
    if not np.isfinite(dt):
        raise ValueError("dt must be finite")
    block = np.array([
        [1.0, dt, 0.5 * dt * dt],
        [0.0, 1.0, dt],
        [0.0, 0.0, 1.0],
    ])
    A = np.zeros((9, 9))
    for i in range(3):
        A[3 * i : 3 * i + 3, 3 * i : 3 * i + 3] = block
    return A


def build_observation() -> np.ndarray:
    """3x9 selector picking the position components of the state."""
    H = np.zeros((3, 9))
    for row, col in enumerate(POS_IDX):
        H[row, col] = 1.0
    return H


def predict(state: FilterState, config: FilterConfig):
    """Time update: propagate state and covariance one step forward.

    Returns (x_prior, P_prior) with P_prior explicitly symmetrized.
    """
    A = build_transition(config.dt)
    x_prior = A @ state.x
    P_prior = A @ state.P @ A.T + config.Q
    P_prior = 0.5 * (P_prior + P_prior.T)
    _require_finite(x_prior, "predicted state")
    _require_finite(P_prior, "predicted covariance")
    return x_prior, P_prior


def gain(P_prior: np.ndarray, R: np.ndarray):
    """Kalman gain K = P_prior H^T S^-1 with S = H P_prior H^T + R.

    Solves the symmetric 3x3 system instead of forming a 9x9 inverse.
    Returns (K, S); raises SingularInnovationError when S is not
    positive definite.
    """
    idx = list(POS_IDX)
    PHt = P_prior[:, idx]
    S = PHt[idx, :] + R
    S = 0.5 * (S + S.T)
    try:
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationError("innovation covariance is not positive definite") from exc
    K = np.linalg.solve(S, PHt.T).T
    return K, S


def update(x_prior: np.ndarray, P_prior: np.ndarray, K: np.ndarray, z, k: int = 1) -> FilterState:
    """Measurement update: blend the prior with measurement z.

    P follows the plain (I - KH)P form, then is symmetrized. `k` is the
    step index of the resulting state.
    """
    z = as_vec3(z)
    idx = list(POS_IDX)
    innovation = z - x_prior[idx]
    x = x_prior + K @ innovation
    P = P_prior - K @ P_prior[idx, :]
    P = 0.5 * (P + P.T)
    _require_finite(x, "posterior state")
    _require_finite(P, "posterior covariance")
    return FilterState(x=x, P=P, k=k)


def step(state: FilterState, z, config: FilterConfig) -> StepOutput:
    """One full cycle: predict, gain, update, refine.

    With z=None the prior becomes the posterior (prediction-only step);
    the step index advances either way so it stays aligned with frames.
    """
    k = state.k + 1
    x_prior, P_prior = predict(state, config)
    idx = list(POS_IDX)
    if z is None:
        new_state = FilterState(x=x_prior, P=P_prior, k=k)
        return StepOutput(
            state=new_state,
            refined=x_prior[idx].copy(),
            innovation=np.zeros(3),
            nis=0.0,
            predicted_only=True,
        )
    K, S = gain(P_prior, config.R)
    new_state = update(x_prior, P_prior, K, z, k=k)
    innovation = as_vec3(z) - x_prior[idx]
    nis = float(innovation @ np.linalg.solve(S, innovation))
    return StepOutput(
        state=new_state,
        refined=new_state.x[idx].copy(),
        innovation=innovation,
        nis=nis,
        predicted_only=False,
    )


def init_state(z0, config: FilterConfig) -> FilterState:
    """Initialize a filter at the first reading: position from z0,
    velocity and acceleration zero, covariance P0."""
    z0 = as_vec3(z0)
    x = np.zeros(9)
    x[list(POS_IDX)] = z0
    return FilterState(x=x, P=config.P0.copy(), k=0)
