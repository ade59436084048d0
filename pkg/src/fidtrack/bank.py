"""Per-fiducial filter bank with innovation gating.

One Kalman filter per fiducial, all sharing a FilterConfig. Frames are
ingested in strict step order; each fiducial is filtered independently,
so a fault (occlusion, out-of-FOV) stays localized to the fiducial that
caused it. Gating: a fiducial becomes `occluded_suspect` when its NIS
exceeds the gate threshold for `persistence` consecutive measured frames,
and clears again after `persistence` consecutive frames back below the
gate (hysteresis, so a borderline NIS does not make the flag flap).
Flags are advisory by default; with `reject_gated` a measurement is
discarded (prediction-only step) whenever its own NIS exceeds the gate
or the fiducial is currently suspect.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, kalman
from .errors import NumericalOverflowError, OrderingError, SchemaError, SingularInnovationError
from .kalman import FilterConfig, FilterState
from .rigidbody import SessionData

# Chi-square(3 dof) 99.9th percentile; a well-specified filter crosses it
# on ~0.1% of frames, and the persistence requirement suppresses those.
DEFAULT_GATE = 16.27
DEFAULT_PERSISTENCE = 3


@dataclass
class Frame:
    """One time step of readings; None marks a missing fiducial."""

    k: int
    t: float
    readings: list


@dataclass
class FilteredFrame:
    """Per-fiducial filter outputs for one frame."""

    k: int
    refined: np.ndarray
    nis: np.ndarray
    occluded_suspect: np.ndarray
    predicted_only: np.ndarray


@dataclass(eq=False)
class FilteredSession:
    """Stacked filter outputs for a whole session."""

    dt: float
    refined: np.ndarray
    nis: np.ndarray
    occluded_suspect: np.ndarray
    predicted_only: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n_steps(self) -> int:
        return self.refined.shape[0]

    @property
    def n_fiducials(self) -> int:
        return self.refined.shape[1]

    def __eq__(self, other):
        if not isinstance(other, FilteredSession):
            return NotImplemented
        return (
            self.dt == other.dt
            and np.array_equal(self.refined, other.refined, equal_nan=True)
            and np.array_equal(self.nis, other.nis, equal_nan=True)
            and np.array_equal(self.occluded_suspect, other.occluded_suspect)
            and np.array_equal(self.predicted_only, other.predicted_only)
            and self.meta == other.meta
        )


class TrackerBank:
    """Bank of independent per-fiducial filters."""

    def __init__(
        self,
        n_fiducials: int,
        config: FilterConfig,
        gate_threshold: float = DEFAULT_GATE,
        persistence: int = DEFAULT_PERSISTENCE,
        reject_gated: bool = False,
    ):
        if n_fiducials < 1:
            raise ValueError("n_fiducials must be >= 1")
        if not gate_threshold > 0:
            raise ValueError("gate_threshold must be > 0")
        if persistence < 1:
            raise ValueError("persistence must be >= 1")
        self.n_fiducials = n_fiducials
        self.config = config
        self.gate_threshold = float(gate_threshold)
        self.persistence = int(persistence)
        self.reject_gated = bool(reject_gated)
        self._A = kalman.build_transition(config.dt)
        self._xs = np.zeros((n_fiducials, 9))
        self._Ps = np.zeros((n_fiducials, 9, 9))
        self._inited = np.zeros(n_fiducials, dtype=bool)
        self._ks = [0] * n_fiducials
        self._above = [0] * n_fiducials
        self._below = [0] * n_fiducials
        self._suspect = [False] * n_fiducials
        self._last_k = None
        # reusable per-frame input buffers (ingest is the 200 fps hot path)
        self._zs = np.zeros((n_fiducials, 3))
        self._valid = np.zeros(n_fiducials, dtype=np.bool_)
        self._innov = np.zeros((n_fiducials, 3))

    def state_of(self, fiducial_id: int) -> FilterState | None:
        """Current FilterState of one fiducial, or None if still idle."""
        if not self._inited[fiducial_id]:
            return None
        return FilterState(
            x=self._xs[fiducial_id].copy(),
            P=self._Ps[fiducial_id].copy(),
            k=int(self._ks[fiducial_id]),
        )

    def ingest(self, frame: Frame) -> FilteredFrame:
        """Advance every filter by one frame and apply gating."""
        readings = frame.readings
        nf = self.n_fiducials
        if len(readings) != nf:
            raise SchemaError(
                f"frame {frame.k} has {len(readings)} readings, expected {nf}"
            )
        if self._last_k is not None and frame.k != self._last_k + 1:
            raise OrderingError(f"frame {frame.k} after frame {self._last_k}")

        zs = self._zs
        valid = self._valid
        for f, r in enumerate(readings):
            if r is None:
                valid[f] = False
                zs[f, 0] = zs[f, 1] = zs[f, 2] = 0.0
            else:
                valid[f] = True
                zs[f] = r
        if not np.isfinite(zs).all():
            raise ValueError(f"frame {frame.k}: reading contains non-finite values")

        refined = np.empty((nf, 3))
        nis = np.empty(nf)
        pred_only = np.empty(nf, dtype=np.bool_)

        was_running = self._inited.copy()
        if self.reject_gated:
            self._ingest_rejecting(valid, zs, refined, nis, pred_only)
        else:
            status = _kernels.filter_frame(
                self._xs, self._Ps, self._inited, valid, zs,
                self._A, self.config.Q, self.config.R, self.config.P0,
                refined, nis, self._innov, pred_only,
            )
            if status == _kernels.NONFINITE:
                raise NumericalOverflowError(f"non-finite filter state at frame {frame.k}")
            if status != _kernels.OK:
                raise SingularInnovationError(
                    f"innovation covariance not positive definite for fiducial {status}"
                )

        self._last_k = frame.k

        # Gating counters only move on real innovations of running filters.
        gate = self.gate_threshold
        pers = self.persistence
        above, below, suspect = self._above, self._below, self._suspect
        for f in range(nf):
            if not was_running[f]:
                continue
            self._ks[f] += 1
            if not valid[f]:
                continue
            if nis[f] > gate:
                above[f] += 1
                below[f] = 0
                if not suspect[f] and above[f] >= pers:
                    suspect[f] = True
            else:
                below[f] += 1
                above[f] = 0
                if suspect[f] and below[f] >= pers:
                    suspect[f] = False

        return FilteredFrame(
            k=frame.k,
            refined=refined,
            nis=nis,
            occluded_suspect=np.array(suspect),
            predicted_only=pred_only,
        )

    def _ingest_rejecting(self, valid, zs, refined, nis, pred_only):
        """Slow path: gated measurements degrade to prediction-only."""
        for f in range(self.n_fiducials):
            if not self._inited[f]:
                if valid[f]:
                    st = kalman.init_state(zs[f], self.config)
                    self._xs[f] = st.x
                    self._Ps[f] = st.P
                    self._inited[f] = True
                    refined[f] = zs[f]
                    nis[f] = 0.0
                    pred_only[f] = False
                else:
                    refined[f] = np.nan
                    nis[f] = np.nan
                    pred_only[f] = True
                continue
            state = FilterState(x=self._xs[f], P=self._Ps[f], k=int(self._ks[f]))
            x_prior, P_prior = kalman.predict(state, self.config)
            if valid[f]:
                K, S = kalman.gain(P_prior, self.config.R)
                nu = zs[f] - x_prior[list(kalman.POS_IDX)]
                nis_f = float(nu @ np.linalg.solve(S, nu))
                nis[f] = nis_f
                if nis_f > self.gate_threshold or self._suspect[f]:
                    self._xs[f] = x_prior
                    self._Ps[f] = P_prior
                    pred_only[f] = True
                else:
                    st = kalman.update(x_prior, P_prior, K, zs[f], k=state.k + 1)
                    self._xs[f] = st.x
                    self._Ps[f] = st.P
                    pred_only[f] = False
            else:
                self._xs[f] = x_prior
                self._Ps[f] = P_prior
                nis[f] = 0.0
                pred_only[f] = True
            refined[f] = self._xs[f][list(kalman.POS_IDX)]


def new_bank(
    n_fiducials: int,
    config: FilterConfig,
    gate_threshold: float = DEFAULT_GATE,
    persistence: int = DEFAULT_PERSISTENCE,
    reject_gated: bool = False,
) -> TrackerBank:
    """Create a bank of idle trackers (lazily initialized on first reading)."""
    return TrackerBank(n_fiducials, config, gate_threshold, persistence, reject_gated)


def frames_from_session(session: SessionData):
    """Iterate a SessionData as a Frame stream (NaN readings -> missing)."""
    for k in range(session.n_steps):
        readings = []
        for f in range(session.n_fiducials):
            z = session.measured[k, f]
            readings.append(None if np.any(np.isnan(z)) else z)
        yield Frame(k=k, t=k * session.dt, readings=readings)


def filter_session(
    session: SessionData,
    config: FilterConfig,
    gate_threshold: float = DEFAULT_GATE,
    persistence: int = DEFAULT_PERSISTENCE,
    reject_gated: bool = False,
) -> FilteredSession:
    """Run a fresh bank over a recorded session."""
    bank = new_bank(session.n_fiducials, config, gate_threshold, persistence, reject_gated)
    n, nf = session.n_steps, session.n_fiducials
    refined = np.empty((n, nf, 3))
    nis = np.empty((n, nf))
    suspect = np.empty((n, nf), dtype=bool)
    pred_only = np.empty((n, nf), dtype=bool)
    for frame in frames_from_session(session):
        out = bank.ingest(frame)
        refined[frame.k] = out.refined
        nis[frame.k] = out.nis
        suspect[frame.k] = out.occluded_suspect
        pred_only[frame.k] = out.predicted_only
    return FilteredSession(
        dt=session.dt,
        refined=refined,
        nis=nis,
        occluded_suspect=suspect,
        predicted_only=pred_only,
        meta={"gate_threshold": gate_threshold, "gate_persistence": persistence},
    )


def throughput_bench(bank: TrackerBank, frames) -> float:
    """Single-thread fiducial-updates per second over a frame stream.

    The stream must carry at least 10^4 fiducial-updates of work so the
    measurement is not dominated by startup effects.
    """
    frames = list(frames)
    n_updates = len(frames) * bank.n_fiducials
    if n_updates == 0:
        raise ValueError("empty frame stream")
    if n_updates < 10_000:
        raise ValueError(f"need >= 10^4 fiducial-updates of work, got {n_updates}")
    _kernels.warm_up()
    start = time.perf_counter()
    for frame in frames:
        bank.ingest(frame)
    elapsed = time.perf_counter() - start
    return n_updates / elapsed
