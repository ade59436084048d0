"""Error metrics: MSE and error variance against ground truth.

Both metrics drop the first `burnout` samples so the filter's adaptation
transient does not pollute the comparison; the same burnout applies to
raw and filtered columns so they stay comparable. Variance uses
denominator n, which makes mse = variance + mean(error)^2 exact.
"""

from dataclasses import dataclass

import numpy as np

from .bank import FilteredSession
from .errors import NoGroundTruthError, SchemaError
from .rigidbody import SessionData

AXES = ("X", "Y", "Z")
DEFAULT_BURNOUT = 100


def _errors(measured, truth, burnout):
    measured = np.asarray(measured, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if measured.shape != truth.shape:
        raise ValueError(f"length mismatch: {measured.shape} vs {truth.shape}")
    if burnout < 0 or burnout >= measured.shape[0]:
        raise ValueError(f"burnout {burnout} leaves no samples out of {measured.shape[0]}")
    return measured[burnout:] - truth[burnout:]


def mse(measured, truth, burnout: int = 0) -> float:
    """Mean squared difference over samples after the burnout period."""
    err = _errors(measured, truth, burnout)
    return float(np.mean(err * err))


def error_variance(measured, truth, burnout: int = 0) -> float:
    """Population variance (denominator n) of the post-burnout error series."""
    err = _errors(measured, truth, burnout)
    return float(np.var(err))


@dataclass
class MetricsReport:
    """Per-fiducial, per-axis MSE and error variance, raw vs filtered.

    All arrays are (n_fiducials, 3) in mm^2, axis order x, y, z.
    """

    mse_raw: np.ndarray
    mse_filtered: np.ndarray
    var_raw: np.ndarray
    var_filtered: np.ndarray
    burnout_samples: int
    n_used: int

    @property
    def n_fiducials(self) -> int:
        return self.mse_raw.shape[0]


def build_report(
    session: SessionData,
    filtered: FilteredSession,
    burnout: int = DEFAULT_BURNOUT,
) -> MetricsReport:
    """Compare raw and filtered measurements against ground truth."""
    if not session.has_truth:
        raise NoGroundTruthError("session has no ground truth")
    if filtered.refined.shape != session.measured.shape:
        raise SchemaError(
            f"filtered stream shape {filtered.refined.shape} does not match "
            f"session shape {session.measured.shape}"
        )
    n, nf = session.n_steps, session.n_fiducials
    if burnout < 0 or burnout >= n:
        raise ValueError(f"burnout {burnout} leaves no samples out of {n}")
    shape = (nf, 3)
    report = MetricsReport(
        mse_raw=np.empty(shape),
        mse_filtered=np.empty(shape),
        var_raw=np.empty(shape),
        var_filtered=np.empty(shape),
        burnout_samples=burnout,
        n_used=n - burnout,
    )
    for f in range(nf):
        for ax in range(3):
            truth = session.truth[:, f, ax]
            raw = session.measured[:, f, ax]
            ref = filtered.refined[:, f, ax]
            report.mse_raw[f, ax] = mse(raw, truth, burnout)
            report.mse_filtered[f, ax] = mse(ref, truth, burnout)
            report.var_raw[f, ax] = error_variance(raw, truth, burnout)
            report.var_filtered[f, ax] = error_variance(ref, truth, burnout)
    return report


def report_rows(report: MetricsReport):
    """Yield (label, mse_raw, mse_filtered, var_raw, var_filtered) rows."""
    for f in range(report.n_fiducials):
        for ax in range(3):
            yield (
                f"Fiducial {f + 1}, {AXES[ax]}",
                report.mse_raw[f, ax],
                report.mse_filtered[f, ax],
                report.var_raw[f, ax],
                report.var_filtered[f, ax],
            )


def format_table(report: MetricsReport) -> str:
    """Human-readable table: MSE and error variance, without/with filtering."""
    lines = [
        f"{'':16s}  {'MSE (mm^2)':>25s}  {'Error variance (mm^2)':>25s}",
        f"{'':16s}  {'raw':>12s} {'filtered':>12s}  {'raw':>12s} {'filtered':>12s}",
    ]
    for label, m_raw, m_filt, v_raw, v_filt in report_rows(report):
        lines.append(
            f"{label:16s}  {m_raw:>12.4e} {m_filt:>12.4e}  {v_raw:>12.4e} {v_filt:>12.4e}"
        )
    lines.append(f"burnout: {report.burnout_samples} samples, {report.n_used} used")
    return "\n".join(lines)


def report_to_csv(report: MetricsReport) -> str:
    """CSV rendering with one row per (fiducial, axis)."""
    lines = ["fiducial,axis,mse_raw,mse_filtered,var_raw,var_filtered"]
    for f in range(report.n_fiducials):
        for ax in range(3):
            lines.append(
                f"{f},{AXES[ax].lower()}"
                f",{report.mse_raw[f, ax]:.17g},{report.mse_filtered[f, ax]:.17g}"
                f",{report.var_raw[f, ax]:.17g},{report.var_filtered[f, ax]:.17g}"
            )
    return "\n".join(lines) + "\n"
