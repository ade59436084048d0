"""On-disk formats: JSON configuration and CSV session recordings.

Sessions are CSV with a single JSON header line so files are
human-inspectable and diff-able as golden files. Floats are written with
17 significant digits, which round-trips doubles exactly. Missing values
(absent readings, idle-filter outputs) are empty cells; a literal NaN
token is a parse error. Config files use a strict schema: unknown keys
are rejected so a typo cannot silently change Q or R.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .bank import DEFAULT_GATE, DEFAULT_PERSISTENCE, FilteredSession
from .errors import ConfigError, ParseError, SchemaError, VersionError
from .kalman import (
    DEFAULT_ACC_VAR,
    DEFAULT_DT,
    DEFAULT_Q_VAR,
    DEFAULT_R_VAR,
    DEFAULT_VEL_VAR,
    FilterConfig,
)
from .metrics import DEFAULT_BURNOUT
from .rigidbody import OcclusionBias, SessionData, SimConfig

SCHEMA_VERSION = 1
_SESSION_MAGIC = "# fidtrack-session"
_FILTERED_MAGIC = "# fidtrack-filtered"


def _fmt(x: float) -> str:
    if math.isnan(x):
        return ""
    return f"{x:.17g}"


def _parse_float(token: str, path, lineno, column):
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"bad number {token!r} in column {column}", path, lineno) from None
    if math.isnan(value) or math.isinf(value):
        raise ParseError(f"non-finite value {token!r} in column {column}", path, lineno)
    return value


def _cell(token: str, path, lineno, column):
    if token == "":
        return math.nan
    return _parse_float(token, path, lineno, column)


def _read_header(line: str, magic: str, path):
    if not line.startswith(magic + " v"):
        raise ParseError(f"not a {magic.lstrip('# ')} file", path, 1)
    rest = line[len(magic) + 2 :]
    ver_str, _, payload = rest.partition(" ")
    try:
        version = int(ver_str)
    except ValueError:
        raise ParseError("malformed schema version", path, 1) from None
    if version > SCHEMA_VERSION:
        raise VersionError(f"{path}: schema version {version} is newer than supported {SCHEMA_VERSION}")
    try:
        header = json.loads(payload)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad header JSON: {exc}", path, 1) from None
    return header


# ---------------------------------------------------------------------------
# Session recordings

_SESSION_COLS_TRUTH = "k,t_s,fiducial_id,truth_x,truth_y,truth_z,meas_x,meas_y,meas_z,occluded"
_SESSION_COLS_NO_TRUTH = "k,t_s,fiducial_id,meas_x,meas_y,meas_z,occluded"


def write_session(session: SessionData, path) -> None:
    """Write a session recording; read_session round-trips it bit-exactly."""
    header = {
        "dt_s": session.dt,
        "n_fiducials": session.n_fiducials,
        "n_steps": session.n_steps,
        "has_truth": session.has_truth,
        "config": session.meta,
    }
    lines = [f"{_SESSION_MAGIC} v{SCHEMA_VERSION} {json.dumps(header)}"]
    lines.append(_SESSION_COLS_TRUTH if session.has_truth else _SESSION_COLS_NO_TRUTH)
    for k in range(session.n_steps):
        t = k * session.dt
        for f in range(session.n_fiducials):
            cells = [str(k), _fmt(t), str(f)]
            if session.has_truth:
                cells.extend(_fmt(v) for v in session.truth[k, f])
            cells.extend(_fmt(v) for v in session.measured[k, f])
            cells.append("1" if session.occluded[k, f] else "0")
            lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_session(path) -> SessionData:
    """Read and validate a session recording."""
    lines = _read_lines(path)
    header = _read_header(lines[0], _SESSION_MAGIC, path)
    dt = header.get("dt_s")
    nf = header.get("n_fiducials")
    n_steps = header.get("n_steps")
    has_truth = header.get("has_truth", True)
    if not isinstance(dt, (int, float)) or dt <= 0:
        raise ParseError("header dt_s must be a positive number", path, 1)
    if not isinstance(nf, int) or nf < 1:
        raise ParseError("header n_fiducials must be a positive integer", path, 1)
    if not isinstance(n_steps, int) or n_steps < 0:
        raise ParseError("header n_steps must be a non-negative integer", path, 1)
    expected_cols = _SESSION_COLS_TRUTH if has_truth else _SESSION_COLS_NO_TRUTH
    if len(lines) < 2 or lines[1] != expected_cols:
        raise ParseError(f"expected column header {expected_cols!r}", path, 2)
    n_cols = len(expected_cols.split(","))

    truth = np.full((n_steps, nf, 3), np.nan) if has_truth else None
    measured = np.full((n_steps, nf, 3), np.nan)
    occluded = np.zeros((n_steps, nf), dtype=bool)

    expected = [(k, f) for k in range(n_steps) for f in range(nf)]
    rows = lines[2:]
    if len(rows) != len(expected):
        raise SchemaError(f"{path}: expected {len(expected)} data rows, found {len(rows)}")
    for i, row in enumerate(rows):
        lineno = i + 3
        cells = row.split(",")
        if len(cells) != n_cols:
            raise ParseError(f"expected {n_cols} columns, got {len(cells)}", path, lineno)
        try:
            k = int(cells[0])
            f = int(cells[2])
        except ValueError:
            raise ParseError("k and fiducial_id must be integers", path, lineno) from None
        if (k, f) != expected[i]:
            raise SchemaError(
                f"{path}:{lineno}: rows out of order: got (k={k}, fiducial={f}), "
                f"expected (k={expected[i][0]}, fiducial={expected[i][1]})"
            )
        t = _parse_float(cells[1], path, lineno, "t_s")
        if t != k * dt:
            raise SchemaError(f"{path}:{lineno}: t_s {t!r} inconsistent with k*dt")
        col = 3
        if has_truth:
            for ax in range(3):
                truth[k, f, ax] = _parse_float(cells[col + ax], path, lineno, f"truth_{'xyz'[ax]}")
            col += 3
        for ax in range(3):
            measured[k, f, ax] = _cell(cells[col + ax], path, lineno, f"meas_{'xyz'[ax]}")
        col += 3
        if cells[col] not in ("0", "1"):
            raise ParseError(f"occluded must be 0 or 1, got {cells[col]!r}", path, lineno)
        occluded[k, f] = cells[col] == "1"

    return SessionData(dt=float(dt), measured=measured, truth=truth, occluded=occluded,
                       meta=header.get("config", {}))


# ---------------------------------------------------------------------------
# Filtered output

_FILTERED_COLS = "k,t_s,fiducial_id,refined_x,refined_y,refined_z,nis,occluded_suspect,predicted_only"


def write_filtered(filtered: FilteredSession, path) -> None:
    """Write filter outputs (refined positions, NIS, flags)."""
    header = {
        "dt_s": filtered.dt,
        "n_fiducials": filtered.n_fiducials,
        "n_steps": filtered.n_steps,
        "config": filtered.meta,
    }
    lines = [f"{_FILTERED_MAGIC} v{SCHEMA_VERSION} {json.dumps(header)}", _FILTERED_COLS]
    for k in range(filtered.n_steps):
        t = k * filtered.dt
        for f in range(filtered.n_fiducials):
            cells = [str(k), _fmt(t), str(f)]
            cells.extend(_fmt(v) for v in filtered.refined[k, f])
            cells.append(_fmt(filtered.nis[k, f]))
            cells.append("1" if filtered.occluded_suspect[k, f] else "0")
            cells.append("1" if filtered.predicted_only[k, f] else "0")
            lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")


def read_filtered(path) -> FilteredSession:
    """Read a filtered-output file."""
    lines = _read_lines(path)
    header = _read_header(lines[0], _FILTERED_MAGIC, path)
    dt = header.get("dt_s")
    nf = header.get("n_fiducials")
    n_steps = header.get("n_steps")
    if not isinstance(dt, (int, float)) or dt <= 0:
        raise ParseError("header dt_s must be a positive number", path, 1)
    if not isinstance(nf, int) or nf < 1:
        raise ParseError("header n_fiducials must be a positive integer", path, 1)
    if not isinstance(n_steps, int) or n_steps < 0:
        raise ParseError("header n_steps must be a non-negative integer", path, 1)
    if len(lines) < 2 or lines[1] != _FILTERED_COLS:
        raise ParseError(f"expected column header {_FILTERED_COLS!r}", path, 2)

    refined = np.full((n_steps, nf, 3), np.nan)
    nis = np.full((n_steps, nf), np.nan)
    suspect = np.zeros((n_steps, nf), dtype=bool)
    pred_only = np.zeros((n_steps, nf), dtype=bool)

    expected = [(k, f) for k in range(n_steps) for f in range(nf)]
    rows = lines[2:]
    if len(rows) != len(expected):
        raise SchemaError(f"{path}: expected {len(expected)} data rows, found {len(rows)}")
    for i, row in enumerate(rows):
        lineno = i + 3
        cells = row.split(",")
        if len(cells) != 9:
            raise ParseError(f"expected 9 columns, got {len(cells)}", path, lineno)
        try:
            k = int(cells[0])
            f = int(cells[2])
        except ValueError:
            raise ParseError("k and fiducial_id must be integers", path, lineno) from None
        if (k, f) != expected[i]:
            raise SchemaError(f"{path}:{lineno}: rows out of order at (k={k}, fiducial={f})")
        for ax in range(3):
            refined[k, f, ax] = _cell(cells[3 + ax], path, lineno, f"refined_{'xyz'[ax]}")
        nis[k, f] = _cell(cells[6], path, lineno, "nis")
        for col, arr, name in ((7, suspect, "occluded_suspect"), (8, pred_only, "predicted_only")):
            if cells[col] not in ("0", "1"):
                raise ParseError(f"{name} must be 0 or 1, got {cells[col]!r}", path, lineno)
            arr[k, f] = cells[col] == "1"

    return FilteredSession(dt=float(dt), refined=refined, nis=nis,
                           occluded_suspect=suspect, predicted_only=pred_only,
                           meta=header.get("config", {}))


# ---------------------------------------------------------------------------
# Configuration

@dataclass
class FilterSettings:
    """Filter section of the config file."""

    dt_s: float = DEFAULT_DT
    q_var: float = DEFAULT_Q_VAR
    r_var_xyz: tuple = DEFAULT_R_VAR
    pos_var: float | None = None  # None: track r_var_xyz per axis
    vel_var: float = DEFAULT_VEL_VAR
    acc_var: float = DEFAULT_ACC_VAR
    gate_threshold: float = DEFAULT_GATE
    gate_persistence: int = DEFAULT_PERSISTENCE
    burnout: int = DEFAULT_BURNOUT
    reject_gated: bool = False

    def to_filter_config(self, dt: float | None = None) -> FilterConfig:
        """Build the numeric FilterConfig; `dt` overrides dt_s (e.g. a
        session's own sampling interval)."""
        return FilterConfig.from_variances(
            dt=self.dt_s if dt is None else dt,
            q_var=self.q_var,
            r_var_xyz=self.r_var_xyz,
            pos_var=self.pos_var,
            vel_var=self.vel_var,
            acc_var=self.acc_var,
        )


@dataclass
class AppConfig:
    """Combined filter + simulation configuration."""

    filter: FilterSettings = field(default_factory=FilterSettings)
    sim: SimConfig = field(default_factory=SimConfig)


def default_config() -> AppConfig:
    return AppConfig()


def _reject_unknown(d: dict, allowed, where):
    for key in d:
        if key not in allowed:
            raise ConfigError(f"unknown key {where}.{key}")


def _number(d, key, where, minimum=None, strict_min=None, integer=False):
    value = d[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number")
    if integer and not isinstance(value, int):
        raise ConfigError(f"{where}.{key} must be an integer")
    if not math.isfinite(value):
        raise ConfigError(f"{where}.{key} must be finite")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{where}.{key} must be >= {minimum}")
    if strict_min is not None and value <= strict_min:
        raise ConfigError(f"{where}.{key} must be > {strict_min}")
    return value


def _vec3(d, key, where):
    value = d[key]
    if (not isinstance(value, list) or len(value) != 3
            or any(isinstance(v, bool) or not isinstance(v, (int, float)) for v in value)
            or any(not math.isfinite(v) for v in value)):
        raise ConfigError(f"{where}.{key} must be a list of 3 finite numbers")
    return tuple(float(v) for v in value)


def _bool(d, key, where):
    value = d[key]
    if not isinstance(value, bool):
        raise ConfigError(f"{where}.{key} must be a boolean")
    return value


def _parse_filter(d: dict) -> FilterSettings:
    if not isinstance(d, dict):
        raise ConfigError("filter section must be an object")
    allowed = {"dt_s", "q_var", "r_var_xyz", "p0", "gate_threshold",
               "gate_persistence", "burnout", "reject_gated"}
    _reject_unknown(d, allowed, "filter")
    fs = FilterSettings()
    if "dt_s" in d:
        fs.dt_s = float(_number(d, "dt_s", "filter", strict_min=0.0))
    if "q_var" in d:
        fs.q_var = float(_number(d, "q_var", "filter", minimum=0.0))
    if "r_var_xyz" in d:
        fs.r_var_xyz = _vec3(d, "r_var_xyz", "filter")
        if any(v <= 0 for v in fs.r_var_xyz):
            raise ConfigError("filter.r_var_xyz entries must be > 0")
    if "p0" in d:
        p0 = d["p0"]
        if not isinstance(p0, dict):
            raise ConfigError("filter.p0 must be an object")
        _reject_unknown(p0, {"pos_var", "vel_var", "acc_var"}, "filter.p0")
        if "pos_var" in p0 and p0["pos_var"] is not None:
            fs.pos_var = float(_number(p0, "pos_var", "filter.p0", minimum=0.0))
        if "vel_var" in p0:
            fs.vel_var = float(_number(p0, "vel_var", "filter.p0", minimum=0.0))
        if "acc_var" in p0:
            fs.acc_var = float(_number(p0, "acc_var", "filter.p0", minimum=0.0))
    if "gate_threshold" in d:
        fs.gate_threshold = float(_number(d, "gate_threshold", "filter", strict_min=0.0))
    if "gate_persistence" in d:
        fs.gate_persistence = _number(d, "gate_persistence", "filter", minimum=1, integer=True)
    if "burnout" in d:
        fs.burnout = _number(d, "burnout", "filter", minimum=0, integer=True)
    if "reject_gated" in d:
        fs.reject_gated = _bool(d, "reject_gated", "filter")
    return fs


def _parse_bias(entry, index) -> OcclusionBias:
    where = f"sim.bias_segments[{index}]"
    if not isinstance(entry, dict):
        raise ConfigError(f"{where} must be an object")
    allowed = {"fiducial_id", "start_k", "end_k", "offset", "spike_magnitude"}
    _reject_unknown(entry, allowed, where)
    for key in ("fiducial_id", "start_k", "end_k"):
        if key not in entry:
            raise ConfigError(f"{where}.{key} is required")
    seg = OcclusionBias(
        fiducial_id=_number(entry, "fiducial_id", where, minimum=0, integer=True),
        start_k=_number(entry, "start_k", where, minimum=0, integer=True),
        end_k=_number(entry, "end_k", where, minimum=0, integer=True),
    )
    if "offset" in entry:
        seg.offset = _vec3(entry, "offset", where)
    if "spike_magnitude" in entry:
        seg.spike_magnitude = _vec3(entry, "spike_magnitude", where)
    return seg


def _parse_sim(d: dict) -> SimConfig:
    if not isinstance(d, dict):
        raise ConfigError("sim section must be an object")
    allowed = {"fiducial_initials", "v0", "a0", "omega", "fps", "duration",
               "noise_std", "seed", "bias_segments", "orthonormalize"}
    _reject_unknown(d, allowed, "sim")
    sim = SimConfig()
    if "fiducial_initials" in d:
        value = d["fiducial_initials"]
        if not isinstance(value, list) or len(value) < 1:
            raise ConfigError("sim.fiducial_initials must be a non-empty list")
        sim.fiducial_initials = tuple(
            _vec3({"p": p}, "p", f"sim.fiducial_initials[{i}]") for i, p in enumerate(value)
        )
    for key in ("v0", "a0", "omega", "noise_std"):
        if key in d:
            setattr(sim, key, _vec3(d, key, "sim"))
    if any(v < 0 for v in sim.noise_std):
        raise ConfigError("sim.noise_std entries must be >= 0")
    if "fps" in d:
        sim.fps = float(_number(d, "fps", "sim", strict_min=0.0))
    if "duration" in d:
        sim.duration = float(_number(d, "duration", "sim", strict_min=0.0))
    if "seed" in d:
        sim.seed = _number(d, "seed", "sim", minimum=0, integer=True)
    if "orthonormalize" in d:
        sim.orthonormalize = _bool(d, "orthonormalize", "sim")
    if "bias_segments" in d:
        value = d["bias_segments"]
        if not isinstance(value, list):
            raise ConfigError("sim.bias_segments must be a list")
        sim.bias_segments = [_parse_bias(entry, i) for i, entry in enumerate(value)]
    try:
        sim.validate()
    except ValueError as exc:
        raise ConfigError(f"sim: {exc}") from exc
    return sim


def parse_config(doc: dict) -> AppConfig:
    """Validate a config document (strict schema, defaults filled)."""
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")
    _reject_unknown(doc, {"schema_version", "filter", "sim"}, "root")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if not isinstance(version, int):
        raise ConfigError("root.schema_version must be an integer")
    if version > SCHEMA_VERSION:
        raise VersionError(f"config schema version {version} is newer than supported {SCHEMA_VERSION}")
    return AppConfig(
        filter=_parse_filter(doc.get("filter", {})),
        sim=_parse_sim(doc.get("sim", {})),
    )


def config_to_dict(config: AppConfig) -> dict:
    """Full config document with every field (defaults echoed)."""
    fs, sim = config.filter, config.sim
    return {
        "schema_version": SCHEMA_VERSION,
        "filter": {
            "dt_s": fs.dt_s,
            "q_var": fs.q_var,
            "r_var_xyz": list(fs.r_var_xyz),
            "p0": {"pos_var": fs.pos_var, "vel_var": fs.vel_var, "acc_var": fs.acc_var},
            "gate_threshold": fs.gate_threshold,
            "gate_persistence": fs.gate_persistence,
            "burnout": fs.burnout,
            "reject_gated": fs.reject_gated,
        },
        "sim": {
            "fiducial_initials": [list(p) for p in sim.fiducial_initials],
            "v0": list(sim.v0),
            "a0": list(sim.a0),
            "omega": list(sim.omega),
            "fps": sim.fps,
            "duration": sim.duration,
            "noise_std": list(sim.noise_std),
            "seed": sim.seed,
            "bias_segments": [
                {
                    "fiducial_id": seg.fiducial_id,
                    "start_k": seg.start_k,
                    "end_k": seg.end_k,
                    "offset": list(seg.offset),
                    "spike_magnitude": list(seg.spike_magnitude),
                }
                for seg in sim.bias_segments
            ],
            "orthonormalize": sim.orthonormalize,
        },
    }


def read_config(path) -> AppConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return parse_config(doc)


def write_config(config: AppConfig, path) -> None:
    _atomic_write(path, json.dumps(config_to_dict(config), indent=2) + "\n")


# ---------------------------------------------------------------------------

def _read_lines(path):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    if text == "":
        raise ParseError("empty file", path, 1)
    return text.rstrip("\n").split("\n")


def _atomic_write(path, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)
