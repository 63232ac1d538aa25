"""JSON and CSV formats: models, run configs, trajectories and reports."""

import csv
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionMismatch, TooShort
from .model import build_model
from .simulate import SimConfig, Trajectory
from .twodim import StandardParams2D, canonical_model

__all__ = [
    "load_json",
    "model_from_dict",
    "load_model",
    "save_model",
    "parse_run_config",
    "load_run_config",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "write_json",
    "write_table_csv",
    "DT_RTOL",
]

DT_RTOL = 1e-9
STANDARD_KEYS = {"lambda_bar", "mu", "omega"}
MATRIX_KEYS = {"A", "G"}


def load_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def _matrix(value, name):
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a nested list of numbers") from None
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"{name} must be a square matrix, got shape {M.shape}")
    return M


def model_from_dict(obj):
    """Build a model from ``{"A": ..., "G": ...}`` or standard 2D parameters.

    Returns ``(model, params)``; ``params`` is ``None`` for the matrix form.
    """
    if not isinstance(obj, dict):
        raise ConfigError("model must be a JSON object")
    keys = set(obj)
    has_matrix = bool(keys & MATRIX_KEYS)
    has_standard = bool(keys & STANDARD_KEYS)
    if has_matrix == has_standard:
        raise ConfigError("model needs exactly one of {A, G} or {lambda_bar, mu, omega}")
    if has_matrix:
        if not MATRIX_KEYS <= keys:
            raise ConfigError("matrix model needs both A and G")
        return build_model(_matrix(obj["A"], "A"), _matrix(obj["G"], "G")), None
    if not STANDARD_KEYS <= keys:
        raise ConfigError("standard model needs lambda_bar, mu and omega")
    p = StandardParams2D(obj["lambda_bar"], obj["mu"], obj["omega"])
    return canonical_model(p), p


def load_model(path):
    return model_from_dict(load_json(path))[0]


def save_model(model, path):
    write_json(model.to_dict(), path)


def _init_from(obj):
    if obj is None or obj == "stationary":
        return "stationary"
    if isinstance(obj, dict) and len(obj) == 1:
        ((kind, value),) = obj.items()
        if kind in ("point", "gaussian"):
            return (kind, value)
    raise ConfigError(f"init must be 'stationary', {{'point': x0}} or {{'gaussian': cov}}, got {obj!r}")


def parse_run_config(obj):
    """Parse a run config into ``(model, params, SimConfig)``.

    ``sim`` needs ``dt`` and either ``n_steps`` or ``T``; ``scheme``,
    ``init`` and ``seed`` are optional.
    """
    if not isinstance(obj, dict) or "model" not in obj or "sim" not in obj:
        raise ConfigError("config needs 'model' and 'sim' objects")
    model, params = model_from_dict(obj["model"])
    sim = obj["sim"]
    if not isinstance(sim, dict):
        raise ConfigError("'sim' must be an object")
    try:
        dt = float(sim["dt"])
        if "n_steps" in sim:
            n_steps = int(sim["n_steps"])
        else:
            n_steps = int(round(float(sim["T"]) / dt))
    except KeyError as exc:
        raise ConfigError(f"sim is missing {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad sim value: {exc}") from None
    cfg = SimConfig(
        dt=dt,
        n_steps=n_steps,
        scheme=sim.get("scheme", "exact"),
        init=_init_from(sim.get("init")),
        seed=int(sim.get("seed", 0)),
    )
    return model, params, cfg


def load_run_config(path):
    return parse_run_config(load_json(path))


def write_trajectory_csv(traj, path):
    """Write ``t,x1,...,xd`` rows with 17 significant digits."""
    header = ["t"] + [f"x{i + 1}" for i in range(traj.dim)]
    t = traj.times
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        data = np.column_stack([t, traj.states])
        np.savetxt(fh, data, fmt="%.17g", delimiter=",")


def _snap(dt):
    # recover the configured step when the times were written as k * dt
    short = float(f"{dt:.12g}")
    return short if abs(short - dt) <= 1e-12 * abs(dt) else dt


def read_trajectory_csv(path):
    """Read a trajectory CSV, checking the header and uniform spacing."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            first = fh.readline()
            header = [h.strip() for h in first.strip().split(",")]
            d = len(header) - 1
            if d < 1 or header != ["t"] + [f"x{i + 1}" for i in range(d)]:
                raise ConfigError(f"bad header {first.strip()!r}; expected t,x1,...,xd")
            try:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", UserWarning)
                    data = np.loadtxt(fh, delimiter=",", ndmin=2, dtype=float)
            except ValueError as exc:
                raise ConfigError(f"malformed row: {exc}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if data.size == 0:
        data = data.reshape(0, d + 1)
    if data.shape[1] != d + 1:
        raise ConfigError(f"rows have {data.shape[1]} columns, header has {d + 1}")
    if data.shape[0] < 2:
        raise TooShort("trajectory needs at least two samples")
    if not np.all(np.isfinite(data)):
        raise ConfigError("non-finite values in trajectory")
    t = data[:, 0]
    n = t.size - 1
    dt = (t[-1] - t[0]) / n
    if not dt > 0:
        raise ConfigError("times must increase")
    steps = np.diff(t)
    # spacing check is relative to dt, with room for the rounding of t itself
    tol = DT_RTOL * dt + 4 * np.finfo(float).eps * np.abs(t[1:])
    if np.any(np.abs(steps - dt) > tol):
        raise ConfigError("non-uniform time step")
    return Trajectory(_snap(dt), data[:, 1:], float(t[0]))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(obj, path=None):
    """Write ``obj`` as indented JSON to ``path``, or to stdout when ``None``."""
    text = json.dumps(_jsonable(obj), indent=2) + "\n"
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def write_table_csv(path, columns, rows):
    """Write rows of numbers/strings; floats get 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([f"{v:.17g}" if isinstance(v, (float, np.floating)) else v for v in row])
