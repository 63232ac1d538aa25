"""Data pipelines behind the four figures; they write CSV/JSON, never images.

Default parameters live in ``data/figures.json`` and can be overridden
with a JSON file of the same shape.
"""

import json
import warnings
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, DegenerateEccentricity
from .hypotest import HDI_MASSES, ConvergenceTable, convergence_bands
from .io import write_json, write_table_csv
from .model import steady_state, velocity_matrix
from .simulate import SimConfig, simulate
from .twodim import (
    StandardParams2D,
    canonical_model,
    covariance_explicit,
    ellipse_geometry,
    ellipse_points,
    entropy_production_2d,
    principal_rotation,
    singular_values,
)

__all__ = ["FIGURES", "default_config", "run_figure"]

FIGURES = ("fig1", "fig2", "fig3", "fig4")


def default_config():
    text = resources.files("ouarea").joinpath("data/figures.json").read_text(encoding="utf-8")
    return json.loads(text)


def _merge(base, override):
    out = dict(base)
    for k, v in override.items():
        out[k] = _merge(base[k], v) if isinstance(v, dict) and isinstance(base.get(k), dict) else v
    return out


def _params(cfg, omega=None):
    m = cfg["model"]
    return StandardParams2D(m["lambda_bar"], m["mu"], m["omega"] if omega is None else omega)


def fig1(cfg, seed, out_dir, threads=None):
    """Stationary density and velocity field on a grid, plus one sample path.

    The path file carries the signed area of the triangle swept by each
    step, ``(x1 dx2 - x2 dx1) / 2``, and its running total.
    """
    p = _params(cfg)
    c = cfg["fig1"]
    model = canonical_model(p)
    state = steady_state(model)
    g = np.linspace(-c["extent"], c["extent"], int(c["grid_points"]))
    xx, yy = np.meshgrid(g, g)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    P = state.precision
    nlp = 0.5 * np.einsum("ni,ij,nj->n", pts, P, pts) + 0.5 * np.log(
        (2 * np.pi) ** 2 * np.linalg.det(state.sigma)
    )
    vel = pts @ velocity_matrix(state).T
    f_grid = out_dir / "fig1_field.csv"
    write_table_csv(
        f_grid,
        ["x", "y", "neg_log_density", "vx", "vy"],
        [tuple(map(float, r)) for r in np.column_stack([pts, nlp, vel])],
    )
    n = int(round(c["T"] / cfg["dt"]))
    tr = simulate(model, SimConfig(cfg["dt"], n, seed=seed))
    X = tr.states
    dX = np.diff(X, axis=0)
    tri = np.concatenate([[0.0], 0.5 * (X[:-1, 0] * dX[:, 1] - X[:-1, 1] * dX[:, 0])])
    f_path = out_dir / "fig1_path.csv"
    write_table_csv(
        f_path,
        ["t", "x1", "x2", "triangle_area", "cumulative_area"],
        [tuple(map(float, r)) for r in np.column_stack([tr.times, X, tri, np.cumsum(tri)])],
    )
    return [f_grid, f_path]


def fig2(cfg, seed, out_dir, threads=None):
    """Running area-rate estimates of an ensemble and their HDI bands."""
    p = _params(cfg)
    c = cfg["fig2"]
    model = canonical_model(p)
    table = convergence_bands(
        model, int(c["n_traj"]), c["T_grid"], SimConfig(cfg["dt"], 1, seed=seed), threads=threads
    )
    return write_convergence(table, out_dir, "fig2", {"omega": p.omega, "seed": seed})


def write_convergence(table: ConvergenceTable, out_dir, stem, meta):
    f_bands = out_dir / f"{stem}_bands.csv"
    write_table_csv(f_bands, list(ConvergenceTable.COLUMNS), table.rows())
    n_traj = table.traces.shape[0]
    f_traces = out_dir / f"{stem}_traces.csv"
    write_table_csv(
        f_traces,
        ["T"] + [f"traj_{k:02d}" for k in range(n_traj)],
        [(float(T), *map(float, row)) for T, row in zip(table.T_grid, table.traces.T)],
    )
    f_meta = out_dir / f"{stem}_summary.json"
    summary = dict(meta)
    summary.update(
        {
            "n_traj": n_traj,
            "masses": list(HDI_MASSES),
            "spread": table.spread,
            "spread_slope": table.spread_slope() if n_traj > 1 and len(table.T_grid) > 1 else None,
        }
    )
    write_json(summary, f_meta)
    return [f_bands, f_traces, f_meta]


def fig3(cfg, seed, out_dir, threads=None):
    """Stationary density contours and principal axes for several omegas."""
    c = cfg["fig3"]
    rows, axes = [], []
    for w in c["omegas"]:
        p = _params(cfg, w)
        sigma = covariance_explicit(p)
        P = np.linalg.inv(sigma)
        for level in c["levels"]:
            for x, y in ellipse_points(0.5 * P / level, int(c["n_points"])):
                rows.append((float(w), float(level), float(x), float(y)))
        s_max, s_min, tilt = singular_values(p)
        U = principal_rotation(tilt)
        axes.append((float(w), tilt, s_max, s_min, *map(float, U[:, 1]), *map(float, U[:, 0])))
    f_c = out_dir / "fig3_contours.csv"
    write_table_csv(f_c, ["omega", "level", "x", "y"], rows)
    f_a = out_dir / "fig3_axes.csv"
    write_table_csv(
        f_a,
        ["omega", "tilt_rad", "s_max", "s_min", "major_x", "major_y", "minor_x", "minor_y"],
        axes,
    )
    return [f_c, f_a]


def geometry_rows(params_list):
    rows = []
    for p in params_list:
        s_max, s_min, tilt = singular_values(p)
        det = float(np.linalg.det(covariance_explicit(p)))
        rows.append((p.omega, tilt, s_max, s_min, det, entropy_production_2d(p)))
    return rows


def ellipse_rows(params_list, n_points):
    rows, contacts = [], []
    for k, p in enumerate(params_list):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateEccentricity)
            geo = ellipse_geometry(p)
        if k == 0:
            for name, Q in (("inner", geo.inner), ("outer", geo.outer)):
                rows += [(float(x), float(y), name) for x, y in ellipse_points(Q, n_points)]
        sid = f"steady_omega={p.omega:g}"
        Q = 0.5 * np.linalg.inv(geo.sigma)
        rows += [(float(x), float(y), sid) for x, y in ellipse_points(Q, n_points)]
        zi, zo = geo.contact_points()
        if zi is not None:
            for kind, z in (("inner", zi), ("outer", zo)):
                for sgn in (1.0, -1.0):
                    contacts.append((p.omega, kind, float(sgn * z[0]), float(sgn * z[1])))
    return rows, contacts


def fig4(cfg, seed, out_dir, threads=None):
    """Stationary ellipses, the two bounding ellipses and the contact points."""
    c = cfg["fig4"]
    plist = [_params(cfg, w) for w in c["omegas"]]
    rows, contacts = ellipse_rows(plist, int(c["n_points"]))
    f_e = out_dir / "fig4_ellipses.csv"
    write_table_csv(f_e, ["x", "y", "curve_id"], rows)
    f_t = out_dir / "fig4_tangency.csv"
    write_table_csv(f_t, ["omega", "ellipse", "x", "y"], contacts)
    return [f_e, f_t]


_RUNNERS = {"fig1": fig1, "fig2": fig2, "fig3": fig3, "fig4": fig4}


def run_figure(which, seed=0, out_dir=".", config=None, threads=None):
    """Run one pipeline and return the written paths."""
    if which not in _RUNNERS:
        raise ConfigError(f"unknown figure {which!r}; choose from {FIGURES}")
    cfg = default_config()
    if config is not None:
        if not isinstance(config, dict):
            raise ConfigError("figure config must be a JSON object")
        cfg = _merge(cfg, config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    return _RUNNERS[which](cfg, int(seed), out_dir, threads)
