"""Tests for broken detailed balance and sampling-distribution summaries.

The default test statistic is the two-stage entropy production estimate.
Its null distribution is approximated by a circular block bootstrap of the
held-out stage, re-centred at the observed value: the p-value is the
fraction of replicates ``q* - q_hat`` at least as large as ``q_hat``.
Entropy production is nonnegative, so the test is one-sided.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats as sps

from . import _resample
from .errors import EmptySample, InvalidParams, TooShort
from .estimate import asymptotic_variance_exact, two_stage_entropy
from .model import steady_state
from .simulate import Trajectory, iter_ensemble

__all__ = [
    "TestReport",
    "ConvergenceTable",
    "METHODS",
    "STATISTICS",
    "HDI_MASSES",
    "block_bootstrap",
    "detailed_balance_test",
    "per_plane_tests",
    "holm",
    "hdi",
    "nested_hdis",
    "convergence_bands",
    "running_area",
]

METHODS = ("block_bootstrap", "plugin_z")
STATISTICS = ("entropy", "fro")
HDI_MASSES = (0.5, 0.7, 0.9)


@dataclass(frozen=True)
class TestReport:
    """Outcome of a detailed-balance test."""

    __test__ = False

    statistic: float
    null_value: float
    p_value: float
    method: str
    n_boot: int
    hdi: dict
    seed: int
    std_error: float = float("nan")
    flags: tuple = ()
    samples: np.ndarray = field(default=None, compare=False, repr=False)

    def to_dict(self):
        return {
            "statistic": float(self.statistic),
            "null_value": float(self.null_value),
            "p_value": float(self.p_value),
            "method": self.method,
            "n_boot": int(self.n_boot),
            "hdi": {str(k): [float(a), float(b)] for k, (a, b) in sorted(self.hdi.items())},
            "seed": int(self.seed),
            "std_error": float(self.std_error),
            "flags": list(self.flags),
        }


def _n_points(mass, n):
    # round first so 0.7 * 10 counts as 7, not 8
    return max(1, math.ceil(round(mass * n, 9)))


def hdi(samples, mass):
    """Shortest interval holding ``ceil(mass * n)`` of the sorted samples.

    Ties go to the leftmost window.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n < 2:
        raise EmptySample("hdi needs at least two samples")
    if not 0.0 < mass < 1.0:
        raise InvalidParams(f"mass must lie in (0, 1), got {mass}")
    k = _n_points(mass, n)
    widths = x[k - 1 :] - x[: n - k + 1]
    i = int(np.argmin(widths))
    return float(x[i]), float(x[i + k - 1])


def nested_hdis(samples, masses=HDI_MASSES):
    """HDIs for several masses, each searched inside the next larger one.

    For unimodal samples this coincides with :func:`hdi`; the restriction
    guarantees nesting otherwise.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    n = x.size
    if n == 1:
        return {m: (float(x[0]), float(x[0])) for m in masses}
    if n < 2:
        raise EmptySample("hdi needs at least two samples")
    out = {}
    lo, hi = 0, n
    for m in sorted(masses, reverse=True):
        k = _n_points(m, n)
        window = x[lo:hi]
        k = min(k, window.size)
        widths = window[k - 1 :] - window[: window.size - k + 1]
        i = int(np.argmin(widths))
        lo, hi = lo + i, lo + i + k
        out[m] = (float(x[lo]), float(x[hi - 1]))
    return dict(sorted(out.items()))


def block_bootstrap(traj, stat, n_boot, block_len, seed=0):
    """Circular block bootstrap of an arbitrary statistic.

    The step records ``(X_k, dX_k)`` are resampled in blocks and
    ``stat(x_left, dx, dt)`` is evaluated on each resample.
    """
    if not isinstance(traj, Trajectory):
        raise InvalidParams("a Trajectory is required")
    n = traj.n_steps
    block_len = _resample.check_block(n, block_len)
    n_boot = int(n_boot)
    if n_boot <= 0:
        return []
    X = traj.states
    x_left = X[:-1]
    dx = np.diff(X, axis=0)
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_boot):
        idx = _resample.resample_indices(n, block_len, rng)
        out.append(float(stat(x_left[idx], dx[idx], traj.dt)))
    return out


def _area_contrib(traj):
    X = traj.states
    dX = np.diff(X, axis=0)
    iu = np.triu_indices(traj.dim, 1)
    c = 0.5 * (X[:-1, :, None] * dX[:, None, :] - dX[:, :, None] * X[:-1, None, :])
    return c[:, iu[0], iu[1]], iu


def _fro_test(traj, n_boot, block_len, seed):
    if traj.dim < 2:
        raise InvalidParams("the Frobenius statistic needs d >= 2")
    contrib, _ = _area_contrib(traj)
    flags = []
    if block_len is None:
        block_len, capped = _resample.default_block_len(traj.states, traj.dt)
        if capped:
            flags.append("block_len_capped")
    if traj.n_steps < _resample.MIN_BLOCKS * block_len:
        raise TooShort(f"{traj.n_steps} steps < 10 blocks of {block_len}")
    flags.append(f"block_len={block_len}")
    rng = np.random.default_rng(seed)
    a_hat = contrib.sum(axis=0) / traj.T
    boot = _resample.resampled_sums(contrib, block_len, n_boot, rng) / traj.T
    # full matrix norm counts each plane twice
    norm = lambda a: np.sqrt(2.0 * np.sum(a * a, axis=-1))  # noqa: E731
    stat = float(norm(a_hat))
    samples = norm(boot)
    centred = norm(boot - a_hat)
    return stat, samples, centred, flags


def detailed_balance_test(
    traj,
    method="block_bootstrap",
    model_hint=None,
    statistic="entropy",
    n_boot=1000,
    seed=0,
    split=0.5,
    block_len=None,
):
    """Test the null hypothesis of detailed balance on one trajectory.

    ``statistic="entropy"`` uses the two-stage entropy production estimate;
    ``"fro"`` uses ``||alpha_hat||_F`` with p-value
    ``P*(||alpha* - alpha_hat|| >= ||alpha_hat||)``.  ``method="plugin_z"``
    replaces the bootstrap with a normal approximation whose variance is
    computed from ``model_hint``.
    """
    if method not in METHODS:
        raise InvalidParams(f"method must be one of {METHODS}, got {method!r}")
    if statistic not in STATISTICS:
        raise InvalidParams(f"statistic must be one of {STATISTICS}, got {statistic!r}")
    n_boot = int(n_boot)
    if method == "block_bootstrap" and n_boot < 2:
        raise InvalidParams("the bootstrap needs n_boot >= 2")
    if method == "plugin_z":
        return _plugin_test(traj, model_hint, statistic, seed, split)
    if statistic == "entropy":
        est = two_stage_entropy(traj, split, n_boot=n_boot, block_len=block_len, seed=seed)
        b = int(next(f for f in est.flags if f.startswith("block_len=")).split("=")[1])
        if est.n_steps < _resample.MIN_BLOCKS * b:
            raise TooShort(f"{est.n_steps} steps < 10 blocks of {b}")
        stat = est.value
        samples = est.extras["bootstrap"]
        centred = samples - stat
        flags = est.flags
        se = est.std_error
    else:
        stat, samples, centred, flags = _fro_test(traj, n_boot, block_len, seed)
        se = float(np.std(samples, ddof=1))
    p = float(np.mean(centred >= stat))
    return TestReport(
        float(stat),
        0.0,
        p,
        method,
        n_boot,
        nested_hdis(samples),
        int(seed),
        float(se),
        tuple(flags) + (f"statistic={statistic}",),
        samples,
    )


def _plugin_test(traj, model, statistic, seed, split):
    if model is None:
        raise InvalidParams("plugin_z needs a model hint")
    if statistic != "entropy":
        raise InvalidParams("plugin_z supports only the entropy statistic")
    state = steady_state(model)
    est = two_stage_entropy(traj, split, n_boot=0, seed=seed)
    obs = est.extras["observable"]
    se = math.sqrt(asymptotic_variance_exact(obs, model, state) / est.T)
    if se > 0:
        z = est.value / se
        p = float(sps.norm.sf(z))
    else:
        p = 1.0 if est.value <= 0 else 0.0
    bands = {}
    for m in HDI_MASSES:
        h = sps.norm.ppf(0.5 + m / 2) * se
        bands[m] = (est.value - h, est.value + h)
    flags = tuple(f for f in est.flags if not f.startswith("se=")) + ("statistic=entropy",)
    return TestReport(est.value, 0.0, p, "plugin_z", 0, bands, int(seed), se, flags)


def holm(pvalues):
    """Holm step-down adjusted p-values."""
    p = np.asarray(pvalues, dtype=float)
    m = p.size
    order = np.argsort(p, kind="stable")
    adj = np.empty(m)
    running = 0.0
    for rank, i in enumerate(order):
        running = max(running, min(1.0, (m - rank) * p[i]))
        adj[i] = running
    return adj


def per_plane_tests(traj, n_boot=1000, block_len=None, seed=0):
    """Two-sided bootstrap test for every coordinate plane, Holm-adjusted.

    Returns a list of dicts with keys ``i, j, statistic, p_value, p_holm``.
    """
    if traj.dim < 2:
        raise InvalidParams("per-plane tests need d >= 2")
    contrib, (iu, ju) = _area_contrib(traj)
    if block_len is None:
        block_len, _ = _resample.default_block_len(traj.states, traj.dt)
    rng = np.random.default_rng(seed)
    a_hat = contrib.sum(axis=0) / traj.T
    boot = _resample.resampled_sums(contrib, block_len, n_boot, rng) / traj.T
    p = np.mean(np.abs(boot - a_hat) >= np.abs(a_hat), axis=0)
    adj = holm(p)
    return [
        {"i": int(i), "j": int(j), "statistic": float(a), "p_value": float(pv), "p_holm": float(pa)}
        for i, j, a, pv, pa in zip(iu, ju, a_hat, p, adj)
    ]


def running_area(traj, steps, stat="entry", i=0, j=1):
    """Area rate of the prefix ending at each index in ``steps``.

    ``stat="entry"`` returns entry ``(i, j)``; ``"fro"`` the Frobenius norm.
    """
    X = traj.states
    dX = np.diff(X, axis=0)
    steps = np.asarray(steps, dtype=int)
    T = steps * traj.dt
    if stat == "entry":
        c = np.cumsum(0.5 * (X[:-1, i] * dX[:, j] - X[:-1, j] * dX[:, i]))
        return c[steps - 1] / T
    if stat == "fro":
        contrib, _ = _area_contrib(traj)
        c = np.cumsum(contrib, axis=0)[steps - 1] / T[:, None]
        return np.sqrt(2.0 * np.sum(c * c, axis=1))
    raise InvalidParams(f"stat must be 'entry' or 'fro', got {stat!r}")


@dataclass(frozen=True)
class ConvergenceTable:
    """Per-trajectory running estimates and their HDI bands on a time grid."""

    T_grid: np.ndarray
    traces: np.ndarray
    bands: list

    COLUMNS = ("T", "stat", "hdi50_lo", "hdi50_hi", "hdi70_lo", "hdi70_hi", "hdi90_lo", "hdi90_hi")

    def rows(self):
        out = []
        for T, col, b in zip(self.T_grid, self.traces.T, self.bands):
            row = [float(T), float(np.mean(col))]
            for m in HDI_MASSES:
                row.extend(b[m])
            out.append(row)
        return out

    @property
    def mean(self):
        return self.traces.mean(axis=0)

    @property
    def spread(self):
        if self.traces.shape[0] < 2:
            return np.zeros(self.traces.shape[1])
        return self.traces.std(axis=0, ddof=1)

    def spread_slope(self):
        """Least-squares slope of log spread against log T."""
        return float(np.polyfit(np.log(self.T_grid), np.log(self.spread), 1)[0])


def convergence_bands(model, n_traj, T_grid, cfg, stat="entry", i=0, j=1, threads=None):
    """Running area-rate estimates of an ensemble, summarized by HDI bands.

    Each replica is simulated once up to ``max(T_grid)``; the estimate at
    ``T`` uses its first ``T / dt`` steps.  ``cfg.n_steps`` is ignored.
    """
    T_grid = np.asarray(sorted(float(t) for t in T_grid))
    if T_grid.size == 0:
        raise EmptySample("T_grid is empty")
    steps = np.rint(T_grid / cfg.dt).astype(int)
    if np.any(steps < 1) or np.any(np.abs(steps * cfg.dt - T_grid) > 1e-9 * T_grid):
        raise InvalidParams("every T must be a positive multiple of dt")
    run_cfg = replace(cfg, n_steps=int(steps.max()))
    fn = lambda tr: running_area(tr, steps, stat, i, j)  # noqa: E731
    traces = np.array(list(iter_ensemble(model, run_cfg, n_traj, fn=fn, threads=threads)))
    bands = [nested_hdis(col) for col in traces.T]
    return ConvergenceTable(T_grid, traces, bands)

