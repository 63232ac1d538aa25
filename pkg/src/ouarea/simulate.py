"""Trajectory generation.

Two schemes are available.  ``exact`` uses the Gaussian transition
``X_{k+1} = Phi X_k + eta`` with ``Phi = expm(-A dt)`` and
``eta ~ N(0, Q)``, ``Q = Sigma - Phi Sigma Phi^T``; it is exact in law for
any step.  ``euler`` is Euler-Maruyama, guarded by ``dt ||A||_2 < 0.5``.

Random streams: replica ``k`` of a run seeded with ``seed`` draws from
``numpy.random.Generator(PCG64(SeedSequence([seed, k])))``; Gaussian
variates come from numpy's ziggurat sampler.  A single trajectory uses
replica index 0, so ``simulate(model, cfg)`` equals the first member of
``ensemble(model, cfg, n)``.  Results are identical for any thread count.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numba
import numpy as np
from scipy.linalg import expm

from .errors import DimensionMismatch, InvalidInit, InvalidParams, NumericalFailure, UnstableStep
from .model import psd_sqrt, solve_lyapunov, sym

__all__ = [
    "Trajectory",
    "SimConfig",
    "exact_step_kernel",
    "euler_step_kernel",
    "replica_rng",
    "simulate",
    "ensemble",
    "iter_ensemble",
    "default_threads",
    "THREADS_ENV",
]

THREADS_ENV = "OUAREA_THREADS"
EULER_GUARD = 0.5
SCHEMES = ("exact", "euler")


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled path; ``states`` has shape ``(n_steps + 1, d)``."""

    dt: float
    states: np.ndarray
    t0: float = 0.0
    seed: object = None

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        if states.ndim == 1:
            states = states[:, None]
        if states.ndim != 2 or states.shape[0] < 1 or states.shape[1] < 1:
            raise DimensionMismatch(f"states must be (n+1, d), got {states.shape}")
        if not np.all(np.isfinite(states)):
            raise InvalidParams("trajectory contains non-finite values")
        dt = float(self.dt)
        if not dt > 0 or not np.isfinite(dt):
            raise InvalidParams(f"dt must be positive, got {self.dt}")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "dt", dt)

    @property
    def n_steps(self):
        return self.states.shape[0] - 1

    @property
    def dim(self):
        return self.states.shape[1]

    @property
    def T(self):
        return self.n_steps * self.dt

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.states.shape[0])

    def segment(self, start, stop):
        """Sub-trajectory on sample indices ``start..stop`` inclusive."""
        return Trajectory(self.dt, self.states[start : stop + 1], self.t0 + start * self.dt, self.seed)


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``init`` is ``"stationary"``, ``("point", x0)`` or ``("gaussian", cov)``.
    """

    dt: float
    n_steps: int
    scheme: str = "exact"
    init: object = "stationary"
    seed: int = 0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidParams(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not float(self.dt) > 0:
            raise InvalidParams(f"dt must be positive, got {self.dt}")
        if int(self.n_steps) < 1:
            raise InvalidParams(f"n_steps must be at least 1, got {self.n_steps}")
        object.__setattr__(self, "dt", float(self.dt))
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "seed", int(self.seed))


def exact_step_kernel(model, dt, sigma=None):
    """Transition matrix ``Phi = expm(-A dt)`` and noise covariance ``Q``.

    ``Q = Sigma - Phi Sigma Phi^T`` follows from stationarity.
    """
    if dt < 0:
        raise InvalidParams("dt must be non-negative")
    if sigma is None:
        sigma = solve_lyapunov(model)
    Phi = expm(-model.A * dt)
    Q = sym(sigma - Phi @ sigma @ Phi.T)
    w = np.linalg.eigvalsh(Q)
    if w.min() < -1e-12 * np.linalg.norm(sigma, 2):
        raise NumericalFailure(f"step covariance has eigenvalue {w.min():.3g}")
    return Phi, Q


def euler_step_kernel(model, dt):
    """Euler-Maruyama transition ``(I - A dt, D dt)``, with the stability guard."""
    if dt * np.linalg.norm(model.A, 2) >= EULER_GUARD:
        raise UnstableStep(
            f"dt*||A||_2 = {dt * np.linalg.norm(model.A, 2):.3g} >= {EULER_GUARD}"
        )
    return np.eye(model.dim) - model.A * dt, model.D * dt


def replica_rng(seed, replica=0):
    """Generator for replica ``replica`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(replica)])))


@numba.njit(cache=True, nogil=True)
def _ar1(phi, noise, x0):
    n, d = noise.shape
    out = np.empty((n + 1, d))
    out[0] = x0
    for k in range(n):
        for i in range(d):
            acc = noise[k, i]
            for j in range(d):
                acc += phi[i, j] * out[k, j]
            out[k + 1, i] = acc
    return out


def _initial_state(model, cfg, sigma, rng):
    d = model.dim
    init = cfg.init
    if isinstance(init, str):
        if init != "stationary":
            raise InvalidInit(f"unknown init {init!r}")
        return psd_sqrt(sigma) @ rng.standard_normal(d)
    try:
        kind, value = init
    except (TypeError, ValueError):
        raise InvalidInit(f"malformed init {init!r}") from None
    value = np.asarray(value, dtype=float)
    if kind == "point":
        if value.shape != (d,) or not np.all(np.isfinite(value)):
            raise InvalidInit(f"point init must be a finite {d}-vector")
        return value.copy()
    if kind == "gaussian":
        if value.shape != (d, d) or not np.allclose(value, value.T):
            raise InvalidInit(f"gaussian init needs a symmetric {d}x{d} covariance")
        if np.linalg.eigvalsh(value).min() < -1e-12 * max(1.0, np.abs(value).max()):
            raise InvalidInit("gaussian init covariance is not positive semidefinite")
        return psd_sqrt(value) @ rng.standard_normal(d)
    raise InvalidInit(f"unknown init kind {kind!r}")


def _kernels(model, cfg):
    sigma = solve_lyapunov(model)
    if cfg.scheme == "exact":
        Phi, Q = exact_step_kernel(model, cfg.dt, sigma)
    else:
        Phi, Q = euler_step_kernel(model, cfg.dt)
    return sigma, Phi, psd_sqrt(Q)


def _run(model, cfg, replica, kernels):
    sigma, Phi, Qh = kernels
    rng = replica_rng(cfg.seed, replica)
    x0 = _initial_state(model, cfg, sigma, rng)
    noise = rng.standard_normal((cfg.n_steps, model.dim)) @ Qh.T
    states = _ar1(np.ascontiguousarray(Phi), noise, x0)
    return Trajectory(cfg.dt, states, 0.0, (cfg.seed, replica))


def simulate(model, cfg, replica=0):
    """Simulate one trajectory (replica ``replica`` of the seeded run)."""
    return _run(model, cfg, replica, _kernels(model, cfg))


def default_threads():
    """Thread count from ``$OUAREA_THREADS``, else 1."""
    raw = os.environ.get(THREADS_ENV, "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise InvalidParams(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise InvalidParams(f"{THREADS_ENV} must be positive")
    return n


def iter_ensemble(model, cfg, n_traj, fn=None, threads=None):
    """Yield ``fn(trajectory)`` for replicas ``0..n_traj-1`` in order.

    Only one chunk of trajectories is alive at a time, which keeps memory
    bounded for long runs.
    """
    n_traj = int(n_traj)
    if n_traj < 1:
        raise InvalidParams("n_traj must be at least 1")
    fn = fn or (lambda tr: tr)
    threads = default_threads() if threads is None else int(threads)
    kernels = _kernels(model, cfg)
    job = lambda k: fn(_run(model, cfg, k, kernels))  # noqa: E731
    if threads <= 1:
        for k in range(n_traj):
            yield job(k)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        for start in range(0, n_traj, threads):
            yield from pool.map(job, range(start, min(start + threads, n_traj)))


def ensemble(model, cfg, n_traj, threads=None):
    """List of ``n_traj`` independent trajectories."""
    return list(iter_ensemble(model, cfg, n_traj, threads=threads))


def with_steps(cfg, n_steps):
    """Copy of ``cfg`` with a different number of steps."""
    return replace(cfg, n_steps=n_steps)
