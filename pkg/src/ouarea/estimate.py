"""Estimators computed from a single sampled trajectory.

Stochastic line integrals use the increments ``dX_k = X_{k+1} - X_k``.
A linear observable with matrix ``M`` and vector ``v`` accumulates

    B = sum_k  x_k^T M dX_k + v^T dX_k

where ``x_k`` is ``X_k`` (``scheme="ito"``) or the midpoint
``(X_k + X_{k+1}) / 2`` (``scheme="midpoint"``, the default).  Only the
antisymmetric part of ``M`` carries a nonzero long-run rate; under the
midpoint rule the symmetric part and ``v`` telescope exactly, so the
default estimator is unbiased for every ``M``.  The expected rate is
``<M_a, alpha>``.

Standard errors come from a circular block bootstrap of the per-step
contributions of the antisymmetric part (plus the Ito correction when
``scheme="ito"``); the telescoping end-point terms are ``O(1/T)`` and held
fixed.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _resample
from .errors import (
    DimensionMismatch,
    InvalidParams,
    OriginHit,
    SingularEstimate,
    TooShort,
    ZeroObservable,
)
from .model import solve_lyapunov, skew, sym
from .simulate import Trajectory

__all__ = [
    "LinearObservable",
    "RateEstimate",
    "step_products",
    "area_rate",
    "area_rate_se",
    "observable_increments",
    "observable_rate",
    "expected_rate",
    "asymptotic_variance",
    "asymptotic_variance_exact",
    "z_ratio",
    "optimal_observable",
    "quadratic_variation",
    "sample_covariance",
    "two_stage_entropy",
    "winding_rate",
    "SCHEMES",
]

SCHEMES = ("midpoint", "ito")
MIN_SEGMENT = 100
RIDGE = 1e-10


@dataclass(frozen=True)
class LinearObservable:
    """Linear vector field ``b(x) = M^T x + v`` integrated as ``x^T M dX + v^T dX``."""

    M: np.ndarray
    v: np.ndarray = None
    degenerate: bool = False

    def __post_init__(self):
        M = np.array(self.M, dtype=float)
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise DimensionMismatch(f"M must be square, got {M.shape}")
        v = np.zeros(M.shape[0]) if self.v is None else np.array(self.v, dtype=float)
        if v.shape != (M.shape[0],):
            raise DimensionMismatch(f"v must have length {M.shape[0]}, got {v.shape}")
        if not (np.all(np.isfinite(M)) and np.all(np.isfinite(v))):
            raise InvalidParams("observable entries must be finite")
        M.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "v", v)

    @property
    def dim(self):
        return self.M.shape[0]


@dataclass(frozen=True)
class RateEstimate:
    """Point estimate with standard error; serializes to the report JSON."""

    value: float
    std_error: float
    T: float
    n_steps: int
    method: str
    flags: tuple = ()
    extras: dict = field(default_factory=dict, compare=False, repr=False)

    def to_dict(self):
        return {
            "value": float(self.value),
            "std_error": float(self.std_error),
            "T": float(self.T),
            "n_steps": int(self.n_steps),
            "method": self.method,
            "flags": list(self.flags),
        }


def _check_traj(traj, min_steps=1):
    if not isinstance(traj, Trajectory):
        raise InvalidParams("a Trajectory is required")
    if traj.n_steps < min_steps:
        raise TooShort(f"need at least {min_steps} steps, got {traj.n_steps}")
    return traj


def step_products(traj):
    """``S = sum_k X_k dX_k^T`` (left end points)."""
    X = traj.states
    return X[:-1].T @ np.diff(X, axis=0)


def area_rate(traj):
    """Empirical area production rate, ``(S - S^T) / (2 T)``."""
    _check_traj(traj)
    S = step_products(traj)
    return 0.5 * (S - S.T) / traj.T


def _bootstrap_se(contrib, T, states, dt, n_boot, block_len, seed):
    n = contrib.size
    flags = []
    if block_len is None:
        block_len, capped = _resample.default_block_len(states, dt)
        if capped:
            flags.append("block_len_capped")
    rng = np.random.default_rng(seed)
    sums = _resample.resampled_sums(contrib, block_len, n_boot, rng)
    se = float(sums.std(ddof=1) / T) if n_boot > 1 else float("nan")
    flags.append(f"block_len={block_len}")
    if n < _resample.MIN_BLOCKS * block_len:
        flags.append("few_blocks")
    return se, sums / T, flags


def area_rate_se(traj, i=0, j=1, n_boot=200, block_len=None, seed=0):
    """Area rate entry ``(i, j)`` with a block bootstrap standard error."""
    _check_traj(traj)
    X = traj.states
    dX = np.diff(X, axis=0)
    contrib = 0.5 * (X[:-1, i] * dX[:, j] - X[:-1, j] * dX[:, i])
    value = area_rate(traj)[i, j]
    se, _, flags = _bootstrap_se(contrib, traj.T, X, traj.dt, n_boot, block_len, seed)
    return RateEstimate(value, se, traj.T, traj.n_steps, "area", tuple(flags))


def _parts(traj, obs, scheme):
    if scheme not in SCHEMES:
        raise InvalidParams(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    if obs.dim != traj.dim:
        raise DimensionMismatch(f"observable is {obs.dim}-d, trajectory is {traj.dim}-d")
    X = traj.states
    Ma = skew(obs.M)
    Ms = sym(obs.M)
    dX = np.diff(X, axis=0)
    x0, xn = X[0], X[-1]
    boundary = 0.5 * (xn @ Ms @ xn - x0 @ Ms @ x0) + obs.v @ (xn - x0)
    contrib = np.einsum("ki,ij,kj->k", X[:-1], Ma, dX)
    if scheme == "ito":
        contrib = contrib - 0.5 * np.einsum("ki,ij,kj->k", dX, Ms, dX)
    return contrib, boundary, Ma, Ms


def observable_increments(traj, obs, scheme="midpoint"):
    """Per-step contributions ``x_k^T M dX_k + v^T dX_k``."""
    _check_traj(traj)
    X = traj.states
    dX = np.diff(X, axis=0)
    if scheme == "midpoint":
        x = 0.5 * (X[:-1] + X[1:])
    elif scheme == "ito":
        x = X[:-1]
    else:
        raise InvalidParams(f"scheme must be one of {SCHEMES}, got {scheme!r}")
    return np.einsum("ki,ij,kj->k", x, obs.M, dX) + dX @ obs.v


def observable_rate(
    traj,
    obs,
    scheme="midpoint",
    n_boot=200,
    block_len=None,
    seed=0,
    model=None,
    state=None,
):
    """Production rate of a linear observable along ``traj``.

    The value is assembled as ``<M_a, S> + (end-point terms)``, which for a
    purely antisymmetric ``M`` and ``v = 0`` is the same floating-point sum
    as :func:`area_rate`.  With ``model`` the standard error is the plug-in
    ``sqrt(asymptotic_variance_exact / T)``; otherwise a block bootstrap.
    """
    _check_traj(traj)
    contrib, boundary, Ma, Ms = _parts(traj, obs, scheme)
    S = step_products(traj)
    total = (Ma * S).sum() + boundary
    if scheme == "ito":
        dX = np.diff(traj.states, axis=0)
        total = total - 0.5 * np.einsum("ki,ij,kj->", dX, Ms, dX)
    value = total / traj.T
    if model is not None:
        from .model import steady_state

        state = state if state is not None else steady_state(model)
        var = asymptotic_variance_exact(obs, model, state)
        se = float(np.sqrt(var / traj.T))
        flags = ("se=plugin",)
        boot = None
    else:
        se, boot, flags = _bootstrap_se(
            contrib, traj.T, traj.states, traj.dt, n_boot, block_len, seed
        )
        flags = ("se=block_bootstrap", *flags)
        boot = boot + boundary / traj.T
    return RateEstimate(
        float(value),
        se,
        traj.T,
        traj.n_steps,
        f"observable:{scheme}",
        flags,
        {"bootstrap": boot, "contrib": contrib, "boundary": boundary},
    )


def expected_rate(obs, state):
    """Stationary production rate ``<M_a, alpha>``."""
    if obs.dim != state.alpha.shape[0]:
        raise DimensionMismatch("observable and state dimensions differ")
    return float(np.sum(skew(obs.M) * state.alpha))


def asymptotic_variance(obs, model, state):
    """``||D^{1/2} M Sigma^{1/2}||_F^2 + v^T D v``.

    This is the stationary mean of the squared diffusion part of the
    integrand.  It ignores the autocorrelation of the drift part and so
    understates the true ``T Var`` in general; see
    :func:`asymptotic_variance_exact`.
    """
    M = obs.M
    return float(np.trace(M.T @ model.D @ M @ state.sigma) + obs.v @ model.D @ obs.v)


def asymptotic_variance_exact(obs, model, state):
    """Exact ``lim T Var(beta_hat)`` for a stationary trajectory.

    The drift part ``-x^T M_a A x`` is absorbed with the quadratic solution
    ``P`` of ``A^T P + P A = sym(M_a A)``; what remains is the martingale
    ``int x^T (M_a - 2P) G dW`` with variance rate
    ``tr(N D N^T Sigma)``, ``N = M_a - 2P``.  The symmetric part of ``M`` and
    ``v`` contribute only bounded end-point terms.
    """
    Ma = skew(obs.M)
    P = solve_lyapunov(model.A.T, sym(Ma @ model.A))
    N = Ma - 2.0 * P
    return float(np.trace(N @ model.D @ N.T @ state.sigma))


def z_ratio(obs, model, state):
    """Signal-to-noise ratio ``<M, alpha> / ||D^{1/2} M Sigma^{1/2}||_F``."""
    M = obs.M
    if not np.any(M):
        raise ZeroObservable("M is identically zero")
    den = np.sqrt(np.trace(M.T @ model.D @ M @ state.sigma))
    return float(np.sum(M * state.alpha) / den)


def optimal_observable(model, state, tol=1e-12):
    """``M = D^{-1} alpha Sigma^{-1}``, flagged degenerate when ``alpha = 0``."""
    M = np.linalg.solve(model.D, state.alpha) @ np.linalg.inv(state.sigma)
    scale = np.abs(state.alpha).max() / max(np.abs(state.sigma).max(), 1e-300)
    degenerate = scale <= tol
    if degenerate:
        M = np.zeros_like(M)
    return LinearObservable(M, None, degenerate)


def quadratic_variation(traj):
    """Diffusion estimate ``sum dX dX^T / T``."""
    dX = np.diff(traj.states, axis=0)
    return sym(dX.T @ dX / traj.T)


def sample_covariance(traj):
    """Sample covariance of the visited states."""
    return sym(np.atleast_2d(np.cov(traj.states, rowvar=False)))


def _regularized_inverse(S, name, flags):
    d = S.shape[0]
    tr = np.trace(S)
    if not np.isfinite(tr) or tr <= 0:
        raise SingularEstimate(f"{name} has non-positive trace")
    w = np.linalg.eigvalsh(S)
    if w.min() < RIDGE * tr:
        S = S + (RIDGE * tr / d) * np.eye(d)
        flags.append(f"ridge:{name}")
        if np.linalg.eigvalsh(S).min() <= 0:
            raise SingularEstimate(f"{name} is not invertible")
    return np.linalg.inv(S)


def two_stage_entropy(
    traj, split=0.5, n_boot=200, block_len=None, seed=0, scheme="midpoint"
):
    """Entropy production rate by plug-in observable on held-out data.

    The first ``split`` fraction of steps estimates ``D`` (quadratic
    variation), ``Sigma`` (sample covariance) and ``alpha`` (area rate); the
    observable ``M = D^{-1} alpha Sigma^{-1}`` is then integrated over the
    remaining steps.  The estimate carries ``extras["observable"]`` and
    ``extras["bootstrap"]`` (replicates of the stage-two rate).
    """
    _check_traj(traj)
    split = float(split)
    if not 0.0 < split < 1.0:
        raise InvalidParams(f"split must lie in (0, 1), got {split}")
    n = traj.n_steps
    m = int(round(split * n))
    if m < MIN_SEGMENT or n - m < MIN_SEGMENT:
        raise TooShort(
            f"split {split} of {n} steps leaves segments of {m} and {n - m};"
            f" each needs {MIN_SEGMENT}"
        )
    first = traj.segment(0, m)
    second = traj.segment(m, n)
    flags = []
    Dinv = _regularized_inverse(quadratic_variation(first), "D", flags)
    Pinv = _regularized_inverse(sample_covariance(first), "Sigma", flags)
    M = Dinv @ area_rate(first) @ Pinv
    obs = LinearObservable(M)
    est = observable_rate(second, obs, scheme, n_boot=n_boot, block_len=block_len, seed=seed)
    extras = dict(est.extras)
    extras["observable"] = obs
    return RateEstimate(
        est.value,
        est.std_error,
        second.T,
        second.n_steps,
        "entropy:two_stage",
        tuple(flags) + est.flags + (f"split={split}",),
        extras,
    )


def winding_rate(traj, n_boot=200, block_len=None, seed=0):
    """Unwrapped winding angle per unit time of a planar trajectory.

    This does not settle down as ``T`` grows (its variance is dominated by
    visits near the origin), so the result is a diagnostic only.
    """
    _check_traj(traj)
    if traj.dim != 2:
        raise DimensionMismatch("winding rate needs a planar trajectory")
    z = traj.states[:, 0] + 1j * traj.states[:, 1]
    if np.any(np.abs(z) <= 1e-300):
        raise OriginHit("trajectory visits the origin")
    dtheta = np.angle(z[1:] * np.conj(z[:-1]))
    value = float(dtheta.sum() / traj.T)
    se, _, flags = _bootstrap_se(dtheta, traj.T, traj.states, traj.dt, n_boot, block_len, seed)
    flags = ("diagnostic:not_consistent", "se=block_bootstrap", *flags)
    return RateEstimate(value, se, traj.T, traj.n_steps, "winding", flags)
