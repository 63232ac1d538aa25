"""Linear SDE models and their closed-form steady-state quantities.

The model is ``dX = -A X dt + G dW`` with diffusion tensor ``D = G G^T``.
Everything stationary is expressed through the covariance ``Sigma`` that
solves ``A Sigma + Sigma A^T = D``:

* ``alpha = (A Sigma - Sigma A^T) / 2``, the area production rate matrix,
* ``v(x) = (D Sigma^{-1} / 2 - A) x = -alpha Sigma^{-1} x``, the probability
  velocity,
* ``q = ||D^{-1/2} alpha Sigma^{-1/2}||_F^2``, the entropy production rate.

All objects are immutable; arrays are stored read-only.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptySample,
    NumericalFailure,
    SingularNoise,
    UnstableDrift,
)

__all__ = [
    "OUModel",
    "SteadyState",
    "Decomposition",
    "build_model",
    "solve_lyapunov",
    "alpha_star",
    "steady_state",
    "steady_velocity",
    "velocity_matrix",
    "decompose",
    "entropy_production",
    "entropy_production_inner",
    "angular_momentum",
    "is_detailed_balance",
    "plane_generator",
    "sym",
    "skew",
    "psd_sqrt",
    "psd_inv_sqrt",
]

NOISE_RTOL = 1e-12
SQRT_FLOOR = 1e-14


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def sym(M):
    """Symmetric part ``(M + M^T) / 2``, exactly symmetric."""
    M = np.asarray(M, dtype=float)
    S = 0.5 * (M + M.T)
    return 0.5 * (S + S.T)


def skew(M):
    """Antisymmetric part ``(M - M^T) / 2``, exactly antisymmetric."""
    M = np.asarray(M, dtype=float)
    K = 0.5 * (M - M.T)
    return 0.5 * (K - K.T)


def _sym_eig(S):
    w, V = np.linalg.eigh(sym(S))
    floor = SQRT_FLOOR * max(w.max(), 0.0)
    return np.maximum(w, floor), V


def psd_sqrt(S):
    """Symmetric square root of a positive semidefinite matrix.

    Eigenvalues are floored at ``1e-14`` times the largest one.
    """
    w, V = _sym_eig(S)
    return sym((V * np.sqrt(w)) @ V.T)


def psd_inv_sqrt(S):
    """Symmetric inverse square root of a positive definite matrix."""
    w, V = _sym_eig(S)
    if w.max() <= 0.0:
        raise NumericalFailure("matrix is not positive definite")
    return sym((V / np.sqrt(w)) @ V.T)


def plane_generator(d, i, j):
    """Rotation generator ``R^(i,j) = e_i e_j^T - e_j e_i^T``."""
    R = np.zeros((d, d))
    R[i, j] = 1.0
    R[j, i] = -1.0
    return R


@dataclass(frozen=True)
class OUModel:
    """Validated drift/noise pair. Build it with :func:`build_model`."""

    A: np.ndarray
    G: np.ndarray
    D: np.ndarray

    @property
    def dim(self):
        return self.A.shape[0]

    def to_dict(self):
        return {"A": self.A.tolist(), "G": self.G.tolist()}


def build_model(A, G):
    """Validate ``(A, G)`` and return an :class:`OUModel`.

    Raises
    ------
    DimensionMismatch
        If ``A`` or ``G`` is not square or their sizes differ.
    UnstableDrift
        If an eigenvalue of ``A`` has non-positive real part.
    SingularNoise
        If ``G`` has a singular value below ``1e-12`` times its largest.
    """
    A = np.asarray(A, dtype=float)
    G = np.asarray(G, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"A must be square, got shape {A.shape}")
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise DimensionMismatch(f"G must be square, got shape {G.shape}")
    if A.shape != G.shape:
        raise DimensionMismatch(f"A is {A.shape} but G is {G.shape}")
    if A.shape[0] == 0:
        raise DimensionMismatch("empty model")
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(G))):
        raise DimensionMismatch("A and G must be finite")
    eig = np.linalg.eigvals(A)
    if np.any(eig.real <= 0.0):
        raise UnstableDrift(
            f"eigenvalue with Re <= 0 in A: {eig.real.min():.6g}"
        )
    s = np.linalg.svd(G, compute_uv=False)
    if s[-1] <= NOISE_RTOL * s[0]:
        raise SingularNoise(f"G is rank deficient (s_min={s[-1]:.3g})")
    D = sym(G @ G.T)
    return OUModel(_frozen(A), _frozen(G), _frozen(D))


def solve_lyapunov(model_or_A, D=None):
    """Solve ``A Sigma + Sigma A^T = D`` by Kronecker vectorization.

    Accepts either a model or the pair ``(A, D)``.  The ``d^2 x d^2``
    system ``(I kron A + A kron I) vec(Sigma) = vec(D)`` is solved densely,
    which is exact and cheap for the small ``d`` used here.
    """
    if isinstance(model_or_A, OUModel):
        A, D = model_or_A.A, model_or_A.D
    else:
        A = np.asarray(model_or_A, dtype=float)
        D = np.asarray(D, dtype=float)
    d = A.shape[0]
    eye = np.eye(d)
    K = np.kron(eye, A) + np.kron(A, eye)
    try:
        # column-major vec, so ravel in Fortran order
        x = np.linalg.solve(K, D.ravel(order="F"))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"Lyapunov system is singular: {exc}") from exc
    Sigma = sym(x.reshape((d, d), order="F"))
    if not np.all(np.isfinite(Sigma)):
        raise NumericalFailure("Lyapunov solution is not finite")
    return Sigma


def alpha_star(model, sigma):
    """Area production rate ``(A Sigma - Sigma A^T) / 2``, exactly skew."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != model.A.shape:
        raise DimensionMismatch(f"sigma is {sigma.shape}, model is {model.A.shape}")
    return skew(model.A @ sigma)


def entropy_production(model, sigma, alpha):
    """``||D^{-1/2} alpha Sigma^{-1/2}||_F^2``."""
    W = psd_inv_sqrt(model.D) @ alpha @ psd_inv_sqrt(sigma)
    return float(np.sum(W * W))


def entropy_production_inner(model, sigma, alpha):
    """Inner-product form ``<D^{-1} alpha Sigma^{-1}, alpha>``."""
    M = np.linalg.solve(model.D, alpha) @ np.linalg.inv(sigma)
    return float(np.sum(M * alpha))


@dataclass(frozen=True)
class SteadyState:
    """Stationary covariance, area production matrix and entropy rate."""

    model: OUModel
    sigma: np.ndarray
    alpha: np.ndarray
    q: float

    @property
    def precision(self):
        return np.linalg.inv(self.sigma)


def steady_state(model):
    """Solve for the stationary quantities of ``model``."""
    sigma = solve_lyapunov(model)
    alpha = alpha_star(model, sigma)
    q = max(entropy_production(model, sigma, alpha), 0.0)
    return SteadyState(model, _frozen(sigma), _frozen(alpha), q)


def velocity_matrix(state):
    """Matrix ``V`` with ``v*(x) = V x``, built as ``D Sigma^{-1} / 2 - A``.

    This equals ``-alpha Sigma^{-1}``.
    """
    model = state.model
    return 0.5 * model.D @ state.precision - model.A


def steady_velocity(state, x):
    """Steady-state probability velocity at ``x`` (or rows of ``x``)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != state.model.dim:
        raise DimensionMismatch(f"x has trailing size {x.shape[-1]}")
    return x @ velocity_matrix(state).T


@dataclass(frozen=True)
class Decomposition:
    """Linear fields of the gradient/rotational split of ``w = 2 D^{-1} mu``.

    ``u(x) = x^T P x / 2`` with ``P = Sigma^{-1}``, ``w_c(x) = -P x`` and
    ``w_r(x) = w_r_matrix x``.
    """

    u_quadratic: np.ndarray
    w_c_matrix: np.ndarray
    w_r_matrix: np.ndarray


def decompose(model, state):
    """Split ``w(x) = -2 D^{-1} A x`` into conservative and rotational parts.

    The rotational part is ``w_r = -2 D^{-1} alpha Sigma^{-1} x``, which is
    ``2 D^{-1} alpha`` applied to ``w_c``.
    """
    P = state.precision
    P = sym(P)
    w_full = -2.0 * np.linalg.solve(model.D, model.A)
    w_c = -P
    w_r = w_full - w_c
    return Decomposition(_frozen(P), _frozen(w_c), _frozen(w_r))


def angular_momentum(state, n_samples=None, seed=0):
    """Angular momentum ``L_ij = E[x^T R^(i,j) v*(x)]`` under the steady state.

    With ``n_samples=None`` the Gaussian expectation is evaluated in closed
    form, ``L_ij = -tr(R^(i,j) V Sigma)``.  Otherwise a Monte Carlo estimate
    is returned together with its standard errors.
    """
    d = state.model.dim
    V = velocity_matrix(state)
    if n_samples is None:
        C = V @ state.sigma
        return C.T - C
    if n_samples <= 1:
        raise EmptySample("need at least two samples")
    rng = np.random.default_rng(seed)
    x = rng.multivariate_normal(np.zeros(d), state.sigma, size=n_samples)
    v = x @ V.T
    # L_ij samples: x_i v_j - x_j v_i
    S = x[:, :, None] * v[:, None, :]
    S = S - np.swapaxes(S, 1, 2)
    return S.mean(axis=0), S.std(axis=0, ddof=1) / np.sqrt(n_samples)


def is_detailed_balance(model, tol=1e-10):
    """True when ``D^{-1} A`` is symmetric to ``tol`` (max norm)."""
    K = np.linalg.solve(model.D, model.A)
    return bool(np.max(np.abs(K - K.T)) <= tol)
