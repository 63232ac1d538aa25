"""Planar processes in the (lambda_bar, mu, omega) standard form.

In isotropized coordinates (unit noise, ``D = I``) every stable planar
model is, up to a rotation, ``dZ = B Z dt + dW`` with

    B = -Lambda - 2 lambda_bar omega R,
    Lambda = lambda_bar diag(1 + mu, 1 - mu),   R = [[0, 1], [-1, 0]].

With this sign the stationary area production matrix is exactly
``omega R``, so ``omega > 0`` means counterclockwise circulation.  The
stationary density has level sets ``z^T Sigma^{-1} z / 2 = const``; the
curve at level one is compared with the fixed ellipses
``z^T Lambda_in z = 1`` and ``z^T Lambda_out z = 1``, where
``Lambda_in = lambda_bar diag(1 + mu, 1)`` and
``Lambda_out = lambda_bar diag(1, 1 - mu)``.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateEccentricity,
    DimensionMismatch,
    EmptySample,
    InvalidParams,
    ZeroRadius,
)
from .model import OUModel, build_model, psd_inv_sqrt, psd_sqrt, skew, sym

__all__ = [
    "ROT",
    "StandardParams2D",
    "EllipseGeometry",
    "drift_matrix",
    "canonical_model",
    "covariance_explicit",
    "singular_values",
    "tilt_angle",
    "principal_rotation",
    "ellipse_geometry",
    "ellipse_points",
    "stream_expectation",
    "polar_drift",
    "polar_increment_mc",
    "angular_velocity_expectation",
    "angular_velocity_mc",
    "isotropized_omega",
    "omega_from_isotropized",
    "standard_form",
    "entropy_production_2d",
]

ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])
ROT.setflags(write=False)


@dataclass(frozen=True)
class StandardParams2D:
    """Mean relaxation rate, eccentricity and circulation of a planar model."""

    lambda_bar: float
    mu: float
    omega: float

    def __post_init__(self):
        for name in ("lambda_bar", "mu", "omega"):
            val = getattr(self, name)
            try:
                val = float(val)
            except (TypeError, ValueError):
                raise InvalidParams(f"{name} must be a real number") from None
            if not np.isfinite(val):
                raise InvalidParams(f"{name} must be finite")
            object.__setattr__(self, name, val)
        if self.lambda_bar <= 0:
            raise InvalidParams(f"lambda_bar must be positive, got {self.lambda_bar}")
        if not 0.0 <= self.mu < 1.0:
            raise InvalidParams(f"mu must lie in [0, 1), got {self.mu}")

    @property
    def Lambda(self):
        return self.lambda_bar * np.diag([1.0 + self.mu, 1.0 - self.mu])

    def to_dict(self):
        return {"lambda_bar": self.lambda_bar, "mu": self.mu, "omega": self.omega}


def drift_matrix(p):
    """Canonical drift ``B`` so that ``dZ = B Z dt + dW``."""
    return -p.Lambda - 2.0 * p.lambda_bar * p.omega * ROT


def canonical_model(p):
    """The canonical process as an :class:`OUModel` (``A = -B``, ``G = I``)."""
    return build_model(-drift_matrix(p), np.eye(2))


def _ratio(p):
    # m = mu^2 / (1 + 4 omega^2), the squared effective eccentricity
    return p.mu**2 / (1.0 + (2.0 * p.omega) ** 2)


def covariance_explicit(p):
    """Closed-form stationary covariance of the canonical process."""
    c = 1.0 + (2.0 * p.omega) ** 2
    scale = 0.5 / (p.lambda_bar * (1.0 - p.mu**2 / c))
    K = np.array([[1.0, 2.0 * p.omega], [2.0 * p.omega, -1.0]])
    return sym(scale * (np.eye(2) - (p.mu / c) * K))


def tilt_angle(omega):
    """Counterclockwise rotation of the principal axes, ``atan(2 omega) / 2``."""
    return 0.5 * np.arctan(2.0 * np.asarray(omega, dtype=float))


def principal_rotation(theta):
    """Rotation whose columns are the minor and major axis directions."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


def singular_values(p):
    """``(s_max, s_min, tilt)`` of the stationary covariance.

    The major axis is ``e_2`` rotated counterclockwise by ``tilt``, so
    ``Sigma = U diag(s_min, s_max) U^T`` with ``U = principal_rotation(tilt)``.
    """
    m = np.sqrt(_ratio(p))
    base = 0.5 / p.lambda_bar
    return base / (1.0 - m), base / (1.0 + m), float(tilt_angle(p.omega))


@dataclass(frozen=True)
class EllipseGeometry:
    """Shape of the stationary level set and its two fixed bounding ellipses.

    ``inner_dir`` and ``outer_dir`` are unit vectors pointing at the two
    (antipodal pairs of) contact points with the inner and outer ellipse.
    They are ``None`` when ``degenerate`` (``mu = 0``).
    """

    tilt: float
    s_plus: float
    s_minus: float
    sigma: np.ndarray
    inner: np.ndarray
    outer: np.ndarray
    inner_dir: object
    outer_dir: object
    degenerate: bool

    def contact_points(self):
        """Contact points on the steady curve ``z^T Sigma^{-1} z / 2 = 1``."""
        if self.degenerate:
            return None, None
        P = 0.5 * np.linalg.inv(self.sigma)
        out = []
        for u in (self.inner_dir, self.outer_dir):
            out.append(u / np.sqrt(u @ P @ u))
        return out[0], out[1]


def ellipse_geometry(p):
    """Tilt, singular values, bounding ellipses and contact directions.

    For ``mu = 0`` the bounding ellipses coincide with the stationary circle;
    a :class:`DegenerateEccentricity` warning is issued and the returned
    geometry is flagged.
    """
    s_max, s_min, tilt = singular_values(p)
    lb, mu = p.lambda_bar, p.mu
    inner = lb * np.diag([1.0 + mu, 1.0])
    outer = lb * np.diag([1.0, 1.0 - mu])
    degenerate = mu == 0.0
    if degenerate:
        warnings.warn("mu = 0: bounding ellipses coincide", DegenerateEccentricity, stacklevel=2)
        inner_dir = outer_dir = None
    else:
        w2 = 2.0 * p.omega
        inner_dir = np.array([1.0, w2]) / np.hypot(1.0, w2)
        outer_dir = np.array([-w2, 1.0]) / np.hypot(1.0, w2)
    return EllipseGeometry(
        tilt=tilt,
        s_plus=s_max,
        s_minus=s_min,
        sigma=covariance_explicit(p),
        inner=inner,
        outer=outer,
        inner_dir=inner_dir,
        outer_dir=outer_dir,
        degenerate=degenerate,
    )


def ellipse_points(Q, n_points=361):
    """Points on the curve ``z^T Q z = 1`` for symmetric positive definite ``Q``."""
    if n_points < 1:
        raise EmptySample("n_points must be positive")
    t = np.linspace(0.0, 2.0 * np.pi, n_points)
    circle = np.column_stack([np.cos(t), np.sin(t)])
    return circle @ psd_inv_sqrt(Q).T


def entropy_production_2d(p):
    """Closed form ``q = omega^2 tr(Sigma^{-1}) = 4 lambda_bar omega^2``."""
    return 4.0 * p.lambda_bar * p.omega**2


def stream_expectation(p, n_samples, seed=0):
    """Monte Carlo mean of ``u(X) = X^T Sigma^{-1} X / 2`` with ``X`` stationary.

    The exact value is 1 for every parameter set.
    """
    n_samples = int(n_samples)
    if n_samples <= 0:
        raise EmptySample("n_samples must be positive")
    rng = np.random.default_rng(seed)
    # u(X) for Gaussian X is half a chi-square with 2 degrees of freedom
    L = np.linalg.cholesky(covariance_explicit(p))
    x = rng.standard_normal((n_samples, 2)) @ L.T
    P = np.linalg.inv(covariance_explicit(p))
    u = 0.5 * np.einsum("ni,ij,nj->n", x, P, x)
    return float(u.mean())


def _polar_check(r, lam, nu):
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ZeroRadius("r must be positive")
    if lam <= 0 or not 0.0 <= nu < 1.0:
        raise InvalidParams("need lam > 0 and 0 <= nu < 1")
    return r


def polar_drift(r, theta, lam, nu, omega_y):
    """Ito drifts of ``(R, Theta)`` for the isotropized planar process.

    The process is ``dZ = -(L + omega_y R) Z dt + sqrt(2 L) dW`` with
    ``L = lam diag(1 + nu, 1 - nu)``, which has unit stationary scale.
    Returns ``(dr_drift, dtheta_drift)``.
    """
    r = _polar_check(r, lam, nu)
    c2 = np.cos(2.0 * theta)
    s2 = np.sin(2.0 * theta)
    dr = lam * ((1.0 - nu * c2) / r - (1.0 + nu * c2) * r)
    dtheta = omega_y + lam * nu * s2 * (1.0 + 2.0 / r**2)
    return dr, dtheta


def polar_increment_mc(r, theta, lam, nu, omega_y, dt=1e-4, n_rep=100_000, seed=0):
    """One-step Euler increments of the Cartesian process, read in polar form.

    Starts ``n_rep`` replicas at the point ``(r, theta)`` and returns
    ``(mean_dr, se_dr, mean_dtheta, se_dtheta)`` of the increments divided
    by ``dt``.  This is an oracle for :func:`polar_drift` that shares no code
    with it.
    """
    _polar_check(r, lam, nu)
    L = lam * np.array([1.0 + nu, 1.0 - nu])
    z0 = np.array([r * np.cos(theta), r * np.sin(theta)])
    drift = -L * z0 - omega_y * (ROT @ z0)
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal((n_rep, 2))
    z1 = z0 + drift * dt + np.sqrt(2.0 * L * dt) * xi
    dr = (np.hypot(z1[:, 0], z1[:, 1]) - r) / dt
    dth = np.angle((z1[:, 0] + 1j * z1[:, 1]) * np.exp(-1j * theta)) / dt
    se = lambda a: a.std(ddof=1) / np.sqrt(n_rep)  # noqa: E731
    return dr.mean(), se(dr), dth.mean(), se(dth)


def angular_velocity_expectation(p):
    """Stationary mean of the instantaneous angular drift, ``omega / sqrt(det Sigma)``.

    For ``mu = 0`` the angular drift is the constant ``2 lambda_bar omega``.
    """
    return p.omega / np.sqrt(np.linalg.det(covariance_explicit(p)))


def angular_velocity_mc(p, n_samples=1_000_000, dt=1e-4, seed=0, r_min_frac=0.01):
    """Monte Carlo mean angular velocity from one-step increments.

    Draws stationary points, takes a single Euler step of length ``dt`` and
    averages the unwrapped angle change divided by ``dt``.  Starting points
    with radius below ``r_min_frac * sqrt(tr Sigma)`` are discarded because
    the increment variance diverges at the origin.  Returns ``(mean, se)``.
    """
    if n_samples <= 1:
        raise EmptySample("n_samples must exceed one")
    sigma = covariance_explicit(p)
    B = drift_matrix(p)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n_samples, 2)) @ np.linalg.cholesky(sigma).T
    r = np.hypot(x[:, 0], x[:, 1])
    x = x[r > r_min_frac * np.sqrt(np.trace(sigma))]
    y = x + dt * x @ B.T + np.sqrt(dt) * rng.standard_normal(x.shape)
    dth = np.angle((y[:, 0] + 1j * y[:, 1]) * np.conj(x[:, 0] + 1j * x[:, 1])) / dt
    return float(dth.mean()), float(dth.std(ddof=1) / np.sqrt(dth.size))


def isotropized_omega(model):
    """Circulation ``omega`` of a planar model in its isotropized coordinates.

    With ``A_y = D^{-1/2} A D^{1/2}`` this is
    ``(a_12 - a_21) / (2 |a_11 + a_22|)``.
    """
    if not isinstance(model, OUModel) or model.dim != 2:
        raise DimensionMismatch("a planar OUModel is required")
    Dh = psd_sqrt(model.D)
    Ay = psd_inv_sqrt(model.D) @ model.A @ Dh
    return 0.5 * (Ay[0, 1] - Ay[1, 0]) / abs(Ay[0, 0] + Ay[1, 1])


def omega_from_isotropized(omega_y, D):
    """Original-coordinate area rate ``sqrt(det D) omega_y``."""
    return float(np.sqrt(np.linalg.det(np.asarray(D, dtype=float))) * omega_y)


def standard_form(model):
    """Standard parameters of a planar model plus the rotation to canonical axes.

    Returns ``(params, U)`` where ``U^T D^{-1/2} A D^{1/2} U`` is the
    canonical ``-drift_matrix(params)``.
    """
    if not isinstance(model, OUModel) or model.dim != 2:
        raise DimensionMismatch("a planar OUModel is required")
    Ay = psd_inv_sqrt(model.D) @ model.A @ psd_sqrt(model.D)
    w, V = np.linalg.eigh(sym(Ay))
    # canonical order puts the faster direction first
    V = V[:, ::-1]
    if np.linalg.det(V) < 0:
        V[:, 1] = -V[:, 1]
    lb = 0.5 * (w[0] + w[1])
    mu = (w[1] - w[0]) / (w[1] + w[0])
    K = skew(Ay)
    omega = K[0, 1] / (2.0 * lb)
    return StandardParams2D(lb, mu, omega), V
