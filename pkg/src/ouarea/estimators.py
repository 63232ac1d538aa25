"""scikit-learn style wrappers around the trajectory estimators.

Each estimator takes a trajectory as an ``(n_samples, n_features)`` array
of equally spaced states; the sampling step is a constructor parameter.
Fitted attributes end in an underscore.
"""

import numpy as np
from scipy.linalg import logm
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .estimate import area_rate, quadratic_variation, two_stage_entropy
from .hypotest import detailed_balance_test
from .model import build_model, psd_inv_sqrt, psd_sqrt, steady_state
from .simulate import Trajectory

__all__ = [
    "AreaRateEstimator",
    "EntropyProductionEstimator",
    "DetailedBalanceTest",
    "LinearDriftEstimator",
]


def _trajectory(est, X, min_samples=2):
    X = check_array(X, ensure_min_samples=min_samples, ensure_min_features=1)
    est.n_features_in_ = X.shape[1]
    return Trajectory(est.dt, X)


class AreaRateEstimator(BaseEstimator):
    """Empirical area production rate matrix of one trajectory.

    Parameters
    ----------
    dt : float
        Sampling step.
    """

    def __init__(self, dt=1.0):
        self.dt = dt

    def fit(self, X, y=None):
        traj = _trajectory(self, X)
        self.area_rate_ = area_rate(traj)
        self.T_ = traj.T
        self.n_steps_ = traj.n_steps
        return self


class EntropyProductionEstimator(BaseEstimator):
    """Two-stage entropy production estimate with a bootstrap standard error.

    Parameters
    ----------
    dt : float
        Sampling step.
    split : float
        Fraction of the steps used to build the observable.
    n_boot : int
        Bootstrap replicates for the standard error.
    block_len : int or None
        Block length in steps; ``None`` picks one from the data.
    random_state : int
        Seed of the bootstrap.
    """

    def __init__(self, dt=1.0, split=0.5, n_boot=200, block_len=None, random_state=0):
        self.dt = dt
        self.split = split
        self.n_boot = n_boot
        self.block_len = block_len
        self.random_state = random_state

    def fit(self, X, y=None):
        traj = _trajectory(self, X)
        est = two_stage_entropy(
            traj, self.split, n_boot=self.n_boot, block_len=self.block_len, seed=self.random_state
        )
        self.entropy_rate_ = est.value
        self.std_error_ = est.std_error
        self.observable_ = est.extras["observable"].M
        self.flags_ = est.flags
        return self


class DetailedBalanceTest(BaseEstimator):
    """Bootstrap (or plug-in) test of detailed balance.

    ``fit`` runs the test; ``reject(level)`` reads off the decision.
    """

    def __init__(
        self,
        dt=1.0,
        method="block_bootstrap",
        statistic="entropy",
        n_boot=1000,
        split=0.5,
        block_len=None,
        model=None,
        random_state=0,
    ):
        self.dt = dt
        self.method = method
        self.statistic = statistic
        self.n_boot = n_boot
        self.split = split
        self.block_len = block_len
        self.model = model
        self.random_state = random_state

    def fit(self, X, y=None):
        traj = _trajectory(self, X)
        self.report_ = detailed_balance_test(
            traj,
            method=self.method,
            model_hint=self.model,
            statistic=self.statistic,
            n_boot=self.n_boot,
            seed=self.random_state,
            split=self.split,
            block_len=self.block_len,
        )
        self.statistic_ = self.report_.statistic
        self.p_value_ = self.report_.p_value
        return self

    def reject(self, level=0.05):
        check_is_fitted(self, "report_")
        return self.p_value_ < level


class LinearDriftEstimator(TransformerMixin, BaseEstimator):
    """Fit ``dX = -A X dt + G dW`` to a trajectory.

    The drift comes from the lag-one least-squares transition
    ``Phi = expm(-A dt)`` and the diffusion from the quadratic variation.
    ``transform`` maps states to isotropized coordinates ``D^{-1/2} x``.
    """

    def __init__(self, dt=1.0):
        self.dt = dt

    def fit(self, X, y=None):
        traj = _trajectory(self, X, min_samples=3)
        S = traj.states
        C0 = S[:-1].T @ S[:-1]
        C1 = S[1:].T @ S[:-1]
        Phi = np.linalg.solve(C0.T, C1.T).T
        A = -np.real(logm(Phi)) / self.dt
        D = quadratic_variation(traj)
        self.drift_ = A
        self.diffusion_ = D
        self.model_ = build_model(A, psd_sqrt(D))
        self.steady_state_ = steady_state(self.model_)
        return self

    def transform(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X @ psd_inv_sqrt(self.diffusion_)
