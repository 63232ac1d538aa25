import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ouarea.estimators import (
    AreaRateEstimator,
    DetailedBalanceTest,
    EntropyProductionEstimator,
    LinearDriftEstimator,
)
from ouarea.estimate import area_rate
from ouarea.simulate import SimConfig, Trajectory, simulate
from ouarea.twodim import StandardParams2D, canonical_model


@pytest.fixture(scope="module")
def model():
    return canonical_model(StandardParams2D(1.0, 0.5, 1.0))


@pytest.fixture(scope="module")
def X(model):
    return simulate(model, SimConfig(0.01, 100_000, seed=3)).states


def test_area(X):
    est = AreaRateEstimator(dt=0.01).fit(X)
    assert est.n_features_in_ == 2
    assert est.T_ == pytest.approx(1000.0)
    assert est.area_rate_[0, 1] == pytest.approx(1.0, abs=0.15)


def test_entropy(X):
    est = EntropyProductionEstimator(dt=0.01, n_boot=100, random_state=1).fit(X)
    assert abs(est.entropy_rate_ - 4.0) < 5 * est.std_error_
    assert est.observable_.shape == (2, 2)


def test_detailed_balance(X):
    test = DetailedBalanceTest(dt=0.01, n_boot=200).fit(X)
    assert test.reject(0.05)
    assert test.p_value_ == test.report_.p_value


def test_detailed_balance_not_fitted():
    with pytest.raises(NotFittedError):
        DetailedBalanceTest().reject()


def test_linear_drift(model, X):
    est = LinearDriftEstimator(dt=0.01).fit(X)
    np.testing.assert_allclose(est.drift_, model.A, atol=0.15)
    np.testing.assert_allclose(est.diffusion_, model.D, atol=0.03)
    assert est.steady_state_.q == pytest.approx(4.0, rel=0.3)
    Y = est.transform(X[:10])
    assert Y.shape == (10, 2)
    with pytest.raises(ValueError):
        est.transform(np.ones((3, 3)))


def test_transform_not_fitted():
    with pytest.raises(NotFittedError):
        LinearDriftEstimator().transform(np.ones((3, 2)))


def test_params_and_clone():
    est = EntropyProductionEstimator(dt=0.1, split=0.3, n_boot=7)
    params = est.get_params()
    assert params["split"] == 0.3 and params["n_boot"] == 7
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    est.set_params(split=0.6)
    assert est.split == 0.6


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        AreaRateEstimator().fit(np.ones(5))
    with pytest.raises(ValueError):
        AreaRateEstimator().fit(np.array([[np.nan, 1.0], [1.0, 2.0]]))


def test_matches_function(X):
    est = AreaRateEstimator(dt=0.01).fit(X)
    assert np.array_equal(est.area_rate_, area_rate(Trajectory(0.01, X)))
