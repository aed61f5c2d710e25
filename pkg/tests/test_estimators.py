import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from gausshull.estimators import ScaledHullEstimator
from gausshull.geometry import unit_directions
from gausshull.regions import b_normalizer


@pytest.fixture
def sample():
    return np.random.default_rng(0).standard_normal((5000, 2))


def test_params_and_clone():
    est = ScaledHullEstimator(sigma=np.eye(2), n_directions=90)
    assert set(est.get_params()) == {"sigma", "n_directions"}
    twin = clone(est)
    assert twin.n_directions == 90 and twin is not est
    est.set_params(n_directions=30)
    assert est.n_directions == 30


def test_fit_transform(sample):
    est = ScaledHullEstimator(sigma=np.eye(2))
    out = est.fit_transform(sample)
    assert est.scale_ == b_normalizer(5000)
    np.testing.assert_allclose(out, sample / est.scale_)
    assert est.n_features_in_ == 2
    assert est.directions_.shape == (720, 2)
    dirs = unit_directions(2, 16)
    np.testing.assert_allclose(est.support(dirs), (dirs @ out.T).max(axis=1))


def test_distance_and_score(sample):
    est = ScaledHullEstimator(sigma=np.eye(2)).fit(sample)
    rho = est.hausdorff_to_ellipsoid()
    assert 0 < rho < 0.5
    assert est.score(sample) == pytest.approx(-rho)


def test_estimated_covariance(sample):
    est = ScaledHullEstimator().fit(sample * [2.0, 1.0])
    np.testing.assert_allclose(est.ellipsoid_.sigma, np.diag([4.0, 1.0]), atol=0.15)


def test_errors(sample):
    with pytest.raises(NotFittedError):
        ScaledHullEstimator().transform(sample)
    with pytest.raises(ValueError, match="shape"):
        ScaledHullEstimator(sigma=np.eye(3)).fit(sample)
    est = ScaledHullEstimator().fit(sample)
    with pytest.raises(ValueError, match="features"):
        est.transform(np.zeros((3, 3)))
