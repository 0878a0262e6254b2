import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ppgp.estimator import InducingPointSelector, PoissonGPIntensity
from ppgp.simulate import simulate, synthetic_bimodal


@pytest.fixture(scope="module")
def events():
    return simulate(synthetic_bimodal(), 0)


def test_selector(events):
    sel = InducingPointSelector([0.0], [50.0], random_state=0, restarts=2).fit(events)
    assert sel.normalized_utilities_[len(sel.inducing_points_) - 1] >= 0.95
    assert sel.inducing_points_.shape[1] == 1
    assert clone(sel).get_params()["h_max"] == 10.0


def test_intensity_estimator(events):
    est = PoissonGPIntensity([0.0], [50.0], burn_in=50, n_samples=200, random_state=1)
    with pytest.raises(NotFittedError):
        est.predict(np.array([[1.0]]))
    est.fit(events)
    grid = np.linspace(0, 50, 20)[:, None]
    lam = est.predict(grid)
    mean, var = est.predict_log(grid)
    assert lam.shape == (20,) and np.all(lam > 0) and np.all(var >= 0)
    assert np.isfinite(est.score(simulate(synthetic_bimodal(), 5)))
    again = clone(est).fit(events)
    np.testing.assert_array_equal(again.predict(grid), lam)


def test_fixed_inducing_points(events):
    est = PoissonGPIntensity([0.0], [50.0], inducing_points=[[10.0], [30.0]], burn_in=10,
                             n_samples=20).fit(events)
    assert not hasattr(est, "selector_")
    np.testing.assert_array_equal(est.inducing_points_, [[10.0], [30.0]])
