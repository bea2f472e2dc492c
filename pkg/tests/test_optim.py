import numpy as np
import pytest
from scipy.optimize import minimize, rosen

from gseir.optim import nelder_mead


def test_rosenbrock_matches_scipy():
    x0 = np.array([-1.2, 1.0, 0.5])
    lo, hi = np.full(3, -5.0), np.full(3, 5.0)
    ours = nelder_mead(rosen, x0, lo, hi, max_iter=5000, xrtol=1e-10)
    ref = minimize(rosen, x0, method="Nelder-Mead", options=dict(xatol=1e-10, fatol=1e-14, maxiter=20000, adaptive=True))
    assert ours.converged
    np.testing.assert_allclose(ours.x, ref.x, atol=1e-6)
    np.testing.assert_allclose(ours.x, 1.0, atol=1e-6)


def test_respects_bounds():
    # unconstrained minimum at 3 lies outside the box
    res = nelder_mead(lambda x: float(np.sum((x - 3.0) ** 2)), np.array([0.2, 0.4]), np.zeros(2), np.ones(2))
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-7)
    assert np.all(res.x <= 1.0) and np.all(res.x >= 0.0)


def test_start_on_upper_face():
    res = nelder_mead(lambda x: float(np.sum((x - 0.5) ** 2)), np.ones(4), np.zeros(4), np.ones(4))
    np.testing.assert_allclose(res.x, 0.5, atol=1e-7)


def test_iteration_cap():
    res = nelder_mead(rosen, np.array([-1.2, 1.0]), np.full(2, -5.0), np.full(2, 5.0), max_iter=10)
    assert res.iterations == 10 and not res.converged


def test_deterministic():
    f = lambda x: float(rosen(x))
    a = nelder_mead(f, np.array([0.1, 0.2, 0.3]), np.full(3, -2.0), np.full(3, 2.0), max_iter=300)
    b = nelder_mead(f, np.array([0.1, 0.2, 0.3]), np.full(3, -2.0), np.full(3, 2.0), max_iter=300)
    assert a.x.tobytes() == b.x.tobytes() and a.fun == b.fun


def test_bad_bounds():
    with pytest.raises(ValueError):
        nelder_mead(rosen, np.zeros(2), np.ones(2), np.zeros(2))
