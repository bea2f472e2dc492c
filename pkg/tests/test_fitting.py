import json
import math
from datetime import date

import numpy as np
import pytest

from gseir.data import DailyRecord, ObservedSeries
from gseir.fitting import (
    PARAM_NAMES,
    Bounds,
    FitError,
    FitResult,
    FitSettings,
    InfeasibleStateError,
    fit,
    fitted_trajectory,
    initial_state,
    loss,
    start_points,
)
from gseir.model import ModelParams
from gseir.synthetic import generate_series

EPOCH = date(2020, 2, 24)
TRUTH = ModelParams(0.04, 0.7, 0.2, 0.25, 0.08, 0.1, 0.01, 0.05)
FIRST = DailyRecord(date(2020, 3, 16), 300, 250, 30, 20)
FAST = FitSettings(restarts=4, max_iter=600, polish=1)


@pytest.fixture(scope="module")
def clean():
    return generate_series("Lazio", 5_879_082, TRUTH, FIRST, 900, 400, date(2020, 3, 23), epoch=EPOCH, rounded=False)


@pytest.fixture(scope="module")
def fitted(clean):
    return fit(clean, epoch=EPOCH)


class TestInitialState:
    def test_empty_observation(self):
        s = initial_state(None, 1000, 0, 0)
        assert s.s == 1000 and s.as_array()[1:].tolist() == [0] * 6

    def test_arithmetic(self):
        s = initial_state(DailyRecord(date(2020, 3, 16), 650, 500, 100, 50), 5_000_000, 1000, 800)
        assert s.s == 4_997_550
        assert (s.e, s.i, s.q, s.r, s.d, s.p) == (1000, 800, 500, 100, 50, 0)

    def test_infeasible(self):
        with pytest.raises(InfeasibleStateError):
            initial_state(None, 100, 60, 50)

    def test_negative(self):
        with pytest.raises(InfeasibleStateError):
            initial_state(None, 100, -1, 0)


class TestLoss:
    def test_self_consistent(self, clean):
        assert loss(TRUTH, 900, 400, clean, epoch=EPOCH) == pytest.approx(0.0, abs=1e-20)

    def test_zero_params_large(self, clean):
        assert loss(ModelParams.zero(), 0, 0, clean, epoch=EPOCH) > 1.0

    def test_infeasible_sentinel(self, clean):
        assert loss(TRUTH, 6e6, 0, clean, epoch=EPOCH) == math.inf

    def test_needs_two_days(self, clean):
        one = ObservedSeries(clean.region, clean.population, clean.records[:1])
        with pytest.raises(FitError):
            loss(TRUTH, 1, 1, one)

    def test_constant_series_does_not_divide_by_zero(self):
        recs = tuple(DailyRecord(date(2020, 3, 1 + k), 10 + k, 10 + k, 0, 0) for k in range(5))
        s = ObservedSeries("Lazio", 1000, recs)
        assert math.isfinite(loss(ModelParams.zero(), 1, 1, s))


class TestFit:
    def test_synthetic_recovery(self, fitted, clean):
        assert fitted.loss < 1e-4
        # only the curves acting on the observed Q pool are identifiable from 8 days
        for name in ("lambda0", "lambda1", "kappa0", "kappa1"):
            assert getattr(fitted.params, name) == pytest.approx(getattr(TRUTH, name), rel=0.2), name

    def test_best_of_restarts(self, fitted):
        assert len(fitted.restart_losses) == 16
        assert fitted.loss <= min(fitted.restart_losses)

    def test_within_bounds(self, fitted, clean):
        b = Bounds.default(clean.population)
        x = [*fitted.params.as_array(), fitted.e0, fitted.i0]
        assert all(lo <= v <= hi for v, lo, hi in zip(x, b.lower, b.upper))
        assert initial_state(clean.records[0], clean.population, fitted.e0, fitted.i0).s >= 0

    def test_window_metadata(self, fitted):
        assert (fitted.start, fitted.end, fitted.epoch) == (date(2020, 3, 16), date(2020, 3, 23), EPOCH)
        assert fitted.t0 == 21.0

    def test_deterministic(self, clean):
        a = fit(clean, settings=FAST, epoch=EPOCH)
        b = fit(clean, settings=FAST, epoch=EPOCH)
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())

    def test_parallel_matches_serial(self, clean):
        a = fit(clean, settings=FAST, epoch=EPOCH)
        b = fit(clean, settings=FitSettings(restarts=4, max_iter=600, polish=1, workers=2), epoch=EPOCH)
        assert a.to_dict() == b.to_dict()

    def test_json_roundtrip(self, fitted):
        assert FitResult.from_dict(json.loads(json.dumps(fitted.to_dict()))) == fitted

    def test_fitted_trajectory_matches_loss(self, fitted, clean):
        traj = fitted_trajectory(fitted, clean)
        assert traj.dates[0] == clean.start and traj.dates[-1] == clean.end
        assert traj.times[0] == 21.0

    def test_short_window(self, clean):
        short = ObservedSeries(clean.region, clean.population, clean.records[:3])
        with pytest.raises(FitError):
            fit(short)

    def test_epoch_after_start(self, clean):
        with pytest.raises(FitError):
            fit(clean, epoch=date(2020, 3, 20))

    def test_no_feasible_start(self, clean):
        # E and I forced above the population
        b = Bounds.from_dict({"e0": [6e6, 7e6]}, clean.population)
        with pytest.raises(FitError, match="feasible"):
            fit(clean, b, FAST)


class TestBounds:
    def test_defaults(self):
        b = Bounds.default(1_000_000)
        d = b.as_dict()
        assert d["beta"] == [0.0, 3.0] and d["alpha"] == [0.0, 1.0] and d["e0"] == [0.0, 10_000.0]

    def test_invalid(self):
        with pytest.raises(FitError):
            Bounds.from_dict({"beta": [2, 1]}, 1000)
        with pytest.raises(FitError):
            Bounds.from_dict({"zeta": [0, 1]}, 1000)

    def test_start_points_inside(self):
        b = Bounds.default(5e6)
        pts = start_points(b, 16, 3)
        assert pts.shape == (16, len(PARAM_NAMES))
        assert np.all(pts >= b.lower) and np.all(pts <= b.upper)
        np.testing.assert_array_equal(pts, start_points(b, 16, 3))
        assert not np.array_equal(pts, start_points(b, 16, 4))
