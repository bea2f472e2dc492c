"""Parameter estimation for the generalized SEIR model.

The unknowns are the eight rate coefficients plus the unobserved initial
exposed and infectious counts. They are found by bounded Nelder-Mead from a
scrambled Sobol set of starting points; the objective is the normalized
squared error on total cases, active cases and deaths over the window.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from datetime import date
from typing import Sequence

import numpy as np
from scipy.stats import qmc

from .data import DailyRecord, ObservedSeries
from .metrics import normalized_sse
from .model import D, Q, R, CompartmentState, ModelError, ModelParams, simulate_array
from .optim import nelder_mead

log = logging.getLogger(__name__)

PARAM_NAMES = ("alpha", "beta", "gamma", "delta", "lambda0", "lambda1", "kappa0", "kappa1", "e0", "i0")

#: returned for parameter sets that do not admit a valid initial state
LOSS_SENTINEL = math.inf


class InfeasibleStateError(ModelError):
    """Initial compartments exceed the population."""


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class Bounds:
    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        if len(self.lower) != len(PARAM_NAMES) or len(self.upper) != len(PARAM_NAMES):
            raise FitError(f"bounds need {len(PARAM_NAMES)} entries ({', '.join(PARAM_NAMES)})")
        for name, lo, hi in zip(PARAM_NAMES, self.lower, self.upper):
            if not (math.isfinite(lo) and math.isfinite(hi)) or lo < 0 or lo > hi:
                raise FitError(f"invalid bounds for {name}: [{lo}, {hi}]")

    @classmethod
    def default(cls, population: float) -> "Bounds":
        upper = [1.0] * 8 + [0.01 * population] * 2
        upper[1] = 3.0
        return cls(tuple([0.0] * 10), tuple(upper))

    @classmethod
    def from_dict(cls, d: dict, population: float) -> "Bounds":
        """Override defaults per name: ``{"beta": [0, 2], "e0": [0, 500]}``."""
        base = cls.default(population)
        lo, hi = list(base.lower), list(base.upper)
        for name, (a, b) in d.items():
            if name not in PARAM_NAMES:
                raise FitError(f"unknown parameter {name!r} in bounds")
            k = PARAM_NAMES.index(name)
            lo[k], hi[k] = float(a), float(b)
        return cls(tuple(lo), tuple(hi))

    def as_dict(self) -> dict[str, list[float]]:
        return {n: [a, b] for n, a, b in zip(PARAM_NAMES, self.lower, self.upper)}


@dataclass(frozen=True)
class FitSettings:
    restarts: int = 16
    seed: int = 0
    max_iter: int = 2000
    xrtol: float = 1e-8
    dt: float = 0.1
    workers: int = 1
    polish: int = 5

    @classmethod
    def from_dict(cls, d: dict) -> "FitSettings":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise FitError(f"unknown optimizer setting(s): {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass(frozen=True)
class FitResult:
    """Best parameters found for one window; ``epoch`` anchors the model clock."""

    region: str
    population: int
    params: ModelParams
    e0: float
    i0: float
    start: date
    end: date
    epoch: date
    loss: float
    iterations: int
    converged: bool
    restart_losses: tuple[float, ...] = field(default=())
    dt: float = 0.1

    @property
    def t0(self) -> float:
        return float((self.start - self.epoch).days)

    def to_dict(self) -> dict:
        return {
            "region": self.region,
            "population": self.population,
            "params": self.params.as_dict(),
            "e0": self.e0,
            "i0": self.i0,
            "window": [self.start.isoformat(), self.end.isoformat()],
            "epoch": self.epoch.isoformat(),
            "loss": self.loss,
            "iterations": self.iterations,
            "converged": self.converged,
            "restart_losses": list(self.restart_losses),
            "dt": self.dt,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        return cls(
            region=d["region"],
            population=int(d["population"]),
            params=ModelParams(**d["params"]),
            e0=float(d["e0"]),
            i0=float(d["i0"]),
            start=date.fromisoformat(d["window"][0]),
            end=date.fromisoformat(d["window"][1]),
            epoch=date.fromisoformat(d["epoch"]),
            loss=float(d["loss"]),
            iterations=int(d["iterations"]),
            converged=bool(d["converged"]),
            restart_losses=tuple(float(x) for x in d.get("restart_losses", ())),
            dt=float(d.get("dt", 0.1)),
        )


def initial_state(
    observed: DailyRecord | None,
    population: float,
    e0: float,
    i0: float,
    t: float = 0.0,
) -> CompartmentState:
    """Full state from one day of observations plus guessed E and I.

    Q, R, D come from active, recovered and deaths; P starts empty and S takes
    the remainder. ``observed=None`` means no confirmed cases yet.
    """
    if e0 < 0 or i0 < 0:
        raise InfeasibleStateError("e0 and i0 must be >= 0")
    q, r, d = (0, 0, 0) if observed is None else (observed.active, observed.recovered, observed.deaths)
    s = population - (e0 + i0 + q + r + d)
    if s < 0:
        raise InfeasibleStateError(
            f"E+I+Q+R+D = {population - s:g} exceeds population {population:g}"
        )
    return CompartmentState(float(s), float(e0), float(i0), float(q), float(r), float(d), 0.0, t=float(t))


def _targets(observed: ObservedSeries) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return observed.total, observed.active, observed.deaths


def _loss_array(x: np.ndarray, y_obs: DailyRecord, population: float, t0: float, days: int, targets, dt: float) -> float:
    e0, i0 = x[8], x[9]
    q, r, d = y_obs.active, y_obs.recovered, y_obs.deaths
    s = population - (e0 + i0 + q + r + d)
    if s < 0 or e0 < 0 or i0 < 0:
        return LOSS_SENTINEL
    y0 = np.array([s, e0, i0, q, r, d, 0.0])
    traj = simulate_array(y0, x[:8], t0, days, dt)
    total, active, deaths = targets
    c = traj[:, Q] + traj[:, R] + traj[:, D]
    val = (
        normalized_sse(c, total, strict=False)
        + normalized_sse(traj[:, Q], active, strict=False)
        + normalized_sse(traj[:, D], deaths, strict=False)
    )
    return val if math.isfinite(val) else LOSS_SENTINEL


def loss(
    params: ModelParams,
    e0: float,
    i0: float,
    observed: ObservedSeries,
    epoch: date | None = None,
    dt: float = 0.1,
) -> float:
    """Normalized three-term squared error of the model over ``observed``.

    Constant observed series (e.g. no deaths yet) fall back to an unnormalized
    term instead of dividing by zero.
    """
    if len(observed) < 2:
        raise FitError("loss needs at least two observed days")
    epoch = observed.start if epoch is None else epoch
    x = np.concatenate([params.as_array(), [e0, i0]])
    return _loss_array(
        x, observed.records[0], float(observed.population), float((observed.start - epoch).days),
        len(observed) - 1, _targets(observed), dt,
    )


#: initial E and I span orders of magnitude; search them on a log1p scale
_LOG_SLOTS = slice(8, 10)


def _to_search(x: np.ndarray) -> np.ndarray:
    z = np.array(x, dtype=np.float64)
    z[_LOG_SLOTS] = np.log1p(z[_LOG_SLOTS])
    return z


def _from_search(z: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    x = np.array(z, dtype=np.float64)
    x[_LOG_SLOTS] = np.expm1(x[_LOG_SLOTS])
    return np.clip(x, lower, upper)


def _restart(args):
    z0, lower, upper, rec, pop, t0, days, targets, settings = args
    zlo, zhi = _to_search(lower), _to_search(upper)

    def objective(z):
        return _loss_array(_from_search(z, lower, upper), rec, pop, t0, days, targets, settings.dt)

    return nelder_mead(objective, z0, zlo, zhi, xrtol=settings.xrtol, max_iter=settings.max_iter)


def start_points(bounds: Bounds, restarts: int, seed: int) -> np.ndarray:
    """Scrambled Sobol points in the search box, returned in parameter units.

    Deterministic in ``seed``; initial E and I are spread log-uniformly.
    """
    with warnings.catch_warnings():
        # non power-of-two sample sizes are fine for a handful of starts
        warnings.simplefilter("ignore", UserWarning)
        unit = qmc.Sobol(d=len(PARAM_NAMES), scramble=True, seed=seed).random(restarts)
    lower, upper = np.array(bounds.lower), np.array(bounds.upper)
    zlo, zhi = _to_search(lower), _to_search(upper)
    return np.array([_from_search(zlo + u * (zhi - zlo), lower, upper) for u in unit])


def fit(
    observed: ObservedSeries,
    bounds: Bounds | None = None,
    settings: FitSettings | None = None,
    epoch: date | None = None,
) -> FitResult:
    """Fit rates and initial E, I to ``observed``.

    Every restart is a full Nelder-Mead run; the one with the lowest loss wins
    (ties go to the earlier restart).
    """
    if len(observed) < 4:
        raise FitError("fit window needs at least 4 days")
    settings = settings or FitSettings()
    bounds = bounds or Bounds.default(observed.population)
    epoch = observed.start if epoch is None else epoch
    if epoch > observed.start:
        raise FitError("epoch must not be after the window start")
    rec0 = observed.records[0]
    pop = float(observed.population)
    t0 = float((observed.start - epoch).days)
    days = len(observed) - 1
    targets = _targets(observed)
    lower = np.array(bounds.lower)
    upper = np.array(bounds.upper)

    points = start_points(bounds, settings.restarts, settings.seed)
    feasible = [x for x in points if math.isfinite(_loss_array(x, rec0, pop, t0, days, targets, settings.dt))]
    if not feasible:
        raise FitError("no feasible start point inside bounds")

    jobs = [(_to_search(x), lower, upper, rec0, pop, t0, days, targets, settings) for x in feasible]
    if settings.workers > 1:
        with ProcessPoolExecutor(settings.workers) as pool:
            results = list(pool.map(_restart, jobs))
    else:
        results = [_restart(j) for j in jobs]

    best = min(range(len(results)), key=lambda k: (results[k].fun, k))
    res = results[best]
    iterations = res.iterations
    log.info("%s %s..%s: best restart %d/%d loss %.4g", observed.region, observed.start, observed.end, best + 1, len(results), res.fun)
    # fresh simplices around the incumbent escape the collapse a long run suffers
    for _ in range(settings.polish):
        if res.converged:
            break
        nxt = _restart((res.x, *jobs[0][1:]))
        iterations += nxt.iterations
        if nxt.fun > res.fun:
            break
        res = nxt
    x = _from_search(res.x, lower, upper)
    return FitResult(
        region=observed.region,
        population=observed.population,
        params=ModelParams.from_array(x[:8]),
        e0=float(x[8]),
        i0=float(x[9]),
        start=observed.start,
        end=observed.end,
        epoch=epoch,
        loss=res.fun,
        iterations=iterations,
        converged=res.converged,
        restart_losses=tuple(r.fun for r in results),
        dt=settings.dt,
    )


def fitted_trajectory(fit_result: FitResult, observed: ObservedSeries, days: int | None = None):
    """Re-run the fitted model from the window start (for plots and seeding)."""
    from .model import integrate

    state = initial_state(observed.on(fit_result.start), fit_result.population, fit_result.e0, fit_result.i0, t=fit_result.t0)
    if days is None:
        days = (fit_result.end - fit_result.start).days
    return integrate(state, fit_result.params, days, dt=fit_result.dt, start_date=fit_result.start)


def synthetic_series(
    region: str,
    population: int,
    params: ModelParams,
    e0: float,
    i0: float,
    first: DailyRecord,
    days: int,
    t0: float = 0.0,
    dt: float = 0.1,
) -> ObservedSeries:
    """Model-generated observations rounded to whole persons."""
    from .model import integrate

    state = initial_state(first, population, e0, i0, t=t0)
    traj = integrate(state, params, days, dt=dt, start_date=first.date)
    return series_from_trajectory(region, population, traj, rounded=True)


def series_from_trajectory(region: str, population: int, traj, rounded: bool = True) -> ObservedSeries:
    recs = []
    for day, row in zip(traj.dates, traj.values):
        q, r, d = (int(round(v)) for v in (row[Q], row[R], row[D])) if rounded else (row[Q], row[R], row[D])
        recs.append(DailyRecord(day, q + r + d, q, r, d))
    return ObservedSeries(region, population, tuple(recs))
