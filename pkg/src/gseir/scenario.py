"""Counterfactual forecasts: without travelers, with k injected cases, ground truth.

A forecast is seeded on the day before the horizon: observed Q, R, D from the
data, E, I, P from the fitted trajectory, S as remainder. Injected travelers
are added to Q on that day.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from datetime import date, timedelta
from enum import Enum
from typing import Sequence

import numpy as np

from .data import ObservedSeries, WindowError, select_window
from .fitting import FitResult, fitted_trajectory
from .metrics import MetricError, normalized_sse
from .model import COMPARTMENTS, CompartmentState, Trajectory, integrate


class ScenarioError(ValueError):
    pass


class InstanceKind(str, Enum):
    WITHOUT_TRAVELERS = "without-travelers"
    WITH_TRAVELERS = "with-travelers"
    GROUND_TRUTH = "ground-truth"


class Injection(str, Enum):
    """Where injected active cases come from."""

    #: arrivals are extra people: Q += k, N += k
    NEWCOMERS = "newcomers"
    #: residents re-labelled: Q += k, S -= k
    DEBIT_SUSCEPTIBLE = "debit-susceptible"


@dataclass(frozen=True)
class NMSEScore:
    total_cases: float
    active: float
    deaths: float

    @property
    def total(self) -> float:
        return self.total_cases + self.active + self.deaths

    def as_dict(self) -> dict[str, float]:
        return {"total": self.total, "total_cases": self.total_cases, "active": self.active, "deaths": self.deaths}


@dataclass(frozen=True)
class ScenarioOutcome:
    kind: InstanceKind
    k: int
    trajectory: Trajectory
    score: NMSEScore

    @property
    def label(self) -> str:
        return f"{self.kind.value}({self.k})" if self.kind is InstanceKind.WITH_TRAVELERS else self.kind.value

    def to_dict(self) -> dict:
        return {
            "instance": self.kind.value,
            "k": self.k,
            "start": self.trajectory.start_date.isoformat(),
            "nmse": self.score.as_dict(),
            "trajectory": {c.upper(): self.trajectory.column(c).tolist() for c in COMPARTMENTS},
        }


@dataclass(frozen=True)
class SweepResult:
    ks: tuple[int, ...]
    nmse: tuple[float, ...]
    smoothed: tuple[float, ...]
    best_k: int
    best_nmse: float

    def to_dict(self) -> dict:
        return {
            "best_k": self.best_k,
            "best_nmse": self.best_nmse,
            "k": list(self.ks),
            "nmse": list(self.nmse),
            "nmse_smoothed": list(self.smoothed),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "nmse", "nmse_smoothed"])
        for row in zip(self.ks, self.nmse, self.smoothed):
            w.writerow([row[0], repr(row[1]), repr(row[2])])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SweepResult":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ScenarioError("empty sweep table")
        ks = tuple(int(r["k"]) for r in rows)
        nmse = tuple(float(r["nmse"]) for r in rows)
        best = _argmin(ks, nmse)
        return cls(ks, nmse, tuple(float(r["nmse_smoothed"]) for r in rows), ks[best], nmse[best])


def nmse(predicted: Trajectory, actual: ObservedSeries) -> NMSEScore:
    """Normalized squared errors of total cases, active cases and deaths.

    Each term is ``sum((model - data)**2) / sum((data - mean(data))**2)`` over
    the common dates; total cases in the model are ``Q + R + D``.
    """
    if len(predicted) != len(actual) or tuple(predicted.dates) != tuple(actual.dates):
        raise ScenarioError("predicted and actual must cover identical dates")
    try:
        return NMSEScore(
            normalized_sse(predicted.total_cases, actual.total),
            normalized_sse(predicted.column("q"), actual.active),
            normalized_sse(predicted.column("d"), actual.deaths),
        )
    except MetricError as exc:
        raise ScenarioError(str(exc)) from None


def forecast_state(fit: FitResult, observed: ObservedSeries, seed_day: date) -> CompartmentState:
    """Observed Q, R, D on ``seed_day`` with E, I, P from the fitted run."""
    if not fit.start <= seed_day <= fit.end:
        raise ScenarioError(f"seed day {seed_day} outside fit window {fit.start}..{fit.end}")
    traj = fitted_trajectory(fit, observed, days=(seed_day - fit.start).days)
    model = traj[len(traj) - 1]
    rec = observed.on(seed_day)
    s = fit.population - (model.e + model.i + model.p + rec.active + rec.recovered + rec.deaths)
    if s < 0:
        raise ScenarioError("forecast seed state exceeds population")
    return CompartmentState(s, model.e, model.i, rec.active, rec.recovered, rec.deaths, model.p, t=model.t)


def inject(state: CompartmentState, k: int, mode: Injection = Injection.NEWCOMERS) -> CompartmentState:
    if k < 0:
        raise ScenarioError("injected cases must be >= 0")
    if k == 0:
        return state
    if mode is Injection.NEWCOMERS:
        return CompartmentState(state.s, state.e, state.i, state.q + k, state.r, state.d, state.p, t=state.t)
    if state.s < k:
        raise ScenarioError("not enough susceptibles to relabel")
    return CompartmentState(state.s - k, state.e, state.i, state.q + k, state.r, state.d, state.p, t=state.t)


def run_instance(
    fit: FitResult,
    observed: ObservedSeries,
    horizon: tuple[date, date],
    injected_k: int | None = None,
    kind: InstanceKind | None = None,
    injection: Injection = Injection.NEWCOMERS,
) -> ScenarioOutcome:
    """Forecast ``horizon`` (inclusive dates) from the day before it and score it.

    ``observed`` is the full regional series; it must contain the seed day and
    the horizon. The returned trajectory starts on the seed day.
    """
    start, end = horizon
    if start > end:
        raise ScenarioError("horizon start after end")
    seed_day = start - timedelta(days=1)
    k = injected_k or 0
    if kind is None:
        kind = InstanceKind.WITH_TRAVELERS if k else InstanceKind.WITHOUT_TRAVELERS
    if kind is InstanceKind.WITH_TRAVELERS and not 1 <= k <= 10000:
        raise ScenarioError("with-travelers needs 1 <= k <= 10000")
    try:
        actual = select_window(observed, start, end)
    except WindowError as exc:
        raise ScenarioError(str(exc)) from None
    state = inject(forecast_state(fit, observed, seed_day), k, injection)
    traj = integrate(state, fit.params, (end - seed_day).days, dt=fit.dt, start_date=seed_day)
    score = nmse(traj.between(start, end), actual)
    return ScenarioOutcome(kind, k, traj, score)


def _argmin(ks: Sequence[int], values: Sequence[float]) -> int:
    # ties -> smallest k; NaN never wins
    best = None
    for idx, (k, v) in enumerate(zip(ks, values)):
        if math.isnan(v):
            continue
        if best is None or v < values[best] or (v == values[best] and k < ks[best]):
            best = idx
    if best is None:
        raise ScenarioError("no finite NMSE in sweep")
    return best


def _sweep_one(args) -> float:
    fit, observed, horizon, k, injection = args
    return run_instance(fit, observed, horizon, k, injection=injection).score.total


def sweep_travelers(
    fit: FitResult,
    observed: ObservedSeries,
    horizon: tuple[date, date],
    ks: Sequence[int] = range(1, 101),
    injection: Injection = Injection.NEWCOMERS,
    workers: int = 1,
) -> SweepResult:
    """NMSE of the with-travelers instance for every ``k``; results ordered by ``k``."""
    ks = tuple(int(k) for k in ks)
    if not ks:
        raise ScenarioError("empty sweep range")
    jobs = [(fit, observed, horizon, k, injection) for k in ks]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            values = tuple(pool.map(_sweep_one, jobs))
    else:
        values = tuple(_sweep_one(j) for j in jobs)
    best = _argmin(ks, values)
    return SweepResult(ks, values, tuple(moving_average(values)), ks[best], values[best])


def moving_average(values: Sequence[float], window: int = 5) -> list[float]:
    """Centered moving mean; near the ends it averages whatever neighbors exist."""
    if window < 1 or window % 2 == 0:
        raise ScenarioError("window must be a positive odd integer")
    values = list(values)
    half = window // 2
    n = len(values)
    return [sum(values[max(0, i - half) : min(n, i + half + 1)]) / (min(n, i + half + 1) - max(0, i - half)) for i in range(n)]


def linear_project(series: ObservedSeries, anchor: date, target: date) -> float:
    """Least-squares straight line through total cases up to ``anchor``, read at ``target``."""
    try:
        history = select_window(series, series.start, anchor)
    except WindowError as exc:
        raise ScenarioError(str(exc)) from None
    if len(history) < 2:
        raise ScenarioError("linear projection needs at least two days")
    x = np.arange(len(history), dtype=np.float64)
    slope, intercept = np.polyfit(x, history.total, 1)
    return max(0.0, float(intercept + slope * (target - series.start).days))


def trajectories_csv(outcomes: Sequence[ScenarioOutcome]) -> str:
    """Tidy ``instance,k,date,S,E,I,Q,R,D,P`` table."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["instance", "k", "date", *(c.upper() for c in COMPARTMENTS)])
    for o in outcomes:
        for day, row in zip(o.trajectory.dates, o.trajectory.values):
            w.writerow([o.kind.value, o.k, day.isoformat(), *(repr(float(v)) for v in row)])
    return buf.getvalue()


def dumps(obj) -> str:
    """Stable JSON text for result files."""
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"
