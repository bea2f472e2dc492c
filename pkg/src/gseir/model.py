"""Generalized SEIR dynamics with protected, quarantined and dead compartments.

State ordering everywhere is ``(S, E, I, Q, R, D, P)``. Rates are per day and
time is measured in days from a caller-chosen epoch, so the time-varying cure
and mortality curves keep their meaning when a run is restarted mid-series.

The heavy lifting lives in small numba kernels operating on plain float
arrays; the dataclass API on top is what the rest of the package uses.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields
from datetime import date, timedelta
from typing import Iterator, Sequence

import numpy as np
from numba import njit

log = logging.getLogger(__name__)

COMPARTMENTS = ("s", "e", "i", "q", "r", "d", "p")
S, E, I, Q, R, D, P = range(7)

#: Compartments below ``CLAMP_REPORT * N`` after clamping are not worth a warning.
CLAMP_REPORT = 1e-6
RATE_CAP = 10.0


class ModelError(ValueError):
    """Invalid state or parameters handed to the model."""


@dataclass(frozen=True)
class ModelParams:
    """Rate constants of the generalized SEIR system.

    ``lambda0``/``lambda1`` shape the cure rate ``lambda0 * (1 - exp(-lambda1 t))``;
    ``kappa0``/``kappa1`` shape the mortality ``kappa0 * exp(-kappa1 t)``.
    """

    alpha: float
    beta: float
    gamma: float
    delta: float
    lambda0: float
    lambda1: float
    kappa0: float
    kappa1: float

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v) or v < 0:
                raise ModelError(f"{f.name} must be finite and >= 0, got {v!r}")
        for name in ("alpha", "beta", "gamma", "delta", "lambda0", "kappa0"):
            if getattr(self, name) > RATE_CAP:
                raise ModelError(f"{name} exceeds sanity bound {RATE_CAP}/day")

    @classmethod
    def zero(cls) -> "ModelParams":
        return cls(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "ModelParams":
        return cls(*(float(v) for v in values))

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, f.name) for f in fields(self)], dtype=np.float64)

    def as_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class CompartmentState:
    """Populations of the seven compartments at time ``t`` (days since epoch)."""

    s: float
    e: float
    i: float
    q: float
    r: float
    d: float
    p: float
    t: float = 0.0

    def __post_init__(self):
        for name in COMPARTMENTS:
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ModelError(f"compartment {name.upper()} must be finite and >= 0, got {v!r}")
        if not self.n > 0:
            raise ModelError("total population must be > 0")

    @property
    def n(self) -> float:
        return self.s + self.e + self.i + self.q + self.r + self.d + self.p

    @property
    def total_cases(self) -> float:
        """Confirmed cases ever: ``Q + R + D``."""
        return self.q + self.r + self.d

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, c) for c in COMPARTMENTS], dtype=np.float64)

    @classmethod
    def from_array(cls, y: Sequence[float], t: float = 0.0) -> "CompartmentState":
        return cls(*(float(v) for v in y), t=float(t))


# --------------------------------------------------------------------------
# numba kernels


@njit(cache=False)
def _cure(lambda0, lambda1, t):
    return lambda0 * (1.0 - math.exp(-lambda1 * t))


@njit(cache=False)
def _mortality(kappa0, kappa1, t):
    return kappa0 * math.exp(-kappa1 * t)


@njit(cache=False)
def _rhs(y, p, t, out):
    s, e, i, q, r, d, pp = y[0], y[1], y[2], y[3], y[4], y[5], y[6]
    n = s + e + i + q + r + d + pp
    lam = _cure(p[4], p[5], t)
    kap = _mortality(p[6], p[7], t)
    infection = p[1] * s * i / n
    out[0] = -infection - p[0] * s
    out[1] = infection - p[2] * e
    out[2] = p[2] * e - p[3] * i
    out[3] = p[3] * i - lam * q - kap * q
    out[4] = lam * q
    out[5] = kap * q
    out[6] = p[0] * s


@njit(cache=False)
def _rk4_inplace(y, p, t, dt, k1, k2, k3, k4, tmp):
    """Advance ``y`` by one RK4 step; return mass added by clamping."""
    h2 = 0.5 * dt
    _rhs(y, p, t, k1)
    for j in range(7):
        tmp[j] = y[j] + h2 * k1[j]
    _rhs(tmp, p, t + h2, k2)
    for j in range(7):
        tmp[j] = y[j] + h2 * k2[j]
    _rhs(tmp, p, t + h2, k3)
    for j in range(7):
        tmp[j] = y[j] + dt * k3[j]
    _rhs(tmp, p, t + dt, k4)
    clamped = 0.0
    for j in range(7):
        y[j] = y[j] + dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
        if y[j] < 0.0:
            clamped -= y[j]
            y[j] = 0.0
    return clamped


@njit(cache=False)
def _integrate_daily(y0, p, t0, days, steps_per_day):
    """Daily snapshots ``(days + 1, 7)`` and total clamped mass."""
    out = np.empty((days + 1, 7))
    y = y0.copy()
    k1 = np.empty(7)
    k2 = np.empty(7)
    k3 = np.empty(7)
    k4 = np.empty(7)
    tmp = np.empty(7)
    dt = 1.0 / steps_per_day
    clamped = 0.0
    out[0, :] = y
    step = 0
    for day in range(1, days + 1):
        for _ in range(steps_per_day):
            # time from the step counter, not by accumulation, to avoid drift
            clamped += _rk4_inplace(y, p, t0 + step * dt, dt, k1, k2, k3, k4, tmp)
            step += 1
        out[day, :] = y
    return out, clamped


# --------------------------------------------------------------------------
# public API


def cure_rate(params: ModelParams, t: float) -> float:
    """Cure rate ``lambda(t) = lambda0 * (1 - exp(-lambda1 * t))``."""
    if t < 0:
        raise ModelError("t must be >= 0")
    return params.lambda0 * (1.0 - math.exp(-params.lambda1 * t))


def mortality_rate(params: ModelParams, t: float) -> float:
    """Mortality ``kappa(t) = kappa0 * exp(-kappa1 * t)``."""
    if t < 0:
        raise ModelError("t must be >= 0")
    return params.kappa0 * math.exp(-params.kappa1 * t)


def derivatives(state: CompartmentState, params: ModelParams, t: float | None = None) -> np.ndarray:
    """Time derivatives of ``(S, E, I, Q, R, D, P)`` in persons/day.

    ``t`` defaults to ``state.t``. Quarantined cases leave ``Q`` both by cure
    and by death, so the seven derivatives sum to zero.
    """
    if t is None:
        t = state.t
    s, e, i, q, r, d, p = (getattr(state, c) for c in COMPARTMENTS)
    n = state.n
    if n == 0:
        raise ModelError("total population is zero")
    lam = cure_rate(params, t)
    kap = mortality_rate(params, t)
    infection = params.beta * s * i / n
    return np.array(
        [
            -infection - params.alpha * s,
            infection - params.gamma * e,
            params.gamma * e - params.delta * i,
            params.delta * i - lam * q - kap * q,
            lam * q,
            kap * q,
            params.alpha * s,
        ]
    )


def _steps_per_day(dt: float) -> int:
    if not 0 < dt <= 1:
        raise ModelError(f"dt must be in (0, 1], got {dt}")
    steps = round(1.0 / dt)
    if abs(steps * dt - 1.0) > 1e-12:
        raise ModelError(f"dt={dt} does not divide one day evenly")
    return steps


def step_rk4(state: CompartmentState, params: ModelParams, dt: float) -> CompartmentState:
    """One classical Runge-Kutta step; negative undershoot is clamped to zero."""
    if not 0 < dt <= 1:
        raise ModelError(f"dt must be in (0, 1], got {dt}")
    y = state.as_array()
    scratch = [np.empty(7) for _ in range(5)]
    clamped = _rk4_inplace(y, params.as_array(), float(state.t), float(dt), *scratch)
    if clamped > 0:
        log.debug("clamped %.3g persons of negative undershoot at t=%.3f", clamped, state.t)
    return CompartmentState.from_array(y, t=state.t + dt)


@dataclass(frozen=True)
class Trajectory:
    """Daily snapshots of a simulation.

    ``values`` has shape ``(len, 7)`` in compartment order; ``times`` holds the
    model clock for each row. ``start_date`` labels row 0 when known.
    """

    values: np.ndarray
    times: np.ndarray
    population: float
    start_date: date | None = None
    clamped_mass: float = 0.0
    _dates: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != 7:
            raise ModelError("trajectory values must have shape (n, 7)")
        if self.start_date is None:
            dates: tuple = ()
        else:
            dates = tuple(self.start_date + timedelta(days=k) for k in range(len(self.values)))
        object.__setattr__(self, "_dates", dates)

    def __len__(self) -> int:
        return len(self.values)

    def __iter__(self) -> Iterator[CompartmentState]:
        for k in range(len(self)):
            yield self[k]

    def __getitem__(self, k: int) -> CompartmentState:
        return CompartmentState.from_array(self.values[k], t=self.times[k])

    @property
    def dates(self) -> tuple[date, ...]:
        if self.start_date is None:
            raise ModelError("trajectory has no calendar dates")
        return self._dates

    def column(self, name: str) -> np.ndarray:
        return self.values[:, COMPARTMENTS.index(name.lower())]

    @property
    def total_cases(self) -> np.ndarray:
        return self.values[:, Q] + self.values[:, R] + self.values[:, D]

    def index_of(self, day: date) -> int:
        k = (day - self.dates[0]).days
        if not 0 <= k < len(self):
            raise ModelError(f"{day} outside trajectory {self.dates[0]}..{self.dates[-1]}")
        return k

    def between(self, start: date, end: date) -> "Trajectory":
        """Inclusive calendar sub-range."""
        a, b = self.index_of(start), self.index_of(end)
        return Trajectory(
            self.values[a : b + 1].copy(),
            self.times[a : b + 1].copy(),
            self.population,
            start_date=start,
            clamped_mass=self.clamped_mass,
        )


def integrate(
    initial: CompartmentState,
    params: ModelParams,
    days: int,
    dt: float = 0.1,
    start_date: date | None = None,
) -> Trajectory:
    """Integrate for ``days`` days with fixed-step RK4 and record every day.

    Row 0 is ``initial``. A warning is logged when the mass added by clamping
    exceeds ``1e-6 * N``; the amount is kept in ``Trajectory.clamped_mass``.
    """
    if days < 0:
        raise ModelError("days must be >= 0")
    steps = _steps_per_day(dt)
    values, clamped = _integrate_daily(initial.as_array(), params.as_array(), float(initial.t), int(days), steps)
    n = initial.n
    if clamped > CLAMP_REPORT * n:
        log.warning("clamped %.3g persons (%.2e N) of negative undershoot", clamped, clamped / n)
    times = initial.t + np.arange(days + 1, dtype=np.float64)
    return Trajectory(values, times, n, start_date=start_date, clamped_mass=float(clamped))


def simulate_array(y0: np.ndarray, p: np.ndarray, t0: float, days: int, dt: float = 0.1) -> np.ndarray:
    """Array-level fast path used by the fitter: returns ``(days + 1, 7)``."""
    values, _ = _integrate_daily(y0, p, float(t0), int(days), _steps_per_day(dt))
    return values
