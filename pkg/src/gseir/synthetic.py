"""Model-generated regional series for tests, demos and dry runs."""
from __future__ import annotations

from datetime import date, timedelta
from typing import Mapping

from .data import DailyRecord, ObservedSeries
from .fitting import initial_state
from .model import D, Q, R, CompartmentState, ModelParams, integrate


def _record(day: date, row, rounded: bool = True) -> DailyRecord:
    q, r, d = (int(round(v)) if rounded else float(v) for v in (row[Q], row[R], row[D]))
    return DailyRecord(day, q + r + d, q, r, d)


def generate_series(
    region: str,
    population: int,
    params: ModelParams,
    first: DailyRecord,
    e0: float,
    i0: float,
    end: date,
    injections: Mapping[date, int] | None = None,
    epoch: date | None = None,
    dt: float = 0.1,
    rounded: bool = True,
) -> ObservedSeries:
    """Daily observations from the model, rounded to whole persons.

    ``rounded=False`` keeps exact float counts (noise-free data; such series
    cannot be written to the integer CSV formats).

    ``injections`` maps a day to extra active cases added on that day. The run
    is re-seeded from the rounded observations on each injection day, which
    mirrors how forecasts are seeded, so a sweep can recover ``k`` exactly.
    """
    epoch = first.date if epoch is None else epoch
    injections = dict(injections or {})
    state = initial_state(first, population, e0, i0, t=float((first.date - epoch).days))
    records = [first]
    day = first.date
    stops = sorted(d for d in injections if first.date < d <= end) + [end]
    for stop in stops:
        traj = integrate(state, params, (stop - day).days, dt=dt)
        records.extend(_record(day + timedelta(days=j), traj.values[j], rounded) for j in range(1, len(traj)))
        last = traj[len(traj) - 1]
        rec = records[-1]
        k = injections.get(stop, 0)
        s = last.n - (last.e + last.i + last.p + rec.active + rec.recovered + rec.deaths)
        state = CompartmentState(s, last.e, last.i, rec.active + k, rec.recovered, rec.deaths, last.p, t=last.t)
        day = stop
    return ObservedSeries(region, population, tuple(records))


#: plausible-looking parameters for three toy regions; not estimates of anything
DEMO_REGIONS = {
    "Campania": (5801692, ModelParams(0.04, 0.9, 0.25, 0.25, 0.03, 0.05, 0.012, 0.01), 20, 10, 35),
    "Lazio": (5879082, ModelParams(0.045, 0.85, 0.25, 0.25, 0.05, 0.05, 0.008, 0.01), 20, 10, 30),
    "Lombardia": (10060574, ModelParams(0.03, 0.8, 0.3, 0.3, 0.04, 0.05, 0.03, 0.01), 600, 300, 0),
}


def demo_snapshot(start: date = date(2020, 2, 24), end: date = date(2020, 4, 5), seed_day: date = date(2020, 3, 23)):
    """Three synthetic regions shaped like the upstream snapshot period."""
    out = []
    for region, (pop, params, e0, i0, k) in DEMO_REGIONS.items():
        first = DailyRecord(start, 2, 2, 0, 0)
        inj = {seed_day: k} if k else {}
        out.append(generate_series(region, pop, params, first, e0, i0, end, inj, epoch=start))
    return out
