"""Regional case series from the Italian civil-protection dataset.

The upstream file (``dati-regioni/dpc-covid19-ita-regioni.csv``) has one row
per region per day. Columns are resolved by header name because the upstream
schema grew over time.
"""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

#: internal field -> upstream column
COLUMNS = {
    "date": "data",
    "region": "denominazione_regione",
    "active": "totale_positivi",
    "recovered": "dimessi_guariti",
    "deaths": "deceduti",
    "total": "totale_casi",
}
NORMALIZED_HEADER = ("date", "region", "total", "active", "recovered", "deaths")
SNAPSHOT_NAME = "dpc-covid19-ita-regioni.csv"
DATA_DIR_ENV = "GSEIR_DATA_DIR"


class ParseError(ValueError):
    """Unreadable or structurally invalid input table."""


class WindowError(ValueError):
    """Requested dates fall outside a series."""


class DataWarning(UserWarning):
    """Source data violates a consistency expectation (kept as-is)."""


class DailyRecord(NamedTuple):
    date: date
    total: int
    active: int
    recovered: int
    deaths: int


@dataclass(frozen=True)
class ObservedSeries:
    """Gap-free daily observations for one region."""

    region: str
    population: int
    records: tuple[DailyRecord, ...]

    def __post_init__(self):
        recs = self.records
        for a, b in zip(recs, recs[1:]):
            if b.date - a.date != timedelta(days=1):
                raise ParseError(f"{self.region}: dates must be consecutive days, got {a.date} then {b.date}")
        for rec in recs:
            if min(rec.total, rec.active, rec.recovered, rec.deaths) < 0:
                raise ParseError(f"{self.region} {rec.date}: negative count")
        if self.population <= 0:
            raise ParseError(f"{self.region}: population must be positive")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def start(self) -> date:
        return self.records[0].date

    @property
    def end(self) -> date:
        return self.records[-1].date

    @property
    def dates(self) -> list[date]:
        return [r.date for r in self.records]

    @property
    def total(self) -> np.ndarray:
        return np.array([r.total for r in self.records], dtype=np.float64)

    @property
    def active(self) -> np.ndarray:
        return np.array([r.active for r in self.records], dtype=np.float64)

    @property
    def recovered(self) -> np.ndarray:
        return np.array([r.recovered for r in self.records], dtype=np.float64)

    @property
    def deaths(self) -> np.ndarray:
        return np.array([r.deaths for r in self.records], dtype=np.float64)

    def on(self, day: date) -> DailyRecord:
        if not self.records or not self.start <= day <= self.end:
            raise WindowError(f"{day} not in {self.region} series ({self._range()})")
        return self.records[(day - self.start).days]

    def _range(self) -> str:
        if not self.records:
            return "empty"
        return f"available {self.start.isoformat()}..{self.end.isoformat()}"

    def consistency_issues(self) -> list[str]:
        """Human-readable list of identity and monotonicity violations."""
        issues = []
        for rec in self.records:
            if rec.total != rec.active + rec.recovered + rec.deaths:
                issues.append(
                    f"{self.region} {rec.date}: total {rec.total} != active+recovered+deaths "
                    f"{rec.active + rec.recovered + rec.deaths}"
                )
        for a, b in zip(self.records, self.records[1:]):
            if b.total < a.total:
                issues.append(f"{self.region} {b.date}: total cases decreased ({a.total} -> {b.total})")
            if b.deaths < a.deaths:
                issues.append(f"{self.region} {b.date}: deaths decreased ({a.deaths} -> {b.deaths})")
        return issues


def select_window(series: ObservedSeries, start: date, end: date) -> ObservedSeries:
    """Inclusive sub-series ``start..end``."""
    if start > end:
        raise WindowError(f"window start {start} is after end {end}")
    if not series.records or start < series.start or end > series.end:
        raise WindowError(f"window {start}..{end} outside {series.region} data ({series._range()})")
    a = (start - series.start).days
    b = (end - series.start).days
    return ObservedSeries(series.region, series.population, series.records[a : b + 1])


# --------------------------------------------------------------------------
# population table


def parse_population_config(text: str) -> dict[str, int]:
    """``Region = count`` lines; ``#`` starts a comment."""
    table = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ParseError(f"population config line {lineno}: expected 'Region = count'")
        try:
            table[key.strip()] = int(value.strip().replace("_", ""))
        except ValueError:
            raise ParseError(f"population config line {lineno}: {value.strip()!r} is not an integer") from None
    return table


def load_population_config(path: str | Path | None = None) -> dict[str, int]:
    """Read a population table; ``None`` loads the bundled default."""
    if path is None:
        text = resources.files("gseir").joinpath("resources/population.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_population_config(text)


# --------------------------------------------------------------------------
# CSV


def _parse_date(raw: str, lineno: int) -> date:
    try:
        return datetime.fromisoformat(raw.strip()).date()
    except ValueError:
        raise ParseError(f"row {lineno}: malformed date {raw!r}") from None


def _parse_count(raw: str, column: str, lineno: int) -> int:
    try:
        return int(raw.strip())
    except ValueError:
        raise ParseError(f"row {lineno}: column {column!r} has non-integer value {raw!r}") from None


def _group(rows: Iterable[tuple[str, DailyRecord]], population: Mapping[str, int]) -> list[ObservedSeries]:
    by_region: dict[str, list[DailyRecord]] = {}
    for region, rec in rows:
        by_region.setdefault(region, []).append(rec)
    out = []
    for region, recs in by_region.items():
        if region not in population:
            raise ParseError(
                f"region {region!r} missing from population config (known: {', '.join(sorted(population))})"
            )
        recs.sort(key=lambda r: r.date)
        for a, b in zip(recs, recs[1:]):
            if a.date == b.date:
                raise ParseError(f"{region}: duplicate record for {a.date}")
        series = ObservedSeries(region, population[region], tuple(recs))
        for issue in series.consistency_issues():
            warnings.warn(issue, DataWarning, stacklevel=3)
        out.append(series)
    return out


def parse_regional_csv(
    raw: bytes | str,
    population: Mapping[str, int],
    regions: Sequence[str] | None = None,
) -> list[ObservedSeries]:
    """Parse the civil-protection regional CSV into one series per region.

    Only rows for ``regions`` are kept when given; every kept region must be in
    ``population``. Output order follows first appearance in the file.
    """
    text = raw.decode("utf-8-sig") if isinstance(raw, bytes) else raw
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ParseError("empty input: no header row") from None
    index = {}
    for key, col in COLUMNS.items():
        if col not in header:
            raise ParseError(f"missing required column {col!r}")
        index[key] = header.index(col)
    wanted = set(regions) if regions is not None else None

    def rows():
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) < len(header):
                raise ParseError(f"row {lineno}: expected {len(header)} fields, got {len(row)}")
            region = row[index["region"]].strip()
            if wanted is not None and region not in wanted:
                continue
            yield region, DailyRecord(
                _parse_date(row[index["date"]], lineno),
                *(_parse_count(row[index[k]], COLUMNS[k], lineno) for k in ("total", "active", "recovered", "deaths")),
            )

    series = _group(rows(), population)
    if wanted is not None:
        missing = wanted - {s.region for s in series}
        if missing:
            raise ParseError(f"region(s) not found in data: {', '.join(sorted(missing))}")
    return series


def write_regional_csv(series: Sequence[ObservedSeries]) -> str:
    """Emit rows in the upstream column layout (dates at 18:00 as upstream)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["data", "stato", *(COLUMNS[k] for k in ("region", "active", "recovered", "deaths", "total"))])
    days = sorted({r.date for s in series for r in s.records})
    for day in days:
        for s in series:
            if s.records and s.start <= day <= s.end:
                rec = s.on(day)
                w.writerow([f"{day.isoformat()}T18:00:00", "ITA", s.region, rec.active, rec.recovered, rec.deaths, rec.total])
    return buf.getvalue()


def to_normalized_csv(series: Sequence[ObservedSeries]) -> str:
    """Tidy ``date,region,total,active,recovered,deaths`` table."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(NORMALIZED_HEADER)
    for s in series:
        for rec in s.records:
            w.writerow([rec.date.isoformat(), s.region, rec.total, rec.active, rec.recovered, rec.deaths])
    return buf.getvalue()


def read_normalized_csv(text: str, population: Mapping[str, int]) -> list[ObservedSeries]:
    reader = csv.DictReader(io.StringIO(text))
    missing = set(NORMALIZED_HEADER) - set(reader.fieldnames or ())
    if missing:
        raise ParseError(f"missing required column {sorted(missing)[0]!r}")

    def rows():
        for lineno, row in enumerate(reader, 2):
            yield row["region"], DailyRecord(
                _parse_date(row["date"], lineno),
                *(_parse_count(row[k], k, lineno) for k in ("total", "active", "recovered", "deaths")),
            )

    return _group(rows(), population)


def default_data_dir() -> Path:
    import os

    return Path(os.environ.get(DATA_DIR_ENV, "data"))


def load_snapshot(
    path: str | Path | None = None,
    population: Mapping[str, int] | None = None,
    regions: Sequence[str] | None = None,
) -> dict[str, ObservedSeries]:
    """Load the vendored regional CSV keyed by region name."""
    path = Path(path) if path is not None else default_data_dir() / SNAPSHOT_NAME
    if population is None:
        population = load_population_config()
    if regions is None:
        regions = sorted(population)
    series = parse_regional_csv(path.read_bytes(), population, regions)
    return {s.region: s for s in series}
