import os
from datetime import date
from pathlib import Path

import pytest
from hypothesis import settings

from gseir.data import SNAPSHOT_NAME, DATA_DIR_ENV, DailyRecord, write_regional_csv
from gseir.fitting import FitResult
from gseir.model import ModelParams
from gseir.synthetic import demo_snapshot, generate_series

# first calls pay for numba compilation
settings.register_profile("default", deadline=None)
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]
EPOCH = date(2020, 2, 24)

_criteria: list[tuple[str, bool, str]] = []


def snapshot_path() -> Path:
    """Vendored upstream snapshot: $GSEIR_DATA_DIR first, then ./data in the repo."""
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env) / SNAPSHOT_NAME
    return ROOT / "data" / SNAPSHOT_NAME


@pytest.fixture(scope="session")
def demo_series():
    return {s.region: s for s in demo_snapshot()}


@pytest.fixture(scope="session")
def demo_csv(tmp_path_factory, demo_series):
    path = tmp_path_factory.mktemp("snap") / SNAPSHOT_NAME
    path.write_text(write_regional_csv(list(demo_series.values())))
    return path


@pytest.fixture(scope="session")
def injected_case():
    """Series with 25 cases injected on Mar 23 plus the fit that generated it.

    Returns ``(fit, observed, horizon)``. The fit carries the generating
    parameters, so only the injection is unknown to a sweep.
    """
    params = ModelParams(0.04, 0.9, 0.25, 0.25, 0.03, 0.05, 0.012, 0.01)
    first = DailyRecord(EPOCH, 2, 2, 0, 0)
    seed_day = date(2020, 3, 23)
    observed = generate_series("Campania", 5_801_692, params, first, 20, 10, date(2020, 4, 5), {seed_day: 25}, epoch=EPOCH)
    fit = FitResult("Campania", 5_801_692, params, 20.0, 10.0, EPOCH, seed_day, EPOCH, 0.0, 0, True)
    return fit, observed, (date(2020, 3, 24), date(2020, 4, 5))


@pytest.fixture
def criterion(request):
    """Record one acceptance line; pass/fail is taken from the test outcome."""
    name = request.node.get_closest_marker("criterion").args[0]
    detail: list[str] = []
    yield detail
    rep = getattr(request.node, "rep_call", None)
    ok = rep is not None and rep.passed
    _criteria.append((name, ok, "; ".join(detail)))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _criteria:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else ""))
