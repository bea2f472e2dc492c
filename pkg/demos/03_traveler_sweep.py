"""
Counterfactual traveler injection
=================================

Fit a region on Mar 16..23, forecast Mar 24..Apr 5, and ask how many extra
active cases added on Mar 23 best explain what followed.

Uses the upstream snapshot when ``$GSEIR_DATA_DIR`` (or ``./data``) holds it,
otherwise the bundled synthetic regions, where Campania received 35 cases.
"""
import os
from datetime import date
from pathlib import Path

from gseir import fit, linear_project, run_instance, select_window, sweep_travelers
from gseir.data import SNAPSHOT_NAME, DATA_DIR_ENV, load_population_config, parse_regional_csv
from gseir.synthetic import demo_snapshot

path = Path(os.environ.get(DATA_DIR_ENV, "data")) / SNAPSHOT_NAME
if path.exists():
    regions = {s.region: s for s in parse_regional_csv(path.read_bytes(), load_population_config())}
    print("using", path)
else:
    regions = {s.region: s for s in demo_snapshot()}
    print("no snapshot found; using synthetic regions")

window = (date(2020, 3, 16), date(2020, 3, 23))
horizon = (date(2020, 3, 24), date(2020, 4, 5))

campania = regions["Campania"]
straight = linear_project(campania, date(2020, 3, 8), horizon[1])
print(f"Campania on Apr 5: straight line says {straight:.0f}, data says {campania.on(horizon[1]).total}")

for name in ("Campania", "Lazio", "Lombardia"):
    series = regions[name]
    tw = fit(select_window(series, *window), epoch=series.start)
    without = run_instance(tw, series, horizon)
    sweep = sweep_travelers(tw, series, horizon, range(1, 101))
    print(f"{name:10s} without {without.score.total:8.4f}   best k={sweep.best_k:3d} NMSE {sweep.best_nmse:8.4f}")
