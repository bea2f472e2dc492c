"""
Fitting an 8-day window
=======================

Generate noise-free observations from known rates, then fit them back with
the multi-start simplex search. The cure and mortality curves come back
closely; the hidden-pool rates are only weakly constrained by 8 days of data.
"""
from datetime import date

from gseir import FitSettings, ModelParams, fit
from gseir.data import DailyRecord
from gseir.synthetic import generate_series

truth = ModelParams(0.04, 0.7, 0.2, 0.25, 0.08, 0.1, 0.01, 0.05)
first = DailyRecord(date(2020, 3, 16), total=300, active=250, recovered=30, deaths=20)
epoch = date(2020, 2, 24)

series = generate_series("Lazio", 5_879_082, truth, first, e0=900, i0=400, end=date(2020, 3, 23), epoch=epoch, rounded=False)
print("observed active:", series.active.round(1))

res = fit(series, settings=FitSettings(restarts=16, seed=0), epoch=epoch)
print(f"loss {res.loss:.2e} after {res.iterations} iterations")
for name, value in res.params.as_dict().items():
    print(f"  {name:8s} fitted {value:.4f}  true {getattr(truth, name):.4f}")
print(f"  E0 {res.e0:.0f} (true 900)  I0 {res.i0:.0f} (true 400)")

# the restart spread shows how rugged the loss surface is
print("restart losses:", ", ".join(f"{v:.1e}" for v in sorted(res.restart_losses)))
