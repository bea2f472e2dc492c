"""
Model dynamics
==============

Integrate the seven-compartment model for a toy region and look at how the
pools evolve. Writes ``dynamics.svg`` next to this script.
"""
from datetime import date
from pathlib import Path

import numpy as np

from gseir import CompartmentState, ModelParams, integrate
from gseir.svg import Layer, chart

# a region of one million with a handful of seeded exposures
start = CompartmentState(s=999_000, e=600, i=300, q=80, r=15, d=5, p=0)
params = ModelParams(alpha=0.03, beta=0.9, gamma=0.25, delta=0.25, lambda0=0.05, lambda1=0.05, kappa0=0.02, kappa1=0.02)

traj = integrate(start, params, days=120, start_date=date(2020, 2, 24))
print("population drift:", float(np.abs(traj.values.sum(axis=1) - start.n).max()))

peak = int(np.argmax(traj.column("q")))
print(f"active cases peak on {traj.dates[peak]} at {traj.column('q')[peak]:.0f}")
print(f"final: {traj.column('r')[-1]:.0f} recovered, {traj.column('d')[-1]:.0f} dead, {traj.column('p')[-1]:.0f} protected")

x = traj.times
layers = [
    Layer(x, traj.column("e"), "dashed", "#c0202a", "exposed"),
    Layer(x, traj.column("i"), "dotted", "#c0202a", "infectious"),
    Layer(x, traj.column("q"), "solid", "#1f4fbf", "active"),
    Layer(x, traj.column("d"), "solid", "black", "dead"),
]
out = Path(__file__).with_name("dynamics.svg")
out.write_text(chart(layers, title="toy region", xlabel="day", ylabel="persons"))
print("wrote", out)
