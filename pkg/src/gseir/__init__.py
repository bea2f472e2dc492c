"""Generalized SEIR modelling of regional COVID-19 data with traveler counterfactuals."""
from .data import DailyRecord, ObservedSeries, load_population_config, load_snapshot, parse_regional_csv, select_window
from .fitting import Bounds, FitResult, FitSettings, fit, initial_state, loss
from .model import CompartmentState, ModelParams, Trajectory, cure_rate, derivatives, integrate, mortality_rate, step_rk4
from .scenario import (
    InstanceKind,
    NMSEScore,
    ScenarioOutcome,
    SweepResult,
    linear_project,
    moving_average,
    nmse,
    run_instance,
    sweep_travelers,
)

__version__ = "0.1.0"
