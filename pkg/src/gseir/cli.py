"""``gseir`` command line: fetch data, fit, simulate, sweep travelers, report.

Every command writes into ``--out`` (one sub-directory per region) and echoes
the resolved configuration to ``config.json``. Identical inputs give
byte-identical files.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import urllib.request
from dataclasses import asdict, dataclass, field, replace
from datetime import date
from pathlib import Path
from typing import Sequence

from . import svg
from .data import (
    SNAPSHOT_NAME,
    ObservedSeries,
    default_data_dir,
    load_population_config,
    parse_regional_csv,
    select_window,
    to_normalized_csv,
)
from .fitting import Bounds, FitResult, FitSettings, fit, fitted_trajectory
from .scenario import (
    Injection,
    InstanceKind,
    ScenarioOutcome,
    SweepResult,
    dumps,
    run_instance,
    sweep_travelers,
    trajectories_csv,
)

log = logging.getLogger("gseir")

UPSTREAM_URL = "https://raw.githubusercontent.com/pcm-dpc/COVID-19/{ref}/dati-regioni/" + SNAPSHOT_NAME
DEFAULT_REGIONS = ("Campania", "Lazio", "Lombardia")
COLORS = {"without-travelers": "#1f4fbf", "with-travelers": "#c0202a", "ground-truth": "black"}
STYLES = {"without-travelers": "dashed", "with-travelers": "dotted", "ground-truth": "solid"}


class ConfigError(ValueError):
    pass


class MissingArtifact(ConfigError):
    pass


def _window(text: str) -> tuple[date, date]:
    try:
        a, b = text.split(":")
        return date.fromisoformat(a), date.fromisoformat(b)
    except ValueError:
        raise ConfigError(f"window must be START:END in ISO dates, got {text!r}") from None


def _int_range(text: str) -> tuple[int, int]:
    try:
        a, b = text.split(":")
        return int(a), int(b)
    except ValueError:
        raise ConfigError(f"range must be A:B integers, got {text!r}") from None


@dataclass(frozen=True)
class RunConfig:
    regions: tuple[str, ...] = DEFAULT_REGIONS
    data: str = ""
    population: str | None = None
    window: tuple[date, date] = (date(2020, 3, 16), date(2020, 3, 23))
    eval_window: tuple[date, date] = (date(2020, 3, 24), date(2020, 4, 5))
    sweep: tuple[int, int] = (1, 100)
    out: str = "out"
    seed: int = 0
    epoch: date | None = None
    injection: str = Injection.NEWCOMERS.value
    optimizer: dict = field(default_factory=dict)
    bounds: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.window[0] <= self.window[1]:
            raise ConfigError("fit window start must not be after its end")
        if not self.eval_window[0] <= self.eval_window[1]:
            raise ConfigError("evaluation window start must not be after its end")
        if not self.window[1] < self.eval_window[0]:
            raise ConfigError("fit window must end before the evaluation window starts")
        lo, hi = self.sweep
        if lo > hi or lo < 0 or hi > 10000:
            raise ConfigError("sweep range must be non-empty and within [0, 10000]")
        Injection(self.injection)
        if not self.regions:
            raise ConfigError("no regions selected")

    @property
    def data_path(self) -> Path:
        return Path(self.data) if self.data else default_data_dir() / SNAPSHOT_NAME

    @property
    def ground_window(self) -> tuple[date, date]:
        return self.window[0], self.eval_window[1]

    def settings(self) -> FitSettings:
        try:
            return replace(FitSettings.from_dict(self.optimizer), seed=self.seed)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["regions"] = list(self.regions)
        d["data"] = str(self.data_path)
        d["window"] = f"{self.window[0]}:{self.window[1]}"
        d["eval_window"] = f"{self.eval_window[0]}:{self.eval_window[1]}"
        d["sweep"] = f"{self.sweep[0]}:{self.sweep[1]}"
        d["epoch"] = self.epoch.isoformat() if self.epoch else None
        d["optimizer"] = asdict(self.settings())
        # the output directory is where this file lives; keep trees relocatable
        del d["out"]
        return d


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Defaults, then the ``--config`` JSON file, then command-line flags."""
    values: dict = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
        unknown = set(raw) - set(RunConfig.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
        values.update(raw)
    flags = {
        "regions": args.region,
        "data": args.data,
        "population": args.population,
        "window": args.window,
        "eval_window": args.eval_window,
        "sweep": args.sweep_range,
        "out": args.out,
        "seed": args.seed,
        "epoch": args.epoch,
        "injection": args.injection,
    }
    values.update({k: v for k, v in flags.items() if v is not None})
    if getattr(args, "workers", None) is not None:
        values["optimizer"] = {**values.get("optimizer", {}), "workers": args.workers}
    if isinstance(values.get("regions"), str):
        values["regions"] = [values["regions"]]
    if "regions" in values:
        values["regions"] = tuple(r.strip() for item in values["regions"] for r in item.split(",") if r.strip())
    for key in ("window", "eval_window"):
        if isinstance(values.get(key), str):
            values[key] = _window(values[key])
    if isinstance(values.get("sweep"), str):
        values["sweep"] = _int_range(values["sweep"])
    if isinstance(values.get("epoch"), str):
        values["epoch"] = date.fromisoformat(values["epoch"])
    return RunConfig(**values)


class Session:
    """Loaded data plus cached fits for one command invocation."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self.population = load_population_config(cfg.population)
        unknown = [r for r in cfg.regions if r not in self.population]
        if unknown:
            raise ConfigError(f"unknown region(s) {', '.join(unknown)}; available: {', '.join(sorted(self.population))}")
        path = cfg.data_path
        if not path.exists():
            raise ConfigError(f"data snapshot {path} not found (run `gseir fetch` or set $GSEIR_DATA_DIR)")
        series = parse_regional_csv(path.read_bytes(), self.population, cfg.regions)
        self.series: dict[str, ObservedSeries] = {s.region: s for s in series}
        for region in cfg.regions:
            s = self.series[region]
            for a, b in (cfg.window, cfg.eval_window):
                select_window(s, a, b)

    def region_dir(self, region: str) -> Path:
        d = self.out / region
        d.mkdir(parents=True, exist_ok=True)
        return d

    def epoch(self, region: str) -> date:
        return self.cfg.epoch or self.series[region].start

    def bounds(self, region: str) -> Bounds:
        return Bounds.from_dict(self.cfg.bounds, self.series[region].population)

    def _fit(self, region: str, window: tuple[date, date]) -> FitResult:
        s = select_window(self.series[region], *window)
        return fit(s, self.bounds(region), self.cfg.settings(), epoch=self.epoch(region))

    def fit_result(self, region: str, which: str, compute: bool = True) -> FitResult:
        path = self.out / region / f"fit_{which}.json"
        window = self.cfg.window if which == "tw" else self.cfg.ground_window
        if path.exists():
            res = FitResult.from_dict(json.loads(path.read_text(encoding="utf-8")))
            if (res.start, res.end) == window:
                return res
            log.info("%s does not match window %s..%s; refitting", path, *window)
        if not compute:
            raise MissingArtifact(f"missing artifact {path}")
        res = self._fit(region, window)
        self.write(path, dumps(res.to_dict()))
        return res

    def write(self, path: Path, text: str) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")

    def echo_config(self) -> None:
        self.write(self.out / "config.json", dumps(self.cfg.to_dict()))

    @property
    def injection(self) -> Injection:
        return Injection(self.cfg.injection)


def _summary(res: FitResult, label: str) -> str:
    lines = [
        f"{res.region} {label}: window {res.start}..{res.end}, epoch {res.epoch}",
        f"  loss {res.loss:.6g}  iterations {res.iterations}  converged {res.converged}",
        f"  E0 {res.e0:.1f}  I0 {res.i0:.1f}",
    ]
    lines += [f"  {k:8s} {v:.6g}" for k, v in res.params.as_dict().items()]
    return "\n".join(lines) + "\n"


def cmd_fit(sess: Session) -> None:
    for region in sess.cfg.regions:
        tw = sess.fit_result(region, "tw")
        ground = sess.fit_result(region, "ground")
        text = _summary(tw, "window fit") + _summary(ground, "ground-truth fit")
        sess.write(sess.region_dir(region) / "fit_summary.txt", text)
        sess.write(sess.region_dir(region) / "observed.csv", to_normalized_csv([sess.series[region]]))
        print(text, end="")


def _outcomes(sess: Session, region: str, ks: Sequence[int] = ()) -> list[ScenarioOutcome]:
    s = sess.series[region]
    horizon = sess.cfg.eval_window
    out = [
        run_instance(sess.fit_result(region, "tw"), s, horizon, injection=sess.injection),
        run_instance(sess.fit_result(region, "ground"), s, horizon, kind=InstanceKind.GROUND_TRUTH),
    ]
    out += [run_instance(sess.fit_result(region, "tw"), s, horizon, k, injection=sess.injection) for k in ks if k]
    return out


def cmd_simulate(sess: Session, ks: Sequence[int]) -> None:
    for region in sess.cfg.regions:
        outcomes = _outcomes(sess, region, ks)
        d = sess.region_dir(region)
        sess.write(d / "trajectories.csv", trajectories_csv(outcomes))
        sess.write(d / "outcomes.json", dumps([{k: v for k, v in o.to_dict().items() if k != "trajectory"} for o in outcomes]))
        for o in outcomes:
            print(f"{region:10s} {o.label:22s} NMSE {o.score.total:.4f}")


def _sweep_svg(region: str, sweep: SweepResult) -> str:
    return svg.chart(
        [
            svg.Layer(sweep.ks, sweep.nmse, "circles", "black", "NMSE"),
            svg.Layer(sweep.ks, sweep.smoothed, "solid", "black", "5-point moving average"),
        ],
        title=f"{region}: with-travelers reconstruction error",
        xlabel="novel active cases",
        ylabel="NMSE",
    )


def cmd_sweep(sess: Session) -> None:
    lo, hi = sess.cfg.sweep
    for region in sess.cfg.regions:
        sweep = sweep_travelers(
            sess.fit_result(region, "tw"),
            sess.series[region],
            sess.cfg.eval_window,
            range(lo, hi + 1),
            injection=sess.injection,
            workers=sess.cfg.settings().workers,
        )
        d = sess.region_dir(region)
        sess.write(d / "sweep.csv", sweep.to_csv())
        sess.write(d / "sweep.json", dumps({"region": region, "best_k": sweep.best_k, "best_nmse": sweep.best_nmse}))
        sess.write(d / "panel_D_sweep.svg", _sweep_svg(region, sweep))
        print(f"{region}: best_k={sweep.best_k} best_nmse={sweep.best_nmse:.4f}")


def _panel(region, title, column, series, fitted, outcomes, boundary_x, labels) -> str:
    start = series.start
    x_obs = [(d - start).days for d in series.dates]
    layers = [svg.Layer(x_obs, list(column(series)), "circles", "black", "data")]
    for name, traj in fitted + [(o.kind.value, o.trajectory) for o in outcomes]:
        x = [(d - start).days for d in traj.dates]
        layers.append(svg.Layer(x, list(_model_column(traj, title)), STYLES[name], COLORS[name], name))
    return svg.chart(layers, title=f"{region}: {title}", xlabel="date", ylabel="persons", vline=boundary_x, xtick_labels=labels)


def _model_column(traj, title):
    if title == "total cases":
        return traj.total_cases
    return traj.column("q" if title == "active cases" else "d")


def cmd_report(sess: Session) -> None:
    missing = [
        sess.out / r / name
        for r in sess.cfg.regions
        for name in ("fit_tw.json", "fit_ground.json", "sweep.csv")
        if not (sess.out / r / name).exists()
    ]
    if missing:
        raise MissingArtifact("missing artifact(s): " + ", ".join(str(p) for p in missing))
    rows = []
    for region in sess.cfg.regions:
        s = sess.series[region]
        d = sess.region_dir(region)
        tw = sess.fit_result(region, "tw", compute=False)
        ground = sess.fit_result(region, "ground", compute=False)
        sweep = SweepResult.from_csv((d / "sweep.csv").read_text(encoding="utf-8"))
        without = run_instance(tw, s, sess.cfg.eval_window, injection=sess.injection)
        gt = run_instance(ground, s, sess.cfg.eval_window, kind=InstanceKind.GROUND_TRUTH)
        improved = sweep.best_nmse < without.score.total and sweep.best_k > 0
        outcomes = [without]
        if improved:
            outcomes.append(run_instance(tw, s, sess.cfg.eval_window, sweep.best_k, injection=sess.injection))
        view = select_window(s, s.start, sess.cfg.eval_window[1])
        labels = {float((day - view.start).days): day.strftime("%b %d") for day in view.dates[::7]}
        boundary = float((sess.cfg.window[1] - view.start).days)
        fitted = [("ground-truth", fitted_trajectory(ground, s))]
        for key, title, col in (
            ("A_total", "total cases", lambda x: x.total),
            ("B_active", "active cases", lambda x: x.active),
            ("C_deaths", "deaths", lambda x: x.deaths),
        ):
            sess.write(d / f"panel_{key}.svg", _panel(region, title, col, view, fitted, outcomes, boundary, labels))
        rows.append(
            [
                region,
                repr(without.score.total),
                repr(sweep.best_nmse) if improved else "----",
                str(sweep.best_k) if improved else "----",
                repr(gt.score.total),
            ]
        )
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["region", "without-travelers", "with-travelers", "with-travelers_k", "ground-truth"])
    w.writerows(rows)
    sess.write(sess.out / "nmse_table.csv", buf.getvalue())
    sess.write(sess.out / "model.svg", svg.model_diagram())
    print(buf.getvalue(), end="")


def cmd_fetch(dest: Path, ref: str, url: str | None) -> None:
    url = url or UPSTREAM_URL.format(ref=ref)
    with urllib.request.urlopen(url, timeout=60) as resp:
        payload = resp.read()
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_bytes(payload)
    meta = {"source": url, "ref": ref, "sha256": hashlib.sha256(payload).hexdigest(), "bytes": len(payload)}
    dest.with_suffix(".json").write_text(dumps(meta), encoding="utf-8")
    print(f"wrote {dest} ({len(payload)} bytes, sha256 {meta['sha256'][:12]})")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--region", action="append", help="region name (repeatable or comma separated)")
    common.add_argument("--out", help="output directory (default: out)")
    common.add_argument("--seed", type=int, help="seed for the optimizer start points")
    common.add_argument("--data", help=f"regional CSV snapshot (default: $GSEIR_DATA_DIR/{SNAPSHOT_NAME})")
    common.add_argument("--population", help="population table (default: bundled)")
    common.add_argument("--window", help="fit window START:END")
    common.add_argument("--eval-window", help="evaluation window START:END")
    common.add_argument("--sweep-range", help="injected-case range A:B (inclusive)")
    common.add_argument("--epoch", help="model clock origin (default: first day of data)")
    common.add_argument("--injection", choices=[m.value for m in Injection])
    common.add_argument("--workers", type=int, help="worker processes for restarts and sweeps")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="gseir", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("fetch", parents=[common], help="download the upstream regional CSV")
    p.add_argument("--ref", default="master", help="git ref of the upstream repository")
    p.add_argument("--url", help="explicit download URL")
    sub.add_parser("fit", parents=[common], help="fit the window and ground-truth models")
    p = sub.add_parser("simulate", parents=[common], help="forecast the evaluation window")
    p.add_argument("--k", type=int, action="append", default=[], help="also run with k injected cases")
    sub.add_parser("sweep", parents=[common], help="sweep injected active cases")
    sub.add_parser("report", parents=[common], help="figures and NMSE table from fit + sweep artifacts")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "fetch":
            cmd_fetch(cfg.data_path, args.ref, args.url)
            return 0
        sess = Session(cfg)
        sess.echo_config()
        if args.command == "fit":
            cmd_fit(sess)
        elif args.command == "simulate":
            cmd_simulate(sess, args.k)
        elif args.command == "sweep":
            cmd_sweep(sess)
        elif args.command == "report":
            cmd_report(sess)
    except (ValueError, OSError) as exc:
        print(f"gseir: error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # invariant violations and bugs
        print(f"gseir: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
