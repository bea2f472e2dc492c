import csv
import json
import xml.etree.ElementTree as ET

import pytest

from gseir import cli
from gseir.fitting import FitResult
from gseir.scenario import SweepResult

SVG = "{http://www.w3.org/2000/svg}"
QUICK = {"optimizer": {"restarts": 2, "max_iter": 200, "polish": 0}}


@pytest.fixture(scope="module")
def config_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "quick.json"
    path.write_text(json.dumps(QUICK))
    return path


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory, demo_csv, config_file):
    out = tmp_path_factory.mktemp("run") / "nested" / "out"
    base = ["--config", config_file, "--data", demo_csv, "--out", out]
    assert run("fit", *base) == 0
    assert run("sweep", *base) == 0
    assert run("report", *base) == 0
    assert run("simulate", *base, "--k", 5, "--region", "Lazio") == 0
    return out


class TestConfig:
    def parse(self, *argv):
        return cli.resolve_config(cli.build_parser().parse_args(["fit", *map(str, argv)]))

    def test_defaults(self):
        cfg = self.parse()
        assert cfg.regions == ("Campania", "Lazio", "Lombardia") and cfg.sweep == (1, 100)
        assert str(cfg.window[0]) == "2020-03-16" and str(cfg.eval_window[1]) == "2020-04-05"

    def test_flags_override_file(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"seed": 4, "regions": ["Lazio"], "sweep": "1:10"}))
        cfg = self.parse("--config", p, "--seed", 9)
        assert cfg.seed == 9 and cfg.regions == ("Lazio",) and cfg.sweep == (1, 10)

    def test_region_lists(self):
        assert self.parse("--region", "Lazio,Campania", "--region", "Lombardia").regions == ("Lazio", "Campania", "Lombardia")

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"sead": 1}')
        with pytest.raises(cli.ConfigError, match="sead"):
            self.parse("--config", p)

    @pytest.mark.parametrize(
        "flags",
        [
            ("--window", "2020-03-16:2020-03-25"),  # overlaps the evaluation window
            ("--window", "16/03/2020:2020-03-23"),
            ("--sweep-range", "1:20000"),
            ("--sweep-range", "9:3"),
        ],
    )
    def test_invalid(self, flags):
        with pytest.raises(cli.ConfigError):
            self.parse(*flags)


class TestCommands:
    def test_fit_outputs(self, pipeline):
        for region in ("Campania", "Lazio", "Lombardia"):
            d = pipeline / region
            res = FitResult.from_dict(json.loads((d / "fit_tw.json").read_text()))
            assert (str(res.start), str(res.end)) == ("2020-03-16", "2020-03-23")
            assert len(res.restart_losses) == 2
            ground = json.loads((d / "fit_ground.json").read_text())
            assert ground["window"] == ["2020-03-16", "2020-04-05"]
            assert "loss" in (d / "fit_summary.txt").read_text()
            assert (d / "observed.csv").read_text().startswith("date,region,total,active,recovered,deaths\n")

    def test_config_echo(self, pipeline):
        cfg = json.loads((pipeline / "config.json").read_text())
        assert cfg["optimizer"]["restarts"] == 2 and cfg["window"] == "2020-03-16:2020-03-23"
        assert "out" not in cfg

    def test_sweep_files(self, pipeline):
        d = pipeline / "Campania"
        res = SweepResult.from_csv((d / "sweep.csv").read_text())
        assert res.ks == tuple(range(1, 101))
        assert json.loads((d / "sweep.json").read_text())["best_k"] == res.best_k

    def test_sweep_svg(self, pipeline):
        root = ET.parse(pipeline / "Lazio" / "panel_D_sweep.svg").getroot()
        assert root.tag == SVG + "svg"
        points = root.find(f".//{SVG}g[@class='points']")
        assert len(points.findall(f"{SVG}circle")) == 100
        assert len(root.findall(f".//{SVG}polyline")) == 1

    def test_panels_parse(self, pipeline):
        for name in ("panel_A_total", "panel_B_active", "panel_C_deaths"):
            root = ET.parse(pipeline / "Campania" / f"{name}.svg").getroot()
            assert root.findall(f".//{SVG}line[@class='boundary']")
            labels = {p.get("data-label") for p in root.iter(f"{SVG}polyline")}
            assert {"ground-truth", "without-travelers"} <= labels
        ET.parse(pipeline / "model.svg")

    def test_table(self, pipeline):
        rows = list(csv.DictReader((pipeline / "nmse_table.csv").open()))
        assert [r["region"] for r in rows] == ["Campania", "Lazio", "Lombardia"]
        for r in rows:
            assert float(r["without-travelers"]) >= 0 and float(r["ground-truth"]) >= 0
            if r["with-travelers"] != "----":
                assert float(r["with-travelers"]) < float(r["without-travelers"])
                assert 1 <= int(r["with-travelers_k"]) <= 100

    def test_simulate(self, pipeline):
        d = pipeline / "Lazio"
        outs = json.loads((d / "outcomes.json").read_text())
        assert [o["instance"] for o in outs] == ["without-travelers", "ground-truth", "with-travelers"]
        assert outs[2]["k"] == 5
        lines = (d / "trajectories.csv").read_text().splitlines()
        assert len(lines) == 1 + 3 * 14

    def test_sweep_single_k(self, tmp_path, demo_csv, config_file, capsys):
        assert run("sweep", "--config", config_file, "--data", demo_csv, "--out", tmp_path, "--region", "Lazio", "--sweep-range", "5:5") == 0
        assert json.loads((tmp_path / "Lazio" / "sweep.json").read_text())["best_k"] == 5
        assert "best_k=5" in capsys.readouterr().out

    def test_cached_fit_reused(self, pipeline, demo_csv, config_file):
        path = pipeline / "Lombardia" / "fit_tw.json"
        before = path.read_text()
        assert run("fit", "--config", config_file, "--data", demo_csv, "--out", pipeline, "--region", "Lombardia") == 0
        assert path.read_text() == before


class TestErrors:
    def test_unknown_region(self, tmp_path, demo_csv, capsys):
        assert run("fit", "--data", demo_csv, "--out", tmp_path, "--region", "Atlantis") == 1
        err = capsys.readouterr().err
        assert "Atlantis" in err and "Campania" in err

    def test_window_outside_data(self, tmp_path, demo_csv, capsys):
        code = run("fit", "--data", demo_csv, "--out", tmp_path, "--window", "2020-02-01:2020-02-10", "--eval-window", "2020-02-11:2020-02-20")
        assert code == 1
        assert "2020-02-24..2020-04-05" in capsys.readouterr().err

    def test_missing_snapshot(self, tmp_path, capsys):
        assert run("fit", "--data", tmp_path / "none.csv", "--out", tmp_path) == 1
        assert "fetch" in capsys.readouterr().err

    def test_report_without_artifacts(self, tmp_path, demo_csv, capsys):
        assert run("report", "--data", demo_csv, "--out", tmp_path / "empty") == 1
        assert "missing artifact" in capsys.readouterr().err

    def test_bad_config_json(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text("{nope")
        assert run("fit", "--config", p) == 1

    def test_internal_error_exit_code(self, tmp_path, demo_csv, monkeypatch, capsys):
        def boom(sess):
            raise RuntimeError("invariant broken")

        monkeypatch.setattr(cli, "cmd_fit", boom)
        assert run("fit", "--data", demo_csv, "--out", tmp_path) == 2
        assert "internal error" in capsys.readouterr().err

    def test_fetch_from_file_url(self, tmp_path, demo_csv):
        dest_dir = tmp_path / "data"
        assert run("fetch", "--url", demo_csv.as_uri(), "--data", dest_dir / "snap.csv") == 0
        assert (dest_dir / "snap.csv").read_bytes() == demo_csv.read_bytes()
        meta = json.loads((dest_dir / "snap.json").read_text())
        assert len(meta["sha256"]) == 64
