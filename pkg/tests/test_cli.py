import json

import pytest

from hpmpc.cli import main
from hpmpc.io import read_table


def write_config(path, **overrides):
    config = {"controller": "benchmark", "seed": 1,
              "scenario": {"synthetic": {"days": 2, "seed": 3}}}
    config.update(overrides)
    path.write_text(json.dumps(config))
    return str(path)


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    root = tmp_path_factory.mktemp("runs")
    cfg = write_config(root / "bench.json")
    for name in ("a", "b"):
        assert main(["simulate", cfg, "--out", str(root / name)]) == 0
    other = write_config(root / "other.json", seed=2,
                         scenario={"synthetic": {"days": 2, "seed": 3, "T_mean_range": [-12, -10]}})
    assert main(["simulate", other, "--out", str(root / "cold")]) == 0
    return root


def test_simulate_writes_whole_day_trace(runs):
    hourly = read_table(runs / "a" / "trace_hourly.csv", kind="trace-hourly")
    assert len(hourly["timestamp"]) == 48
    assert len(read_table(runs / "a" / "trace_minute.csv")["timestamp"]) == 2 * 1440
    run = json.loads((runs / "a" / "run.json").read_text())
    assert run["seed"] == 1 and run["config"]["controller"] == "benchmark"
    assert hourly.meta["digest"] == run["digest"]


def test_simulate_is_byte_identical(runs):
    for name in ("trace_minute.csv", "trace_hourly.csv", "run.json"):
        assert (runs / "a" / name).read_bytes() == (runs / "b" / name).read_bytes()


def test_mpc_trace_schema_matches_benchmark(runs, tmp_path):
    cfg = write_config(tmp_path / "mpc.json", controller="mpc",
                       scenario={"synthetic": {"days": 1, "seed": 3}}, mpc={"horizon": 6})
    assert main(["simulate", cfg, "--out", str(tmp_path / "mpc")]) == 0
    for name in ("trace_hourly.csv", "trace_minute.csv"):
        head = lambda d: (d / name).read_text().splitlines()[1]  # noqa: E731
        assert head(tmp_path / "mpc") == head(runs / "a")


def test_self_evaluation_saves_nothing(runs, tmp_path, capsys):
    assert main(["evaluate", str(runs / "a"), str(runs / "b"), "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["saving_rate"] == pytest.approx(0.0, abs=1e-12)
    assert report["seed"] == "1/1"
    assert json.loads(capsys.readouterr().out) == report
    assert main(["evaluate", str(runs / "a"), str(runs / "a"), "--dT", "0", "--dPV", "0",
                 "--out", str(tmp_path / "exact")]) == 0
    rows = read_table(tmp_path / "exact" / "comparison_days.csv")
    assert list(rows["n_comparators"]) == [1.0, 1.0]


def test_no_comparators_has_its_own_exit_code(runs, tmp_path):
    code = main(["evaluate", str(runs / "cold"), str(runs / "a"), "--out", str(tmp_path)])
    assert code == 4


def test_report(runs, tmp_path):
    assert main(["report", str(runs / "a"), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "report_summary.json").read_text())
    assert summary["days"] == 2 and 0 < summary["peak_share"] < 1
    pattern = read_table(tmp_path / "production_pattern.csv")
    assert pattern["share"].sum() == pytest.approx(1.0)
    assert pattern.meta["digest"] == summary["digest"]


@pytest.mark.parametrize("kind", ["hp", "house", "pv"])
def test_fit_bundled(kind, tmp_path):
    assert main(["fit", kind, "--bundled", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / f"fit_report_{kind}.json").read_text())
    assert report["seed"] == 0 and report["digest"]
    if kind == "hp":
        assert report["r2"] >= 0.99
    if kind == "house":
        assert report["segments"] == 2


def test_fit_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["fit", "hp", "--bundled", "--out", str(tmp_path / name)]) == 0
    for f in (tmp_path / "a").iterdir():
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


def test_fitted_models_feed_the_simulation(tmp_path):
    assert main(["fit", "hp", "--bundled", "--out", str(tmp_path)]) == 0
    assert main(["fit", "house", "--bundled", "--out", str(tmp_path)]) == 0
    cfg = write_config(tmp_path / "c.json", controller="mpc", mpc={"horizon": 4},
                       scenario={"synthetic": {"days": 1, "seed": 2}},
                       models={"hp": "hp_fit.csv", "thermal": "thermal_fit.json"})
    assert main(["simulate", cfg, "--out", str(tmp_path / "sim")]) == 0
    run = json.loads((tmp_path / "sim" / "run.json").read_text())
    assert run["config"]["models"]["hp"].endswith("hp_fit.csv")


def test_data_errors(tmp_path, capsys):
    bad = tmp_path / "hp.csv"
    bad.write_text("P_hp,Q_hp,T_a\n1000,4000,3\n1200,x,2\n")
    assert main(["fit", "hp", str(bad), "--out", str(tmp_path)]) == 3
    assert "line 3" in capsys.readouterr().err
    bad.write_text("P_hp,Q_hp,T_a\n1000,4000,3\n")
    assert main(["fit", "hp", str(bad), "--out", str(tmp_path)]) == 3
    assert main(["report", str(tmp_path / "missing")]) == 3


def test_config_errors(tmp_path, capsys):
    assert main(["fit", "boiler", "--bundled"]) == 2
    assert main(["simulate", write_config(tmp_path / "c.json", controller="magic")]) == 2
    assert main(["simulate", write_config(tmp_path / "c.json", colour="red")]) == 2
    assert main(["simulate", write_config(tmp_path / "c.json", mpc={"tracking": "fuzzy"})]) == 2
    assert "colour" in capsys.readouterr().err
    (tmp_path / "broken.json").write_text("{")
    assert main(["simulate", str(tmp_path / "broken.json")]) == 2
    assert main(["simulate", write_config(tmp_path / "c.json", models={"hp": "nope.csv"})]) == 2
    assert main([]) == 2


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("HPMPC_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["fit", "pv", "--bundled"]) == 0
    assert (tmp_path / "env" / "pv_fit.json").exists()
    assert main(["fit", "pv", "--bundled", "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "pv_fit.json").exists()
