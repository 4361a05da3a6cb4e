import filecmp
import json

import pytest
import yaml

from wfdgm import cli, runner
from wfdgm.config import ConfigError, build_config, dump_config, load_config, preset_config, to_dict
from wfdgm.scenarios import GridScenario, PoiScenario

TINY = {
    "name": "tiny",
    "scenario": {"kind": "grid", "rows": 2, "cols": 5, "spacing": 10.0},
    "node_count": 10,
    "duration": 120,
}


def write(tmp_path, raw, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(raw))
    return path


# -- presets and validation ------------------------------------------------


def test_comicon_preset():
    cfg = preset_config("comicon")
    assert cfg.node_count == 2000 and cfg.duration == 4 * 3600
    assert isinstance(cfg.scenario, PoiScenario)
    assert (cfg.scenario.width, cfg.scenario.height, cfg.scenario.n_pois) == (4000.0, 2000.0, 575)


@pytest.mark.parametrize(
    "name, nodes, hours",
    [("concert-small", 200, 3), ("comicon-small", 200, 2), ("helsinki-small", 200, 8), ("concert", 1000, 3)],
)
def test_other_presets(name, nodes, hours):
    cfg = preset_config(name)
    assert cfg.node_count == nodes and cfg.duration == hours * 3600
    assert cfg.capacity_range == (4, 15) and cfg.t_d == (30.0,)


def test_comicon_small_geometry():
    sc = preset_config("comicon-small").scenario
    assert (sc.width, sc.height, sc.n_pois) == (800.0, 400.0, 60)


def test_t_d_defaults_to_thirty():
    cfg = build_config(TINY)
    assert cfg.t_d == (30.0,) and cfg.protocol_params.t_d == 30.0
    assert cfg.protocols == ("wfdgm", "baseline") and cfg.seeds == (0,)


@pytest.mark.parametrize(
    "patch",
    [
        {"weights": {"resources": 0.3, "peers": 0.3, "capacity": 0.3, "stability": 0.3}},
        {"bogus": 1},
        {"scenario": {"kind": "grid", "rows": 2, "cols": 5, "wobble": 1}},
        {"scenario": {"kind": "teleport"}},
        {"protocol": ["flood"]},
        {"protocol_params": {"res_th": 2.0}},
        {"protocol_params": {"colour": "red"}},
        {"capacity_range": [2, 15]},
        {"t_d": [0.5]},
        {"node_count": "many"},
        {"battery": {"p2_go": 0.5}},
    ],
)
def test_schema_violations_rejected(patch):
    with pytest.raises(ConfigError):
        build_config({**TINY, **patch})


def test_missing_geometry_and_unknown_preset():
    with pytest.raises(ConfigError):
        build_config({"node_count": 10})
    with pytest.raises(ConfigError):
        build_config({"preset": "glastonbury"})


def test_file_values_override_preset(tmp_path):
    cfg = load_config(write(tmp_path, {"preset": "comicon-small", "duration": 600, "scenario": {"n_pois": 30}}))
    assert cfg.duration == 600 and cfg.scenario.n_pois == 30 and cfg.scenario.width == 800.0


def test_unparseable_file(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("node_count: [1,\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")


@pytest.mark.parametrize("name", ["concert", "concert-small", "comicon", "comicon-small", "helsinki", "helsinki-small"])
def test_echo_round_trips(name):
    cfg = preset_config(name)
    assert build_config(to_dict(cfg)) == cfg
    assert build_config(yaml.safe_load(dump_config(cfg))) == cfg


# -- batch runs ------------------------------------------------------------


CSVS = ["diffusion.csv", "components.csv", "ccdf.csv", "battery.csv", "trace.csv"]

HEADERS = {
    "diffusion.csv": "time_s,mean_fraction",
    "components.csv": "component_id,size",
    "ccdf.csv": "threshold,fraction",
    "battery.csv": "node,final_level_or_discharge_time",
    "trace.csv": "time,node,kind,payload",
}


def test_grid_of_thirty_runs(tmp_path):
    raw = {**TINY, "duration": 60, "protocol": ["wfdgm", "baseline"], "t_d": [5, 30, 60], "seed": [0, 1, 2, 3, 4]}
    status, outcomes = runner.run_batch(build_config(raw), out=tmp_path)
    assert status == 0 and len(outcomes) == 30 and all(o.ok for o in outcomes)
    dirs = sorted(p.name for p in tmp_path.iterdir())
    assert len(dirs) == 30
    assert "wfdgm_td5_seed0" in dirs and "baseline_td60_seed4" in dirs


def test_outputs_headers_and_byte_identical_rerun(tmp_path):
    raw = {**TINY, "duration": 1800, "protocol": ["wfdgm"], "trace": True}
    cfg = build_config(raw)
    runner.run_batch(cfg, out=tmp_path / "a")
    runner.run_batch(cfg, out=tmp_path / "b")
    a, b = tmp_path / "a" / "wfdgm_td30_seed0", tmp_path / "b" / "wfdgm_td30_seed0"
    for name in CSVS:
        assert (a / name).read_text().splitlines()[0] == HEADERS[name]
        assert filecmp.cmp(a / name, b / name, shallow=False), name
    summary = json.loads((a / "summary.json").read_text())
    assert summary["invariant_violations"] == 0
    assert summary["protocol"] == "wfdgm" and summary["node_count"] == 10
    assert len((a / "battery.csv").read_text().splitlines()) == 11


def test_echoed_config_reproduces_the_run(tmp_path):
    cfg = build_config({**TINY, "duration": 900, "protocol": ["baseline"], "seed": [7]})
    runner.run_batch(cfg, out=tmp_path / "first")
    first = tmp_path / "first" / "baseline_td30_seed7"
    echoed = load_config(first / "config.yaml")
    assert echoed.seeds == (7,) and echoed.protocols == ("baseline",)
    runner.run_batch(echoed, out=tmp_path / "again")
    again = tmp_path / "again" / "baseline_td30_seed7"
    for name in CSVS[:4] + ["config.yaml", "summary.json"]:
        assert filecmp.cmp(first / name, again / name, shallow=False), name


def test_parallel_batch_matches_serial(tmp_path):
    cfg = build_config({**TINY, "duration": 300, "seed": [0, 1]})
    runner.run_batch(cfg, jobs=1, out=tmp_path / "serial")
    runner.run_batch(cfg, jobs=2, out=tmp_path / "parallel")
    for d in (tmp_path / "serial").iterdir():
        for name in CSVS[:4]:
            assert filecmp.cmp(d / name, tmp_path / "parallel" / d.name / name, shallow=False)


def test_battery_csv_switches_to_discharge_times_when_all_die():
    cfg = build_config(
        {**TINY, "duration": 3600, "protocol": ["baseline"], "battery": {"idle_rate": 100.0, "p2_go": -100.0, "p2_client": -100.0}}
    )
    result = runner.simulate(cfg, "baseline", 30.0, 0)
    values, measure = runner.battery_values(result)
    assert measure == "discharge_time"
    assert ((values > 0) & (values <= 1)).all()


# -- command line ----------------------------------------------------------


def test_cli_smoke_full_concert_preset(tmp_path, capsys):
    # full 1000-node geometry, clipped to ten minutes
    path = write(tmp_path, {"preset": "concert", "duration": 600})
    code = cli.main(["--config", str(path), "--protocol", "wfdgm", "--td", "30", "--out", str(tmp_path / "out")])
    assert code == 0
    summary = json.loads((tmp_path / "out" / "wfdgm_td30_seed0" / "summary.json").read_text())
    assert summary["node_count"] == 1000 and summary["scenario"] == "concert"
    assert "1/1 run(s) completed" in capsys.readouterr().out


def test_cli_preset_flag_and_trace(tmp_path):
    path = write(tmp_path, {"duration": 300})
    code = cli.main(
        ["--config", str(path), "--preset", "comicon-small", "--protocol", "baseline", "--seed", "1,2", "--trace", "--out", str(tmp_path / "o")]
    )
    assert code == 0
    assert sorted(p.name for p in (tmp_path / "o").iterdir()) == ["baseline_td30_seed1", "baseline_td30_seed2"]
    assert (tmp_path / "o" / "baseline_td30_seed1" / "trace.csv").exists()


def test_cli_bad_weights_exit_two(tmp_path, capsys):
    path = write(tmp_path, {**TINY, "weights": {"resources": 0.3, "peers": 0.3, "capacity": 0.3, "stability": 0.3}})
    assert cli.main(["--config", str(path), "--out", str(tmp_path / "o")]) == 2
    assert "config error" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_cli_without_config_exits_two(capsys):
    assert cli.main([]) == 2


def test_cli_run_failure_exits_one(tmp_path, monkeypatch):
    real = runner.simulate

    def flaky(cfg, protocol, t_d, seed, check_invariants=False):
        if seed == 1:
            raise RuntimeError("boom")
        return real(cfg, protocol, t_d, seed, check_invariants)

    monkeypatch.setattr(runner, "simulate", flaky)
    path = write(tmp_path, {**TINY, "seed": [0, 1], "protocol": ["wfdgm"]})
    assert cli.main(["--config", str(path), "--out", str(tmp_path / "o")]) == 1
    # the healthy run still completed
    assert (tmp_path / "o" / "wfdgm_td30_seed0" / "summary.json").exists()
    assert not (tmp_path / "o" / "wfdgm_td30_seed1").exists()


def test_grid_scenario_from_config():
    assert build_config(TINY).scenario == GridScenario(rows=2, cols=5, spacing=10.0)
