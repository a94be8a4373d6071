import json
import math

import numpy as np
import pytest

from irf_estim.crlb import CrlbQuery, crlb_exact
from irf_estim.errors import ConfigError, NumericalError
from irf_estim.harness import cli
from irf_estim.harness.config import ExperimentConfig, default_grid, load_config
from irf_estim.harness.experiments import crlb_map_flags, pilot_overhead, run_experiment
from irf_estim.harness.results import ResultTable, build_id

import oracles


def _cfg(**kw):
    return ExperimentConfig.from_mapping(kw)


def test_defaults_per_experiment():
    assert _cfg(experiment="mse-vs-k").trials == 10_000
    se = _cfg(experiment="spectral-efficiency")
    assert se.trials == 500 and se.ris_dims == [8, 4] and se.bs_dims == [2, 2]
    assert _cfg(experiment="mse-vs-gamma").grid[0] == 10.0 and _cfg(experiment="mse-vs-gamma").grid[-1] == 40.0
    assert default_grid("expansion-error")[-1] == 5.0
    with pytest.raises(ConfigError):
        default_grid("nope")


@pytest.mark.parametrize("bad", [
    {"experiment": "nope"},
    {"experiment": "mse-vs-k", "colour": 3},
    {"experiment": "mse-vs-k", "trials": 0},
    {"experiment": "mse-vs-k", "grid": []},
    {"experiment": "mse-vs-k", "grid": [0.5, 0.2]},
    {"experiment": "mse-vs-k", "grid": [0.5, 1.5]},
    {"experiment": "mse-vs-k", "seed": -1},
    {"experiment": "mse-vs-k", "L": 2},
    {"experiment": "mse-vs-k", "trials": 2.5},
    {"experiment": "mse-vs-k", "gamma_bar": "high"},
    {"experiment": "mse-vs-k", "ris_dims": [8]},
    {"experiment": "spectral-efficiency", "pilots": 64},
    {"experiment": "mse-vs-k", "nested": {"a": 1}},
    {"seed": 1},
])
def test_config_rejections(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_mapping(bad)


def test_load_toml_and_overrides(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('experiment = "mse-vs-k"\nseed = 3\ntrials = 50\ngrid = [0.5, 0.9]\nris_dims = [4, 4]\n')
    cfg = load_config(p, "mse-vs-k", trials=7)
    assert cfg.seed == 3 and cfg.trials == 7 and cfg.grid == [0.5, 0.9] and cfg.ris_dims == [4, 4]
    with pytest.raises(ConfigError):
        load_config(p, "crlb-map")
    bad = tmp_path / "bad.toml"
    bad.write_text("experiment = \n")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


def test_result_table_round_trip():
    t = ResultTable(["a", "b"], [[1.0, math.inf], [0.1 + 0.2, -3]], {"seed": 1}, inf_columns=("b",))
    back = ResultTable.from_csv(t.to_csv())
    assert back.rows == [[1.0, math.inf], [0.1 + 0.2, -3.0]]
    assert back.inf_columns == ("b",)
    assert back.metadata["seed"] == "1"


@pytest.mark.parametrize("table", [
    ResultTable(["a"], [[math.nan]]),
    ResultTable(["a"], [[math.inf]]),
    ResultTable(["a", "b"], [[1.0]]),
    ResultTable(["a", "a"], [[1.0, 2.0]]),
    ResultTable(["a"], [[-math.inf]], inf_columns=("a",)),
    ResultTable(["a"], [[1.0]], inf_columns=("z",)),
])
def test_result_table_validation(table):
    with pytest.raises(NumericalError):
        table.validate()


def test_build_id_is_stable():
    assert build_id() == build_id() and len(build_id()) == 16


def test_determinism_across_thread_counts():
    cfg = _cfg(experiment="mse-vs-k", trials=300, grid=[0.3, 0.9], block_size=64, seed=99)
    one = run_experiment(cfg, threads=1).to_csv()
    four = run_experiment(cfg, threads=4).to_csv()
    assert one == four
    other = run_experiment(_cfg(experiment="mse-vs-k", trials=300, grid=[0.3, 0.9], block_size=64, seed=98))
    assert other.to_csv() != one


def test_se_determinism_across_thread_counts():
    cfg = _cfg(experiment="spectral-efficiency", trials=6, grid=[20.0, 40.0], block_size=2)
    assert run_experiment(cfg, 1).to_csv() == run_experiment(cfg, 3).to_csv()


def test_config_echo_replays_run(tmp_path):
    cfg = _cfg(experiment="mse-vs-gamma", trials=200, grid=[10.0, 30.0], seed=5)
    out = tmp_path / "r.csv"
    run_experiment(cfg).write(out)
    replay = load_config(out)
    assert replay == cfg
    assert run_experiment(replay).to_csv() == out.read_text()
    assert ResultTable.read(out).config() == json.loads(cfg.echo())


def test_mse_table_columns_and_bounds():
    cfg = _cfg(experiment="mse-vs-k", trials=2000, grid=[0.0, 0.5, 0.9], seed=1)
    t = run_experiment(cfg)
    assert t.columns[:4] == ["K", "mse_dft", "mse_newton", "mse_vmem"]
    assert t.column("crlb_exact")[0] == math.inf
    for row in t.rows[1:]:
        rec = dict(zip(t.columns, row))
        crlb = 10 ** (rec["crlb_exact"] / 10)
        for e in ("dft", "newton", "vmem"):
            assert 10 ** (rec[f"mse_{e}"] / 10) >= crlb - 3 * rec[f"mse_{e}_se"]


def test_standard_error_follows_sqrt_law():
    small = run_experiment(_cfg(experiment="mse-vs-gamma", trials=4000, grid=[30.0], seed=2))
    big = run_experiment(_cfg(experiment="mse-vs-gamma", trials=8000, grid=[30.0], seed=2))
    for e in ("dft", "newton", "vmem"):
        ratio = small.column(f"mse_{e}_se")[0] / big.column(f"mse_{e}_se")[0]
        assert ratio == pytest.approx(math.sqrt(2), rel=0.2)


def test_crlb_map_matches_point_queries():
    cfg = _cfg(experiment="crlb-map", grid=[0.0, 0.5, 1.0], gamma_db_grid=[0.0, 10.0], L=16)
    t = run_experiment(cfg)
    for K, g, inv in t.rows:
        if K == 0:
            assert inv == 0.0
        else:
            assert inv == 1.0 / crlb_exact(CrlbQuery(K, 10 ** (g / 10), 0.0, L=16))
    assert t.metadata["flag_K0_row_zero"] == 1


def test_crlb_map_flags_detect_violations():
    inv = np.array([[0.0, 0.0], [1.0, 2.0], [3.0, 4.0]])
    flags = crlb_map_flags([0.0, 0.5, 1.0], [10.0, 20.0], inv)
    assert all(flags.values())
    bad = crlb_map_flags([0.0, 0.5, 1.0], [10.0, 20.0], np.array([[0.0, 0.0], [5.0, 2.0], [3.0, 1.0]]))
    assert not bad["nondecreasing_in_gamma"] and not bad["argmax_abs_K_is_one"]


def test_expansion_error_table():
    t = run_experiment(_cfg(experiment="expansion-error"))
    assert t.rows[0] == [0.0, 0.0]
    assert float(t.metadata["max_abs_delta"]) <= 0.07
    rng = np.random.default_rng(0)
    for i in rng.integers(0, len(t.rows), 10):
        x, d = t.rows[i]
        assert d == pytest.approx(oracles.expansion_error(x), abs=1e-10)


def test_pilot_accounting():
    assert pilot_overhead(1200) == {"irf": 3, "lsce": 1200}
    t = run_experiment(_cfg(experiment="spectral-efficiency", trials=2, grid=[30.0], ris_dims=[4, 4]))
    assert t.column("pilots_irf") == [3.0] and t.column("pilots_lsce") == [16.0]


def test_cli_success_and_exit_codes(tmp_path, capsys, monkeypatch):
    out = tmp_path / "x.csv"
    assert cli.main(["expansion-error", "--out", str(out), "--seed", "4"]) == 0
    assert ResultTable.read(out).metadata["seed"] == "4"
    assert cli.main(["expansion-error", "--trials", "0"]) == 2
    cfg = tmp_path / "c.toml"
    cfg.write_text('bogus = 1\n')
    assert cli.main(["mse-vs-k", "--config", str(cfg)]) == 2
    assert cli.main(["expansion-error", "--threads", "0"]) == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["not-an-experiment"])
    assert info.value.code == 2

    def boom(*a, **k):
        raise NumericalError("no convergence")
    monkeypatch.setattr(cli, "run_experiment", boom)
    assert cli.main(["crlb-map"]) == 3
    capsys.readouterr()


def test_cli_stdout(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"experiment": "crlb-map", "grid": [0.0, 1.0], "gamma_db_grid": [10.0], "L": 8}))
    assert cli.main(["crlb-map", "--config", str(cfg)]) == 0
    table = ResultTable.from_csv(capsys.readouterr().out)
    assert table.columns == ["K", "gamma_bar_db", "inv_crlb"] and len(table.rows) == 2
