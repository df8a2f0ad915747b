import math
from dataclasses import replace

import numpy as np
import pytest

from edgetime.__main__ import main
from edgetime.errors import DomainError
from edgetime.experiments import (
    ConfigError,
    ExperimentConfig,
    Table,
    bundled_spambase,
    load_dataset,
    parse_config,
    parse_config_text,
    run_bounds,
    run_centralized,
    run_oma_vs_noma,
    run_optimal_k_vs_snr,
    run_planner_report,
    run_sweep_k,
    run_train,
    to_csv,
)

SMALL = ExperimentConfig(k_max=6, trials=1000, noma_trials=20_000, snr_grid_db=(10.0, 30.0),
                         bandwidths_hz=(20e6,), n_grid=(1000, 10_000, 100_000))


# --- config ---------------------------------------------------------------------------

def test_empty_config_is_default():
    cfg = parse_config_text("")
    assert cfg == ExperimentConfig()
    assert (cfg.eps_local, cfg.eps_gap, cfg.lambda_reg, cfg.mu_smooth, cfg.zeta_convex) == (1e-3, 1e-3, 0.01, 1.0, 1.0)
    assert (cfg.bandwidth_hz, cfg.rate_dist, cfg.rate_up, cfg.rate_mul) == (20e6, 5e6, 5e6, 5e6)
    assert cfg.slot_seconds == 1e-3
    assert (cfg.rho_min_db, cfg.rho_max_db, cfg.eta_min_db, cfg.eta_max_db) == (10, 20, 10, 20)
    assert (cfg.c_min, cfg.c_max) == (1e-10, 1e-9)


def test_config_parsing(tmp_path):
    cfg = parse_config_text("k_max = 30\n")
    assert list(cfg.k_range) == list(range(1, 31))
    text = "# comment\n\ntrials = 2e3   # inline\nsnr_grid_db = 5, 15 25\nstandardize = false\nsigma_product = 12.5\n"
    cfg = parse_config_text(text)
    assert cfg.trials == 2000 and cfg.snr_grid_db == (5.0, 15.0, 25.0)
    assert cfg.standardize is False and cfg.sigma_product == 12.5
    path = tmp_path / "c.cfg"
    path.write_text("train_k = 2, 4\n", encoding="utf-8")
    assert parse_config(path).train_k == (2, 4)


@pytest.mark.parametrize("text,fragment", [
    ("eps_gap = 0\n", "eps_gap"),
    ("\nbogus = 1\n", "line 2: unknown key 'bogus'"),
    ("k_max 30\n", "line 1"),
    ("trials = many\n", "line 1: bad value"),
    ("k_min = 5\nk_max = 2\n", "k_min"),
    ("rho_min_db = 30\n", "rho_min_db"),
    ("access = tdma\n", "access"),
])
def test_config_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config_text(text)


# --- dataset loading -----------------------------------------------------------------------

def test_load_spambase():
    data = load_dataset(bundled_spambase())
    assert data.n_features == 57 and data.n_examples == 4597
    assert set(np.unique(data.labels)) == {-1.0, 1.0}
    np.testing.assert_allclose(np.linalg.norm(data.features, axis=0), 1.0)


def test_load_toy_file(tmp_path):
    path = tmp_path / "toy.csv"
    path.write_text("1,2,0\n3,4,1\n", encoding="utf-8")
    raw = load_dataset(path, standardize=False, normalize=False)
    assert raw.n_examples == 2 and raw.n_features == 2
    np.testing.assert_array_equal(raw.features, [[1.0, 3.0], [2.0, 4.0]])
    np.testing.assert_array_equal(raw.labels, [-1.0, 1.0])
    unit = load_dataset(path, standardize=False)
    np.testing.assert_allclose(unit.features[:, 0], np.array([1.0, 2.0]) / math.sqrt(5))


@pytest.mark.parametrize("body,fragment", [
    ("1,2,0\n1,nan,1\n", "row 1: non-finite"),
    ("1,2,0\n1,1\n", "row 1: expected 3 fields"),
    ("1,x,0\n", "row 0: non-numeric"),
    ("", "empty"),
])
def test_load_rejects_bad_files(tmp_path, body, fragment):
    path = tmp_path / "bad.csv"
    path.write_text(body, encoding="utf-8")
    with pytest.raises(DomainError, match=fragment):
        load_dataset(path)


# --- CSV ---------------------------------------------------------------------------------------

def test_csv_formatting():
    table = Table(("a", "b", "c", "d"), [(1, 1 / 3, True, "x"), (np.int64(2), np.float64(2.5e-12), False, "y")])
    assert to_csv(table) == "a,b,c,d\n1,0.333333333,true,x\n2,2.5e-12,false,y\n"


# --- sweeps ------------------------------------------------------------------------------------

def test_sweep_k_rows_and_zero_outage():
    table = run_sweep_k(SMALL)
    assert table.column("K") == list(range(1, 7))
    assert all(lo <= hi for lo, hi in zip(table.column("lower_s"), table.column("upper_s")))
    zero = run_sweep_k(replace(SMALL, zero_outage=True))
    assert all(s == 0.0 for s in zero.column("mc_stderr_s"))


def test_sweep_k_noma_access():
    table = run_sweep_k(replace(SMALL, access="noma", k_max=3))
    assert len(table.rows) == 3


def test_bounds_table():
    table = run_bounds(SMALL)
    assert table.header == ("K", "lower_s", "upper_s", "m_k")
    assert table.rows[0][1] == pytest.approx(table.rows[0][2])


def test_optimal_k_table():
    single = run_optimal_k_vs_snr(SMALL, snr_grid_db=(10.0,))
    assert len(single.rows) == 1
    cfg = replace(SMALL, k_max=30, trials=2000)
    table = run_optimal_k_vs_snr(cfg, snr_grid_db=(5.0, 15.0, 25.0), bandwidths_hz=(20e6, 40e6))
    k_star = {(r[1], r[0]): r[2] for r in table.rows}
    for bw in (20e6, 40e6):
        seq = [k_star[(bw, s)] for s in (5.0, 15.0, 25.0)]
        assert all(b >= a - 1 for a, b in zip(seq, seq[1:]))
    assert all(k_star[(40e6, s)] >= k_star[(20e6, s)] for s in (5.0, 15.0, 25.0))


def test_oma_noma_single_device_agrees():
    table = run_oma_vs_noma(replace(SMALL, trials=20_000, noma_trials=200_000, k_max=2))
    for rho, k, oma, s_oma, noma, s_noma in table.rows:
        if k == 1:
            assert abs(oma - noma) <= 4 * math.hypot(s_oma, s_noma)


def test_train_table_one_dimensional(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("1,1\n", encoding="utf-8")
    cfg = replace(SMALL, loss="squared", lambda_reg=1.0, eps_gap=1e-6, train_k=(1,),
                  standardize=False, normalize=False)
    table = run_train(cfg, path)
    rows = [r for r in table.rows if r[0] == "K=1"]
    assert len(rows) <= 11 and rows[-1][2] <= 1e-6
    assert any(r[0] == "centralized" for r in table.rows)


def test_planner_table_fixture_row():
    table = run_planner_report(ExperimentConfig(k_max=64))
    assert table.column("K") == list(range(1, 65))
    row = dict(zip(table.header, table.rows[3]))
    assert row["prop3_holds"] is False
    assert row["q_of_k"] == pytest.approx(-5.39068200693901, rel=1e-12)
    assert row["necessary_holds"] is True
    # on the default environment the residual stays positive (no interior stationary point)
    signs = np.sign(table.column("stationarity_residual"))
    assert np.all(signs[np.isfinite(table.column("stationarity_residual"))] > 0)


def test_planner_table_sign_change_on_compute_heavy_config():
    cfg = ExperimentConfig(k_max=64, c_min=1e-7, c_max=1e-7)
    res = np.array(run_planner_report(cfg).column("stationarity_residual"))
    signs = np.sign(res)
    assert int(np.sum(signs[1:] != signs[:-1])) == 1


def test_centralized_beats_distributed_and_ratio_shrinks():
    table = run_centralized(replace(SMALL, k_max=20))
    assert all(c <= d for c, d in zip(table.column("centralized_s"), table.column("best_distributed_s")))
    ratio = table.column("distributed_over_centralized")
    assert ratio[0] > ratio[1] > ratio[2]


# --- CLI -------------------------------------------------------------------------------------

def test_cli_writes_csv(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("k_max = 3\ntrials = 200\n", encoding="utf-8")
    out = tmp_path / "out.csv"
    assert main(["bounds", "--config", str(cfg), "--out", str(out)]) == 0
    assert out.read_text().startswith("K,lower_s,upper_s,m_k\n1,")
    assert main(["sweep-k", "--config", str(cfg), "--seed", "7"]) == 0
    assert capsys.readouterr().out.count("\n") == 4


def test_cli_reports_errors(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("nonsense = 1\n", encoding="utf-8")
    assert main(["bounds", "--config", str(cfg)]) == 2
    assert "unknown key" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        main(["unknown-command"])
