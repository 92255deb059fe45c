import json
import math

import numpy as np
import pytest

from mcfri.cli import main
from mcfri.experiments import (ScenarioConfig, equivalent_snr_gap, load_config, median_gap,
                               preset, read_table, run, save_config, trial_seed)


def test_config_round_trip(tmp_path):
    cfg = preset("sync")
    path = tmp_path / "c.json"
    save_config(cfg, path)
    back = load_config(path)
    assert back == cfg and math.isinf(back.snr_db[0])
    assert json.loads(path.read_text())["snr_db"][0] == "inf"
    assert cfg.config_hash() == back.replace(out="elsewhere", threads=8).config_hash()
    assert cfg.config_hash() != cfg.replace(seed=1).config_hash()


def test_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig("snr_sweep", delays=(0.2,), amplitudes=(1.0,), snr_db=(10.0,), trials=0)
    with pytest.raises(ValueError):
        ScenarioConfig("snr_sweep", delays=(0.2,), amplitudes=(1.0,))
    with pytest.raises(ValueError):
        ScenarioConfig("nonsense")
    with pytest.raises(ValueError):
        ScenarioConfig.from_dict({"scenario": "snr_sweep", "bogus": 1})
    with pytest.raises(ValueError):
        preset("fig99")


def test_trial_seed_is_stable_and_distinct():
    assert trial_seed(0, 1, 2) == trial_seed(0, 1, 2)
    seeds = {trial_seed(0, i, j) for i in range(10) for j in range(100)}
    assert len(seeds) == 1000
    assert trial_seed(0, 1, 2) != trial_seed(1, 1, 2)


def test_equivalent_snr_gap_recovers_a_shift():
    snr = np.arange(0, 61, 5.0)
    err_a = 10 ** (-snr / 20)
    err_b = 10 ** (-(snr - 3.0) / 20)
    levels, gaps = equivalent_snr_gap(snr, err_a, err_b)
    assert levels.size == 64 and np.allclose(gaps, 3.0)
    assert median_gap(snr, err_b, err_a) == pytest.approx(-3.0)
    # non-monotone noise in one curve is absorbed by the running minimum
    bumpy = err_b.copy()
    bumpy[6] *= 1.5
    assert np.all(np.isfinite(equivalent_snr_gap(snr, err_a, bumpy)[1]))
    assert math.isnan(median_gap(snr[:2], [1.0, 0.9], [1e-3, 1e-4]))


def test_noiseless_sweep_is_exact():
    cfg = preset("fig8").replace(snr_db=(math.inf,), out="unused")
    res = run(cfg, write=False)
    assert len(res.rows) == 3
    for r in res.rows:
        assert r["trials"] == 1 and r["error_std"] <= 1e-7


def test_ideal_filter_curve_equals_rectangular_sweep():
    snr = (20.0, 40.0)
    sweep = run(preset("fig8").replace(families=("rectangular",), snr_db=snr, trials=20,
                                       delays=(0.256, 0.46)), write=False)
    filt = run(preset("fig13").replace(filters=("ideal",), snr_db=snr, trials=20, extent=None),
               write=False)
    assert [r["error_std"] for r in sweep.rows] == [r["error_std"] for r in filt.rows]
    assert filt.rows[0]["max_leakage"] == 0.0


def test_outputs_are_deterministic_across_threads(tmp_path):
    base = preset("fig8").replace(snr_db=(10.0, 30.0), trials=30)
    a = run(base.replace(out=str(tmp_path / "a"), threads=1))
    b = run(base.replace(out=str(tmp_path / "b"), threads=3))
    for fa, fb in zip(a.files, b.files):
        assert open(fa, "rb").read() == open(fb, "rb").read()
    text = open(a.files[0]).read()
    assert "# scenario=snr_sweep\n" in text and text.startswith("# config_hash=")
    rows = read_table(a.files[0])
    assert len(rows) == 6 and rows[0]["family"] == "tones"


def test_si_rank_one_uses_smoothing():
    cfg = preset("si").replace(periods=1, amplitude_sigma=0.0, snr_db=(math.inf,), trials=1)
    res = run(cfg, write=False)
    si = [r for r in res.rows if r["method"] == "si"][0]
    assert si["smoothing_used"] == 1 and si["error_std"] < 1e-8


def test_sync_zero_offset_is_exact():
    cfg = preset("sync").replace(delta_max=(0.0, 0.01), snr_db=(math.inf,), trials=3)
    rows = run(cfg, write=False).rows
    zero = [r for r in rows if r["delta_max"] == 0.0]
    assert all(r["error_std"] < 1e-9 for r in zero)
    comp = [r for r in rows if r["delta_max"] == 0.01 and r["compensated"]][0]
    raw = [r for r in rows if r["delta_max"] == 0.01 and not r["compensated"]][0]
    assert comp["error_std"] < 1e-9 < 1e-4 < raw["error_std"]


def test_waveform_dump_writes_files(tmp_path):
    res = run(preset("dump").replace(out=str(tmp_path), dump_points=16))
    names = sorted(p.rsplit("/", 1)[-1] for p in res.files)
    assert "waveform_sos.csv" in names and "response_chebyshev10.csv" in names
    assert "waveform_dump_manifest.json" in names


def test_cli_runs_and_reports(tmp_path, capsys):
    out = str(tmp_path / "o")
    assert main(["oracle_check", "--preset", "oracle", "--out", out]) == 0
    assert main(["oracle_check", "--preset", "oracle", "--out", out]) == 0
    cfg_path = tmp_path / "coarse.json"
    save_config(preset("oracle").replace(points_per_period=2 ** 6, out=out), cfg_path)
    assert main(["oracle_check", "--config", str(cfg_path)]) == 1
    assert main(["snr_sweep", "--preset", "oracle"]) == 2
    bad = tmp_path / "bad.json"
    save_config(preset("fig7").replace(generator_seeds=(0, 1), out=out), bad)
    assert main(["failure_audit", "--config", str(bad)]) == 1
    saved = tmp_path / "saved.json"
    assert main(["snr_sweep", "--preset", "fig8", "--seed", "7", "--save-config", str(saved)]) == 0
    assert load_config(saved).seed == 7
    assert "audit failed" in capsys.readouterr().err
