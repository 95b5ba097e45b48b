import json
from dataclasses import replace

import numpy as np
import pytest

from mmwlin.harness import (AdcSpec, LnaSpec, ResultRow, ScenarioConfig, average_rows,
                            emit_results, format_results, read_results, run_scenario, sweep,
                            threshold_crossing, trial_seed)
from mmwlin.signal import ConfigError, WaveformConfig

SMALL = WaveformConfig(symbol_count=600)


def small(**kw):
    base = dict(waveform=SMALL, trials=2, master_seed=7)
    base.update(kw)
    return ScenarioConfig(**base)


def _strip(rows):
    return [(r.sweep_value, r.method, r.d_bar_db, r.sat_antennas, r.lms_final_weight, r.seed, r.trial)
            for r in rows]


def test_defaults_follow_settings_table():
    c = ScenarioConfig()
    assert (c.nr, c.num_users, c.soi_dbm, c.lna.gain_db) == (64, 8, -70.0, 15.0)
    assert c.waveform.modulation_order == 16 and c.waveform.oversampling_factor == 5
    assert c.waveform.num_samples == 50_000
    p = c.user_powers_dbm()
    assert p[0] == -70.0
    assert 10 * np.log10(np.sum(10 ** (p[1:] / 10))) == pytest.approx(-43.0)


def test_dominant_profile():
    p = small(interferer_profile="dominant").user_powers_dbm()
    assert p[1] - p[2] == pytest.approx(20.0)
    assert 10 * np.log10(np.sum(10 ** (p[1:] / 10))) == pytest.approx(-43.0)


def test_chain_is_exact_without_impairments():
    cfg = small(lna=LnaSpec(mode="linear"), adc=AdcSpec(enabled=False), methods=("none",))
    rows = run_scenario(cfg)
    assert len(rows) == 2
    assert all(r.d_bar_db < -90 for r in rows)


def test_recovery_beats_uncompensated():
    cfg = small(lna=LnaSpec(mode="clip-only", iip3_dbm=-30), methods=("none", "sat-recovery"))
    rows = average_rows(run_scenario(cfg))
    d = {r.method: r.d_bar_db for r in rows}
    assert d["sat-recovery"] < d["none"]
    assert rows[0].sat_antennas > 0


def test_deterministic_runs():
    cfg = small(lna=LnaSpec(mode="full"), methods=("none", "sat-recovery", "beamspace"))
    assert _strip(run_scenario(cfg)) == _strip(run_scenario(cfg))
    other = run_scenario(replace(cfg, master_seed=8))
    assert _strip(other) != _strip(run_scenario(cfg))


@pytest.mark.parametrize("mode,method", [("poly-only", "sat-recovery"), ("clip-only", "beamspace"),
                                         ("linear", "sat-recovery")])
def test_incompatible_method_mode(mode, method):
    with pytest.raises(ConfigError, match="does not apply"):
        small(lna=LnaSpec(mode=mode), methods=(method,))


@pytest.mark.parametrize("kw", [dict(num_users=64), dict(methods=("magic",)), dict(methods=()),
                                dict(trials=0), dict(aoas=(0.1,)), dict(interferer_profile="x"),
                                dict(lna=LnaSpec(mode="cubic"))])
def test_bad_scenarios(kw):
    with pytest.raises(ConfigError):
        small(**kw)


def test_sweep_single_value_equals_run():
    cfg = small(lna=LnaSpec(mode="clip-only"), methods=("floor", "none", "sat-recovery"))
    a = sweep(cfg, "iip3", [-28.0], average=False)
    b = run_scenario(cfg.with_axis("iip3", -28.0), sweep_value=-28.0)
    assert _strip(a) == _strip(b)
    avg = sweep(cfg, "iip3", [-28.0])
    assert _strip(avg) == _strip(average_rows(b, cfg.master_seed))


def test_sweep_errors():
    cfg = small()
    with pytest.raises(ValueError):
        sweep(cfg, "iip3", [])
    with pytest.raises(ConfigError):
        sweep(cfg, "temperature", [1.0])
    with pytest.raises(ConfigError):
        sweep(cfg, "adc_bits", [3.5])


def test_sweep_row_order():
    cfg = small(lna=LnaSpec(mode="clip-only"), methods=("sat-recovery", "none"), trials=1)
    rows = sweep(cfg, "input_power", [-40.0, -46.0])
    assert [(r.sweep_value, r.method) for r in rows] == [
        (-46.0, "none"), (-46.0, "sat-recovery"), (-40.0, "none"), (-40.0, "sat-recovery")]


def test_iip3_sweep_none_is_monotone():
    cfg = small(methods=("none", "sat-recovery", "per-antenna", "beamspace"))
    vals = np.arange(-40.0, -15.0, 2.0)
    rows = [r for r in sweep(cfg, "iip3", vals) if r.method == "none"]
    d = np.array([r.d_bar_db for r in rows])
    assert np.all(np.diff(d) <= 1e-9)


def test_adc_bits_sweep_improves():
    cfg = small(lna=LnaSpec(mode="linear"), methods=("none",))
    d = [r.d_bar_db for r in sweep(cfg, "adc_bits", [3, 4, 5, 6])]
    assert np.all(np.diff(d) < 0)


def test_parallel_matches_serial():
    cfg = small(lna=LnaSpec(mode="clip-only"), methods=("none", "sat-recovery"), trials=3)
    a = format_results(sweep(cfg, "input_power", [-45.0, -41.0], n_jobs=1))
    b = format_results(sweep(cfg, "input_power", [-45.0, -41.0], n_jobs=3))
    assert a == b


def test_trial_seeds_differ():
    seeds = {trial_seed(0, t) for t in range(100)}
    assert len(seeds) == 100
    assert trial_seed(5, 3) == trial_seed(5, 3)


def test_config_json_round_trip(tmp_path):
    cfg = small(lna=LnaSpec(mode="poly-only", iip3_dbm=-33.0), methods=("none", "beamspace"),
                aoas=tuple(np.linspace(-0.9, 0.9, 8)))
    text = json.dumps(cfg.to_dict())
    assert ScenarioConfig.from_dict(json.loads(text)) == cfg
    with pytest.raises(ConfigError):
        ScenarioConfig.from_dict({"lna": {"iip3": -30}})


# -- threshold crossing ------------------------------------------------------

def test_threshold_crossing_interpolates():
    v = [-40, -38, -36, -34]
    d = [0.0, -10.0, -19.0, -20.0]
    # floor -20, margin 3 -> threshold -17; crosses between -38 (-10) and -36 (-19)
    assert threshold_crossing(v, d, -20.0) == pytest.approx(-38 + 2 * 7 / 9)
    assert threshold_crossing(v, [-20.0] * 4, -20.0) == -40
    assert np.isnan(threshold_crossing(v, [0.0] * 4, -20.0))


def test_threshold_crossing_ignores_low_end_noise():
    v = [-40, -38, -36, -34]
    d = [-19.0, -5.0, -18.0, -20.0]
    assert threshold_crossing(v, d, -20.0) == pytest.approx(-38 + 2 * 12 / 13)


# -- result files ------------------------------------------------------------

def _rows():
    return [ResultRow(-43.0, "none", -12.345678912345, 5.25, None, 0.123, 7, 0),
            ResultRow(-43.0, "sat-recovery", -21.0000000004, 5.25, None, 0.5, 7, 0)]


def test_csv_layout(tmp_path):
    path = tmp_path / "one.csv"
    emit_results(_rows()[:1], path)
    lines = path.read_text().splitlines()
    assert lines == ["sweep_value,method,d_bar_db,sat_antennas,wall_time_s,seed",
                     "-43,none,-12.3456789,5.25,0,7"]


def test_csv_round_trip_and_stability(tmp_path):
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_results(_rows(), p1)
    emit_results(_rows(), p2)
    assert p1.read_bytes() == p2.read_bytes()
    parsed = read_results(p1)
    for rec, row in zip(parsed, _rows()):
        assert rec["d_bar_db"] == float(f"{row.d_bar_db:.9g}")
        assert rec["method"] == row.method and rec["seed"] == row.seed
    again = [ResultRow(r["sweep_value"], r["method"], r["d_bar_db"], r["sat_antennas"], None,
                       r["wall_time_s"], r["seed"]) for r in parsed]
    assert format_results(again) == p1.read_text()


def test_csv_and_jsonl_agree(tmp_path):
    emit_results(_rows(), tmp_path / "r.csv", include_timing=True)
    emit_results(_rows(), tmp_path / "r.jsonl", fmt="jsonl", include_timing=True)
    assert read_results(tmp_path / "r.csv") == read_results(tmp_path / "r.jsonl")


def test_emit_errors(tmp_path):
    with pytest.raises(ValueError):
        emit_results([], tmp_path / "x.csv")
    with pytest.raises(OSError):
        emit_results(_rows(), tmp_path / "missing" / "x.csv")
