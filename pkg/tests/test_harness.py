import json
import math

import numpy as np
import pytest

from cowqkd.cli import main
from cowqkd.harness import (REFERENCE_ANCHORS, SWEEP_COLUMNS, ConfigError, compare_reference, emit_trace,
                            parse_config, rows_to_csv, rows_to_json, run_sweep)
from oracles import key_length_mp


def test_defaults():
    cfg = parse_config()
    assert cfg.system.source.mu == 0.1
    assert cfg.system.source.extinction_ratio_db == 29.4
    assert cfg.system.detector.efficiency == 0.34
    assert cfg.system.security.f_ir == 1.2
    assert cfg.low_loss_mu == 0.07
    assert cfg.params_at(1.5).source.mu == 0.07
    assert cfg.params_at(10.0).source.mu == 0.1


def test_config_file_and_override_precedence(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("# comment\nmu = 0.2   # trailing\nefficiency = 0.5\n\nseed = 9\n")
    cfg = parse_config(path)
    assert (cfg.system.source.mu, cfg.system.detector.efficiency, cfg.seed) == (0.2, 0.5, 9)
    cfg = parse_config(path, {"mu": "0.3"})
    assert cfg.system.source.mu == 0.3
    assert cfg.system.detector.efficiency == 0.5


@pytest.mark.parametrize("overrides", [{"efficiency": "1.5"}, {"no_such_key": "1"}, {"mu": "abc"},
                                       {"workers": "0"}, {"dark_count_rate_hz": "-1"}])
def test_config_rejects_bad_values(overrides):
    with pytest.raises(ConfigError):
        parse_config(overrides=overrides)


def test_config_rejects_malformed_line(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("mu 0.1\n")
    with pytest.raises(ConfigError):
        parse_config(path)


def test_param_hash_tracks_parameters():
    assert parse_config().param_hash() == parse_config().param_hash()
    assert parse_config().param_hash() != parse_config(overrides={"f_ir": "1.3"}).param_hash()


def test_sweep_monotone_and_sorted():
    rows = run_sweep(parse_config(), [30.0, 1.5, 10.0, 20.0, 5.0, 15.0, 25.0])
    atten = [r.attenuation_db for r in rows]
    assert atten == sorted(atten)
    rates = [r.rate_bps for r in rows]
    assert all(b < a for a, b in zip(rates, rates[1:]))
    assert rows[0].km_equiv == pytest.approx(7.5)


def test_sweep_csv_columns_and_reproducible():
    cfg = parse_config(overrides={"mc_counts": "20000"})
    a = rows_to_csv(run_sweep(cfg, [10.0, 20.0], mode="mc", seed=3), cfg.header())
    b = rows_to_csv(run_sweep(cfg, [10.0, 20.0], mode="mc", seed=3), cfg.header())
    assert a == b
    lines = [ln for ln in a.splitlines() if not ln.startswith("#")]
    assert lines[0].split(",") == list(SWEEP_COLUMNS)
    assert len(lines) == 3
    c = rows_to_csv(run_sweep(cfg, [10.0, 20.0], mode="mc", seed=4), cfg.header())
    assert c != a


def test_sweep_json_round_trip():
    cfg = parse_config()
    doc = json.loads(rows_to_json(run_sweep(cfg, [20.0]), cfg))
    row = doc["rows"][0]
    assert set(SWEEP_COLUMNS) <= set(row)
    assert row["stats"]["n_sifted"] == pytest.approx(2e7)


def test_unknown_mode_rejected():
    with pytest.raises(ConfigError):
        run_sweep(parse_config(), [10.0], mode="exact")
    with pytest.raises(ConfigError):
        run_sweep(parse_config(), [])


def test_ideal_limit_row_matches_closed_form():
    cfg = parse_config(overrides={"dark_count_rate_hz": "0", "source_visibility": "1",
                                  "extinction_ratio_db": "inf", "jitter_sigma_low_ps": "0",
                                  "jitter_sigma_high_ps": "0"})
    (row,) = run_sweep(cfg, [0.0])
    assert row.Q == 0.0
    assert row.V_est == pytest.approx(1.0, abs=1e-12)
    mu = 0.07
    assert row.mu_used == mu
    expected = float(key_length_mp(2e7, 0.0, 1.0, mu))
    assert row.key_length == pytest.approx(expected, rel=1e-12)
    # No interference losses: ideal channel with n sifted bits takes n / (clicks per second).
    p_click = 1 - math.exp(-0.34 * mu * 0.9)
    per_second = 2e9 / 2 * (1 - 0.01) * p_click
    assert row.duration_s == pytest.approx(2e7 / per_second, rel=1e-3)


def test_compare_detects_degraded_system():
    anchors = [a for a in REFERENCE_ANCHORS if a.column in ("rate_bps", "Q") and a.attenuation_db == 20.0]
    good = compare_reference(run_sweep(parse_config(), [20.0]), anchors)
    assert good.passed
    # At 20 dB the QBER is ~0.1 %, so error correction barely matters; a lossy detector does.
    fir = run_sweep(parse_config(overrides={"f_ir": "2.0"}), [20.0])[0]
    assert fir.rate_bps < good.checks[0].observed
    bad_eta = compare_reference(run_sweep(parse_config(overrides={"efficiency": "0.15"}), [20.0]), anchors)
    assert not bad_eta.passed
    bad_q = compare_reference(run_sweep(parse_config(overrides={"qber_override": "0.05"}), [20.0]), anchors)
    assert not bad_q.passed
    partial = compare_reference(run_sweep(parse_config(), [20.0]))
    assert {c.status for c in partial.checks} >= {"pass", "skipped"}


def test_trace_flat_without_coherence():
    cfg = parse_config(overrides={"source_visibility": "0"})
    trace = emit_trace(cfg, 0.0, 0.01, seed=2)
    # Without interference both monitor ports see half of every overlap: twice a side slot.
    assert trace.peak_ratio("constructive") == pytest.approx(2.0, rel=0.05)
    assert trace.peak_ratio("destructive") == pytest.approx(2.0, rel=0.05)


def test_trace_ports_share_the_monitor_light():
    cfg = parse_config(overrides={"dark_count_rate_hz": "0"})
    for v in ("0", "1"):
        trace = emit_trace(parse_config(overrides={"dark_count_rate_hz": "0", "source_visibility": v}),
                           0.0, 0.01, seed=5)
        total = trace.destructive.sum() + trace.constructive.sum()
        # Either way the two ports split the same tapped power.
        if v == "0":
            ref = total
        else:
            assert abs(total - ref) < 5 * math.sqrt(ref)
    assert cfg.system.detector.dark_count_rate_hz == 0


def test_trace_bins_and_csv():
    trace = emit_trace(parse_config(), 10.0, 0.01, seed=1)
    assert trace.spd1.size == 16 * 5
    kinds = trace.monitor_slot_kinds()
    # frame occupancy 1010 0111 0101 1001, wrapping round from the last slot
    assert kinds.tolist() == [2, 1, 1, 1, 0, 1, 2, 2, 1, 1, 1, 1, 2, 1, 0, 1]
    text = trace.to_csv()
    assert text.splitlines()[0] == "bin,time_ps,slot,spd1,destructive,constructive"
    assert len(text.splitlines()) == 81
    # SPD1 sees light only in occupied slots.
    occupied = np.repeat(np.array([1, 0, 1, 0, 0, 1, 1, 1, 0, 1, 0, 1, 1, 0, 0, 1]), 5).astype(bool)
    assert trace.spd1[occupied].sum() > 100 * max(trace.spd1[~occupied].sum(), 1)


def test_cli_keylen_matches_oracle(capsys):
    assert main(["keylen", "--n", "2e7", "--qber", "0.0015", "--visibility", "0.978", "--mu", "0.1",
                 "--format", "json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["key_length_bits"] == pytest.approx(float(key_length_mp(2e7, 0.0015, 0.978, 0.1)), rel=1e-12)


def test_cli_sweep_to_file(tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", "--atten", "5,20", "--out", str(out), "--set", "f_ir=1.25"]) == 0
    text = out.read_text()
    assert "# f_ir = 1.25" in text
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    assert len(body) == 3


def test_cli_rejects_bad_config(capsys):
    assert main(["sweep", "--set", "efficiency=1.5"]) == 2
    assert "efficiency" in capsys.readouterr().err
    assert main(["sweep", "--set", "nonsense"]) == 2


def test_cli_compare_exit_code(capsys):
    code = main(["compare"])
    text = capsys.readouterr().out
    assert "overall:" in text
    assert code == (0 if text.rstrip().endswith("PASS") else 1)
    assert main(["compare", "--set", "qber_override=0.05"]) == 1


def test_cli_trace(tmp_path, capsys):
    out = tmp_path / "trace.csv"
    assert main(["trace", "--atten", "10", "--duration", "0.005", "--out", str(out)]) == 0
    assert out.read_text().startswith("bin,time_ps")
    assert "peak ratio" in capsys.readouterr().err
