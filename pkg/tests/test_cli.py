import csv
import json
import math
from importlib.resources import files

import pytest

from heraldbell import cli, planner, verify
from heraldbell.planner import ExperimentParams

BOOSTED = str(files("heraldbell") / "data" / "boosted.ini")
BASELINE = str(files("heraldbell") / "data" / "baseline.ini")


def _write(tmp_path, text, name="c.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_plan_baseline_table(capsys):
    assert cli.main(["plan", "--config", BASELINE]) == 0
    out = capsys.readouterr().out
    assert "S_exp" in out and "2.7273" in out
    assert "V_at" in out and "0.9662" in out


def test_plan_json_has_resolved_params(tmp_path):
    out = tmp_path / "r.json"
    assert cli.main(["plan", "--out", str(out), "--quiet"]) == 0
    d = json.loads(out.read_text())
    assert d["report"]["S_exp"] == pytest.approx(2.7273, abs=1e-4)
    assert d["params"] == ExperimentParams().to_dict()


def test_plan_zero_detection(tmp_path, capsys):
    code = cli.main(["plan", "--config", _write(tmp_path, "[detection]\neta_d = 0\n")])
    out = capsys.readouterr().out
    assert code == 0
    assert "infinite acquisition" in out


def test_plan_domain_error(tmp_path, capsys):
    assert cli.main(["plan", "--config", _write(tmp_path, "[source]\np = 1.5\n")]) == 3
    assert "p = 1.5" in capsys.readouterr().err


def test_plan_parse_error(tmp_path, capsys):
    path = _write(tmp_path, "[source]\n\nfoo = 1\n")
    assert cli.main(["plan", "--config", path]) == 2
    err = capsys.readouterr().err
    assert f"{path}:3" in err and "foo" in err


def test_global_flags_before_subcommand(tmp_path):
    out = tmp_path / "p.json"
    assert cli.main(["--quiet", "--out", str(out), "plan"]) == 0
    assert out.exists()


def test_simulate_conditioned(tmp_path):
    prefix = tmp_path / "run"
    code = cli.main(["simulate", "--mode", "conditioned", "--heralds", "100000", "--seed", "42",
                     "--out", str(prefix), "--quiet"])
    assert code == 0
    d = json.loads((tmp_path / "run.json").read_text())
    est = d["chsh_estimate"]
    assert abs(est["S"] - 2.73) <= 4 * est["std_error"]
    assert est["N"] == 100_000 and est["p_value_bound"] is not None
    assert d["loophole"]["ordering_ok"] and d["loophole"]["locality_ok"]
    assert d["params"] == ExperimentParams().to_dict()
    assert d["resolved_simulation"]["seed"] == 42
    assert set(d["summary"]) >= {"counts_by_cause", "outcome_table", "elapsed_seconds", "seed", "mode"}
    with open(tmp_path / "run.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 100_000


def test_simulate_byte_identical(tmp_path, monkeypatch):
    texts = []
    for k, threads in enumerate(("1", "0", "4")):
        monkeypatch.setenv("HBS_THREADS", threads)
        prefix = tmp_path / f"r{k}"
        assert cli.main(["simulate", "--heralds", "20000", "--seed", "7", "--out", str(prefix), "--quiet"]) == 0
        texts.append((tmp_path / f"r{k}.csv").read_bytes())
    assert texts[0] == texts[1] == texts[2]


def test_simulate_full_boosted(tmp_path):
    prefix = tmp_path / "b"
    assert cli.main(["simulate", "--config", BOOSTED, "--mode", "full", "--trials", "1000000",
                     "--out", str(prefix), "--quiet"]) == 0
    d = json.loads((tmp_path / "b.json").read_text())
    frac, p = d["herald_fraction"], d["herald_fraction_expected"]
    assert abs(frac - p) <= 5 * math.sqrt(p * (1 - p) / 1_000_000)
    # fixed trial count: the number of events was not fixed in advance
    assert d["chsh_estimate"]["p_value_bound"] is None and d["p_value_note"]


def test_simulate_unreachable(tmp_path, capsys):
    path = _write(tmp_path, "[detection]\neta_d = 0\ndark_rate = 0\n")
    assert cli.main(["simulate", "--config", path, "--heralds", "5", "--quiet"]) == 4
    path = _write(tmp_path, "[detection]\neta_d = 0\n[simulation]\nmax_attempts = 100000\n", "d.ini")
    assert cli.main(["simulate", "--config", path, "--mode", "full", "--heralds", "1", "--quiet"]) == 4
    assert "unreachable" in capsys.readouterr().err


def test_simulate_needs_stop_rule(tmp_path):
    assert cli.main(["simulate", "--config", _write(tmp_path, "[source]\np = 0.004\n")]) == 2


def test_simulate_bad_mode_in_config(tmp_path):
    path = _write(tmp_path, "[simulation]\nmode = sideways\nn_heralds = 10\n")
    assert cli.main(["simulate", "--config", path, "--quiet"]) == 3


def test_simulate_stop_rule_from_config(tmp_path):
    path = _write(tmp_path, "[simulation]\nn_heralds = 100\nseed = 3\n")
    prefix = tmp_path / "s"
    assert cli.main(["simulate", "--config", path, "--out", str(prefix), "--quiet"]) == 0
    assert json.loads((tmp_path / "s.json").read_text())["summary"]["n_heralded"] == 100


def test_sweep(tmp_path, capsys):
    out = tmp_path / "sweep.csv"
    assert cli.main(["sweep", "--param", "p", "--from", "1e-4", "--to", "2e-2", "--steps", "50",
                     "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 50
    vat = [float(r["V_at"]) for r in rows]
    ph = [float(r["p_herald"]) for r in rows]
    assert all(b < a for a, b in zip(vat, vat[1:]))
    assert all(b > a for a, b in zip(ph, ph[1:]))
    times = [float(r["T_acq_pvalue"]) for r in rows]
    best = min(range(50), key=times.__getitem__)
    printed = capsys.readouterr().out
    assert f"best p = {float(rows[best]['p']):.4g}" in printed
    assert f"{times[best]:.4g} s" in printed


def test_sweep_errors():
    assert cli.main(["sweep", "--param", "eta_d"]) == 3
    assert cli.main(["sweep", "--from", "0", "--quiet"]) == 3


def test_verify_passes(capsys):
    assert cli.main(["verify"]) == 0
    out = capsys.readouterr().out
    assert out.count("[PASS]") >= 9 and "[FAIL]" not in out
    # both the reference and the computed value per row
    assert "S_exp = 2.72729 (expected 2.73 +- 0.02)" in out


def test_verify_detects_tampering(monkeypatch, capsys):
    monkeypatch.setattr(verify, "BASELINE", ExperimentParams(eta_abs=0.03))
    assert cli.main(["verify", "--quiet"]) == 1
    out = capsys.readouterr().out
    assert "[FAIL] 1 planner baseline" in out and "FAILED: 1 planner baseline" in out


def test_module_entry_point():
    import runpy
    import sys
    argv = sys.argv
    sys.argv = ["hbs", "plan", "--quiet"]
    try:
        with pytest.raises(SystemExit) as info:
            runpy.run_module("heraldbell", run_name="__main__")
        assert info.value.code == 0
    finally:
        sys.argv = argv


def test_planner_constants_unchanged():
    assert planner.C_VACUUM == 2.998e8
