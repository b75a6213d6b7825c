"""Command line driver: schemas, outputs, determinism, exit codes."""

import hashlib
import json

import numpy as np
import pytest

from radhydro import cli, solver
from radhydro.model import PhysicalParams


def invoke(tmp_path, command, doc, seed=None, outname="out"):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(doc))
    out = tmp_path / outname
    args = [command, "--config", str(cfg), "--out", str(out)]
    if seed is not None:
        args += ["--seed", str(seed)]
    return cli.main(args), out


# ---------------------------------------------------------------------------
# invocation and validation failures
# ---------------------------------------------------------------------------

def test_missing_config_exits_1_without_outputs(tmp_path):
    out = tmp_path / "out"
    code = cli.main(["symbol", "--config", str(tmp_path / "nope.json"),
                     "--out", str(out)])
    assert code == 1
    assert not out.exists()


def test_unknown_sections_and_keys_rejected(tmp_path):
    for doc in ({"extra": {}}, {"grid": {"m": 3}}, {"run": {"dt": 0.1, "x": 1}}):
        code, out = invoke(tmp_path, "simulate", doc)
        assert code == 1
        assert not out.exists()


def test_malformed_json_exits_1(tmp_path):
    cfg = tmp_path / "broken.json"
    cfg.write_text("{\"grid\": ")
    assert cli.main(["symbol", "--config", str(cfg),
                     "--out", str(tmp_path / "o")]) == 1


def test_invalid_value_exits_1(tmp_path):
    code, _ = invoke(tmp_path, "simulate", {"run": {"dt": -1.0}})
    assert code == 1


def test_missing_command_and_unknown_command(tmp_path):
    assert cli.main([]) == 1
    assert cli.main(["frobnicate"]) == 1
    assert cli.main(["--help"]) == 0


def test_energy_without_heat_conduction_exits_1(tmp_path):
    code, _ = invoke(tmp_path, "energy", {"params": {"kappa": 0.0}})
    assert code == 1


def test_lp_unresolvable_band_exits_1(tmp_path):
    code, _ = invoke(tmp_path, "lp", {"grid": {"n": 32}})
    assert code == 1


# ---------------------------------------------------------------------------
# symbol
# ---------------------------------------------------------------------------

def test_symbol_outputs(tmp_path):
    code, out = invoke(tmp_path, "symbol", {"symbol": {"n_rho": 6}})
    assert code == 0
    eig = (out / "eigenvalues.csv").read_text().splitlines()
    assert eig[0].startswith("rho,re_lambda_1,im_lambda_1")
    assert eig[1] == "0,0,0,0,0,0,0,3.6666666666666665,0"
    assert len(eig) == 1 + 1 + 6  # header + rho=0 + grid
    hur = (out / "hurwitz.csv").read_text().splitlines()
    assert hur[0] == "rho,a_1,a_2,a_3,a_4,a21,a22,a23,abscissa"
    assert len(hur) == 1 + 6  # the chain exists on rho > 0 only
    for line in hur[1:]:
        vals = [float(v) for v in line.split(",")]
        assert all(v > 0.0 for v in vals[1:5])  # a_1..a_4
        assert vals[-1] > 0.0  # abscissa
    manifest = json.loads((out / "run_manifest.json").read_text())
    resolved = (out / "resolved_config.json").read_bytes()
    assert manifest["config_sha256"] == hashlib.sha256(resolved).hexdigest()
    assert set(manifest) == {"command", "config_sha256", "version",
                             "wall_time_seconds"}


def test_symbol_deterministic_bytes(tmp_path):
    doc = {"symbol": {"n_rho": 4}, "params": {"sigma_a": 2.0}}
    _, out1 = invoke(tmp_path, "symbol", doc, outname="a")
    _, out2 = invoke(tmp_path, "symbol", doc, outname="b")
    for name in ("eigenvalues.csv", "hurwitz.csv", "resolved_config.json"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    m1 = json.loads((out1 / "run_manifest.json").read_text())
    m2 = json.loads((out2 / "run_manifest.json").read_text())
    assert m1["config_sha256"] == m2["config_sha256"]


def test_seventeen_digit_float_formatting(tmp_path):
    _, out = invoke(tmp_path, "symbol", {"symbol": {"n_rho": 2}})
    resolved = (out / "resolved_config.json").read_text()
    assert "6.2831853071795862" in resolved  # 2 pi at 17 significant digits
    assert resolved.endswith("\n") and "\r" not in resolved


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def test_simulate_outputs_and_snapshot_round_trip(tmp_path):
    doc = {"grid": {"n": 32}, "run": {"dt": 0.05, "t_end": 0.2,
                                      "cadence": 2, "seed": 3,
                                      "profile": "random-band"}}
    code, out = invoke(tmp_path, "simulate", doc)
    assert code == 0
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0].split(",")[:7] == ["time", "grad0", "grad1", "grad2",
                                      "grad3", "grad4", "h4"]
    assert len(lines) == 1 + 3  # samples at t = 0, 0.1, 0.2
    header, fields = cli.read_snapshot(out / "final_state.bin")
    assert header["dim"] == 2 and header["N"] == 32
    assert header["fields"] == ["rho", "u0", "u1", "theta", "j0"]
    assert header["time"] == pytest.approx(0.2)
    # the snapshot stores the exact final state of the same seeded run
    config = solver.RunConfig(params=PhysicalParams(), dt=0.05, t_end=0.2,
                              dim=2, n=32, profile="random-band",
                              epsilon=1e-3, seed=3, cadence=2)
    traj = solver.run(config)
    np.testing.assert_array_equal(fields["rho"], traj.final_state.rho)
    np.testing.assert_array_equal(fields["u1"], traj.final_state.u[1])
    np.testing.assert_array_equal(fields["j0"], traj.final_state.j0)


def test_simulate_aborted_run_exits_2(tmp_path):
    doc = {"grid": {"n": 32}, "run": {"dt": 1.0, "t_end": 3.0}}
    code, out = invoke(tmp_path, "simulate", doc)
    assert code == 2
    abort = json.loads((out / "abort.json").read_text())
    assert abort["time"] >= 0.0 and "budget" in abort["reason"]
    assert (out / "trajectory.csv").exists()
    assert (out / "final_state.bin").exists()


# ---------------------------------------------------------------------------
# lp and energy
# ---------------------------------------------------------------------------

def test_lp_report_and_seed_override(tmp_path):
    code, out = invoke(tmp_path, "lp", {})
    assert code == 0
    report = json.loads((out / "lp_report.json").read_text())
    assert report["reconstruction_error"] < 1e-12
    assert report["plancherel_defect"] < 1e-10
    for s in (0, 1, 2):
        assert 0.5 <= report[f"besov_ratio_s{s}"] <= 2.0
    shells = (out / "shells.csv").read_text().splitlines()
    assert shells[0] == "k,shell_l2"
    assert len(shells) == 1 + (report["k_max"] - report["k_min"] + 1)

    _, out_b = invoke(tmp_path, "lp", {}, outname="same")
    assert (out / "lp_report.json").read_bytes() \
        == (out_b / "lp_report.json").read_bytes()
    _, out_c = invoke(tmp_path, "lp", {}, seed=5, outname="reseeded")
    resolved = json.loads((out_c / "resolved_config.json").read_text())
    assert resolved["run"]["seed"] == 5
    assert (out / "lp_report.json").read_bytes() \
        != (out_c / "lp_report.json").read_bytes()


def test_energy_outputs(tmp_path):
    code, out = invoke(tmp_path, "energy", {})
    assert code == 0
    consts = json.loads((out / "energy_constants.json").read_text())
    assert consts["beta1"] == pytest.approx(3.0 / 8.0)
    assert consts["low_freq_rate"] > 0.0
    assert consts["equiv_high"] >= 1.0
    report = json.loads((out / "energy_report.json").read_text())
    assert report["Theta_norm"] > 0.0 and report["Xi_norm"] > 0.0
    low = (out / "low_modes.csv").read_text().splitlines()
    assert low[0] == "rho_freq,L_low"
    assert len(low) > 1
    assert (out / "energy_shells.csv").read_text().splitlines()[0] \
        == "k,L_shell,H_shell"


# ---------------------------------------------------------------------------
# semigroup-decay and verify-rates
# ---------------------------------------------------------------------------

def test_semigroup_decay_outputs(tmp_path):
    doc = {"fit": {"t_max": 1000.0, "n_times": 9}}
    code, out = invoke(tmp_path, "semigroup-decay", doc)
    assert code == 0
    lines = (out / "semigroup_norms.csv").read_text().splitlines()
    assert lines[0] == "t,m0,m1,m2,xi0,dt_hydro,dt_thermo"
    assert len(lines) == 1 + 9
    slopes = json.loads((out / "slopes.json").read_text())
    assert set(slopes) == {"m0", "m1", "m2", "xi0", "dt_hydro", "dt_thermo"}
    assert slopes["m0"] == pytest.approx(-0.765, abs=0.05)
    assert slopes["xi0"] < slopes["m0"] - 0.4


def test_verify_rates_default_style_run_passes(tmp_path):
    doc = {"fit": {"t_max": 1000.0, "n_times": 9, "m_list": [0]}}
    code, out = invoke(tmp_path, "verify-rates", doc)
    assert code == 0
    records = json.loads((out / "rates.json").read_text())
    assert len(records) == 8  # (1 field + 1 Xi + 2 d/dt) x two variants
    for rec in records:
        assert set(rec) == {"quantity", "slope", "target", "tolerance", "pass"}
        assert rec["pass"] is True
    assert sum(r["quantity"].startswith("kappa=0:") for r in records) == 4


def test_verify_rates_failed_report_exits_2(tmp_path):
    doc = {"fit": {"t_max": 1000.0, "n_times": 9, "m_list": [0],
                   "tolerance": 1e-3, "include_kappa_zero": False}}
    code, out = invoke(tmp_path, "verify-rates", doc)
    assert code == 2
    records = json.loads((out / "rates.json").read_text())
    assert any(not r["pass"] for r in records)
