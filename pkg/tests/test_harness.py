import json
import math
from pathlib import Path

import numpy as np
import pytest

from schrodev import run
from schrodev.cli import main as cli_main
from schrodev.config import ConfigError, config_hash, load_config, validate_config
from schrodev.experiments import (formula_check_value, fw_check,
                                  lil_cluster_check, loglog_bound,
                                  mdp_tail_scan, modulus_tail_check,
                                  wilson_interval)
from conftest import build_model


def base_config(**experiment):
    return {
        "basis": {"J": 1},
        "spectrum": {"law": "power", "exponent": 2.0, "scale": 1.0},
        "coefficients": {"alpha": 1.0, "beta": 0.0, "potential": {"kind": "zero"}},
        "integrator": {"dt": 1e-3, "T": 1.0},
        "experiment": experiment,
        "seed": 42,
    }


def write_config(tmp_path, cfg, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


# -- config ------------------------------------------------------------------


def test_validate_rejects_unknown_keys():
    cfg = base_config(kind="rate", terminal=[[0.1, 0.0]])
    cfg["extra"] = 1
    with pytest.raises(ConfigError):
        validate_config(cfg)


def test_validate_reports_pointer_paths():
    cfg = base_config(kind="tail_scan", epsilons=[0.1, 0.01, 0.001],
                      rho=0.5, paths=10)
    with pytest.raises(ConfigError) as err:
        validate_config(cfg)
    assert "/experiment" in str(err.value)


def test_validate_spectrum_exponent():
    cfg = base_config(kind="rate", terminal=[[0.1, 0.0]])
    cfg["spectrum"]["exponent"] = 1.0
    with pytest.raises(ConfigError) as err:
        validate_config(cfg)
    assert "/spectrum/exponent" in str(err.value)


def test_config_hash_is_canonical():
    a = validate_config(base_config(kind="rate", terminal=[[0.1, 0.0]]))
    b = validate_config(base_config(kind="rate", terminal=[[0.1, 0.0]]))
    assert config_hash(a) == config_hash(b)
    b["seed"] = 43
    assert config_hash(a) != config_hash(b)


def test_malformed_config_exits_one_without_outputs(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    out = tmp_path / "out"
    assert run(path, out=str(out)) == 1
    assert not out.exists()

    cfg = base_config(kind="tail_scan", epsilons=[0.1], rho=0.5, paths=10)
    assert run(write_config(tmp_path, cfg), out=str(out)) == 1
    assert not out.exists()


# -- statistics helpers --------------------------------------------------------


def test_wilson_interval_contains_phat():
    for hits, n in [(0, 50), (3, 50), (25, 50), (50, 50)]:
        lo, hi = wilson_interval(hits, n)
        assert lo <= hits / n <= hi
        assert 0.0 <= lo <= hi <= 1.0


def test_wilson_width_sqrt_n_law():
    widths = []
    for n in (1000, 2000):
        lo, hi = wilson_interval(int(0.2 * n), n)
        widths.append(hi - lo)
    assert widths[0] / widths[1] == pytest.approx(math.sqrt(2.0), rel=0.1)


def test_loglog_bound_formula_value():
    # at eps = e^-10 and R=1: exp(-2 loglog e^10) = 10^-2, exactly
    assert formula_check_value(math.e, 10, 1.0) == 0.01
    assert loglog_bound(math.exp(-10.0), 1.0) == pytest.approx(0.01, abs=1e-15)


# -- experiment drivers --------------------------------------------------------


def test_tail_scan_deterministic_flag():
    model = build_model(J=1, dt=1e-2, T=1.0, alpha=0.0, beta=0.0)
    rep = mdp_tail_scan(model, epsilons=[1e-2, 1e-3, 1e-4, 1e-5], rho=0.1,
                        paths=20, scale_cfg={"mode": "power"}, seed=1)
    assert rep.status == "deterministic"
    assert rep.slope is None
    assert all(e.censored for e in rep.estimates)


def test_tail_scan_insufficient_cells():
    model = build_model(J=1, dt=1e-2, T=1.0)
    # rho large enough that only the weakest-noise cells ever hit
    rep = mdp_tail_scan(model, epsilons=[1e-2, 1e-3, 1e-4, 1e-5], rho=0.75,
                        paths=60, scale_cfg={"mode": "power"}, seed=5)
    assert rep.status == "insufficient_uncensored_cells"
    assert rep.verdict == "FAIL"


def test_fw_check_trivial_pass():
    model = build_model(J=2, dt=1e-2, T=1.0, beta=0.25,
                        potential="imaginary_sine")
    rep = fw_check(model, epsilons=[1e-4, 1e-5], rho=1000.0, eta=None,
                   rate=0.5, paths=120, seed=3)
    assert rep.passed and rep.monotone
    assert all(r["joint_hits"] == 0 for r in rep.rows)


def test_fw_check_starved_conditioning():
    model = build_model(J=2, dt=1e-2, T=1.0)
    rep = fw_check(model, epsilons=[1e-4], rho=0.5, eta=1e-6, rate=0.5,
                   paths=30, seed=3)
    assert rep.starved and rep.starved[0]["qualifying"] == 0


def test_fw_check_monotone_counts():
    model = build_model(J=1, dt=1e-2, T=1.0)
    rep = fw_check(model, epsilons=[1e-4, 1e-5], rho=0.3, eta=None, rate=0.5,
                   paths=400, seed=9)
    for row in rep.rows:
        assert row["joint_hits_wide"] <= row["joint_hits"]
    assert rep.monotone


def test_lil_zero_noise_recurs_every_j():
    model = build_model(J=2, dt=1e-2, T=1.0, alpha=0.0, beta=0.0)
    rep = lil_cluster_check(model, c=3.0, j_min=8, j_max=12, budget=1.0,
                            certificates=1, seed=4)
    assert rep.recurrence_counts[0] == len(rep.j_values)
    assert rep.escape_count == 0
    assert all(r["dist_zero"] == 0.0 for r in rep.rows)


def test_lil_degenerate_budget_counts_sup_exceedances():
    model = build_model(J=2, dt=1e-2, T=1.0)
    delta = 0.8
    rep = lil_cluster_check(model, c=3.0, j_min=8, j_max=14, budget=1e-12,
                            certificates=1, delta_rec=delta, delta_esc=delta,
                            seed=4)
    sups = np.array([r["dist_zero"] for r in rep.rows])
    assert rep.escape_count == int(np.sum(sups > delta))


def test_lil_scale_guard():
    model = build_model(J=1, dt=1e-2, T=1.0)
    from schrodev import ScaleError
    with pytest.raises(ScaleError):
        lil_cluster_check(model, c=3.0, j_min=2, j_max=8, budget=1.0, seed=0)


def test_modulus_trivial_cases():
    # beta above any observed modulus: zero probability, huge sustained rate
    model = build_model(J=1, dt=1.0 / 256, T=1.0)
    rep = modulus_tail_check(model, level=3, epsilons=[1e-4, 1e-5],
                             threshold=1e3, rate=0.5, paths=50, seed=6)
    assert all(r["hits"] == 0 for r in rep.rows)
    assert rep.largest_rate_sustained > 0.5

    # g = 0 and h = 0: constant (zero) paths, modulus 0
    dead = build_model(J=1, dt=1.0 / 256, T=1.0, alpha=0.0, beta=0.0)
    rep = modulus_tail_check(dead, level=3, epsilons=[1e-4], threshold=1e-9,
                             rate=0.5, paths=20, seed=6)
    assert rep.rows[0]["hits"] == 0


def test_modulus_matches_direct_simulation_oracle():
    # additive single-mode case: compare the tail frequency against an
    # independent run of the same law (block-maximum Monte Carlo oracle)
    model = build_model(J=1, dt=1.0 / 512, T=1.0)
    eps = 1e-4
    kwargs = dict(level=4, epsilons=[eps], threshold=1.0, rate=0.5, paths=800)
    a = modulus_tail_check(model, seed=100, **kwargs).rows[0]
    b = modulus_tail_check(model, seed=200, **kwargs).rows[0]
    p = (a["phat"] + b["phat"]) / 2
    se = math.sqrt(2 * p * (1 - p) / 800)
    assert abs(a["phat"] - b["phat"]) <= 3 * se + 1e-12


# -- runner and CLI -------------------------------------------------------------


def tail_scan_config(paths=400):
    return base_config(kind="tail_scan", epsilons=[1e-2, 1e-3, 1e-4, 1e-5],
                       rho=0.25, paths=paths,
                       scale={"mode": "power", "exponent": 0.25})


def test_run_writes_artifacts_and_is_deterministic(tmp_path):
    cfg_path = write_config(tmp_path, tail_scan_config())
    out1, out2, out3 = (tmp_path / d for d in ("o1", "o2", "o3"))
    assert run(cfg_path, out=str(out1), threads=1) in (0, 2)
    assert run(cfg_path, out=str(out2), threads=1) in (0, 2)
    assert run(cfg_path, out=str(out3), threads=8) in (0, 2)
    b1 = (out1 / "results.csv").read_bytes()
    assert b1 == (out2 / "results.csv").read_bytes()
    assert b1 == (out3 / "results.csv").read_bytes()
    assert b"\r\n" in b1
    manifest = json.loads((out1 / "manifest.json").read_text())
    assert manifest["seed"] == 42
    assert "config_hash" in manifest and "versions" in manifest
    report = json.loads((out1 / "report.json").read_text())
    assert report["condition_audit"]["passed"]
    assert (out1 / "tail_fit.dat").exists()


def test_seed_override_changes_results(tmp_path):
    cfg_path = write_config(tmp_path, tail_scan_config())
    out1, out2 = tmp_path / "a", tmp_path / "b"
    run(cfg_path, out=str(out1))
    run(cfg_path, seed=43, out=str(out2))
    assert (out1 / "results.csv").read_bytes() != (out2 / "results.csv").read_bytes()


def test_simulate_and_skeleton_export(tmp_path):
    cfg = base_config(kind="simulate", equation="moderate", epsilon=1e-4,
                      scale={"mode": "lil"}, path_index=0)
    cfg["basis"] = {"J": 2}
    cfg["integrator"] = {"dt": 1e-2, "T": 1.0}
    out = tmp_path / "sim"
    assert run(write_config(tmp_path, cfg), out=str(out)) == 0
    header = (out / "results.csv").read_text().splitlines()[0]
    assert header.split(",")[:3] == ["t", "re_c1", "im_c1"]
    assert len((out / "results.csv").read_bytes().split(b"\r\n")) >= 101

    cfg2 = base_config(kind="skeleton",
                       control={"kind": "single_mode", "mode": 1,
                                "amplitude": 1.0, "profile": "constant"})
    cfg2["integrator"] = {"dt": 1e-2, "T": 1.0}
    out2 = tmp_path / "sk"
    assert run(write_config(tmp_path, cfg2, "sk.json"), out=str(out2)) == 0
    report = json.loads((out2 / "report.json").read_text())
    assert report["control_energy"] == pytest.approx(1.0)


def test_rate_experiment(tmp_path):
    cfg = base_config(kind="rate", terminal=[[0.3, 0.4]])
    out = tmp_path / "rate"
    assert run(write_config(tmp_path, cfg), out=str(out)) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["action"]["value"] == pytest.approx(0.125, rel=1e-6)
    assert report["control_ref"] == "control.csv"
    assert (out / "control.csv").exists()


def test_fw_check_run_exit_codes(tmp_path):
    cfg = base_config(kind="fw_check", epsilons=[1e-4, 1e-5], rho=1000.0,
                      eta=None, R=0.5, paths=120, control=None)
    out = tmp_path / "fw"
    assert run(write_config(tmp_path, cfg), out=str(out)) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"] == "PASS"
    assert report["fw_check"]["formula_check"]["value"] == 0.01

    # an impossible bound: rate so large every cell fails
    cfg_fail = base_config(kind="fw_check", epsilons=[1e-4], rho=1e-6,
                           eta=None, R=50.0, paths=30, control=None)
    out2 = tmp_path / "fw2"
    assert run(write_config(tmp_path, cfg_fail, "f.json"), out=str(out2)) == 2
    assert json.loads((out2 / "report.json").read_text())["verdict"] == "FAIL"


def test_cli_subcommand_mismatch(tmp_path, capsys):
    cfg_path = write_config(tmp_path, tail_scan_config())
    assert cli_main(["fw-check", "--config", str(cfg_path)]) == 1
    assert "/experiment/kind" in capsys.readouterr().err


def test_cli_runs_rate(tmp_path):
    cfg = base_config(kind="rate", terminal=[[0.1, 0.0]])
    cfg_path = write_config(tmp_path, cfg)
    out = tmp_path / "cli_rate"
    assert cli_main(["rate", "--config", str(cfg_path), "--out", str(out)]) == 0
    assert (out / "report.json").exists()


def test_audit_failure_blocks_everything(tmp_path, monkeypatch):
    import schrodev.runner as runner_mod
    from schrodev.coefficients import AuditResult

    def failing_audit(*args, **kwargs):
        return AuditResult(passed=False, slacks={"k1": -1.0}, constants={},
                           samples=1)

    monkeypatch.setattr(runner_mod, "audit_conditions", failing_audit)
    cfg_path = write_config(tmp_path, tail_scan_config(paths=10))
    out = tmp_path / "blocked"
    assert run(cfg_path, out=str(out)) == 2
    report = json.loads((out / "report.json").read_text())
    assert report["verdict"] == "FAIL"
    assert not report["condition_audit"]["passed"]


def test_demo_configs_validate():
    for name in ("tail_scan_demo", "fw_check_demo", "lil_demo", "modulus_demo",
                 "simulate_demo", "skeleton_demo", "rate_demo"):
        cfg = load_config(Path(__file__).parent.parent / "configs" / f"{name}.json")
        assert cfg["experiment"]["kind"] in name or name.startswith(
            cfg["experiment"]["kind"])
