import ast
import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import blfsim.checks as checks
import blfsim.cli as cli_mod
import blfsim.control_law as cl
from blfsim.cli import RunReport, resolve_scenario, write_csv
from blfsim.errors import ConfigError
from blfsim.scenario import (
    apply_override,
    build_config,
    config_digest,
    load_scenario,
    parse_override,
)

from conftest import SCENARIOS, cli, load_config


# --- overrides ---------------------------------------------------------------

def test_parse_override_toml_typed():
    assert parse_override("a=1") == ("a", 1)
    assert parse_override("a=1.5") == ("a", 1.5)
    assert parse_override("a=true") == ("a", True)
    assert parse_override("a=[1, 2.5]") == ("a", [1, 2.5])
    assert parse_override('a="builtin:benchmark3"') == ("a", "builtin:benchmark3")
    assert parse_override("x.y=1e-9") == ("x.y", 1e-9)


def test_parse_override_errors():
    with pytest.raises(ConfigError, match="key=value"):
        parse_override("novalue")
    with pytest.raises(ConfigError, match="cannot parse"):
        parse_override("a=[1,")
    with pytest.raises(ConfigError, match="empty key"):
        parse_override("=3")


def test_apply_override_paths():
    doc = {"controller": {"k": [1.0, 2.0, 3.0]}}
    apply_override(doc, "controller.k.1", 9.0)
    assert doc["controller"]["k"] == [1.0, 9.0, 3.0]
    apply_override(doc, "integration.dt", 1e-3)
    assert doc["integration"]["dt"] == 1e-3
    apply_override(doc, "controller.k", 5)
    assert doc["controller"]["k"] == 5


def test_apply_override_errors():
    doc = {"controller": {"k": [1.0], "rho": 0.5}}
    with pytest.raises(ConfigError, match="out of range"):
        apply_override(doc, "controller.k.3", 1.0)
    with pytest.raises(ConfigError, match="array index"):
        apply_override(doc, "controller.k.x", 1.0)
    with pytest.raises(ConfigError, match="scalar"):
        apply_override(doc, "controller.rho.deep", 1.0)


# --- schema ------------------------------------------------------------------

def chain_doc():
    return load_scenario(SCENARIOS / "chain3.scenario")


def test_unknown_section_rejected():
    doc = chain_doc()
    doc["typo"] = {}
    with pytest.raises(ConfigError, match=r"unknown section \[typo\]"):
        build_config(doc)


def test_unknown_key_rejected_with_allowed_list():
    doc = chain_doc()
    doc["controller"]["gain"] = 1.0
    with pytest.raises(ConfigError, match="allowed.*k_eps"):
        build_config(doc)


def test_unknown_envelope_key_rejected():
    doc = chain_doc()
    doc["constraints"]["envelope"][0]["slope"] = 1.0
    with pytest.raises(ConfigError, match=r"envelope\[0\]"):
        build_config(doc)


def test_builtin_and_expr_are_exclusive():
    doc = chain_doc()
    doc["constraints"]["envelope"][0]["builtin"] = "benchmark3_x1"
    with pytest.raises(ConfigError, match="exclusive"):
        build_config(doc)


def test_missing_required_key():
    doc = chain_doc()
    del doc["trajectory"]["yd"]
    with pytest.raises(ConfigError, match="trajectory.yd"):
        build_config(doc)


def test_scalar_broadcast_and_defaults():
    doc = chain_doc()
    doc["controller"]["zeta0"] = 0.25
    del doc["network"]["eta"]
    config, opts, box = build_config(doc, default_csv="fallback.csv")
    assert config.zeta0 == (0.25, 0.25, 0.25)
    assert config.eta == (0.1, 0.1, 0.1)
    assert opts.csv == "chain3.csv"  # scenario sets its own
    assert box is not None and len(box) == 3


def test_x0_box_validation():
    doc = chain_doc()
    doc["sweep"]["x0_box"] = [[0.0, 1.0]]
    with pytest.raises(ConfigError, match="3"):
        build_config(doc)
    doc["sweep"]["x0_box"] = [[1.0, 0.0]] * 3
    with pytest.raises(ConfigError, match="reversed"):
        build_config(doc)


def test_config_digest_tracks_content():
    a, _, _ = load_config("chain3")
    b, _, _ = load_config("chain3")
    c, _, _ = load_config("chain3", **{"integration.seed": 8})
    assert config_digest(a) == config_digest(b)
    assert config_digest(a) != config_digest(c)
    assert len(config_digest(a)) == 12


# --- scenario resolution -------------------------------------------------------

def test_resolve_scenario_forms(tmp_path, monkeypatch):
    direct = SCENARIOS / "chain3.scenario"
    assert resolve_scenario(str(direct)) == direct
    assert resolve_scenario(str(SCENARIOS / "chain3")) == direct
    monkeypatch.setenv(cli_mod.SCENARIO_DIR_ENV, str(SCENARIOS))
    assert resolve_scenario("chain3") == SCENARIOS / "chain3.scenario"
    with pytest.raises(ConfigError, match="not found"):
        resolve_scenario("missing_scenario_name")


# --- CSV writing ----------------------------------------------------------------

def test_write_csv_format(tmp_path, chain_traj):
    out = tmp_path / "log.csv"
    write_csv(chain_traj, out)
    raw = out.read_bytes()
    assert b"\r" not in raw  # LF only, on every platform
    lines = raw.decode().splitlines()
    assert lines[0] == ",".join(chain_traj.columns)
    assert len(lines) == chain_traj.data.shape[0] + 1
    # 12 significant digits round-trip float64 comfortably for these scales
    back = np.genfromtxt(out, delimiter=",", names=True)
    for j, name in enumerate(chain_traj.columns):
        assert np.allclose(back[name], chain_traj.data[:, j],
                           rtol=1e-11, atol=1e-13, equal_nan=True)


def test_report_emit_lines(capsys):
    rep = RunReport(
        status="ok", engine="python", steps_done=10, steps_total=10,
        wall_clock_s=0.5, config_digest="abc123", seed=7, csv="x.csv",
        metrics={"u_sup": 1.23456789, "wnorm_sup": [1.0, 2.0]},
        violation=None, divergence=None,
    )
    rep.emit()
    out = capsys.readouterr().out.splitlines()
    assert "status: ok" in out
    assert "steps: 10/10" in out
    assert "metric u_sup: 1.23457" in out
    assert "metric wnorm_sup: 1 2" in out


# --- CLI: run -------------------------------------------------------------------

def test_cli_run_ok_writes_csv_and_report(run_cli):
    r = run_cli("run", SCENARIOS / "chain3", "--set", "integration.t_final=0.5",
                "--csv", "out.csv")
    assert r.returncode == 0, r.stderr
    assert "status: ok" in r.stdout
    assert "engine: python" in r.stdout
    assert "steps: 500/500" in r.stdout
    csv_path = run_cli.cwd / "out.csv"
    assert csv_path.is_file()
    header = csv_path.read_text().splitlines()[0].split(",")
    assert len(header) == 3 + 8 * 3
    assert header[:6] == ["t", "x1", "x2", "x3", "u", "yd"]
    rows = csv_path.read_text().splitlines()
    assert len(rows) == 1 + 500 // 10 + 1


def test_cli_run_violation_exit_2(run_cli):
    r = run_cli("run", SCENARIOS / "benchmark3")
    assert r.returncode == 2
    assert "status: violated" in r.stdout
    assert "violation: kind=barrier loop=3" in r.stdout
    assert "t=0.000500" in r.stdout


def test_cli_run_initial_gate_exit_1_no_csv(run_cli):
    r = run_cli("run", SCENARIOS / "chain3",
                "--set", "system.x0=[1.6, 0.0, 0.0]", "--csv", "gated.csv")
    assert r.returncode == 1
    assert "infeasible start" in r.stderr
    assert not (run_cli.cwd / "gated.csv").exists()


def test_cli_run_unknown_key_exit_1(run_cli):
    r = run_cli("run", SCENARIOS / "chain3", "--set", "controller.zz=1")
    assert r.returncode == 1
    assert "error:" in r.stderr
    assert "unknown key" in r.stderr


def test_cli_run_engine_mismatch_exit_1(run_cli):
    r = run_cli("run", SCENARIOS / "chain3", "--engine", "compiled")
    assert r.returncode == 1
    assert "only supports" in r.stderr


def test_cli_run_env_dir_resolution(run_cli):
    env = dict(os.environ)
    env[cli_mod.SCENARIO_DIR_ENV] = str(SCENARIOS)
    r = run_cli("run", "chain3", "--set", "integration.t_final=0.2", env=env)
    assert r.returncode == 0, r.stderr


def test_cli_run_byte_deterministic(run_cli):
    argv = ("run", SCENARIOS / "chain3", "--set", "integration.t_final=1.0")
    r1 = run_cli(*argv, "--csv", "a.csv")
    r2 = run_cli(*argv, "--csv", "b.csv")
    assert r1.returncode == r2.returncode == 0
    a = (run_cli.cwd / "a.csv").read_bytes()
    b = (run_cli.cwd / "b.csv").read_bytes()
    assert a == b


def test_cli_run_emits_plot_script(run_cli):
    r = run_cli("run", SCENARIOS / "chain3", "--set", "integration.t_final=0.2",
                "--csv", "p.csv", "--plot-script")
    assert r.returncode == 0
    script = run_cli.cwd / "p_plot.py"
    assert script.is_file()
    tree = ast.parse(script.read_text())
    assert tree is not None
    body = script.read_text()
    assert body.count("plt.figure()") == 3 + 4  # one per state + u/eps/zeta/wnorm
    assert 'data["yd"]' in body  # reference overlay on the first state figure


# --- CLI: plot ------------------------------------------------------------------

def test_cli_plot_standalone(run_cli):
    run_cli("run", SCENARIOS / "chain3", "--set", "integration.t_final=0.2",
            "--csv", "q.csv")
    r = run_cli("plot", "q.csv")
    assert r.returncode == 0
    assert (run_cli.cwd / "q_plot.py").is_file()
    r2 = run_cli("plot", "missing.csv")
    assert r2.returncode == 1
    assert "not found" in r2.stderr


# --- CLI: sweep -----------------------------------------------------------------

def test_sweep_degenerate_box_reproduces_run(run_cli):
    """Pin the sampling box to the scenario x0: every trial must equal the
    plain run's metrics exactly (same config, same engine, same arithmetic)."""
    r = run_cli("run", SCENARIOS / "chain3", "--csv", "base.csv")
    assert r.returncode == 0
    base = {
        line.split(":")[0].removeprefix("metric ").strip(): line.split(":", 1)[1].strip()
        for line in r.stdout.splitlines() if line.startswith("metric ")
    }
    s = run_cli(
        "sweep", SCENARIOS / "chain3", "--trials", "2", "--out", "deg.csv",
        "--set", "sweep.x0_box=[[0.1, 0.1], [0.0, 0.0], [0.0, 0.0]]",
    )
    assert s.returncode == 0, s.stderr
    rows = (run_cli.cwd / "deg.csv").read_text().splitlines()
    header = rows[0].split(",")
    for line in rows[1:]:
        cells = dict(zip(header, line.split(",")))
        assert cells["status"] == "ok"
        assert float(cells["t_end"]) == 3.0
        assert float(cells["u_sup"]) == pytest.approx(float(base["u_sup"]), rel=1e-6)
        assert float(cells["z1_rms_tail"]) == pytest.approx(
            float(base["z1_rms_tail"]), rel=1e-6
        )


def test_sweep_deterministic_and_parallel_equivalent(run_cli):
    argv = ("sweep", SCENARIOS / "chain3", "--trials", "4", "--seed", "99",
            "--set", "integration.t_final=0.5")
    r1 = run_cli(*argv, "--out", "s1.csv")
    r2 = run_cli(*argv, "--out", "s2.csv")
    r3 = run_cli(*argv, "--out", "s3.csv", "--jobs", "2")
    assert r1.returncode == r2.returncode == r3.returncode == 0
    b1 = (run_cli.cwd / "s1.csv").read_bytes()
    assert b1 == (run_cli.cwd / "s2.csv").read_bytes()
    assert b1 == (run_cli.cwd / "s3.csv").read_bytes()


def test_sweep_grid_exposes_compensation_startup_blowup(run_cli):
    """rho = 0.5 pushes the compensation onto the midpoint of the two roots;
    the large root scales like 1/v1 and slams the loop-1 saturation at the
    first step, so loop 2 dies an order of magnitude earlier than the
    loop-3 death that the near-zero rho setting shows."""
    r = run_cli(
        "sweep", SCENARIOS / "benchmark3", "--trials", "1",
        "--grid", "controller.rho=1e-9,0.5", "--out", "grid.csv",
        "--set", "sweep.x0_box=[[0.5,0.5],[-0.3,-0.3],[0.0,0.0]]",
    )
    assert r.returncode == 0, r.stderr
    rows = (run_cli.cwd / "grid.csv").read_text().splitlines()
    header = rows[0].split(",")
    assert "controller.rho" in header
    recs = [dict(zip(header, line.split(","))) for line in rows[1:]]
    assert len(recs) == 2
    by_rho = {rec["controller.rho"]: rec for rec in recs}
    tiny = by_rho["1e-09"]
    half = by_rho["0.5"]
    assert tiny["status"] == half["status"] == "violated"
    assert int(tiny["violation_loop"]) == 3
    assert int(half["violation_loop"]) == 2
    assert float(half["violation_time"]) < float(tiny["violation_time"])


def test_sweep_rejects_unsatisfiable_box(run_cli):
    # a box entirely outside the feasible tube exhausts the sampler
    r = run_cli(
        "sweep", SCENARIOS / "chain3", "--trials", "1", "--out", "no.csv",
        "--set", "sweep.x0_box=[[1.7, 1.8], [0.0, 0.0], [0.0, 0.0]]",
    )
    assert r.returncode == 1
    assert "no admissible initial state" in r.stderr


# --- CLI: check ------------------------------------------------------------------

def test_check_reports_known_failure_and_exits_1(run_cli):
    """The compensation-guarantee check fails by design (the construction
    cannot enforce its inequality globally; see the worked counterexample in
    the control-law tests), so the pristine tree reports 7/8 and exits 1."""
    r = run_cli("check")
    assert r.returncode == 1
    lines = r.stdout.splitlines()
    assert any(line.startswith("FAIL compensation_descent:") for line in lines)
    for name in ("log_barrier_bound", "saturation_strict", "rk4_order",
                 "observer_consistency", "basis_bound", "barrier_positivity",
                 "tube_chain"):
        assert any(line.startswith(f"PASS {name}:") for line in lines)
    assert "7/8 checks passed" in r.stdout


def test_check_catches_injected_saturation_regression(monkeypatch):
    """Mutate the saturation into a hard clip (closed bound): the strictness
    check must flip to FAIL, proving the checks exercise the live functions."""
    before = {res.name: res.passed for res in checks.run_all()}
    assert before["saturation_strict"] is True

    def hard_clip(v, A):
        return max(-A, min(A, v))

    monkeypatch.setattr(cl, "saturate", hard_clip)
    after = {res.name: res.passed for res in checks.run_all()}
    assert after["saturation_strict"] is False


def test_check_catches_injected_rk4_regression(monkeypatch):
    import blfsim.simulator as sim

    def euler(state, t, dt, fn):
        k1 = fn(state, t)
        return [s + dt * v for s, v in zip(state, k1)]

    monkeypatch.setattr(sim, "rk4_step", euler)
    after = {res.name: res.passed for res in checks.run_all()}
    assert after["rk4_order"] is False


# --- argument surface --------------------------------------------------------------

def test_cli_requires_subcommand():
    r = cli("--help")
    assert r.returncode == 0
    for name in ("run", "sweep", "check", "plot"):
        assert name in r.stdout


def test_main_returns_config_error_as_exit_1(run_cli):
    r = run_cli("run", "does_not_exist.scenario")
    assert r.returncode == 1
    assert r.stderr.startswith("error:")
