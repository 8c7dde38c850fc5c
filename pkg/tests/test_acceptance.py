"""Acceptance criteria, one test per criterion, run at face value.

Four of these fail on the pristine tree and are expected to: the flagship
scenario cannot survive its own gain schedule (criteria 1, 2, 7) and the
saturation-compensation construction cannot enforce its inequality away from
small signals (criterion 3).  The failures are real properties of the
underlying equations, not implementation defects; docs/decision notes carry
the full analysis.  Nothing here is weakened to force a green run.
"""

import math

import numpy as np
import pytest

from blfsim import control_law as cl
from blfsim.simulator import rk4_step, run

from conftest import SCENARIOS, cli, load_config


# --- 1: flagship scenario completes its horizon --------------------------------

def test_criterion_01_flagship_run_completes(tmp_path):
    r = cli("run", SCENARIOS / "benchmark3", "--csv", "flagship.csv", cwd=tmp_path)
    report = r.stdout.strip().replace("\n", " | ")
    assert r.returncode == 0, (
        "flagship run must complete 20 s with exit 0 and no envelope "
        f"violations; got exit {r.returncode} with: {report}"
    )
    assert "status: ok" in r.stdout
    data = np.genfromtxt(tmp_path / "flagship.csv", delimiter=",", names=True)
    assert np.isfinite(np.atleast_1d(data["t"])).all()


# --- 2: tracking quality over the final window ---------------------------------

def test_criterion_02_tracking_rms_within_half_tube(benchmark_traj):
    t = benchmark_traj.column("t")
    window = (t >= 15.0) & (t <= 20.0)
    assert window.any(), (
        "tracking criterion needs samples in t in [15, 20]; the run ended at "
        f"t = {t[-1]:.6g} (status {benchmark_traj.status}: "
        f"{benchmark_traj.violation})"
    )
    z1 = benchmark_traj.column("z1")[window]
    rms = float(np.sqrt(np.mean(z1 ** 2)))
    psi_min = float(np.min(benchmark_traj.column("psi1")))
    assert rms < 0.5 * psi_min


# --- 3: compensation inequality over admissible draws ---------------------------

def test_criterion_03_compensated_saturation_descent():
    rng = np.random.default_rng(20240817)
    worst = -math.inf
    worst_case = None
    for _ in range(10_000):
        A = float(rng.uniform(0.5, 3.0))
        mu_bar = float(rng.uniform(0.05, 0.95))
        rho = float(rng.uniform(0.05, 0.95))
        h = float(rng.uniform(-2.0, 2.0))
        params = cl.CompensationParams(A=A, mu_bar=mu_bar, rho=rho)
        vmax = 1.0 / (2.0 * params.p)  # keep the discriminant nonnegative
        v1 = float(rng.uniform(-vmax, vmax))
        v2 = cl.compensation_term(params, h, v1)
        theta = cl.saturate(v1 + v2, A)
        gap = h * theta - h * v1
        if gap > worst:
            worst = gap
            worst_case = (A, mu_bar, rho, h, v1)
    assert worst <= 1e-9, (
        f"h*saturate(v1 + v2, A) exceeds h*v1 by up to {worst:.6g} "
        f"(at A, mu_bar, rho, h, v1 = {worst_case}); the construction only "
        "holds for small v1"
    )


# --- 4: barrier log bound --------------------------------------------------------

def test_criterion_04_log_bound_inside_tube():
    # The analytic slack is (z^2/(psi^2 - z^2))^2 / 2 + ..., which drops below
    # the ~ulp(1) evaluation error of log() once |z|/psi < 1e-4; 1e-15 is the
    # float64 resolution floor of the comparison, not a loosened property.
    rng = np.random.default_rng(901)
    worst = -math.inf
    for _ in range(10_000):
        psi = float(rng.uniform(0.05, 5.0))
        z = float(rng.uniform(-psi, psi))
        if abs(z) >= psi:
            continue
        lhs = math.log(psi * psi / (psi * psi - z * z))
        rhs = z * z / (psi * psi - z * z)
        worst = max(worst, lhs - rhs)
    assert worst <= 1e-15
    bar = cl.barrier(0.0, 1.7)
    assert bar.L == 0.0 and bar.Q == 0.0  # equality exactly at z = 0


# --- 5: virtual controls stay strictly inside their rails ------------------------

def test_criterion_05_saturation_strict_on_runs(benchmark_traj, tmp_path):
    config = benchmark_traj.config
    for i in range(config.n - 1):
        sup = float(np.max(np.abs(benchmark_traj.theta[:, i])))
        assert sup < config.A[i + 1]

    r = cli("sweep", SCENARIOS / "benchmark3", "--trials", "100",
            "--seed", "424242", "--out", "sat_sweep.csv", cwd=tmp_path)
    assert r.returncode == 0, r.stderr
    rows = (tmp_path / "sat_sweep.csv").read_text().splitlines()
    header = rows[0].split(",")
    i1, i2 = header.index("theta_sup1"), header.index("theta_sup2")
    assert len(rows) == 101
    for line in rows[1:]:
        cells = line.split(",")
        assert float(cells[i1]) < config.A[1]
        assert float(cells[i2]) < config.A[2]


# --- 6: integrator order ----------------------------------------------------------

def test_criterion_06_rk4_fourth_order():
    errs = []
    dts = (1e-2, 5e-3, 2.5e-3)
    for dt in dts:
        y = [1.0]
        for k in range(int(round(1.0 / dt))):
            y = rk4_step(y, k * dt, dt, lambda s, t: [-s[0]])
        errs.append(abs(y[0] - math.exp(-1.0)))
    slope = (math.log(errs[0]) - math.log(errs[-1])) / (
        math.log(dts[0]) - math.log(dts[-1])
    )
    assert slope == pytest.approx(4.0, abs=0.2)


# --- 7: step refinement on the flagship loop ---------------------------------------

def test_criterion_07_flagship_step_refinement():
    coarse, _, _ = load_config("benchmark3",
                               **{"integration.t_final": 5.0})
    fine, _, _ = load_config("benchmark3",
                             **{"integration.t_final": 5.0,
                                "integration.dt": 5e-5,
                                "output.decimation": 200})
    a = run(coarse)
    b = run(fine)
    assert a.status == "ok" and b.status == "ok", (
        "step-refinement comparison needs both runs to cover 5 s; they ended "
        f"at t = {a.column('t')[-1]:.6g} ({a.status}) and "
        f"t = {b.column('t')[-1]:.6g} ({b.status})"
    )
    worst = 0.0
    for i in range(coarse.n):
        col = f"x{i + 1}"
        worst = max(worst, float(np.max(np.abs(a.column(col) - b.column(col)))))
    assert worst < 1e-3


# --- 8: observer estimates a closed-form lumped term --------------------------------

def test_criterion_08_observer_oracle(observer_traj):
    traj = observer_traj
    assert traj.status == "ok"
    t = traj.column("t")
    x1 = traj.column("x1")
    u = traj.column("u")
    psi = traj.column("psi1")
    z1 = traj.column("z1")
    Q = z1 / (psi ** 2 - z1 ** 2)
    # frozen weights, zero f: the lumped term reduces to a closed form in
    # logged quantities (disturbance pull, reference rate pull, input residue)
    eps_true = Q * 0.2 * np.sin(np.pi * x1) - Q * 0.5 * np.cos(t) + u * (Q - 1.0)
    eps_hat = traj.column("eps_hat1")
    m = t >= 2.0
    err_sup = float(np.max(np.abs(eps_hat[m] - eps_true[m])))
    assert err_sup < 0.05 * float(np.max(np.abs(eps_true)))


# --- 9: determinism ------------------------------------------------------------------

def test_criterion_09_byte_identical_reruns(tmp_path):
    r1 = cli("run", SCENARIOS / "benchmark3", "--csv", "d1.csv", cwd=tmp_path)
    r2 = cli("run", SCENARIOS / "benchmark3", "--csv", "d2.csv", cwd=tmp_path)
    assert r1.returncode == r2.returncode
    assert (tmp_path / "d1.csv").read_bytes() == (tmp_path / "d2.csv").read_bytes()

    s1 = cli("sweep", SCENARIOS / "benchmark3", "--trials", "5",
             "--seed", "31337", "--out", "w1.csv", cwd=tmp_path)
    s2 = cli("sweep", SCENARIOS / "benchmark3", "--trials", "5",
             "--seed", "31337", "--out", "w2.csv", cwd=tmp_path)
    assert s1.returncode == s2.returncode == 0
    assert (tmp_path / "w1.csv").read_bytes() == (tmp_path / "w2.csv").read_bytes()


# --- 10: infeasible starts are rejected before integration ----------------------------

def test_criterion_10_initial_condition_gate(tmp_path):
    r = cli("run", SCENARIOS / "chain3",
            "--set", "system.x0=[1.6, 0.0, 0.0]",  # z1(0) = 1.6 >= psi1(0) = 1.5
            "--csv", "never.csv", cwd=tmp_path)
    assert r.returncode == 1
    assert "infeasible start" in r.stderr
    assert not (tmp_path / "never.csv").exists()
