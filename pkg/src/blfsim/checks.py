"""Fast self-contained property checks, surfaced through the check command.

Each check samples its property with a fixed seed and reports pass/fail with
a one-line detail.  The checks deliberately go through the public module
functions (control_law.compensation_term, control_law.saturate, ...) rather than
local copies, so a regression in any of them is caught here.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import control_law as cl
from . import simulator
from .approximator import RbfNetwork, rbf_basis
from .observer import ObserverState, observer_derivative

_SEED = 1789


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_compensation_descent(samples=10_000) -> CheckResult:
    """h * saturate(v1 + v2, A) <= h * v1 + tol over admissible draws."""
    rng = np.random.default_rng(_SEED)
    worst = -math.inf
    for _ in range(samples):
        A = rng.uniform(0.5, 3.0)
        mu_bar = rng.uniform(0.05, 0.95)
        rho = rng.uniform(0.05, 0.95)
        h = rng.uniform(-2.0, 2.0)
        params = cl.CompensationParams(A=A, mu_bar=mu_bar, rho=rho)
        vmax = 1.0 / (2.0 * params.p)
        v1 = rng.uniform(-vmax, vmax)
        v2 = cl.compensation_term(params, h, v1)
        theta = cl.saturate(v1 + v2, A)
        worst = max(worst, h * theta - h * v1)
    return CheckResult(
        "compensation_descent", worst <= 1e-9, f"max(h*theta - h*v1) = {worst:.3e}"
    )


def check_log_barrier_bound(samples=10_000) -> CheckResult:
    """log(psi^2/(psi^2 - z^2)) <= z^2/(psi^2 - z^2) inside the tube."""
    rng = np.random.default_rng(_SEED + 1)
    worst = -math.inf
    for _ in range(samples):
        psi = rng.uniform(0.1, 5.0)
        z = rng.uniform(-psi, psi)
        if abs(z) >= psi:
            continue
        bar = cl.barrier(z, psi)
        worst = max(worst, 2.0 * bar.L - bar.z * bar.Q)
    zero = cl.barrier(0.0, 1.0)
    exact = zero.L == 0.0 and zero.Q == 0.0
    # 1e-15 is the rounding floor: near z = 0 the analytic slack falls below
    # the evaluation error of log(), so exact 0.0 would test libm, not the bound
    return CheckResult(
        "log_barrier_bound",
        worst <= 1e-15 and exact,
        f"max(lhs - rhs) = {worst:.3e}, equality at z=0: {exact}",
    )


def check_saturation_strict() -> CheckResult:
    """|saturate(v, A)| < A for all magnitudes, odd and monotone."""
    ok = True
    notes = []
    for A in (0.3, 1.0, 2.0, math.pi):
        vs = [10.0 ** e for e in range(-3, 13)]
        prev = -math.inf
        for v in vs:
            r = cl.saturate(v, A)
            if not (-A < r < A) or cl.saturate(-v, A) != -r:
                ok = False
                notes.append(f"A={A}, v={v}")
            if r <= prev:
                ok = False
                notes.append(f"monotonicity at A={A}, v={v}")
            prev = r
        if not cl.saturate(1e9, A) > 0.999 * A:
            ok = False
            notes.append(f"limit at A={A}")
    return CheckResult(
        "saturation_strict", ok, "strict bound holds" if ok else "; ".join(notes)
    )


def check_rk4_order() -> CheckResult:
    """Global error on sdot = -s scales like dt^4."""
    errs = []
    dts = (1e-2, 5e-3, 2.5e-3)
    for dt in dts:
        steps = int(round(1.0 / dt))
        y = [1.0]
        for k in range(steps):
            y = simulator.rk4_step(y, k * dt, dt, lambda s, t: [-s[0]])
        errs.append(abs(y[0] - math.exp(-1.0)))
    slope = (math.log(errs[0]) - math.log(errs[-1])) / (
        math.log(dts[0]) - math.log(dts[-1])
    )
    return CheckResult("rk4_order", abs(slope - 4.0) <= 0.2, f"slope = {slope:.3f}")


def check_observer_consistency(samples=200) -> CheckResult:
    """Error dynamics identity: subtracting the observer law from the
    auxiliary-variable dynamics leaves eps_dot - k_eps*(-Wt^T phi + eps_t)."""
    rng = np.random.default_rng(_SEED + 2)
    worst = 0.0
    for _ in range(samples):
        k_eps = rng.uniform(0.5, 10.0)
        w_hat_phi = rng.uniform(-5.0, 5.0)
        w_star_phi = rng.uniform(-5.0, 5.0)
        beta_x = rng.uniform(-5.0, 5.0)
        drift = rng.uniform(-5.0, 5.0)
        eps = rng.uniform(-5.0, 5.0)
        eps_hat = rng.uniform(-5.0, 5.0)
        eps_dot = rng.uniform(-5.0, 5.0)
        delta_dot = eps_dot - k_eps * (w_star_phi + beta_x - drift + eps)
        obs = ObserverState(delta_hat=rng.uniform(-5.0, 5.0), k_eps=k_eps)
        delta_hat_dot = observer_derivative(obs, w_hat_phi, beta_x, drift, eps_hat)
        w_tilde_phi = w_hat_phi - w_star_phi
        eps_tilde = eps - eps_hat
        rhs = eps_dot - k_eps * (-w_tilde_phi + eps_tilde)
        worst = max(worst, abs((delta_dot - delta_hat_dot) - rhs))
    return CheckResult(
        "observer_consistency", worst <= 1e-9, f"max identity residue = {worst:.3e}"
    )


def check_basis_bound(samples=100_000) -> CheckResult:
    """||phi|| <= sqrt(l), in bulk and through the scalar code path."""
    rng = np.random.default_rng(_SEED + 3)
    l, dim, width = 12, 3, 2.0
    centers = rng.uniform(-3.0, 3.0, size=(l, dim))
    pts = rng.uniform(-6.0, 6.0, size=(samples, dim))
    d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    norms = np.sqrt((np.exp(-d2 / width) ** 2).sum(axis=1))
    bulk_ok = bool(np.all(norms <= math.sqrt(l)))

    net = RbfNetwork(centers, width, lam=1.0, eta=0.1, k_eps=2.0)
    path_ok = True
    for p in pts[:100]:
        phi = rbf_basis(net, tuple(p))
        if not all(0.0 < v <= 1.0 for v in phi):
            path_ok = False
        if math.sqrt(sum(v * v for v in phi)) > math.sqrt(l):
            path_ok = False
    return CheckResult(
        "basis_bound",
        bulk_ok and path_ok,
        f"max norm {float(norms.max()):.6f} vs bound {math.sqrt(l):.6f}",
    )


def check_barrier_positivity(samples=5_000) -> CheckResult:
    """L >= 0 with equality only at z=0, and Q*z >= 0."""
    rng = np.random.default_rng(_SEED + 4)
    ok = True
    for _ in range(samples):
        psi = rng.uniform(0.05, 4.0)
        z = rng.uniform(-psi, psi)
        if abs(z) >= psi:
            continue
        bar = cl.barrier(z, psi)
        if bar.L < 0.0 or bar.Q * bar.z < 0.0 or (z != 0.0 and bar.L == 0.0):
            ok = False
            break
    zero = cl.barrier(0.0, 2.0)
    ok = ok and zero.L == 0.0 and zero.Q == 0.0
    return CheckResult("barrier_positivity", ok, "L and Q*z signs correct")


def check_tube_chain(samples=5_000) -> CheckResult:
    """|z| < psi and |theta_prev| < A imply |x| < Psi for psi = Psi - A."""
    rng = np.random.default_rng(_SEED + 5)
    ok = True
    for _ in range(samples):
        A = rng.uniform(0.1, 3.0)
        Psi = A + rng.uniform(0.01, 3.0)
        psi = Psi - A
        theta = rng.uniform(-A, A)
        z = rng.uniform(-psi, psi)
        x = z + theta
        if abs(x) >= Psi:
            ok = False
            break
    return CheckResult("tube_chain", ok, "envelope recovered from tube + saturation")


ALL_CHECKS = (
    check_compensation_descent,
    check_log_barrier_bound,
    check_saturation_strict,
    check_rk4_order,
    check_observer_consistency,
    check_basis_bound,
    check_barrier_positivity,
    check_tube_chain,
)


def run_all():
    """Run every named check, shielding the runner from individual crashes."""
    results = []
    for fn in ALL_CHECKS:
        try:
            results.append(fn())
        except Exception as exc:  # a crash is a failure, not an abort
            name = fn.__name__.removeprefix("check_")
            results.append(CheckResult(name, False, f"crashed: {exc!r}"))
    return results
