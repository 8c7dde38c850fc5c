"""Closed-loop integration of plant + controller with runtime invariants.

The augmented state stacks plant states, Nussbaum arguments, observer
auxiliaries, NN input filters, and all network weights into one flat vector
integrated with fixed-step RK4.  Every cascade evaluation (all four stages)
re-checks the tube and envelope inequalities and aborts the run on the first
violation; clamping would silently fake the very property the simulation is
supposed to test.

Two engines produce trajectories: a pure Python one that handles any
registered plant, and a compiled one specialized to the built-in third-order
benchmark.  Both follow the same operation order so results agree bit for
bit; see _core.pyx.
"""

import math
import time
import warnings
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import constraints as _cons
from .approximator import RbfNetwork, init_centers
from .control_law import CompensationParams, cascade
from .errors import BarrierViolation, ConfigError, DivergenceError, InitialConditionError
from .observer import ObserverState, observer_derivative
from .plant import get_plant

_YD_GRID = 10000  # intervals for the reference-amplitude check


@dataclass(frozen=True)
class SimConfig:
    """Complete description of one closed-loop run."""

    n: int
    plant: str
    yd: str                      # "builtin:<name>" or an expression in t
    envelopes: Tuple            # per loop: ("builtin", name) | ("expr", psi, dpsi|None)
    A: Tuple[float, ...]         # A[0] caps |y_d|, A[i] caps virtual control i
    k: Tuple[float, ...]
    k_eps: Tuple[float, ...]
    lam: Tuple[float, ...]
    eta: Tuple[float, ...]
    rho: float
    mu_bar: float
    x0: Tuple[float, ...]
    zeta0: Tuple[float, ...]
    nn_l: int
    nn_width: float
    center_box: Tuple[float, float]
    filter_tau: float
    dt: float
    t_final: float
    decimation: int
    seed: int
    ceiling: float
    engine: str = "auto"

    def __post_init__(self):
        n = self.n
        if n < 1:
            raise ConfigError("system order must be at least 1")
        for name in ("A", "k", "k_eps", "lam", "eta", "x0", "zeta0"):
            if len(getattr(self, name)) != n:
                raise ConfigError(f"{name} must have length {n}")
        if self.dt <= 0.0:
            raise ConfigError("dt must be positive")
        if self.t_final < 0.0:
            raise ConfigError("t_final must be nonnegative")
        if self.decimation < 1:
            raise ConfigError("decimation must be at least 1")
        if self.ceiling <= 0.0:
            raise ConfigError("signal ceiling must be positive")
        if any(v <= 0.0 for v in self.k):
            raise ConfigError("barrier gains k must be positive")
        if any(v <= 0.0 for v in self.k_eps):
            raise ConfigError("observer gains k_eps must be positive")
        if any(v < 0.0 for v in self.lam):
            # zero is allowed: it freezes the weights (observer-only studies)
            raise ConfigError("adaptation gains lam must be nonnegative")
        if any(v <= 0.0 for v in self.eta):
            raise ConfigError("leakage gains eta must be positive")
        if any(a <= 0.0 for a in self.A):
            raise ConfigError("saturation levels A must be positive")
        if not 0.0 < self.rho < 1.0 or not 0.0 < self.mu_bar < 1.0:
            raise ConfigError("rho and mu_bar must lie in (0, 1)")
        if self.nn_l < 1:
            raise ConfigError("network needs at least one node")
        if self.nn_width <= 0.0 or self.filter_tau <= 0.0:
            raise ConfigError("network width and filter tau must be positive")
        if self.engine not in ("auto", "python", "compiled"):
            raise ConfigError(f"unknown engine {self.engine!r}")


@dataclass
class Runtime:
    """Prepared, callable form of a SimConfig."""

    config: SimConfig
    n: int
    plant: object
    cons: _cons.ConstraintSpec
    yd: object
    nets: Tuple[RbfNetwork, ...]
    comp: Tuple[CompensationParams, ...]
    k: Tuple[float, ...]
    k_eps: Tuple[float, ...]


@dataclass
class Trajectory:
    """Decimated log of one run plus its outcome.

    data columns follow `columns`; theta holds the saturated virtual
    controls (n-1 of them), kept out of the CSV but needed for the
    saturation invariant.
    """

    config: SimConfig
    engine: str
    columns: Tuple[str, ...]
    data: np.ndarray
    theta: np.ndarray
    status: str                  # "ok" | "violated" | "diverged"
    violation: Optional[dict]
    divergence: Optional[str]
    steps_total: int
    steps_done: int
    final_state: list
    wall_s: float = 0.0

    def column(self, name: str) -> np.ndarray:
        return self.data[:, self.columns.index(name)]


def trajectory_columns(n: int) -> Tuple[str, ...]:
    cols = ["t"]
    cols += [f"x{i + 1}" for i in range(n)]
    cols += ["u", "yd"]
    for group in ("z", "psi", "Psi", "eps_hat", "zeta", "Wnorm", "L"):
        cols += [f"{group}{i + 1}" for i in range(n)]
    return tuple(cols)


def resolve_trajectory(spec: str):
    if spec.startswith("builtin:"):
        name = spec[len("builtin:"):]
        try:
            return REFERENCES[name]
        except KeyError:
            known = ", ".join(sorted(REFERENCES))
            raise ConfigError(f"unknown reference {name!r} (known: {known})") from None
    return _cons.compile_time_expr(spec)


def _b3_yd(t):
    return 0.5 * math.cos(math.pi * t) + 0.5 * math.sin(0.5 * math.pi * t)


REFERENCES = {"benchmark3": _b3_yd}


def prepare_runtime(config: SimConfig) -> Runtime:
    plant = get_plant(config.plant)
    if plant.n != config.n:
        raise ConfigError(
            f"plant {config.plant!r} has order {plant.n}, scenario says {config.n}"
        )
    cons = _cons.build_spec(config.n, config.A, config.envelopes)
    yd = resolve_trajectory(config.yd)

    lo, hi = config.center_box
    rng = np.random.default_rng(config.seed)
    nets = []
    for i in range(config.n):
        dim = i + 2  # states x1..x_{i+1} plus the filtered next signal
        centers = init_centers(config.nn_l, [(lo, hi)] * dim, rng)
        nets.append(
            RbfNetwork(
                centers,
                config.nn_width,
                config.lam[i],
                config.eta[i],
                config.k_eps[i],
            )
        )

    weak = [i + 1 for i in range(config.n) if config.k_eps[i] <= 1.0 + config.nn_l / 2.0]
    if weak:
        warnings.warn(
            f"observer gain k_eps in loop(s) {weak} is at or below 1 + l/2 = "
            f"{1.0 + config.nn_l / 2.0:g}; estimation error damping is not "
            "guaranteed at this basis size",
            UserWarning,
            stacklevel=2,
        )

    comp = tuple(
        CompensationParams(A=cons.A[i + 1], mu_bar=config.mu_bar, rho=config.rho)
        for i in range(config.n - 1)
    )
    return Runtime(
        config=config,
        n=config.n,
        plant=plant,
        cons=cons,
        yd=yd,
        nets=tuple(nets),
        comp=comp,
        k=tuple(config.k),
        k_eps=tuple(config.k_eps),
    )


def state_dim(n: int, l: int) -> int:
    return 4 * n + n * l


def _unpack(state, n, l):
    x = state[:n]
    zeta = state[n: 2 * n]
    delta = state[2 * n: 3 * n]
    filt = state[3 * n: 4 * n]
    W = [state[4 * n + i * l: 4 * n + (i + 1) * l] for i in range(n)]
    return x, zeta, delta, filt, W


def initial_state(rt: Runtime):
    """Flat initial state with the filter bootstrap applied.

    Filters start at their raw signals; the last filter's raw signal is u
    itself, so u is computed once with that filter at zero and the result
    seeds the filter state.  Raises BarrierViolation if the start is
    infeasible.
    """
    config = rt.config
    n, l = rt.n, config.nn_l
    state = [0.0] * state_dim(n, l)
    for i in range(n):
        state[i] = config.x0[i]
        state[n + i] = config.zeta0[i]
    for i in range(n - 1):
        state[3 * n + i] = config.x0[i + 1]
    x, zeta, delta, filt, W = _unpack(state, n, l)
    probe = cascade(rt, x, zeta, W, delta, filt, 0.0)
    state[4 * n - 1] = probe.u
    return state, probe


def validate_initial(config: SimConfig, rt: Optional[Runtime] = None):
    """Feasibility checks before integration; returns a list of problems."""
    if rt is None:
        rt = prepare_runtime(config)
    problems = []
    for i, b in enumerate(rt.plant.beta):
        if b == 0.0:
            problems.append(f"input gain beta_{i + 1} is zero")

    if config.t_final > 0.0:
        ts = [j * config.t_final / _YD_GRID for j in range(_YD_GRID + 1)]
    else:
        ts = [0.0]
    sup_yd = max(abs(rt.yd(tj)) for tj in ts)
    if sup_yd > rt.cons.A[0]:
        problems.append(
            f"reference amplitude {sup_yd:.6g} exceeds A_0 = {rt.cons.A[0]:.6g}"
        )

    try:
        initial_state(rt)
    except BarrierViolation as exc:
        problems.append(
            f"infeasible start: {exc.kind} bound in loop {exc.loop} "
            f"(value {exc.value:.6g}, bound {exc.bound:.6g})"
        )
    return problems


def _derivative_and_cascade(state, t, rt):
    config = rt.config
    n, l = rt.n, config.nn_l
    x, zeta, delta, filt, W = _unpack(state, n, l)
    res = cascade(rt, x, zeta, W, delta, filt, t)
    for i in range(n):
        if not math.isfinite(res.alpha[i]):
            raise DivergenceError(t, f"alpha_{i + 1} non-finite")
    if not math.isfinite(res.u):
        raise DivergenceError(t, "control input non-finite")

    deriv = [0.0] * len(state)
    plant = rt.plant
    for i in range(n):
        nxt = x[i + 1] if i < n - 1 else res.u
        xbar = tuple(x[: i + 1])
        deriv[i] = plant.f[i](xbar, nxt) + plant.beta[i] * nxt + plant.d[i](xbar, t)
        deriv[n + i] = res.alpha[i]
        deriv[2 * n + i] = observer_derivative(
            ObserverState(delta[i], rt.k_eps[i]),
            res.nn[i],
            res.beta_x_next[i],
            res.drift[i],
            res.eps_hat[i],
        )
        deriv[3 * n + i] = (nxt - filt[i]) / config.filter_tau
        net = rt.nets[i]
        g = net.k_eps * net.k_eps + net.eta
        phi_i = res.phi[i]
        Wi = W[i]
        base = 4 * n + i * l
        for kk in range(l):
            deriv[base + kk] = net.lam * (phi_i[kk] - g * Wi[kk])
    return deriv, res


def closed_loop_derivative(state, t, rt: Runtime):
    """Time derivative of the flat augmented state at (state, t)."""
    deriv, _ = _derivative_and_cascade(state, t, rt)
    return deriv


def _rk4_tail(state, t, dt, deriv_fn, k1):
    """Stages 2..4 given the stage-1 slope; returns the advanced state."""
    dim = len(state)
    hh = 0.5 * dt
    h6 = dt / 6.0
    ytmp = [0.0] * dim
    for j in range(dim):
        ytmp[j] = state[j] + hh * k1[j]
    k2 = deriv_fn(ytmp, t + hh)
    for j in range(dim):
        ytmp[j] = state[j] + hh * k2[j]
    k3 = deriv_fn(ytmp, t + hh)
    for j in range(dim):
        ytmp[j] = state[j] + dt * k3[j]
    k4 = deriv_fn(ytmp, t + dt)
    out = [0.0] * dim
    for j in range(dim):
        out[j] = state[j] + h6 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
    return out


def rk4_step(state, t, dt, deriv_fn):
    """One classical Runge-Kutta step for dy/dt = deriv_fn(y, t).

    deriv_fn may be any callable over (state sequence, time); the closed
    loop passes a cascade-evaluating closure, property tests pass plain
    test systems.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    return _rk4_tail(state, t, dt, deriv_fn, deriv_fn(state, t))


def _log_row(data, theta_log, row, t, state, res, n, l):
    col = 0
    data[row, col] = t
    col += 1
    for i in range(n):
        data[row, col] = state[i]
        col += 1
    data[row, col] = res.u
    col += 1
    data[row, col] = res.yd
    col += 1
    for group in (res.z, res.psi, res.Psi, res.eps_hat):
        for i in range(n):
            data[row, col] = group[i]
            col += 1
    for i in range(n):
        data[row, col] = state[n + i]
        col += 1
    for i in range(n):
        acc = 0.0
        base = 4 * n + i * l
        for kk in range(l):
            acc += state[base + kk] * state[base + kk]
        data[row, col] = math.sqrt(acc)
        col += 1
    for i in range(n):
        data[row, col] = res.L[i]
        col += 1
    for i in range(n - 1):
        theta_log[row, i] = res.theta[i]


def _python_loop(rt, state, steps, data, theta_log):
    config = rt.config
    n, l = rt.n, config.nn_l
    dt, dec, ceiling = config.dt, config.decimation, config.ceiling
    dim = len(state)
    row = 0
    k = 0

    def deriv_fn(y, t):
        return _derivative_and_cascade(y, t, rt)[0]

    try:
        while True:
            t_k = k * dt
            k1, res = _derivative_and_cascade(state, t_k, rt)
            if abs(res.u) > ceiling:
                raise DivergenceError(t_k, "control input exceeds ceiling")
            if k % dec == 0:
                _log_row(data, theta_log, row, t_k, state, res, n, l)
                row += 1
            if k == steps:
                break
            state = _rk4_tail(state, t_k, dt, deriv_fn, k1)
            for j in range(dim):
                v = state[j]
                if not math.isfinite(v):
                    raise DivergenceError(t_k + dt, "state component non-finite")
                if abs(v) > ceiling:
                    raise DivergenceError(t_k + dt, "state component exceeds ceiling")
            k += 1
    except BarrierViolation as exc:
        return (
            "violated",
            {
                "kind": exc.kind,
                "loop": exc.loop,
                "t": exc.t,
                "value": exc.value,
                "bound": exc.bound,
            },
            None,
            k,
            row,
            state,
        )
    except DivergenceError as exc:
        return "diverged", None, f"{exc.what} at t={exc.t:.6f}", k, row, state
    return "ok", None, None, k, row, state


def _compiled_eligible(config: SimConfig) -> bool:
    return (
        config.n == 3
        and config.plant == "benchmark3"
        and config.yd == "builtin:benchmark3"
        and tuple(config.envelopes)
        == (
            ("builtin", "benchmark3_x1"),
            ("builtin", "benchmark3_x2"),
            ("builtin", "benchmark3_x3"),
        )
    )


def _core_available() -> bool:
    try:
        from . import _core  # noqa: F401
    except ImportError:
        return False
    return True


def select_engine(config: SimConfig) -> str:
    """Resolve the engine choice for this config.

    The compiled core only knows the built-in benchmark; "auto" silently
    falls back to Python everywhere else, an explicit "compiled" request
    fails loudly instead.
    """
    if config.engine == "python":
        return "python"
    eligible = _compiled_eligible(config)
    available = _core_available()
    if config.engine == "compiled":
        if not available:
            raise ConfigError("compiled engine requested but extension not built")
        if not eligible:
            raise ConfigError(
                "compiled engine only supports the built-in benchmark3 setup"
            )
        return "compiled"
    return "compiled" if (eligible and available) else "python"


def run(config: SimConfig) -> Trajectory:
    """Integrate to t_final, or to the first violation or divergence."""
    rt = prepare_runtime(config)
    problems = validate_initial(config, rt)
    if problems:
        raise InitialConditionError(problems)
    state, _ = initial_state(rt)

    n, l = config.n, config.nn_l
    steps = int(round(config.t_final / config.dt))
    rows = steps // config.decimation + 1
    cols = trajectory_columns(n)
    data = np.zeros((rows, len(cols)))
    theta_log = np.zeros((rows, max(n - 1, 1)))

    engine = select_engine(config)
    t0 = time.perf_counter()
    if engine == "compiled":
        from . import _compiled

        status, violation, divergence, steps_done, rows_done, state = _compiled.run_b3(
            rt, state, steps, data, theta_log
        )
    else:
        status, violation, divergence, steps_done, rows_done, state = _python_loop(
            rt, state, steps, data, theta_log
        )
    wall = time.perf_counter() - t0

    return Trajectory(
        config=config,
        engine=engine,
        columns=cols,
        data=data[:rows_done],
        theta=theta_log[:rows_done, : max(n - 1, 0)] if n > 1 else theta_log[:rows_done, :0],
        status=status,
        violation=violation,
        divergence=divergence,
        steps_total=steps,
        steps_done=steps_done,
        final_state=list(state),
        wall_s=wall,
    )


def summarize(traj: Trajectory) -> dict:
    """Boundedness and tracking metrics over the logged grid."""
    if traj.data.shape[0] == 0:
        raise ValueError("empty trajectory")
    n = traj.config.n
    t = traj.column("t")
    ratio = 0.0
    for i in range(n):
        xi = np.abs(traj.column(f"x{i + 1}"))
        Psi = traj.column(f"Psi{i + 1}")
        ratio = max(ratio, float(np.max(xi / Psi)))
    tail_start = t[0] + 0.75 * (t[-1] - t[0])
    tail = traj.column("z1")[t >= tail_start]
    z1_rms = float(np.sqrt(np.mean(tail * tail)))
    metrics = {
        "constraint_ratio_max": ratio,
        "z1_rms_tail": z1_rms,
        "u_sup": float(np.max(np.abs(traj.column("u")))),
        "wnorm_sup": [float(np.max(traj.column(f"Wnorm{i + 1}"))) for i in range(n)],
        "zeta_sup": [float(np.max(np.abs(traj.column(f"zeta{i + 1}")))) for i in range(n)],
        "eps_hat_sup": [
            float(np.max(np.abs(traj.column(f"eps_hat{i + 1}")))) for i in range(n)
        ],
    }
    if n > 1 and traj.theta.shape[0]:
        metrics["theta_sup"] = [
            float(np.max(np.abs(traj.theta[:, i]))) for i in range(n - 1)
        ]
    else:
        metrics["theta_sup"] = []
    return metrics
