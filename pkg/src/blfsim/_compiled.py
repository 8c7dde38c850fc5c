"""Marshaling layer between the simulator and the compiled core."""

import numpy as np

from . import _core
from .simulator import state_dim

_VIOLATION_KINDS = {1: "tube", 2: "svic", 3: "barrier"}


def run_b3(rt, state, steps, data, theta_log):
    """Drive the compiled benchmark kernel; mirrors simulator._python_loop."""
    config = rt.config
    n, l = rt.n, config.nn_l
    dim = state_dim(n, l)

    y = np.array(state, dtype=np.float64)
    centers = [
        np.ascontiguousarray(np.asarray(net.centers, dtype=np.float64))
        for net in rt.nets
    ]
    k1 = np.zeros(dim)
    k2 = np.zeros(dim)
    k3 = np.zeros(dim)
    k4 = np.zeros(dim)
    ytmp = np.zeros(dim)
    phi = np.zeros((n, l))
    cs = np.zeros(34)
    vio = np.zeros(4)

    code, steps_done, rows_done = _core.run_b3_kernel(
        y, steps, config.decimation, l,
        config.dt, config.filter_tau, config.ceiling,
        config.rho, config.mu_bar, config.nn_width,
        np.asarray(rt.k), np.asarray(rt.k_eps),
        np.asarray(config.lam), np.asarray(config.eta),
        np.asarray(rt.cons.A), np.asarray(rt.plant.beta),
        centers[0], centers[1], centers[2],
        data, theta_log,
        k1, k2, k3, k4, ytmp, phi, cs, vio,
    )

    loop = int(vio[0])
    t = vio[3]
    if code == 0:
        return "ok", None, None, steps_done, rows_done, y.tolist()
    if code in _VIOLATION_KINDS:
        violation = {
            "kind": _VIOLATION_KINDS[code],
            "loop": loop,
            "t": float(t),
            "value": float(vio[1]),
            "bound": float(vio[2]),
        }
        return "violated", violation, None, steps_done, rows_done, y.tolist()
    if code == 4:
        what = f"alpha_{loop} non-finite" if loop else "control input non-finite"
    elif code == 5:
        what = "control input exceeds ceiling"
    elif code == 6:
        what = "state component non-finite"
    else:
        what = "state component exceeds ceiling"
    return "diverged", None, f"{what} at t={t:.6f}", steps_done, rows_done, y.tolist()
