"""Pure-feedback plant models.

A model of order n is

    xdot_i = f_i(x_1..x_i, x_{i+1}) + beta_i * x_{i+1} + d_i(x_1..x_i, t)

with x_{n+1} taken to be the input u.  The f_i may depend on the next state
non-affinely, which is what makes the loop pure-feedback rather than strict
feedback; beta_i is the known-magnitude part of the input gain and may have
unknown sign as far as the controller is concerned (it only has to be
nonzero).
"""

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Tuple

from .errors import ConfigError


@dataclass(frozen=True)
class PlantModel:
    """Right-hand side of one pure-feedback system.

    f[i] and d[i] take the state prefix (x_1..x_{i+1} zero-based: first i+1
    entries); f[i] additionally takes the next-in-chain signal.
    """

    name: str
    n: int
    f: Tuple[Callable, ...]
    beta: Tuple[float, ...]
    d: Tuple[Callable, ...]

    def __post_init__(self):
        if not (len(self.f) == len(self.beta) == len(self.d) == self.n):
            raise ValueError("f, beta, d must all have length n")


def eval_rhs(model: PlantModel, x: Sequence[float], u: float, t: float):
    """Full state derivative at (x, u, t). Returns a list of length n."""
    if len(x) != model.n:
        raise ValueError(f"state has length {len(x)}, model order is {model.n}")
    out = []
    for i in range(model.n):
        nxt = x[i + 1] if i < model.n - 1 else u
        xbar = tuple(x[: i + 1])
        out.append(model.f[i](xbar, nxt) + model.beta[i] * nxt + model.d[i](xbar, t))
    return out


# --- built-in models -------------------------------------------------------

def _b3_f1(xbar, xnext):
    return 0.05 * math.cos(xbar[0])


def _b3_f2(xbar, xnext):
    x1, x2 = xbar[0], xbar[1]
    return (1.0 - 2.0 ** (x1 * x2)) / (1.0 + 2.0 ** (x1 * x1)) + 0.1 * math.tanh(xnext)


def _b3_f3(xbar, xnext):
    x1, x2, x3 = xbar
    return (
        0.2 * 3.0 ** (-(x2 * x2) * (x3 ** 4))
        + 0.05 * math.exp(-(x1 * x1)) * xnext
        + 0.2 * math.cos(xnext)
    )


def _b3_d1(xbar, t):
    return 0.2 * math.sin(math.pi * xbar[0])


def _b3_d2(xbar, t):
    return 0.2 * math.sin(math.pi * xbar[0] * xbar[1])


def _b3_d3(xbar, t):
    return 0.2 * xbar[1] * xbar[1] * math.sin(math.pi * xbar[2])


def _zero_f(xbar, xnext):
    return 0.0


def _zero_d(xbar, t):
    return 0.0


def _obs1_d1(xbar, t):
    return 0.2 * math.sin(math.pi * xbar[0])


PLANTS = {
    # third-order benchmark with non-affine input entering through f3
    "benchmark3": PlantModel(
        name="benchmark3",
        n=3,
        f=(_b3_f1, _b3_f2, _b3_f3),
        beta=(1.0, 1.0, 0.9),
        d=(_b3_d1, _b3_d2, _b3_d3),
    ),
    # disturbance-free integrator chain, handy as a well-behaved test bed
    "chain3": PlantModel(
        name="chain3",
        n=3,
        f=(_zero_f, _zero_f, _zero_f),
        beta=(1.0, 1.0, 1.0),
        d=(_zero_d, _zero_d, _zero_d),
    ),
    # first-order system whose only nontrivial term is a state-dependent
    # disturbance; used to exercise the disturbance observer in isolation
    "observer_demo1": PlantModel(
        name="observer_demo1",
        n=1,
        f=(_zero_f,),
        beta=(1.0,),
        d=(_obs1_d1,),
    ),
}


def get_plant(name: str) -> PlantModel:
    try:
        return PLANTS[name]
    except KeyError:
        known = ", ".join(sorted(PLANTS))
        raise ConfigError(f"unknown plant {name!r} (known: {known})") from None
