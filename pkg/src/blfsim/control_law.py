"""Backstepping cascade: barrier terms, virtual controls, and the input u.

Loop i tracks the previous loop's saturated virtual control with error z_i,
kept inside the tube psi_i by a logarithmic barrier.  The intermediate
control alpha_i combines barrier feedback, the network estimate, the
disturbance observer output and a constant robustness margin; a Nussbaum
gain turns it into the raw virtual input, which is compensated (so that the
saturation cannot destroy the Lyapunov decrease) and then arctan-saturated.
The last loop emits u unsaturated.
"""

import math
from dataclasses import dataclass, field

from .approximator import nn_output, rbf_basis
from .errors import BarrierViolation
from .observer import ObserverState, epsilon_hat

V1_GUARD = 1e-6


@dataclass(frozen=True)
class BarrierTerm:
    """Barrier bookkeeping for one loop at one instant."""

    z: float
    psi: float
    L: float
    Q: float


@dataclass(frozen=True)
class CompensationParams:
    """Fixed data of the saturation-compensation construction.

    p = pi * mu_bar / (2A) is the slope parameter of the arctan bound the
    construction is derived from; rho picks a point between the two
    quadratic roots.
    """

    A: float
    mu_bar: float
    rho: float
    p: float = field(init=False)

    def __post_init__(self):
        if self.A <= 0.0:
            raise ValueError("saturation bound must be positive")
        if not 0.0 < self.mu_bar < 1.0:
            raise ValueError("mu_bar must lie in (0, 1)")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        object.__setattr__(self, "p", math.pi * self.mu_bar / (2.0 * self.A))


def barrier(z: float, psi: float) -> BarrierTerm:
    """Barrier value L and gradient factor Q for error z in tube psi."""
    if psi <= 0.0:
        raise BarrierViolation("tube", psi, 0.0)
    if abs(z) >= psi:
        raise BarrierViolation("barrier", z, psi)
    den = psi * psi - z * z
    L = 0.5 * math.log(psi * psi / den)
    Q = z / den
    return BarrierTerm(z=z, psi=psi, L=L, Q=Q)


def nussbaum(zeta: float) -> float:
    return zeta * zeta * math.cos(zeta)


def saturate(v: float, A: float) -> float:
    """Odd, monotone squash with |result| < A strictly.

    The analytic range is open, but atan rounding at huge arguments can land
    exactly on A in floating point; nudge inward so downstream tube
    arithmetic keeps its strict margin.
    """
    r = (2.0 * A / math.pi) * math.atan(math.pi * v / (2.0 * A))
    if r >= A:
        r = math.nextafter(A, 0.0)
    elif r <= -A:
        r = -math.nextafter(A, 0.0)
    return r


def compensation_term(params: CompensationParams, h: float, v1: float) -> float:
    """Compensation added to v1 before saturation.

    Built from the two roots of p^2 v1 s^2 - (1 - 2 p^2 v1^2) s + p^2 v1^3 = 0,
    blended by rho; outside the validity region (v1 near zero, or discriminant
    negative) the compensation is simply dropped.
    """
    if abs(v1) < V1_GUARD:
        return 0.0
    p2 = params.p * params.p
    disc = 1.0 - 4.0 * p2 * v1 * v1
    if disc < 0.0:
        return 0.0
    root = math.sqrt(disc)
    den = 2.0 * p2 * v1
    num = 1.0 - 2.0 * p2 * v1 * v1
    s1 = (num - root) / den
    s2 = (num + root) / den
    return h * (s1 + params.rho * (s2 - s1))


def alpha(
    bar: BarrierTerm,
    nn_out: float,
    eps_hat: float,
    k: float,
    k_eps: float,
    dpsi_dt: float,
    last: bool,
) -> float:
    """Intermediate control for one loop.

    The constant margin is 3/4 except on the last loop, where one quarter is
    not needed because no later loop feeds back into it.
    """
    c = 0.5 if last else 0.75
    return (
        k * bar.Q * bar.z
        + nn_out
        + eps_hat
        + k_eps ** 4 / 8.0
        + c
        - bar.Q * (bar.z / bar.psi) * dpsi_dt
    )


class CascadeResult:
    """Algebraic outputs of one full pass at a frozen state."""

    __slots__ = (
        "u", "yd", "z", "psi", "Psi", "L", "Q", "theta", "alpha",
        "phi", "nn", "eps_hat", "drift", "beta_x_next",
    )

    def __init__(self):
        self.u = 0.0
        self.yd = 0.0
        self.z = []
        self.psi = []
        self.Psi = []
        self.L = []
        self.Q = []
        self.theta = []
        self.alpha = []
        self.phi = []
        self.nn = []
        self.eps_hat = []
        self.drift = []
        self.beta_x_next = []


def cascade(rt, x, zeta, W, delta, filt, t: float) -> CascadeResult:
    """One algebraic pass: errors, barriers, virtual controls, u.

    rt is the prepared runtime bundle (see simulator.Runtime).  x, zeta,
    delta, filt are per-loop scalars; W is the per-loop weight vectors.
    Raises BarrierViolation with loop and time attached if any tube or
    envelope check fails.
    """
    n = rt.n
    res = CascadeResult()
    res.yd = rt.yd(t)
    theta_prev = res.yd

    for i in range(n):
        xbar = x[: i + 1]
        Psi_i = rt.cons.Psi[i](xbar, t)
        psi_i = Psi_i - rt.cons.A[i]
        if psi_i <= 0.0:
            raise BarrierViolation("tube", psi_i, 0.0, loop=i + 1, t=t)
        if abs(x[i]) >= Psi_i:
            raise BarrierViolation("svic", x[i], Psi_i, loop=i + 1, t=t)
        try:
            bar = barrier(x[i] - theta_prev, psi_i)
        except BarrierViolation as exc:
            raise BarrierViolation(
                exc.kind, exc.value, exc.bound, loop=i + 1, t=t
            ) from None

        dpsidt_i = rt.cons.dPsi_dt[i](xbar, t)
        net = rt.nets[i]
        phi_i = rbf_basis(net, tuple(xbar) + (filt[i],))
        nn_i = nn_output(net, phi_i, W[i])
        eps_i = epsilon_hat(ObserverState(delta[i], rt.k_eps[i]), bar.L)
        last = i == n - 1
        a_i = alpha(bar, nn_i, eps_i, rt.k[i], rt.k_eps[i], dpsidt_i, last)

        res.z.append(bar.z)
        res.psi.append(bar.psi)
        res.Psi.append(Psi_i)
        res.L.append(bar.L)
        res.Q.append(bar.Q)
        res.phi.append(phi_i)
        res.nn.append(nn_i)
        res.eps_hat.append(eps_i)
        res.drift.append(bar.Q * (bar.z / bar.psi) * dpsidt_i)
        res.alpha.append(a_i)

        if last:
            res.u = nussbaum(zeta[i]) * a_i
        else:
            v1 = nussbaum(zeta[i]) * a_i
            v2 = compensation_term(rt.comp[i], rt.plant.beta[i], v1)
            theta_prev = saturate(v1 + v2, rt.cons.A[i + 1])
            res.theta.append(theta_prev)

    for i in range(n):
        nxt = x[i + 1] if i < n - 1 else res.u
        res.beta_x_next.append(rt.plant.beta[i] * nxt)
    return res
