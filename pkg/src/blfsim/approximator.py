"""Gaussian RBF networks with a leaky gradient adaptive law.

One network per loop approximates that loop's aggregate unknown dynamics.
The network input for loop i is (x_1..x_i, s_i) where s_i is a first-order
filtered copy of the next-in-chain signal (x_{i+1}, or u for the last loop).
Filtering the raw signal breaks the algebraic loop that would otherwise make
the last network's input depend on the u being computed from it.
"""

import math

import numpy as np

from .errors import ConfigError


class RbfNetwork:
    """Fixed Gaussian basis; weights adapt online.

    centers is an (l, dim) layout, width the shared Gaussian denominator b,
    lam/eta the adaptation and leakage gains, k_eps the paired observer gain
    that also appears in the weight law's damping term.
    """

    def __init__(self, centers, width, lam, eta, k_eps, weights=None):
        self.centers = tuple(tuple(float(v) for v in c) for c in centers)
        self.l = len(self.centers)
        if self.l < 1:
            raise ConfigError("network needs at least one node")
        self.dim = len(self.centers[0])
        if any(len(c) != self.dim for c in self.centers):
            raise ConfigError("ragged center array")
        if width <= 0.0:
            raise ConfigError("width must be positive")
        if lam < 0.0:
            # lam = 0 freezes the weights; useful for observer-only studies
            raise ConfigError("adaptation gain must be nonnegative")
        if eta <= 0.0 or k_eps <= 0.0:
            raise ConfigError("eta and k_eps must be positive")
        self.width = float(width)
        self.lam = float(lam)
        self.eta = float(eta)
        self.k_eps = float(k_eps)
        self.weights = (
            [0.0] * self.l if weights is None else [float(w) for w in weights]
        )
        if len(self.weights) != self.l:
            raise ConfigError("weight vector length must equal node count")


class InputFilter:
    """First-order lag tau*sdot = raw - s feeding one network input slot."""

    def __init__(self, state=0.0, tau=0.01):
        if tau <= 0.0:
            raise ConfigError("filter time constant must be positive")
        self.state = float(state)
        self.tau = float(tau)


def rbf_basis(net: RbfNetwork, zbar):
    """phi_k = exp(-||zbar - c_k||^2 / b), returned as a list of length l."""
    if len(zbar) != net.dim:
        raise ValueError(f"input has dim {len(zbar)}, network expects {net.dim}")
    out = []
    for c in net.centers:
        ss = 0.0
        for j in range(net.dim):
            dv = zbar[j] - c[j]
            ss += dv * dv
        out.append(math.exp(-ss / net.width))
    return out


def nn_output(net: RbfNetwork, phi, weights=None) -> float:
    """Inner product W^T phi; pass staged weights to override net.weights."""
    W = net.weights if weights is None else weights
    if len(phi) != len(W):
        raise ValueError("basis/weight length mismatch")
    acc = 0.0
    for k in range(len(W)):
        acc += W[k] * phi[k]
    return acc


def weight_derivative(net: RbfNetwork, phi, weights=None):
    """lam * (phi - (k_eps^2 + eta) * W), componentwise."""
    W = net.weights if weights is None else weights
    g = net.k_eps * net.k_eps + net.eta
    return [net.lam * (phi[k] - g * W[k]) for k in range(len(W))]


def filter_rate(raw: float, state: float, tau: float) -> float:
    return (raw - state) / tau


def filter_derivative(filt: InputFilter, raw: float) -> float:
    return filter_rate(raw, filt.state, filt.tau)


def init_centers(l: int, box, seed) -> np.ndarray:
    """Draw l centers uniformly from a per-dimension box, deterministically.

    box is a sequence of (lo, hi) pairs, one per input dimension.  A
    collapsed interval (lo == hi) pins that coordinate.
    """
    if l < 1:
        raise ConfigError("need at least one center")
    box = [(float(lo), float(hi)) for lo, hi in box]
    if not box:
        raise ConfigError("empty center box")
    for lo, hi in box:
        if hi < lo:
            raise ConfigError(f"degenerate center interval ({lo}, {hi})")
    rng = np.random.default_rng(seed)
    lows = np.array([lo for lo, _ in box])
    highs = np.array([hi for _, hi in box])
    return rng.uniform(lows, highs, size=(l, len(box)))
