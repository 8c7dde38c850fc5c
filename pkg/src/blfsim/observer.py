"""Barrier-based disturbance observer.

Each loop carries a lumped uncertainty (external disturbances, approximation
residue, and the derivative of the previous loop's saturated virtual input).
The observer estimates it through an auxiliary variable delta_hat whose
dynamics are driven by the known part of the loop's barrier derivative, with
the estimate recovered as eps_hat = delta_hat + k_eps * L.
"""

from dataclasses import dataclass


@dataclass
class ObserverState:
    delta_hat: float
    k_eps: float

    def __post_init__(self):
        if self.k_eps <= 0.0:
            raise ValueError("observer gain must be positive")


def epsilon_hat(obs: ObserverState, L: float) -> float:
    """Estimate of the lumped uncertainty given the current barrier value."""
    return obs.delta_hat + obs.k_eps * L


def observer_derivative(
    obs: ObserverState,
    nn_out: float,
    beta_x_next: float,
    barrier_drift: float,
    eps_hat: float,
) -> float:
    """delta_hat rate.

    nn_out is W^T phi, beta_x_next the known input-channel feedthrough
    (beta_i * x_{i+1}, or beta_n * u on the last loop), barrier_drift the
    Q*(z/psi)*dpsi_dt term of the barrier derivative.
    """
    return -obs.k_eps * (nn_out + beta_x_next - barrier_drift + eps_hat)
