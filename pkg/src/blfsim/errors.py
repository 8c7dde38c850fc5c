"""Exception types shared across the package."""

import math


class BlfsimError(Exception):
    """Base class for everything this package raises on purpose."""


class ConfigError(BlfsimError):
    """Scenario or parameter problem detected before integration starts."""


class InitialConditionError(ConfigError):
    """Initial state is outside the feasible region of the constraint tubes.

    Carries the list of human-readable violation strings produced by
    ``simulator.validate_initial``.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class BarrierViolation(BlfsimError):
    """A signal left its tube or envelope, so the cascade is no longer defined.

    Raising instead of clamping is deliberate: past this point the
    controller's own preconditions are gone and every derived quantity
    would be garbage.  kind is one of "barrier" (|z| >= psi), "svic"
    (|x| >= Psi), or "tube" (psi <= 0).
    """

    def __init__(self, kind, value, bound, loop=None, t=None):
        self.kind = kind
        self.value = value
        self.bound = bound
        self.loop = loop
        self.t = t
        where = ""
        if loop is not None:
            where = f" in loop {loop}"
        if t is not None and not math.isnan(t):
            where += f" at t={t:.6f}"
        super().__init__(f"{kind} violated{where}: value {value:.6g} vs bound {bound:.6g}")


class DivergenceError(BlfsimError):
    """A signal went non-finite or crossed the configured magnitude ceiling."""

    def __init__(self, t, what):
        self.t = t
        self.what = what
        super().__init__(f"divergence at t={t:.6f}: {what}")
