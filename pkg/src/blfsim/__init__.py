"""Barrier-constrained adaptive backstepping simulation toolkit.

Simulates strict- and pure-feedback loops under full-state constraints with
RBF function approximation, a first-order disturbance observer per loop,
Nussbaum gain adaptation, and saturated intermediate controls.  A compiled
kernel covers the third-order benchmark; everything falls back to pure
Python.
"""

from .constraints import ConstraintSpec, build_spec, compile_scalar_expr
from .control_law import (
    BarrierTerm,
    CompensationParams,
    alpha,
    barrier,
    cascade,
    compensation_term,
    nussbaum,
    saturate,
)
from .errors import (
    BarrierViolation,
    BlfsimError,
    ConfigError,
    DivergenceError,
    InitialConditionError,
)
from .plant import PLANTS, PlantModel, get_plant
from .scenario import build_config, load_scenario
from .simulator import (
    SimConfig,
    Trajectory,
    closed_loop_derivative,
    prepare_runtime,
    rk4_step,
    run,
    summarize,
    validate_initial,
)

__version__ = "0.1.0"

__all__ = [
    "BarrierTerm",
    "BarrierViolation",
    "BlfsimError",
    "CompensationParams",
    "ConfigError",
    "ConstraintSpec",
    "DivergenceError",
    "InitialConditionError",
    "PLANTS",
    "PlantModel",
    "SimConfig",
    "Trajectory",
    "alpha",
    "barrier",
    "build_config",
    "build_spec",
    "cascade",
    "closed_loop_derivative",
    "compensation_term",
    "compile_scalar_expr",
    "get_plant",
    "load_scenario",
    "nussbaum",
    "prepare_runtime",
    "rk4_step",
    "run",
    "saturate",
    "summarize",
    "validate_initial",
    "__version__",
]
