"""State constraint envelopes and the error tubes derived from them.

Each state x_{i+1} (1-based x_i in the loop indexing below) must stay inside
an envelope |x_i| < Psi_i(x_1..x_i, t).  The controller works with shrunken
tubes psi_i = Psi_i - A_{i-1}, where A_{i-1} bounds the magnitude of the
previous loop's (saturated) virtual control; keeping the tracking error z_i
inside psi_i while |vartheta_{i-1}| < A_{i-1} then keeps x_i inside Psi_i.

Envelopes come either from the built-in table or from user expressions in a
small arithmetic language (see ``compile_scalar_expr``).  The controller only
ever needs the time partial of an envelope; when no analytic form is given a
central difference with h = 1e-6 is used.
"""

import ast
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

from .errors import ConfigError

_FD_H = 1e-6

_FUNCS = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
    "tanh": math.tanh,
    "atan": math.atan,
    "abs": abs,
}

_CONSTS = {"pi": math.pi, "e": math.e}

_ALLOWED_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_ALLOWED_UNARY = (ast.UAdd, ast.USub)


def _validate_expr(tree: ast.AST, allowed_names: set, expr: str) -> set:
    """Walk the parsed tree, rejecting anything outside the whitelist.

    Returns the set of variable names actually referenced.
    """
    used = set()
    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.Load)):
            continue
        if isinstance(node, ast.BinOp) and isinstance(node.op, _ALLOWED_BINOPS):
            continue
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, _ALLOWED_UNARY):
            continue
        if isinstance(node, _ALLOWED_BINOPS + _ALLOWED_UNARY):
            continue
        if isinstance(node, ast.Constant):
            if isinstance(node.value, (int, float)):
                continue
            raise ConfigError(f"non-numeric constant in expression {expr!r}")
        if isinstance(node, ast.Call):
            if (
                isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS
                and not node.keywords
            ):
                continue
            raise ConfigError(f"disallowed call in expression {expr!r}")
        if isinstance(node, ast.Name):
            if node.id in _FUNCS or node.id in _CONSTS:
                continue
            if node.id in allowed_names:
                used.add(node.id)
                continue
            raise ConfigError(f"unknown name {node.id!r} in expression {expr!r}")
        raise ConfigError(
            f"disallowed syntax ({type(node).__name__}) in expression {expr!r}"
        )
    return used


def compile_scalar_expr(expr: str, nstates: int) -> Callable:
    """Compile an expression in x1..x<nstates> and t to f(xbar, t) -> float."""
    names = {f"x{j + 1}" for j in range(nstates)} | {"t"}
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {expr!r}: {exc.msg}") from None
    _validate_expr(tree, names, expr)
    code = compile(tree, "<envelope>", "eval")
    base = dict(_FUNCS)
    base.update(_CONSTS)

    def fn(xbar, t):
        env = {f"x{j + 1}": xbar[j] for j in range(min(nstates, len(xbar)))}
        env["t"] = t
        env.update(base)
        return float(eval(code, {"__builtins__": {}}, env))

    fn.expr = expr
    return fn


def compile_time_expr(expr: str) -> Callable:
    """Compile an expression in t alone to f(t) -> float."""
    inner = compile_scalar_expr(expr, 0)

    def fn(t):
        return inner((), t)

    fn.expr = expr
    return fn


# --- built-in envelopes ----------------------------------------------------
# Arity is the number of leading states the envelope reads; an envelope for
# loop i may use at most x_1..x_i.

def _b3_psi1(xbar, t):
    return math.exp(-0.2 * xbar[0]) + math.exp(-3.0 * t)


def _b3_psi2(xbar, t):
    return math.exp(-0.2 * xbar[1]) + math.exp(-3.0 * t) + 2.0 * math.cos(0.5 * xbar[0])


def _b3_psi3(xbar, t):
    return math.exp(-3.0 * t) + 2.0 * math.cos(0.5 * xbar[0])


def _b3_dpsidt(xbar, t):
    return -3.0 * math.exp(-3.0 * t)


BUILTIN_ENVELOPES = {
    "benchmark3_x1": (1, _b3_psi1, _b3_dpsidt),
    "benchmark3_x2": (2, _b3_psi2, _b3_dpsidt),
    "benchmark3_x3": (3, _b3_psi3, _b3_dpsidt),
}


def _fd_time_partial(fn: Callable) -> Callable:
    def dfn(xbar, t):
        return (fn(xbar, t + _FD_H) - fn(xbar, t - _FD_H)) / (2.0 * _FD_H)

    return dfn


@dataclass(frozen=True)
class ConstraintSpec:
    """Envelope set for an order-n loop.

    A has length n: A[0] caps the reference magnitude, A[i] for i >= 1 caps
    the saturated virtual control feeding loop i+1.  Loop i (0-based) shrinks
    its envelope by A[i].
    """

    n: int
    A: Tuple[float, ...]
    Psi: Tuple[Callable, ...]
    dPsi_dt: Tuple[Callable, ...]
    names: Tuple[str, ...]

    def __post_init__(self):
        if len(self.A) != self.n:
            raise ConfigError(f"need {self.n} saturation levels, got {len(self.A)}")
        if any(a <= 0.0 for a in self.A):
            raise ConfigError("saturation levels must be positive")
        if not (len(self.Psi) == len(self.dPsi_dt) == len(self.names) == self.n):
            raise ConfigError("envelope count must equal the loop order")


def build_spec(n: int, A, entries) -> ConstraintSpec:
    """Assemble a ConstraintSpec.

    entries is one per loop: ("builtin", name) or ("expr", psi_expr, dpsi_expr)
    with dpsi_expr possibly None (finite-difference fallback).
    """
    if len(entries) != n:
        raise ConfigError(f"need {n} envelopes, got {len(entries)}")
    Psi, dPsi, names = [], [], []
    for i, entry in enumerate(entries):
        kind = entry[0]
        if kind == "builtin":
            name = entry[1]
            if name not in BUILTIN_ENVELOPES:
                known = ", ".join(sorted(BUILTIN_ENVELOPES))
                raise ConfigError(f"unknown envelope {name!r} (known: {known})")
            arity, fn, dfn = BUILTIN_ENVELOPES[name]
            if arity > i + 1:
                raise ConfigError(
                    f"envelope {name!r} reads {arity} states but guards loop {i + 1}"
                )
            Psi.append(fn)
            dPsi.append(dfn)
            names.append(name)
        elif kind == "expr":
            fn = compile_scalar_expr(entry[1], i + 1)
            dfn = (
                compile_scalar_expr(entry[2], i + 1)
                if entry[2] is not None
                else _fd_time_partial(fn)
            )
            Psi.append(fn)
            dPsi.append(dfn)
            names.append("expr")
        else:
            raise ConfigError(f"bad envelope entry kind {kind!r}")
    return ConstraintSpec(n=n, A=tuple(float(a) for a in A), Psi=tuple(Psi),
                          dPsi_dt=tuple(dPsi), names=tuple(names))


def psi_value(spec: ConstraintSpec, i: int, xbar, t: float) -> float:
    """Tube radius psi_{i+1} = Psi_{i+1} - A_i (0-based i)."""
    return spec.Psi[i](xbar, t) - spec.A[i]


def dpsi_dt(spec: ConstraintSpec, i: int, xbar, t: float) -> float:
    """Time partial of the tube radius (A is constant, so it equals dPsi/dt)."""
    return spec.dPsi_dt[i](xbar, t)
