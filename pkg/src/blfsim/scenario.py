"""Scenario files: TOML documents mapping one-to-one onto SimConfig.

Unknown keys are rejected everywhere; a typo in a gain name should fail the
run, not silently fall back to a default.  Dotted-path overrides are applied
to the parsed document before validation so they obey the same schema.
"""

import hashlib
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

try:
    import tomllib
except ImportError:
    import tomli as tomllib

from .errors import ConfigError
from .simulator import SimConfig

_SECTIONS = {
    "system": {"plant", "x0"},
    "trajectory": {"yd"},
    "constraints": {"A", "envelope"},
    "controller": {"k", "k_eps", "rho", "mu_bar", "zeta0"},
    "network": {"nodes", "width", "center_box", "lambda", "eta", "filter_tau"},
    "integration": {"dt", "t_final", "seed", "engine", "ceiling"},
    "output": {"csv", "decimation", "plot_script"},
    "sweep": {"x0_box"},
}

_ENVELOPE_KEYS = {"builtin", "psi", "dpsi_dt"}


@dataclass(frozen=True)
class OutputOptions:
    csv: str
    plot_script: bool


def load_scenario(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse scenario {path}: {exc}") from None


def parse_override(item: str):
    """Split one KEY=VALUE override; the value is parsed as a TOML literal."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, raw = item.split("=", 1)
    key = key.strip()
    if not key:
        raise ConfigError(f"override {item!r} has an empty key")
    try:
        value = tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        raise ConfigError(f"cannot parse override value {raw!r}") from None
    return key, value


def apply_override(doc: dict, dotted: str, value):
    """Set a dotted path in the nested document, creating tables as needed.

    Integer segments index into arrays (existing entries only).
    """
    parts = dotted.split(".")
    node = doc
    for seg in parts[:-1]:
        if isinstance(node, list):
            node = _index(node, seg, dotted)
        elif isinstance(node, dict):
            node = node.setdefault(seg, {})
        else:
            raise ConfigError(f"cannot descend into scalar at {seg!r} in {dotted!r}")
    last = parts[-1]
    if isinstance(node, list):
        node[_int_index(node, last, dotted)] = value
    elif isinstance(node, dict):
        node[last] = value
    else:
        raise ConfigError(f"cannot set {dotted!r}: parent is a scalar")


def _int_index(node, seg, dotted):
    try:
        idx = int(seg)
    except ValueError:
        raise ConfigError(f"array index expected at {seg!r} in {dotted!r}") from None
    if not -len(node) <= idx < len(node):
        raise ConfigError(f"index {idx} out of range in {dotted!r}")
    return idx


def _index(node, seg, dotted):
    return node[_int_index(node, seg, dotted)]


def _check_keys(doc: dict):
    for section, content in doc.items():
        if section not in _SECTIONS:
            known = ", ".join(sorted(_SECTIONS))
            raise ConfigError(f"unknown section [{section}] (known: {known})")
        if not isinstance(content, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key in content:
            if key not in _SECTIONS[section]:
                allowed = ", ".join(sorted(_SECTIONS[section]))
                raise ConfigError(
                    f"unknown key {key!r} in [{section}] (allowed: {allowed})"
                )
    for i, env in enumerate(doc.get("constraints", {}).get("envelope", [])):
        if not isinstance(env, dict):
            raise ConfigError("constraints.envelope entries must be tables")
        for key in env:
            if key not in _ENVELOPE_KEYS:
                raise ConfigError(
                    f"unknown key {key!r} in constraints.envelope[{i}]"
                )


def _require(doc, section, key):
    try:
        return doc[section][key]
    except KeyError:
        raise ConfigError(f"missing required key {section}.{key}") from None


def _floats(value, n, name):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return tuple(float(value) for _ in range(n))
    if isinstance(value, list) and len(value) == n:
        return tuple(float(v) for v in value)
    raise ConfigError(f"{name} must be a number or a list of {n} numbers")


def build_config(doc: dict, default_csv: str = "run.csv"):
    """Validate a scenario document and produce the run configuration.

    Returns (SimConfig, OutputOptions, x0_box) where x0_box is the optional
    per-state sampling box for sweeps.
    """
    _check_keys(doc)
    x0 = _require(doc, "system", "x0")
    if not isinstance(x0, list) or not x0:
        raise ConfigError("system.x0 must be a nonempty list")
    n = len(x0)

    envelopes = _require(doc, "constraints", "envelope")
    if not isinstance(envelopes, list) or len(envelopes) != n:
        raise ConfigError(f"need exactly {n} constraints.envelope entries")
    entries = []
    for i, env in enumerate(envelopes):
        if "builtin" in env:
            if "psi" in env or "dpsi_dt" in env:
                raise ConfigError(
                    f"constraints.envelope[{i}]: builtin and psi are exclusive"
                )
            entries.append(("builtin", env["builtin"]))
        elif "psi" in env:
            entries.append(("expr", env["psi"], env.get("dpsi_dt")))
        else:
            raise ConfigError(
                f"constraints.envelope[{i}] needs either builtin or psi"
            )

    ctrl = doc.get("controller", {})
    net = doc.get("network", {})
    integ = doc.get("integration", {})
    out = doc.get("output", {})

    box = net.get("center_box", [-3.0, 3.0])
    if not (isinstance(box, list) and len(box) == 2):
        raise ConfigError("network.center_box must be [low, high]")

    config = SimConfig(
        n=n,
        plant=_require(doc, "system", "plant"),
        yd=_require(doc, "trajectory", "yd"),
        envelopes=tuple(entries),
        A=_floats(_require(doc, "constraints", "A"), n, "constraints.A"),
        k=_floats(_require(doc, "controller", "k"), n, "controller.k"),
        k_eps=_floats(_require(doc, "controller", "k_eps"), n, "controller.k_eps"),
        lam=_floats(_require(doc, "network", "lambda"), n, "network.lambda"),
        eta=_floats(net.get("eta", 0.1), n, "network.eta"),
        rho=float(ctrl.get("rho", 0.5)),
        mu_bar=float(ctrl.get("mu_bar", 0.5)),
        x0=tuple(float(v) for v in x0),
        zeta0=_floats(ctrl.get("zeta0", 0.0), n, "controller.zeta0"),
        nn_l=int(net.get("nodes", 30)),
        nn_width=float(net.get("width", 2.0)),
        center_box=(float(box[0]), float(box[1])),
        filter_tau=float(net.get("filter_tau", 0.01)),
        dt=float(integ.get("dt", 1e-4)),
        t_final=float(integ.get("t_final", 20.0)),
        decimation=int(out.get("decimation", 100)),
        seed=int(integ.get("seed", 0)),
        ceiling=float(integ.get("ceiling", 1e6)),
        engine=str(integ.get("engine", "auto")),
    )

    options = OutputOptions(
        csv=str(out.get("csv", default_csv)),
        plot_script=bool(out.get("plot_script", False)),
    )

    x0_box = doc.get("sweep", {}).get("x0_box")
    if x0_box is not None:
        if not (isinstance(x0_box, list) and len(x0_box) == n):
            raise ConfigError(f"sweep.x0_box must list {n} [low, high] pairs")
        x0_box = tuple(
            (float(lo), float(hi)) for lo, hi in (pair for pair in x0_box)
        )
        for lo, hi in x0_box:
            if hi < lo:
                raise ConfigError("sweep.x0_box intervals must not be reversed")
    return config, options, x0_box


def config_digest(config: SimConfig) -> str:
    canon = repr(sorted(asdict(config).items()))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]
