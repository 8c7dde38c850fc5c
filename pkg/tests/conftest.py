import subprocess
import sys
from dataclasses import replace
from pathlib import Path

import pytest

from blfsim.scenario import build_config, load_scenario
from blfsim.simulator import run

REPO = Path(__file__).resolve().parent.parent
SCENARIOS = REPO / "scenarios"


@pytest.fixture(scope="session")
def scenario_dir():
    return SCENARIOS


def load_config(name, engine=None, **doc_overrides):
    """Scenario -> (SimConfig, OutputOptions, x0_box) with section.key tweaks."""
    doc = load_scenario(SCENARIOS / f"{name}.scenario")
    for dotted, value in doc_overrides.items():
        section, key = dotted.split(".")
        doc.setdefault(section, {})[key] = value
    config, opts, box = build_config(doc, default_csv=f"{name}.csv")
    if engine:
        config = replace(config, engine=engine)
    return config, opts, box


@pytest.fixture(scope="session")
def benchmark_traj():
    """The flagship scenario as shipped; ends in a loop-3 tube violation."""
    config, _, _ = load_config("benchmark3", engine="python")
    return run(config)


@pytest.fixture(scope="session")
def chain_traj():
    config, _, _ = load_config("chain3", engine="python")
    return run(config)


@pytest.fixture(scope="session")
def observer_traj():
    config, _, _ = load_config("observer_demo", engine="python")
    return run(config)


def cli(*argv, cwd=None, env=None):
    """Invoke the CLI in a subprocess; returns CompletedProcess."""
    return subprocess.run(
        [sys.executable, "-m", "blfsim.cli", *map(str, argv)],
        capture_output=True,
        text=True,
        cwd=cwd,
        env=env,
    )


@pytest.fixture
def run_cli(tmp_path):
    def _run(*argv, **kw):
        kw.setdefault("cwd", tmp_path)
        return cli(*argv, **kw)

    _run.cwd = tmp_path
    return _run
