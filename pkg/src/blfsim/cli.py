"""Command-line front end: run, sweep, check, plot.

Exit codes: 0 success, 1 configuration problem, 2 constraint violation
during a run, 3 divergence.  Sweeps and checks return 0/1.
"""

import argparse
import copy
import itertools
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import checks as checks_mod
from .errors import ConfigError, InitialConditionError
from .scenario import (
    OutputOptions,
    apply_override,
    build_config,
    config_digest,
    load_scenario,
    parse_override,
)
from .simulator import Trajectory, run, summarize, validate_initial

SCENARIO_DIR_ENV = "BLFSIM_SCENARIO_DIR"


def resolve_scenario(name: str) -> Path:
    """Find a scenario by path, or by name inside the scenario directory."""
    candidates = [Path(name)]
    if not name.endswith(".scenario"):
        candidates.append(Path(name + ".scenario"))
    env = os.environ.get(SCENARIO_DIR_ENV)
    if env:
        for c in list(candidates):
            if not c.is_absolute():
                candidates.append(Path(env) / c)
    for c in candidates:
        if c.is_file():
            return c
    raise ConfigError(f"scenario file not found: {name}")


def _load_with_overrides(args):
    path = resolve_scenario(args.scenario)
    doc = load_scenario(path)
    for item in args.set or []:
        key, value = parse_override(item)
        apply_override(doc, key, value)
    return path, doc


def write_csv(traj: Trajectory, path):
    """12 significant digits, LF endings, '.' decimal separator."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(traj.columns) + "\n")
        for row in traj.data:
            fh.write(",".join(format(v, ".12g") for v in row) + "\n")


@dataclass
class RunReport:
    status: str
    engine: str
    steps_done: int
    steps_total: int
    wall_clock_s: float
    config_digest: str
    seed: int
    csv: str
    metrics: dict
    violation: dict
    divergence: str

    def emit(self, out=None):
        out = out or sys.stdout
        print(f"status: {self.status}", file=out)
        print(f"engine: {self.engine}", file=out)
        print(f"steps: {self.steps_done}/{self.steps_total}", file=out)
        print(f"wall_clock_s: {self.wall_clock_s:.3f}", file=out)
        print(f"config: {self.config_digest}", file=out)
        print(f"seed: {self.seed}", file=out)
        print(f"csv: {self.csv}", file=out)
        for key, value in self.metrics.items():
            if isinstance(value, list):
                value = " ".join(f"{v:.6g}" for v in value)
            elif isinstance(value, float):
                value = f"{value:.6g}"
            print(f"metric {key}: {value}", file=out)
        if self.violation:
            v = self.violation
            print(
                f"violation: kind={v['kind']} loop={v['loop']} t={v['t']:.6f} "
                f"value={v['value']:.6g} bound={v['bound']:.6g}",
                file=out,
            )
        if self.divergence:
            print(f"divergence: {self.divergence}", file=out)


_EXIT_BY_STATUS = {"ok": 0, "violated": 2, "diverged": 3}


def cmd_run(args) -> int:
    path, doc = _load_with_overrides(args)
    config, opts, _ = build_config(doc, default_csv=path.stem + ".csv")
    if args.engine:
        config = replace(config, engine=args.engine)
    try:
        traj = run(config)
    except InitialConditionError as exc:
        for problem in exc.violations:
            print(f"error: {problem}", file=sys.stderr)
        return 1

    csv_path = args.csv or opts.csv
    write_csv(traj, csv_path)
    report = RunReport(
        status=traj.status,
        engine=traj.engine,
        steps_done=traj.steps_done,
        steps_total=traj.steps_total,
        wall_clock_s=traj.wall_s,
        config_digest=config_digest(config),
        seed=config.seed,
        csv=str(csv_path),
        metrics=summarize(traj) if traj.data.shape[0] else {},
        violation=traj.violation,
        divergence=traj.divergence,
    )
    report.emit()
    if opts.plot_script or args.plot_script:
        script = Path(csv_path).with_suffix("").as_posix() + "_plot.py"
        emit_plot_script(csv_path, script)
        print(f"plot_script: {script}")
    return _EXIT_BY_STATUS[traj.status]


def _sweep_trial(item):
    """Run one sweep trial; top level so worker pools can pickle it."""
    index, seed_value, config, grid_values = item
    traj = run(config)
    row = {
        "trial": index,
        "seed": seed_value,
    }
    for key, value in grid_values:
        row[key] = value
    row["status"] = traj.status
    rows = traj.data.shape[0]
    row["t_end"] = float(traj.data[-1, 0]) if rows else float("nan")
    if traj.violation:
        row["violation_kind"] = traj.violation["kind"]
        row["violation_loop"] = traj.violation["loop"]
        row["violation_time"] = traj.violation["t"]
    else:
        row["violation_kind"] = ""
        row["violation_loop"] = ""
        row["violation_time"] = ""
    if rows:
        metrics = summarize(traj)
        row["constraint_ratio_max"] = metrics["constraint_ratio_max"]
        row["z1_rms_tail"] = metrics["z1_rms_tail"]
        row["u_sup"] = metrics["u_sup"]
        for i, v in enumerate(metrics["wnorm_sup"]):
            row[f"wnorm_sup{i + 1}"] = v
        for i, v in enumerate(metrics["zeta_sup"]):
            row[f"zeta_sup{i + 1}"] = v
        for i, v in enumerate(metrics["eps_hat_sup"]):
            row[f"eps_hat_sup{i + 1}"] = v
        for i, v in enumerate(metrics["theta_sup"]):
            row[f"theta_sup{i + 1}"] = v
    return row


def cmd_sweep(args) -> int:
    path, doc = _load_with_overrides(args)

    grid_axes = []
    for item in args.grid or []:
        if "=" not in item:
            raise ConfigError(f"grid entry {item!r} is not key=v1,v2,...")
        key, raw = item.split("=", 1)
        values = [parse_override(f"{key}={v}")[1] for v in raw.split(",")]
        if not values:
            raise ConfigError(f"grid entry {item!r} has no values")
        grid_axes.append((key.strip(), values))
    points = list(itertools.product(*(vals for _, vals in grid_axes))) or [()]

    base_config, _, x0_box = build_config(doc, default_csv=path.stem + ".csv")
    master = args.seed if args.seed is not None else base_config.seed

    items = []
    g = 0
    for point in points:
        doc_p = copy.deepcopy(doc)
        for (key, _), value in zip(grid_axes, point):
            apply_override(doc_p, key, value)
        config_p, _, x0_box_p = build_config(doc_p, default_csv=path.stem + ".csv")
        if args.engine:
            config_p = replace(config_p, engine=args.engine)
        for _trial in range(args.trials):
            ss = np.random.SeedSequence([master, g])
            seed_value = int(ss.generate_state(1, dtype=np.uint64)[0])
            config_g = config_p
            if x0_box_p is not None:
                rng = np.random.default_rng(ss)
                config_g = None
                for _attempt in range(1000):
                    x0 = tuple(float(rng.uniform(lo, hi)) for lo, hi in x0_box_p)
                    candidate = replace(config_p, x0=x0)
                    if not validate_initial(candidate):
                        config_g = candidate
                        break
                if config_g is None:
                    print(
                        f"error: no admissible initial state found for trial {g} "
                        "(sampler exhausted 1000 draws)",
                        file=sys.stderr,
                    )
                    return 1
            grid_values = [
                (key, value) for (key, _), value in zip(grid_axes, point)
            ]
            items.append((g, seed_value, config_g, grid_values))
            g += 1

    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_trial, items))
    else:
        rows = [_sweep_trial(item) for item in items]

    out_path = args.out or (path.stem + "_sweep.csv")
    columns = list(rows[0].keys()) if rows else ["trial"]
    with open(out_path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = []
            for col in columns:
                v = row.get(col, "")
                if isinstance(v, float):
                    cells.append(format(v, ".12g"))
                else:
                    cells.append(str(v))
            fh.write(",".join(cells) + "\n")
    print(f"sweep: {len(rows)} trials -> {out_path}")
    ok = sum(1 for r in rows if r["status"] == "ok")
    print(f"status ok: {ok}/{len(rows)}")
    return 0


def cmd_check(args) -> int:
    results = checks_mod.run_all()
    for res in results:
        tag = "PASS" if res.passed else "FAIL"
        print(f"{tag} {res.name}: {res.detail}")
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 0 if not failed else 1


_PLOT_TEMPLATE = '''\
"""Render the figure set for one logged run.

Generated file; reads {csv!r} and draws state envelopes, the control
input, observer estimates, Nussbaum arguments, and weight norms.
"""

import numpy as np
import matplotlib.pyplot as plt

data = np.genfromtxt({csv!r}, delimiter=",", names=True)
t = data["t"]
{state_blocks}
plt.figure()
plt.plot(t, data["u"])
plt.xlabel("t [s]")
plt.ylabel("u")
plt.title("control input")
plt.savefig("fig_u.png", dpi=120)

plt.figure()
for i in range(1, {n} + 1):
    plt.plot(t, data[f"eps_hat{{i}}"], label=f"eps_hat{{i}}")
plt.xlabel("t [s]")
plt.legend()
plt.title("observer estimates")
plt.savefig("fig_eps_hat.png", dpi=120)

plt.figure()
for i in range(1, {n} + 1):
    plt.plot(t, data[f"zeta{{i}}"], label=f"zeta{{i}}")
plt.xlabel("t [s]")
plt.legend()
plt.title("Nussbaum arguments")
plt.savefig("fig_zeta.png", dpi=120)

plt.figure()
for i in range(1, {n} + 1):
    plt.plot(t, data[f"Wnorm{{i}}"], label=f"|W{{i}}|")
plt.xlabel("t [s]")
plt.legend()
plt.title("weight norms")
plt.savefig("fig_wnorm.png", dpi=120)

plt.show()
'''

_STATE_BLOCK = '''\
plt.figure()
plt.plot(t, data["x{i}"], label="x{i}")
plt.plot(t, data["Psi{i}"], "r--", label="envelope")
plt.plot(t, -data["Psi{i}"], "r--")
{extra}plt.xlabel("t [s]")
plt.legend()
plt.title("state x{i} and its envelope")
plt.savefig("fig_x{i}.png", dpi=120)
'''


def emit_plot_script(csv_path, out_path) -> str:
    """Write a standalone matplotlib script for a logged CSV."""
    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise ConfigError(f"CSV not found: {csv_path}")
    with open(csv_path) as fh:
        header = fh.readline().strip().split(",")
    n = sum(1 for c in header if c.startswith("x") and c[1:].isdigit())
    if n == 0 or "t" not in header:
        raise ConfigError(f"{csv_path} does not look like a run log")
    blocks = []
    for i in range(1, n + 1):
        extra = 'plt.plot(t, data["yd"], "k:", label="reference")\n' if i == 1 else ""
        blocks.append(_STATE_BLOCK.format(i=i, extra=extra))
    script = _PLOT_TEMPLATE.format(
        csv=str(csv_path), n=n, state_blocks="\n".join(blocks)
    )
    with open(out_path, "w", newline="") as fh:
        fh.write(script)
    return str(out_path)


def cmd_plot(args) -> int:
    out = args.out or (Path(args.csv).with_suffix("").as_posix() + "_plot.py")
    emit_plot_script(args.csv, out)
    print(f"plot_script: {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blfsim",
        description="Simulate barrier-constrained adaptive backstepping loops",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="integrate one scenario and write a CSV log")
    p_run.add_argument("scenario", help="scenario file (searched in "
                       f"${SCENARIO_DIR_ENV} if not found directly)")
    p_run.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a scenario value by dotted path")
    p_run.add_argument("--csv", help="output CSV path (default from scenario)")
    p_run.add_argument("--engine", choices=("auto", "python", "compiled"),
                       help="override the integration engine")
    p_run.add_argument("--plot-script", action="store_true",
                       help="also emit a plot script next to the CSV")
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run many trials over seeds and grids")
    p_sweep.add_argument("scenario")
    p_sweep.add_argument("--trials", type=int, default=10,
                         help="trials per grid point (default 10)")
    p_sweep.add_argument("--seed", type=int, default=None,
                         help="master seed (default: scenario seed)")
    p_sweep.add_argument("--grid", action="append", metavar="KEY=V1,V2",
                         help="sweep a scenario key over listed values")
    p_sweep.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_sweep.add_argument("--out", help="aggregate CSV path")
    p_sweep.add_argument("--jobs", type=int, default=1,
                         help="worker processes (default 1)")
    p_sweep.add_argument("--engine", choices=("auto", "python", "compiled"))
    p_sweep.set_defaults(func=cmd_sweep)

    p_check = sub.add_parser("check", help="run the property self-checks")
    p_check.set_defaults(func=cmd_check)

    p_plot = sub.add_parser("plot", help="emit a plot script for a run CSV")
    p_plot.add_argument("csv")
    p_plot.add_argument("--out", help="script path (default <csv>_plot.py)")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
