"""Batch command line: ``delaywave {roots,green,solve,simulate,verify}``.

Settings come from an optional JSON document (``--config``) and from flags;
flags win. Exit codes: 0 success, 1 usage error, 2 guard or certificate
failure, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import datetime
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__, charpoly, green, models, simulate, waves
from .errors import GuardError, NumericalError


class UsageError(Exception):
    pass


def _float_list(v):
    if isinstance(v, str):
        v = [s for s in v.split(",") if s.strip()]
    if not isinstance(v, (list, tuple)) or not v:
        raise ValueError("expected a comma-separated list of numbers")
    return [float(x) for x in v]


def _bool(v):
    if isinstance(v, bool):
        return v
    raise ValueError("expected true or false")


def _choice(*options):
    def conv(v):
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v
    return conv


def _opt_float(v):
    return None if v is None else float(v)


# key -> (converter, default, help); None default means "required" for model
# parameters and "unset" elsewhere
COMMON = {
    "out": (str, ".", "output directory"),
    "metadata": (_bool, True, "write a timestamped metadata line first in each CSV"),
}
MODEL = {
    "model": (_choice("fisher", "bz"), "fisher", "built-in model"),
    "c": (float, None, "wave speed"),
    "theta": (float, None, "Fisher upper-solution shift (default 0.5)"),
    "k": (float, None, "lower-solution height parameter (default 2)"),
    "b": (float, None, "BZ parameter b > 1"),
    "r": (float, None, "BZ parameter 0 < r <= 1/4"),
    "tau1": (float, 0.0, "diffusion delay"),
    "tau2": (float, 0.0, "reaction delay"),
    "t_min": (float, -60.0, "profile window start"),
    "t_max": (float, 60.0, "profile window end"),
    "dt": (float, 0.01, "profile grid spacing"),
}
SCHEMAS = {
    "roots": {
        "a": (float, None, "coefficient of x'(t+r)"),
        "b": (float, None, "coefficient of x(t+r)"),
        "D": (float, 1.0, "diffusion coefficient"),
        "r": (_float_list, [0.0, 0.01, 0.05, 0.1], "comma-separated delays"),
        "height": (float, 50.0, "half-height of the counting rectangles"),
    },
    "green": {
        "a": (float, None, "coefficient of x'(t+r)"),
        "b": (float, None, "coefficient of x(t+r)"),
        "r": (float, 0.0, "delay"),
        "D": (float, 1.0, "diffusion coefficient"),
        "t_min": (float, -10.0, "table start"),
        "t_max": (float, 10.0, "table end"),
        "dt": (float, 0.1, "table spacing"),
        "hybrid": (_bool, False, "closed-form exponentials away from the quadrature band"),
    },
    "solve": dict(MODEL, **{
        "upper": (_choice("classical", "neutral"), "neutral", "starting upper solution"),
        "tol": (float, 1e-6, "iteration stopping tolerance"),
        "max_iter": (int, 200, "iteration limit"),
    }),
    "simulate": dict(MODEL, **{
        "upper": (_choice("classical", "neutral"), "neutral", "upper solution when solving first"),
        "tol": (float, 1e-6, "iteration tolerance when solving first"),
        "max_iter": (int, 200, "iteration limit when solving first"),
        "profile": (str, None, "profile JSON written by solve (solved afresh if absent)"),
        "T": (float, 5.0, "final time"),
        "dx": (float, 0.2, "spatial spacing"),
        "dtime": (_opt_float, None, "time step (default: largest allowed)"),
        "output_interval": (float, 0.1, "front-recording interval"),
        "snapshot_every": (int, 10, "keep a snapshot every this many records"),
        "x_stride": (int, 1, "spatial stride of the trajectory CSV"),
    }),
    "verify": dict(MODEL, **{
        "upper": (_choice("classical", "neutral"), "classical", "upper solution to verify"),
        "tol": (float, 1e-8, "verification tolerance"),
    }),
}


@dataclass
class RunConfig:
    command: str
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    @classmethod
    def build(cls, command: str, file_values: dict, flag_values: dict) -> "RunConfig":
        """Validate a config document and overlay flags on it."""
        schema = dict(COMMON, **SCHEMAS[command])
        file_values = dict(file_values)
        if file_values.get("command", command) != command:
            raise UsageError(f"config is for command {file_values['command']!r}, not {command!r}")
        file_values.pop("command", None)
        unknown = sorted(set(file_values) - set(schema))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        values = {}
        for key, (conv, default, _) in schema.items():
            raw = flag_values.get(key, file_values.get(key, default))
            try:
                values[key] = raw if raw is None else conv(raw)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad value for {key!r}: {exc}") from None
        return cls(command, values)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="delaywave", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"delaywave {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name, schema in SCHEMAS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON document with settings for this command")
        sp.add_argument("--out", default=argparse.SUPPRESS, help=COMMON["out"][2])
        sp.add_argument("--no-metadata", dest="metadata", action="store_false",
                        default=argparse.SUPPRESS, help="omit the timestamped metadata line")
        for key, (_, default, help_) in schema.items():
            flag = "--" + key.replace("_", "-")
            if default is False:
                sp.add_argument(flag, dest=key, action="store_true", default=argparse.SUPPRESS, help=help_)
            else:
                sp.add_argument(flag, dest=key, default=argparse.SUPPRESS, help=help_)
    return p


# ---------------------------------------------------------------- output

def _meta_line(cfg: RunConfig) -> str:
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return f"# delaywave {__version__} {cfg.command} {stamp}\n"


def write_csv(cfg: RunConfig, name: str, columns, units, data, fmt="%.16e") -> str:
    """CSV with optional metadata line, a units comment and a header row."""
    path = os.path.join(cfg["out"], name)
    with open(path, "w", newline="") as fh:
        if cfg["metadata"]:
            fh.write(_meta_line(cfg))
        fh.write("# units: " + ", ".join(f"{c} [{u}]" for c, u in zip(columns, units)) + "\n")
        fh.write(",".join(columns) + "\n")
        data = np.asarray(data, dtype=float).reshape(-1, len(columns))
        for row in data:
            fh.write(",".join(fmt % v for v in row) + "\n")
    return path


def read_csv(path):
    """Header names and data of a CSV written by :func:`write_csv`."""
    with open(path) as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    names = lines[0].strip().split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return names, data.reshape(-1, len(names))


def write_json(cfg: RunConfig, name: str, schema: str, payload: dict) -> str:
    path = os.path.join(cfg["out"], name)
    doc = {"schema": schema}
    doc.update(payload)
    if cfg["metadata"]:
        doc["generated"] = _meta_line(cfg)[2:].strip()
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return path


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON serialisable: {type(v)}")


_PLOT = '''"""Plot {title} from {csv}. Requires matplotlib."""
import csv
import os

import matplotlib.pyplot as plt

here = os.path.dirname(os.path.abspath(__file__))
with open(os.path.join(here, "{csv}")) as fh:
    rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
names, rows = rows[0], [[float(v) for v in r] for r in rows[1:]]
cols = list(zip(*rows))
{body}
plt.legend()
plt.savefig(os.path.join(here, "{png}"), dpi=150)
'''

_PLOT_LINES = '''for j in range(1, len(names)):
    plt.plot(cols[0], cols[j], label=names[j])
plt.xlabel(names[0])'''

_PLOT_SNAPSHOTS = '''times = sorted(set(cols[0]))
for t in times:
    idx = [i for i, v in enumerate(cols[0]) if v == t]
    plt.plot([cols[1][i] for i in idx], [cols[2][i] for i in idx], label=f"t={{t:g}}")
plt.xlabel("x")'''


def write_plot_script(cfg: RunConfig, name: str, csv_name: str, title: str, snapshots=False) -> str:
    path = os.path.join(cfg["out"], name)
    body = _PLOT_SNAPSHOTS.replace("{{", "{").replace("}}", "}") if snapshots else _PLOT_LINES
    with open(path, "w") as fh:
        fh.write(_PLOT.format(title=title, csv=csv_name, png=name.replace(".py", ".png"), body=body))
    return path


# ---------------------------------------------------------------- pipelines

def _model_params(cfg: RunConfig):
    name = cfg["model"]
    allowed = {"fisher": ("c", "theta", "k", "tau1", "tau2"),
               "bz": ("c", "b", "r", "k", "tau1", "tau2")}[name]
    stray = [k for k in ("theta", "b", "r") if k not in allowed and cfg[k] is not None]
    if stray:
        raise UsageError(f"{', '.join(stray)} not used by model {name}")
    if cfg["c"] is None:
        raise UsageError("--c is required")
    kw = {k: cfg[k] for k in allowed if cfg[k] is not None}
    if name == "bz":
        missing = [k for k in ("b", "r") if k not in kw]
        if missing:
            raise UsageError(f"model bz requires {', '.join('--' + k for k in missing)}")
        return models.BZParams(**kw)
    return models.FisherParams(**kw)


def _grid(cfg):
    return (cfg["t_min"], cfg["t_max"], cfg["dt"])


def _upper_option(cfg):
    if cfg["model"] == "fisher":
        return {"upper_rate": "closed_form" if cfg["upper"] == "classical" else "neutral"}
    return {"upper": "two_sided" if cfg["upper"] == "classical" else "neutral"}


def _candidates(cfg):
    params = _model_params(cfg)
    if cfg["model"] == "fisher":
        return models.fisher_candidates(params, _upper_option(cfg)["upper_rate"])
    return models.bz_candidates(params, _upper_option(cfg)["upper"])


def _solve(cfg, out=print):
    params = _model_params(cfg)
    build = models.fisher if cfg["model"] == "fisher" else models.bz
    model, upper, lower = build(params, grid=_grid(cfg), **_upper_option(cfg))
    phi, report = waves.iterate(model, upper, lower, tol=cfg["tol"], max_iter=cfg["max_iter"])
    out(f"converged in {report.iterations} iterations; residual {report.final_residual:.3e}")
    return model, phi, report


def cmd_roots(cfg):
    if cfg["a"] is None or cfg["b"] is None:
        raise UsageError("--a and --b are required")
    a, b, D, h = cfg["a"], cfg["b"], cfg["D"], cfg["height"]
    lam1, lam2 = charpoly.roots_nodelay(a, b, D)
    table, counts = [], []
    for r in cfg["r"]:
        eta = green.principal_roots(green.OperatorParams(a, b, r, D))
        P = charpoly.char_poly(a, b, r, D)
        right = charpoly.winding_count(P, charpoly.Rectangle(0.0, 2 * lam1, -h, h))
        left = charpoly.winding_count(P, charpoly.Rectangle(2 * lam2, 0.0, -h, h))
        table.append((r, eta.eta1, eta.eta2))
        counts.append((r, right, left))
        print(f"r={r:g}: eta1={eta.eta1:.12g} eta2={eta.eta2:.12g} strip counts {right}/{left}")
    write_csv(cfg, "roots.csv", ["r", "eta1", "eta2"], ["time", "1/time", "1/time"], table)
    write_csv(cfg, "strips.csv", ["r", "count_right", "count_left"], ["time", "roots", "roots"],
              counts, fmt="%.10g")
    return 0


def cmd_green(cfg):
    if cfg["a"] is None or cfg["b"] is None:
        raise UsageError("--a and --b are required")
    params = green.OperatorParams(cfg["a"], cfg["b"], cfg["r"], cfg["D"])
    tab = green.green_table(params, cfg["t_min"], cfg["t_max"], cfg["dt"], hybrid=cfg["hybrid"])
    write_csv(cfg, "green.csv", ["t", "G"], ["time", "1"], np.column_stack([tab.t, tab.values]))
    write_plot_script(cfg, "plot_green.py", "green.csv", "the Green function")
    if tab.negativity_certified:
        print(f"negativity: certified on {tab.t.size} samples (max G = {tab.values.max():.3e})")
        return 0
    t0, g0 = tab.violations[0]
    print(f"negativity: FAILED, G({t0:g}) = {g0:.3e} >= 0 ({len(tab.violations)} samples)",
          file=sys.stderr)
    return 2


def _profile_csv(cfg, phi):
    cols = ["t"] + [f"phi_{i + 1}" for i in range(phi.m)]
    data = np.column_stack([phi.t] + [g.values for g in phi.components])
    return write_csv(cfg, "profile.csv", cols, ["wave coordinate"] + ["1"] * phi.m, data)


def cmd_solve(cfg):
    model, phi, report = _solve(cfg)
    _profile_csv(cfg, phi)
    with open(os.path.join(cfg["out"], "profile.json"), "w") as fh:
        fh.write(phi.to_json())
    write_json(cfg, "iteration.json", "delaywave.iteration/1",
               dict(report.to_dict(), model=json.loads(models.model_to_json(model)), upper=cfg["upper"]))
    write_plot_script(cfg, "plot_profile.py", "profile.csv", "the wave profile")
    return 0


def cmd_simulate(cfg):
    if cfg["profile"]:
        with open(cfg["profile"]) as fh:
            phi = waves.Profile.from_json(fh.read())
        params = _model_params(cfg)
        model = _candidates(cfg)[0]
        if phi.m != model.m:
            raise UsageError(f"profile has {phi.m} components, model {params} needs {model.m}")
    else:
        model, phi, _ = _solve(cfg)
    traj = simulate.run(model, phi, cfg["T"], dx=cfg["dx"], dtime=cfg["dtime"],
                        output_interval=cfg["output_interval"], snapshot_every=cfg["snapshot_every"])
    slope = simulate.wave_speed_estimate(traj)
    path = os.path.join(cfg["out"], "trajectory.csv")
    m = model.m
    rows = [np.column_stack([np.full(traj.final.x[::cfg["x_stride"]].size, t), traj.final.x[::cfg["x_stride"]]]
                            + [u[i, ::cfg["x_stride"]] for i in range(m)]) for t, u in traj.snapshots]
    write_csv(cfg, "trajectory.csv", ["t", "x"] + [f"u_{i + 1}" for i in range(m)],
              ["time", "space"] + ["1"] * m, np.vstack(rows))
    write_csv(cfg, "fronts.csv", ["t", "x_front"], ["time", "space"],
              np.column_stack([traj.times, traj.fronts]))
    write_json(cfg, "simulation.json", "delaywave.simulation/1",
               {"front_velocity": slope, "speed": -slope, "c": model.c, "T": cfg["T"],
                "dx": traj.final.dx, "dtime": traj.final.dtime,
                "range": [traj.min_value, traj.max_value]})
    write_plot_script(cfg, "plot_trajectory.py", os.path.basename(path), "PDE snapshots", snapshots=True)
    print(f"measured speed {-slope:.6g} (c = {model.c:g}); front velocity {slope:.6g}")
    return 0


def cmd_verify(cfg):
    model, upper, lower = _candidates(cfg)
    grid = _grid(cfg)
    up = waves.verify_upper(model, upper, tol=cfg["tol"], grid=grid)
    lo = waves.verify_lower(model, lower, tol=cfg["tol"], grid=grid)
    write_json(cfg, "verify.json", "delaywave.verification/1",
               {"model": json.loads(models.model_to_json(model)), "upper_variant": cfg["upper"],
                "upper": up.to_dict(), "lower": lo.to_dict()})
    for rep in (up, lo):
        status = "pass" if rep.passed else "FAIL"
        print(f"{rep.kind}: {status} (max violation {rep.max_violation:.3e}, "
              f"{rep.excluded} points excluded near kinks)")
    if up.passed and lo.passed:
        return 0
    bad = up if not up.passed else lo
    print(f"{bad.kind}-solution inequality fails by {bad.max_violation:.3e} at t={bad.location}",
          file=sys.stderr)
    return 2


COMMANDS = {"roots": cmd_roots, "green": cmd_green, "solve": cmd_solve,
            "simulate": cmd_simulate, "verify": cmd_verify}


def main(argv=None) -> int:
    try:
        ns = vars(build_parser().parse_args(argv))
        command = ns.pop("command")
        if command is None:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        file_values = {}
        path = ns.pop("config", None)
        if path:
            try:
                with open(path) as fh:
                    file_values = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"cannot read config {path}: {exc}") from None
            if not isinstance(file_values, dict):
                raise UsageError("config must be a JSON object")
        flags = {}
        schema = dict(COMMON, **SCHEMAS[command])
        for key, raw in ns.items():
            flags[key] = raw
        cfg = RunConfig.build(command, file_values, {k: v for k, v in flags.items() if k in schema})
        os.makedirs(cfg["out"], exist_ok=True)
        return COMMANDS[command](cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except GuardError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
