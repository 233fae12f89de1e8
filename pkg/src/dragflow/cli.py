"""Command-line front end: ``dragflow <experiment> [--config FILE] [--assert] ...``.

Exit codes: 0 success, 1 acceptance failure (with ``--assert``), 2 configuration
error, 3 numerical blow-up.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
from pathlib import Path

import scipy.fft

from . import __version__
from . import experiments as ex
from .diagnostics import DomainError, decay_fit, read_series_csv, report_json, write_series_csv
from .initial_data import DataSpec
from .solver import BlowUpError, StepperConfig, save_checkpoint
from .spectral import ConfigurationError, FrequencyCutoff

EXPERIMENTS = ("validate-kernel", "asymptotics", "kernel-decay", "lower-bound", "simulate", "fit")

DEFAULTS = {
    "experiment": "validate-kernel",
    "c": 1.0,
    "seed": 0,
    "output": {"dir": "dragflow-out"},
    "kernel": {"samples": 100, "xi_max": 8.0, "t_max": 10.0, "cs": [0.5, 1.0, 2.0], "tol": 1e-9},
    "asymptotics": {"small": 0.05, "xi_range": [0.25, 8.0], "bound": 2.0},
    "quadrature": {"t_min": 1e2, "t_max": 1e4, "samples": 25, "width": 1.0, "xi_max": 10.0, "js": [0, 1, 2]},
    "lower_bound": {"c0": 1.0, "r0": 0.25, "cone_half_angle": math.pi / 12, "spread": 10.0},
    "grid": {"n": 32, "box_length": 16 * math.pi},
    "stepper": {"dt": 0.1, "t_end": 50.0, "dealias": True, "cadence": 10, "exp_order": None,
                "linear_only": False, "energy_s": 3},
    "data": {"kind": "generic-gaussian", "amplitude": 1e-2, "width": 5.0},
    "cutoff": {"r0": 0.25, "R0": 1.0},
    "fit": {"input": None, "channel": "total", "j": 0, "window": None, "expect": None},
}

THRESHOLDS = {
    "validate-kernel": "max entrywise error vs expm and ODE oracles <= kernel.tol; jump at |xi|=1/2 <= 1e-5; semigroup <= 1e-10",
    "asymptotics": "|lambda1+|xi|^2| and |lambda3+|xi|^2/(c+1)| <= bound*|xi|^4 on |xi|<=small; spectral gap > 0",
    "kernel-decay": "slopes: total j0 -0.75+-0.05, j1 -1.25+-0.05, j2 -1.75+-0.07, phi j0 -0.75+-0.05, u-v <= -1.15",
    "lower-bound": "(1+t)^(3/4)||phi|| and cone-restricted (1+t)^(3/4)||v|| within factor `spread`, floor > 0",
    "simulate": "div v <= 1e-12; momentum drift <= 1e-8; energy increase/step <= 1e-10; ||u-v||/||(u,v)|| decreasing after t=5",
    "fit": "slope within fit.expect when given",
}


class ConfigError(ConfigurationError):
    pass


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        name = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown configuration key '{name}'")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigError(f"configuration key '{name}' must be a table")
            out[key] = _merge(base[key], val, name + ".")
        else:
            out[key] = val
    return out


def _parse_override(text: str) -> dict:
    if "=" not in text:
        raise ConfigError(f"override '{text}' must look like section.key=value")
    key, raw = text.split("=", 1)
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    out: dict = {}
    cur = out
    parts = key.strip().split(".")
    for p in parts[:-1]:
        cur = cur.setdefault(p, {})
    cur[parts[-1]] = val
    return out


def _number(cfg, section, key, lo=None, hi=None, integer=False):
    val = cfg[section][key] if section else cfg[key]
    name = f"{section}.{key}" if section else key
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise ConfigError(f"configuration key '{name}' must be a number")
    if integer and int(val) != val:
        raise ConfigError(f"configuration key '{name}' must be an integer")
    if (lo is not None and val < lo) or (hi is not None and val > hi):
        raise ConfigError(f"configuration key '{name}'={val} outside [{lo}, {hi}]")
    return int(val) if integer else float(val)


def resolve_config(experiment: str, config_path=None, overrides=(), seed=None, out=None) -> dict:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment '{experiment}'; choose from {', '.join(EXPERIMENTS)}")
    cfg = copy.deepcopy(DEFAULTS)
    if config_path:
        try:
            user = json.loads(Path(config_path).read_text())
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config '{config_path}': {err}") from err
        if not isinstance(user, dict):
            raise ConfigError("configuration file must hold a JSON object")
        cfg = _merge(cfg, user)
    for text in overrides:
        cfg = _merge(cfg, _parse_override(text))
    if seed is not None:
        cfg["seed"] = seed
    if out is not None:
        cfg["output"]["dir"] = out
    cfg["experiment"] = experiment
    _number(cfg, None, "c", lo=1e-6)
    _number(cfg, None, "seed", lo=0, integer=True)
    _number(cfg, "kernel", "samples", lo=1, integer=True)
    _number(cfg, "lower_bound", "r0", lo=1e-6)
    _number(cfg, "lower_bound", "c0", lo=1e-12)
    _number(cfg, "quadrature", "samples", lo=8, integer=True)
    _number(cfg, "quadrature", "t_min", lo=0.0)
    _number(cfg, "quadrature", "t_max", lo=cfg["quadrature"]["t_min"])
    _number(cfg, "grid", "n", lo=8, integer=True)
    _number(cfg, "grid", "box_length", lo=1e-9)
    _number(cfg, "stepper", "dt", lo=1e-12)
    _number(cfg, "stepper", "t_end", lo=1e-12)
    _number(cfg, "data", "amplitude", lo=0.0, hi=0.1)
    return cfg


def describe(cfg: dict) -> str:
    lines = [f"dragflow {__version__} run plan", f"experiment: {cfg['experiment']}",
             "resolved parameters:", json.dumps(cfg, indent=2, sort_keys=True),
             "experiments and asserted thresholds:"]
    for name in EXPERIMENTS:
        lines.append(f"  {name}: {THRESHOLDS[name]}")
    return "\n".join(lines)


def _header(cfg):
    return f"dragflow {__version__} experiment={cfg['experiment']} seed={cfg['seed']}"


def run(cfg: dict) -> tuple[dict, dict]:
    """Run the configured experiment; returns (report, {filename: series})."""
    name, c = cfg["experiment"], float(cfg["c"])
    q, lb = cfg["quadrature"], cfg["lower_bound"]
    if name == "validate-kernel":
        k = cfg["kernel"]
        return ex.validate_kernel(int(k["samples"]), k["xi_max"], k["t_max"], tuple(k["cs"]), k["tol"],
                                  seed=int(cfg["seed"])), {}
    if name == "asymptotics":
        a = cfg["asymptotics"]
        return ex.asymptotics(c, a["small"], tuple(a["xi_range"]), a["bound"]), {}
    if name == "kernel-decay":
        rep, series = ex.kernel_decay(c, q["t_min"], q["t_max"], int(q["samples"]), q["width"],
                                      q["xi_max"], tuple(q["js"]))
        return rep, {"kernel_decay.csv": series}
    if name == "lower-bound":
        rep, series = ex.lower_bound(c, lb["c0"], lb["r0"], lb["cone_half_angle"], q["t_min"], q["t_max"],
                                     int(q["samples"]), lb["spread"])
        return rep, {"lower_bound.csv": series}
    if name == "simulate":
        d, s, g = cfg["data"], cfg["stepper"], cfg["grid"]
        data = DataSpec(kind=d["kind"], amplitude=d["amplitude"], width=d["width"], seed=int(cfg["seed"]), c=c)
        stepper = StepperConfig(**s)
        cut = FrequencyCutoff(cfg["cutoff"]["r0"], cfg["cutoff"]["R0"])
        rep, res = ex.run_simulation(int(g["n"]), g["box_length"], c, data, stepper, cutoff=cut)
        rep["_final_state"] = res.state
        return rep, {"simulate.csv": res.series}
    # fit
    f = cfg["fit"]
    if not f["input"]:
        raise ConfigError("configuration key 'fit.input' must name a CSV series")
    try:
        series = read_series_csv(f["input"])
    except OSError as err:
        raise ConfigError(f"configuration key 'fit.input': {err}") from err
    key = (f["channel"], int(f["j"]))
    if key not in series.values:
        raise ConfigError(f"configuration key 'fit.channel': no channel {key} in {f['input']}")
    window = tuple(f["window"]) if f["window"] else None
    fit = decay_fit(series.times, series.get(*key), window)
    rep = {"experiment": "fit", "channel": key[0], "j": key[1], "slope": fit.slope,
           "intercept": fit.intercept, "residual": fit.residual, "window": list(fit.window)}
    if f["expect"]:
        lo, hi = f["expect"]
        rep["passed"] = bool(lo <= fit.slope <= hi)
    else:
        rep["passed"] = True
    return rep, {}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dragflow", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"dragflow {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS + ("describe",):
        p = sub.add_parser(name)
        if name == "describe":
            p.add_argument("experiment", nargs="?", default="validate-kernel")
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a configuration key, e.g. lower_bound.r0=0.3")
        p.add_argument("--assert", dest="assert_", action="store_true",
                       help="exit 1 when the acceptance check fails")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int, default=1)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    experiment = args.experiment if args.command == "describe" else args.command
    try:
        cfg = resolve_config(experiment, args.config, args.set, args.seed, args.out)
        if args.command == "describe":
            print(describe(cfg))
            return 0
        with scipy.fft.set_workers(max(1, args.threads)):
            report, artifacts = run(cfg)
    except (ConfigurationError, DomainError, TypeError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return 2
    except BlowUpError as err:
        print(f"numerical blow-up: {err}", file=sys.stderr)
        return 3

    out = Path(cfg["output"]["dir"])
    out.mkdir(parents=True, exist_ok=True)
    final_state = report.pop("_final_state", None)
    if final_state is not None:
        save_checkpoint(final_state, out / "final_state.npz")
    for fname, series in artifacts.items():
        write_series_csv(series, out / fname, _header(cfg))
    text = report_json(report)
    (out / f"{experiment.replace('-', '_')}.json").write_text(text + "\n")
    print(text)
    status = "PASS" if report.get("passed", True) else "FAIL"
    print(f"{experiment}: {status}", file=sys.stderr)
    if args.assert_ and not report.get("passed", True):
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
