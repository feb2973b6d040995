"""Command-line front end: JSON config in, CSV/JSON results out.

The config document carries every model and discretization parameter;
the flags carry only run identity (seed, output directory, worker
count).  Validation is strict: unknown keys anywhere in the document are
rejected and missing required keys are named.  Every run writes the
fully resolved configuration next to its results so outputs are
self-describing.  Exit codes: 0 success, 2 configuration error, 3
numerical failure (partial outputs are kept).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, StfilmError
from .experiments import (
    InitialDatum,
    estimate_sweep,
    inequality_battery,
    ito_budget,
    martingale_qv_test,
    mms_convergence,
    run_ensemble,
)
from .functionals import ModelParams
from .grid import grid_function, make_grid
from .noise import RngStream, build_spectrum, c_strat, s_thresholds
from .stepper import SolverConfig, advance

__all__ = ["main"]

CSV_COLUMNS = (
    "time", "mass", "energy", "energy_eps", "entropy", "alpha_entropy",
    "dissipation", "min_u", "max_u", "support_length",
)

_TOP_DEFAULTS = {
    "p": 4.0,
    "epsilon": 0.0,
    "delta": 0.0,
    "S": {"mode": "fixed", "value": 0.0},
    "noise": {"mode": "single", "amplitude": 0.0, "K": 0},
    "dt_min": None,
    "sigma_stop": 1e-2,
    "record_every": 1,
    "pos_floor": 1e-10,
    "solver_tol": 1e-12,
    "alpha": None,
    "initial": {"kind": "constant", "height": 1.0},
    "moments": {"q": [1.0, 2.0]},
}
_TOP_REQUIRED = ("L", "N", "n", "dt0", "T")
_TOP_OPTIONAL_BLOCKS = ("ensemble", "sweep", "budget", "qv", "inequalities", "convergence")
_TOP_KEYS = set(_TOP_REQUIRED) | set(_TOP_DEFAULTS) | set(_TOP_OPTIONAL_BLOCKS)

_BLOCK_KEYS = {
    "S": {"mode", "value", "factor"},
    "noise": {"mode", "amplitude", "decay", "K"},
    "initial": {
        "kind", "height", "width", "center", "perturbation",
        "delta_shift", "randomize_height",
    },
    "moments": {"q"},
    "ensemble": {"count"},
    "sweep": {"axis", "values"},
    "budget": {"which"},
    "qv": {"phi"},
    "inequalities": {"samples", "eps", "battery_seed"},
    "convergence": {"levels", "forcing_mode", "T"},
}


def _reject_unknown(doc: dict, allowed, where: str) -> None:
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown config key(s) {unknown} in {where}")


def _number(doc, key, where, minimum=None, allow_none=False):
    value = doc[key]
    if value is None and allow_none:
        return None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"config key {key!r} in {where} must be a number")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(f"config key {key!r} in {where} must be finite")
    if minimum is not None and value < minimum:
        raise ConfigError(f"config key {key!r} in {where} must be >= {minimum}")
    return value


def _integer(doc, key, where, minimum=None):
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"config key {key!r} in {where} must be an integer")
    if minimum is not None and value < minimum:
        raise ConfigError(f"config key {key!r} in {where} must be >= {minimum}")
    return value


def resolve_config(doc: dict, seed: int) -> dict:
    """Validate the raw document and fill every default.

    Returns a plain fully-numeric dict that reproduces the run when fed
    back in.  Raises ConfigError naming the offending key otherwise.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, "top level")
    for key in _TOP_REQUIRED:
        if key not in doc:
            raise ConfigError(f"missing required config key {key!r}")
    out = {key: doc[key] for key in doc}
    for key, default in _TOP_DEFAULTS.items():
        out.setdefault(key, json.loads(json.dumps(default)) if isinstance(default, dict) else default)

    out["L"] = _number(out, "L", "top level", minimum=1e-12)
    out["N"] = _integer(out, "N", "top level", minimum=16)
    out["n"] = _number(out, "n", "top level")
    out["p"] = _number(out, "p", "top level")
    out["epsilon"] = _number(out, "epsilon", "top level", minimum=0.0)
    out["delta"] = _number(out, "delta", "top level", minimum=0.0)
    out["dt0"] = _number(out, "dt0", "top level", minimum=0.0)
    out["T"] = _number(out, "T", "top level", minimum=0.0)
    out["dt_min"] = _number(out, "dt_min", "top level", minimum=0.0, allow_none=True)
    out["sigma_stop"] = _number(out, "sigma_stop", "top level", minimum=0.0)
    out["record_every"] = _integer(out, "record_every", "top level", minimum=1)
    out["pos_floor"] = _number(out, "pos_floor", "top level", minimum=0.0)
    out["solver_tol"] = _number(out, "solver_tol", "top level", minimum=0.0)
    out["alpha"] = _number(out, "alpha", "top level", allow_none=True)

    noise = dict(out["noise"])
    _reject_unknown(noise, _BLOCK_KEYS["noise"], "noise")
    if "mode" not in noise:
        raise ConfigError("missing required config key 'mode' in noise")
    if noise["mode"] not in ("single", "flat", "power-decay"):
        raise ConfigError(f"unknown noise mode {noise['mode']!r}")
    if "amplitude" not in noise:
        raise ConfigError("missing required config key 'amplitude' in noise")
    noise["amplitude"] = _number(noise, "amplitude", "noise", minimum=0.0)
    noise.setdefault("K", 0)
    noise["K"] = _integer(noise, "K", "noise", minimum=0)
    if noise["mode"] == "power-decay":
        if "decay" not in noise:
            raise ConfigError("missing required config key 'decay' in noise")
        noise["decay"] = _number(noise, "decay", "noise")
    else:
        noise.setdefault("decay", None)
    out["noise"] = noise

    s_block = dict(out["S"])
    _reject_unknown(s_block, _BLOCK_KEYS["S"], "S")
    mode = s_block.get("mode")
    if mode not in ("fixed", "factor-above-A3star", "hanggi-klimontovich"):
        raise ConfigError(f"unknown S mode {mode!r}")
    if mode == "fixed":
        if "value" not in s_block:
            raise ConfigError("missing required config key 'value' in S")
        s_block["value"] = _number(s_block, "value", "S", minimum=0.0)
    if mode == "factor-above-A3star":
        if "factor" not in s_block:
            raise ConfigError("missing required config key 'factor' in S")
        s_block["factor"] = _number(s_block, "factor", "S", minimum=0.0)
    out["S"] = s_block

    initial = dict(out["initial"])
    _reject_unknown(initial, _BLOCK_KEYS["initial"], "initial")
    if "kind" not in initial:
        raise ConfigError("missing required config key 'kind' in initial")
    initial.setdefault("height", 1.0)
    initial.setdefault("width", 0.5 * out["L"])
    initial.setdefault("center", 0.5 * out["L"])
    initial.setdefault("perturbation", 0.0)
    initial.setdefault("delta_shift", out["delta"])
    initial.setdefault("randomize_height", False)
    for key in ("height", "width", "center", "perturbation", "delta_shift"):
        initial[key] = _number(initial, key, "initial")
    if not isinstance(initial["randomize_height"], bool):
        raise ConfigError("config key 'randomize_height' in initial must be a boolean")
    out["initial"] = initial

    moments = dict(out["moments"])
    _reject_unknown(moments, _BLOCK_KEYS["moments"], "moments")
    q = moments.get("q", [1.0, 2.0])
    if not isinstance(q, list) or not q:
        raise ConfigError("config key 'q' in moments must be a nonempty list")
    moments["q"] = [
        _number({"q": v}, "q", "moments", minimum=1.0) for v in q
    ]
    out["moments"] = moments

    for name in _TOP_OPTIONAL_BLOCKS:
        if name in ("moments",) or name not in out:
            continue
        block = out[name]
        if not isinstance(block, dict):
            raise ConfigError(f"config key {name!r} must be an object")
        _reject_unknown(block, _BLOCK_KEYS[name], name)

    if "ensemble" in out:
        out["ensemble"] = {"count": _integer(out["ensemble"], "count", "ensemble", minimum=1)} \
            if "count" in out["ensemble"] else _missing("count", "ensemble")
    if "sweep" in out:
        sweep = dict(out["sweep"])
        if "axis" not in sweep:
            _missing("axis", "sweep")
        if sweep["axis"] not in ("eps", "delta"):
            raise ConfigError(f"unknown sweep axis {sweep['axis']!r}")
        if "values" not in sweep or not isinstance(sweep["values"], list) or len(sweep["values"]) < 2:
            raise ConfigError("config key 'values' in sweep must list at least two numbers")
        sweep["values"] = [_number({"v": v}, "v", "sweep values") for v in sweep["values"]]
        out["sweep"] = sweep
    if "budget" in out:
        which = out["budget"].get("which")
        if which not in ("energy", "entropy"):
            raise ConfigError("config key 'which' in budget must be 'energy' or 'entropy'")
        out["budget"] = {"which": which}
    if "qv" in out:
        phi = out["qv"].get("phi")
        if phi not in ("const", "sin", "cos", "cos2"):
            raise ConfigError("config key 'phi' in qv must be one of const, sin, cos, cos2")
        out["qv"] = {"phi": phi}
    if "inequalities" in out:
        ineq = dict(out["inequalities"])
        ineq["samples"] = _integer(ineq, "samples", "inequalities", minimum=1) \
            if "samples" in ineq else 100
        ineq["eps"] = _number(ineq, "eps", "inequalities", minimum=0.0) \
            if "eps" in ineq else 1e-3
        ineq["battery_seed"] = _integer(ineq, "battery_seed", "inequalities") \
            if "battery_seed" in ineq else 0
        out["inequalities"] = ineq
    if "convergence" in out:
        conv = dict(out["convergence"])
        levels = conv.get("levels")
        if not isinstance(levels, list) or len(levels) < 3:
            raise ConfigError("config key 'levels' in convergence must list at least three [N, dt] pairs")
        parsed = []
        for pair in levels:
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigError("each convergence level must be an [N, dt] pair")
            parsed.append([
                _integer({"N": pair[0]}, "N", "convergence levels", minimum=16),
                _number({"dt": pair[1]}, "dt", "convergence levels", minimum=0.0),
            ])
        conv["levels"] = parsed
        if "forcing_mode" in conv and conv["forcing_mode"] not in ("continuum", "discrete"):
            raise ConfigError("config key 'forcing_mode' in convergence must be 'continuum' or 'discrete'")
        if "T" in conv:
            conv["T"] = _number(conv, "T", "convergence", minimum=0.0)
        out["convergence"] = conv

    out["seed"] = int(seed)
    return out


def _missing(key: str, where: str):
    raise ConfigError(f"missing required config key {key!r} in {where}")


def build_run(resolved: dict):
    """Turn a resolved config into solver objects.

    Returns (SolverConfig, InitialDatum, extras) where extras carries
    the derived noise constants for the resolved-config record.
    """
    grid = make_grid(resolved["L"], resolved["N"])
    noise = resolved["noise"]
    spectrum = build_spectrum(
        noise["mode"], noise["amplitude"], K=noise["K"],
        decay=noise["decay"], L=resolved["L"],
    )
    cval = c_strat(spectrum, resolved["n"])
    s_block = resolved["S"]
    if s_block["mode"] == "fixed":
        s_value = s_block["value"]
    elif s_block["mode"] == "factor-above-A3star":
        s_value = s_block["factor"] * s_thresholds(resolved["n"], cval)[1]
    else:
        s_value = cval
    params = ModelParams(
        n=resolved["n"], p=resolved["p"], eps=resolved["epsilon"],
        S=s_value, c_strat=cval,
    )
    config = SolverConfig(
        params=params,
        grid=grid,
        spectrum=spectrum,
        dt0=resolved["dt0"],
        T=resolved["T"],
        delta=resolved["delta"],
        sigma_stop=resolved["sigma_stop"],
        dt_min=resolved["dt_min"],
        record_every=resolved["record_every"],
        pos_floor=resolved["pos_floor"],
        solver_tol=resolved["solver_tol"],
        alpha=resolved["alpha"],
    )
    ini = resolved["initial"]
    datum = InitialDatum(
        kind=ini["kind"], height=ini["height"], width=ini["width"],
        center=ini["center"], perturbation=ini["perturbation"],
        delta_shift=ini["delta_shift"],
        randomize_height=ini["randomize_height"],
    )
    extras = {"c_strat": cval, "S": s_value}
    return config, datum, extras


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            f.name: _jsonable(getattr(obj, f.name))
            for f in dataclasses.fields(obj)
        }
    return obj


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _write_series_csv(path: Path, series) -> None:
    lines = [",".join(CSV_COLUMNS)]
    for i, t in enumerate(series.times):
        row = [t] + [series.columns[name][i] for name in CSV_COLUMNS[1:]]
        lines.append(",".join(f"{float(x):.17g}" for x in row))
    path.write_text("\n".join(lines) + "\n")


def _phi_values(name: str, grid):
    x = grid.nodes
    if name == "const":
        return np.ones(grid.N)
    if name == "sin":
        return np.sin(2.0 * np.pi * x / grid.L)
    if name == "cos":
        return np.cos(2.0 * np.pi * x / grid.L)
    return np.cos(4.0 * np.pi * x / grid.L)


def _cmd_simulate(args, resolved, out: Path) -> int:
    config, datum, _ = build_run(resolved)
    stream = RngStream(base_seed=resolved["seed"], trajectory_id=0)
    u0 = datum.build(config.grid, stream)
    if stream.counter < 1:
        stream.counter = 1
    traj = advance(config, u0, stream, trajectory_id=0)
    _write_series_csv(out / "series_0.csv", traj.series)
    summary = {
        "trajectory": 0,
        "final_time": traj.final_state.t,
        "frozen": traj.frozen,
        "t_sigma": traj.t_sigma,
        "degenerate": traj.degenerate,
        "accepted": traj.stats.accepted,
        "rejected": traj.stats.rejected,
        "final_mass": float(np.sum(traj.final_state.u.values)) * config.grid.dx,
        "cumulative": {
            name: traj.series.columns[name][-1]
            for name in traj.series.columns if name.startswith("cum_")
        },
    }
    _dump_json(out / "summary.json", summary)
    if traj.degenerate:
        print("trajectory degenerated: step size underflow", file=sys.stderr)
        return 3
    return 0


def _cmd_ensemble(args, resolved, out: Path) -> int:
    if "ensemble" not in resolved:
        _missing("ensemble", "config")
    config, datum, _ = build_run(resolved)
    count = resolved["ensemble"]["count"]
    summary = run_ensemble(
        config, datum, count, base_seed=resolved["seed"], threads=args.threads,
        moments=tuple(resolved["moments"]["q"]), keep_trajectories=True,
    )
    for traj in summary.trajectories or ():
        _write_series_csv(out / f"series_{traj.trajectory_id}.csv", traj.series)
    doc = _jsonable(summary)
    doc.pop("trajectories", None)
    doc.pop("observer_payloads", None)
    _dump_json(out / "summary.json", doc)
    if summary.valid_count == 0:
        print("every trajectory degenerated", file=sys.stderr)
        return 3
    return 0


def _cmd_sweep(args, resolved, out: Path) -> int:
    if "sweep" not in resolved:
        _missing("sweep", "config")
    if "ensemble" not in resolved:
        _missing("ensemble", "config")
    config, datum, _ = build_run(resolved)
    report = estimate_sweep(
        config, datum, resolved["ensemble"]["count"],
        axis=resolved["sweep"]["axis"], values=resolved["sweep"]["values"],
        base_seed=resolved["seed"], threads=args.threads,
        q=tuple(resolved["moments"]["q"]),
    )
    doc = _jsonable(report)
    doc["table"] = {
        f"{kind}:{column}:q{qq:g}": {f"{v:.17g}": val for v, val in per.items()}
        for (kind, column, qq), per in report.table.items()
    }
    doc["ratios"] = {
        f"{kind}:{column}:q{qq:g}": val
        for (kind, column, qq), val in report.ratios.items()
    }
    doc["monitored"] = [f"{kind}:{column}" for kind, column in report.monitored]
    doc["reported"] = [f"{kind}:{column}" for kind, column in report.reported]
    _dump_json(out / "summary.json", doc)
    return 0


def _cmd_budget(args, resolved, out: Path) -> int:
    for key in ("budget", "ensemble"):
        if key not in resolved:
            _missing(key, "config")
    config, datum, _ = build_run(resolved)
    report = ito_budget(
        config, datum, resolved["ensemble"]["count"],
        which=resolved["budget"]["which"],
        base_seed=resolved["seed"], threads=args.threads,
    )
    _dump_json(out / "summary.json", report)
    return 0


def _cmd_qv_test(args, resolved, out: Path) -> int:
    for key in ("qv", "ensemble"):
        if key not in resolved:
            _missing(key, "config")
    config, datum, _ = build_run(resolved)
    phi = grid_function(config.grid, _phi_values(resolved["qv"]["phi"], config.grid))
    report = martingale_qv_test(
        config, datum, resolved["ensemble"]["count"], phi,
        base_seed=resolved["seed"], threads=args.threads,
    )
    _dump_json(out / "summary.json", report)
    return 0


def _cmd_inequalities(args, resolved, out: Path) -> int:
    block = resolved.get("inequalities", {"samples": 100, "eps": 1e-3, "battery_seed": 0})
    grid = make_grid(resolved["L"], resolved["N"])
    report = inequality_battery(
        block["samples"], grid, n=resolved["n"], p=resolved["p"],
        eps=block["eps"], seed=block["battery_seed"],
    )
    doc = _jsonable(report)
    # stable top-level name for downstream tooling
    doc["bernis_ratios"] = doc.pop("bernis_ratio_table")
    _dump_json(out / "summary.json", doc)
    return 0


def _cmd_convergence(args, resolved, out: Path) -> int:
    if "convergence" not in resolved:
        _missing("convergence", "config")
    conv = resolved["convergence"]
    report = mms_convergence(
        [tuple(pair) for pair in conv["levels"]],
        T=conv.get("T"),
        n=resolved["n"],
        L=resolved["L"],
        forcing_mode=conv.get("forcing_mode"),
    )
    doc = _jsonable(report)
    if report.exact:
        doc["spatial_order"] = "exact"
        doc["temporal_order"] = "exact"
    _dump_json(out / "summary.json", doc)
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "ensemble": _cmd_ensemble,
    "sweep": _cmd_sweep,
    "budget": _cmd_budget,
    "qv-test": _cmd_qv_test,
    "inequalities": _cmd_inequalities,
    "convergence": _cmd_convergence,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stfilm",
        description="Stochastic thin-film simulation and verification harness",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--seed", type=int, default=0, help="base seed (default 0)")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker processes (affects wall time only)")
    args = parser.parse_args(argv)

    try:
        doc = json.loads(Path(args.config).read_text())
    except OSError as exc:
        print(f"config error: cannot read {args.config}: {exc}", file=sys.stderr)
        return 2
    except json.JSONDecodeError as exc:
        print(f"config error: invalid JSON in {args.config}: {exc}", file=sys.stderr)
        return 2
    try:
        resolved = resolve_config(doc, args.seed)
    except StfilmError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(out / "resolved_config.json", resolved)

    try:
        return _COMMANDS[args.command](args, resolved, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (StfilmError, RuntimeError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
