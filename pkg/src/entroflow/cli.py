"""Command-line entry point ``entroflow``.

Subcommands ``space``, ``flow``, ``verify``, ``lsi`` and ``rigidity`` read a
JSON config (``--config``, or ``--scenario`` for a packaged one) and write
CSV/JSON artifacts into ``--out``.

Exit codes: 0 success, 1 a verification check failed, 2 invalid config,
3 numerical failure, 4 boundary contamination under ``--strict``, 5 an
inconclusive check under ``--strict``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass
from importlib import resources
from typing import Optional

import jsonschema
import numpy as np

from . import __version__
from . import functionals as fn
from . import verify as vf
from .heatflow import (BOUNDARY_MASS_LIMIT, FlowConfig, FlowError, FlowResult,
                       density_from_spec, heat_kernel_closed_form, solve_flow)
from .lsiopt import ConvergenceWarning, OptProblem, minimize_w_entropy
from .output import write_csv, write_json
from .space import (SpaceError, TruncationWarning, UndefinedCurvatureError, ball_volume,
                    bishop_gromov_margin, effective_curvature, space_from_spec,
                    volume_ratio_kappa)

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC, EXIT_BOUNDARY, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4, 5

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}

SPACE_SCHEMA = {
    "type": "object",
    "required": ["preset", "grid_size"],
    "properties": {
        "preset": {"enum": ["cone_half_line", "cone_full_line", "sphere_zonal", "hyperbolic_zonal",
                            "gaussian_weight", "circle", "custom"]},
        "N": {"type": "number", "minimum": 1},
        "n": {"type": "integer", "minimum": 2},
        "grid_size": {"type": "integer", "minimum": 16},
        "truncation": _POS,
        "L": _POS,
        "custom_V": {"type": "array", "minItems": 4,
                     "items": {"type": "array", "minItems": 2, "maxItems": 2,
                               "items": {"type": ["number", "null"]}}},
    },
    "additionalProperties": False,
}

INITIAL_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["kernel", "trig", "gaussian_mixture", "legendre", "uniform", "random"]},
        "t0": _POS,
        "center": _NUM,
        "cos": {"type": "array", "items": _NUM},
        "sin": {"type": "array", "items": _NUM},
        "components": {"type": "array", "minItems": 1,
                       "items": {"type": "array", "minItems": 3, "maxItems": 3, "items": _NUM}},
        "coeffs": {"type": "array", "items": _NUM},
        "modes": {"type": "integer", "minimum": 1},
        "amplitude": _POS,
    },
    "additionalProperties": False,
}

FLOW_SCHEMA = {
    "type": "object",
    "required": ["times"],
    "properties": {
        "solver": {"enum": ["spectral", "cn", "closed_form"]},
        "modes": {"type": "integer", "minimum": 1},
        "dt": _POS,
        "times": {"oneOf": [
            {"type": "array", "minItems": 1, "items": _POS},
            {"type": "object", "required": ["start", "stop", "num"],
             "properties": {"start": _POS, "stop": _POS, "num": {"type": "integer", "minimum": 1}},
             "additionalProperties": False},
        ]},
    },
    "additionalProperties": False,
}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["name", "N"],
    "properties": {"name": {"enum": ["euclidean", "cone_vertex"]}, "N": _POS},
    "additionalProperties": False,
}

CHECK_SCHEMA = {
    "type": "object",
    "required": ["name"],
    "properties": {
        "name": {"enum": sorted(vf.CHECKS)},
        "label": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "K": _NUM, "N": _POS, "a": _NUM,
        "alpha": {"type": "number", "minimum": 1},
        "which": {"enum": ["W_N", "W_NK", "wang", "ye"]},
        "time_window": {"type": "array", "minItems": 2, "maxItems": 2, "items": _POS},
        "tolerance": _POS, "rel_tol": _POS, "abs_tol": _POS,
        "t": _POS, "kappa": _POS,
        "band": {"type": "number", "minimum": 0, "maximum": 0.5},
        "tolerances": {"type": "object", "additionalProperties": _POS},
    },
    "additionalProperties": False,
}

_FLOW_KEYS = {
    "space": SPACE_SCHEMA,
    "model": MODEL_SCHEMA,
    "initial": INITIAL_SCHEMA,
    "flow": FLOW_SCHEMA,
    "N": _POS, "K": _NUM, "a": _NUM, "wang_K": _NUM,
    "strict": {"type": "boolean"},
    "description": {"type": "string"},
}

SCHEMAS = {
    "space": {
        "type": "object", "required": ["space"],
        "properties": {"space": SPACE_SCHEMA, "center": _NUM,
                       "radii": {"type": "array", "minItems": 1, "items": _POS},
                       "strict": {"type": "boolean"}, "description": {"type": "string"}},
        "additionalProperties": False,
    },
    "flow": {
        "type": "object", "required": ["flow"],
        "anyOf": [{"required": ["space"]}, {"required": ["model"]}],
        "properties": dict(_FLOW_KEYS),
        "additionalProperties": False,
    },
    "verify": {
        "type": "object", "required": ["flow", "checks"],
        "anyOf": [{"required": ["space"]}, {"required": ["model"]}],
        "properties": dict(_FLOW_KEYS, suite={"type": "string"},
                           partner={"type": "object", "required": ["initial"],
                                    "properties": {"initial": INITIAL_SCHEMA},
                                    "additionalProperties": False},
                           checks={"type": "array", "minItems": 1, "items": CHECK_SCHEMA}),
        "additionalProperties": False,
    },
    "lsi": {
        "type": "object", "required": ["space", "t"],
        "properties": {"space": SPACE_SCHEMA, "N": _POS, "K": _NUM, "t": _POS, "step": _POS,
                       "max_iter": {"type": "integer", "minimum": 0}, "grad_tol": _POS,
                       "el_constant": {"enum": ["w", "remark"]}, "initial": INITIAL_SCHEMA,
                       "strict": {"type": "boolean"}, "description": {"type": "string"}},
        "additionalProperties": False,
    },
    "rigidity": {
        "type": "object", "required": ["flow"],
        "anyOf": [{"required": ["space"]}, {"required": ["model"]}],
        "properties": dict(_FLOW_KEYS, tolerances={"type": "object", "additionalProperties": _POS}),
        "additionalProperties": False,
    },
}


class ConfigError(Exception):
    """Invalid configuration; carries the offending key path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


class NumericError(Exception):
    pass


def _key_path(err: jsonschema.ValidationError) -> str:
    parts = [str(p) for p in err.absolute_path]
    if err.validator == "required":
        missing = err.message.split("'")[1] if "'" in err.message else ""
        parts.append(missing)
    elif err.validator == "additionalProperties" and "'" in err.message:
        parts.append(err.message.split("'")[1])
    return ".".join(p for p in parts if p) or "<root>"


def validate_config(command: str, config) -> dict:
    """Validate against the command schema; raises :class:`ConfigError`."""
    if command == "space" and isinstance(config, dict) and "preset" in config:
        config = {"space": config}
    validator = jsonschema.Draft7Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(config), key=lambda e: (len(list(e.absolute_path)), e.message))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise ConfigError(_key_path(err), err.message)
    if command in ("flow", "verify", "rigidity"):
        fc = config["flow"]
        if fc.get("solver", "spectral") == "cn" and "dt" not in fc:
            raise ConfigError("flow.dt", "the cn solver requires dt")
        if "space" not in config and fc.get("solver", "spectral") != "closed_form":
            raise ConfigError("flow.solver", "a config without a space needs solver closed_form")
    return config


def scenario_names() -> list:
    base = resources.files("entroflow") / "scenarios"
    return sorted(p.name[:-5] for p in base.iterdir() if p.name.endswith(".json"))


def load_config(path: Optional[str] = None, scenario: Optional[str] = None) -> dict:
    """Read a JSON config from a file or the packaged scenario library."""
    try:
        if scenario is not None:
            ref = resources.files("entroflow") / "scenarios" / f"{scenario}.json"
            if not ref.is_file():
                raise ConfigError("scenario", f"unknown scenario {scenario!r}")
            return json.loads(ref.read_text())
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<root>", f"invalid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError("--config", str(exc)) from exc


# ----------------------------------------------------------------------
# shared builders


@dataclass
class FlowContext:
    space: object
    rho0: object
    flow: FlowResult
    N: float
    K: float
    config: FlowConfig


def _build_space(spec, prefix="space"):
    try:
        return space_from_spec(spec)
    except SpaceError as exc:
        key = f"{prefix}.{exc.key}" if exc.key else prefix
        raise ConfigError(key, str(exc)) from exc


def _initial(space, spec, seed, key="initial"):
    try:
        return density_from_spec(space, spec, seed)
    except (ValueError, KeyError) as exc:
        raise ConfigError(key, str(exc)) from exc


def _build_flow(config: dict, seed: int, initial_spec=None, space=None) -> FlowContext:
    fcfg = FlowConfig.from_dict(config["flow"])
    if space is None and "space" in config:
        space = _build_space(config["space"])
    times = list(fcfg.times)
    if not times:
        raise ConfigError("flow.times", "no output times")
    spec = config.get("initial") if initial_spec is None else initial_spec
    if fcfg.solver == "closed_form":
        model = config.get("model")
        if model is None:
            name, Nm = ("cone_vertex" if space.singular else "euclidean"), space.N
        else:
            name, Nm = model["name"], model["N"]
        rho0 = heat_kernel_closed_form(name, Nm, min(times))
    else:
        rho0 = _initial(space, spec, seed)
    try:
        flow = solve_flow(space, rho0, times, fcfg)
    except (FlowError, np.linalg.LinAlgError, FloatingPointError) as exc:
        raise NumericError(str(exc)) from exc
    except ValueError as exc:
        raise ConfigError("flow", str(exc)) from exc
    N = float(config.get("N", space.N if space is not None else rho0.N))
    return FlowContext(space, rho0, flow, N, float(config.get("K", 0.0)), fcfg)


def _max_boundary_mass(flow: FlowResult) -> float:
    bm = flow.diagnostics.get("boundary_mass")
    return float(np.max(bm)) if bm is not None and len(bm) else 0.0


def _series_rows(flow: FlowResult):
    for tk, rho in zip(flow.times, flow.densities):
        if flow.space is None:
            r = np.linspace(0.0, 8.0 * math.sqrt(rho.N * rho.t), 201)
            vals = rho.u(r)
        else:
            r, vals = flow.space.nodes, rho.values
        for x, u in zip(r, vals):
            yield (tk, x, u)


# ----------------------------------------------------------------------
# commands


def cmd_space(config: dict, out: str, args) -> int:
    space = _build_space(config["space"])
    center = float(config.get("center", space.center))
    try:
        curv = effective_curvature(space)
        k = np.asarray(curv.k_eff)
    except UndefinedCurvatureError as exc:
        print(f"note: {exc}")
        k = np.full(space.size, np.nan)
    write_csv(os.path.join(out, "space.csv"), ("x", "m", "V", "dV", "d2V", "k_eff"),
              zip(space.nodes, space.weight, space.V, space.dV, space.d2V, k))
    if space.periodic:
        r_max = space.length / 2
    else:
        r_max = 0.8 * float(np.max(space.distance(center)))
    radii = config.get("radii") or list(np.geomspace(2 * space.h, r_max, 24))
    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        for r in radii:
            vol = ball_volume(space, center, r, warn=False)
            bg = bishop_gromov_margin(space, center, r, 2 * r) if 2 * r <= r_max * (1 + 1e-12) \
                else float("nan")
            rows.append((r, vol, bg))
    write_csv(os.path.join(out, "volumes.csv"), ("r", "ball_volume", "bg_margin"), rows)
    est = volume_ratio_kappa(space, center)
    write_json({"kappa": est.kappa, "converged": est.converged}, os.path.join(out, "kappa.json"))
    if args.plots:
        from . import plotting

        plotting.plot_space(space, k, out)
    print(f"space {space.preset}: {space.size} nodes, kappa {est.kappa:.6g}"
          f" ({'converged' if est.converged else 'not converged'})")
    return EXIT_OK


def cmd_flow(config: dict, out: str, args) -> int:
    ctx = _build_flow(config, args.seed)
    bm = _max_boundary_mass(ctx.flow)
    if bm > BOUNDARY_MASS_LIMIT:
        msg = f"boundary mass {bm:.3g} exceeds {BOUNDARY_MASS_LIMIT:g}"
        if _strict(config, args):
            print(f"error: {msg}", file=sys.stderr)
            return EXIT_BOUNDARY
        print(f"warning: {msg}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", fn.FunctionalWarning)
        series = fn.evaluate_series(ctx.flow, N=ctx.N, K=ctx.K, a=float(config.get("a", 0.0)),
                                    wang_K=config.get("wang_K"))
    write_csv(os.path.join(out, "flow.csv"), ("t", "x", "u"), _series_rows(ctx.flow))
    fn.write_series_csv(series, os.path.join(out, "functionals.csv"))
    if args.plots:
        from . import plotting

        plotting.plot_flow(ctx.flow, out)
        plotting.plot_series(series, out)
    print(f"flow {ctx.flow.solver}: {len(ctx.flow)} times, max boundary mass {bm:.3g}")
    return EXIT_OK


def _nearest_time(flow, t, key):
    k = int(np.argmin(np.abs(flow.times - t)))
    if abs(flow.times[k] - t) > 1e-6 * max(t, 1.0):
        print(f"note: {key} uses stored time {flow.times[k]:.6g} for requested {t:.6g}",
              file=sys.stderr)
    return float(flow.times[k])


def _check_task(i, cc, ctx, partner, cache):
    name = cc["name"]
    key = f"checks.{i}"
    K = float(cc.get("K", ctx.K))
    N = float(cc.get("N", ctx.N))
    tol = cc.get("tolerance", vf.TOL_MARGIN)
    win = cc.get("time_window")
    flow = ctx.flow
    if name == "edi":
        return lambda: vf.check_edi(flow, K, N, tol, time_window=win, cache=cache)
    if name == "w_monotone":
        return lambda: vf.check_w_monotone(flow, cc.get("which", "W_N"), K, N, float(cc.get("a", 0.0)),
                                           tol, time_window=win, cache=cache)
    if name == "power_concavity":
        return lambda: vf.check_entropy_power_concavity(flow, K, N, tol, time_window=win, cache=cache)
    if name == "niw":
        return lambda: vf.check_niw_identity(flow, K, N, cc.get("rel_tol", vf.TOL_IDENTITY),
                                             cc.get("abs_tol", vf.ABS_IDENTITY), time_window=win,
                                             cache=cache)
    if name == "li_yau":
        if cc.get("alpha", 1.0) == 1 and K != 0:
            raise ConfigError(f"{key}.alpha", "alpha = 1 requires K = 0")
        return lambda: vf.check_li_yau(flow, cc.get("alpha", 1.0), K, N, tol,
                                       cc.get("band", 0.05), time_window=win)
    if name == "fisher_bound":
        return lambda: vf.check_fisher_bound(flow, K, N, tol, time_window=win, cache=cache)
    if name == "stam_lsi":
        rho = flow.at(_nearest_time(flow, cc["t"], key)) if "t" in cc else ctx.rho0
        return lambda: vf.check_stam_lsi(rho, N, cc.get("kappa"), tol)
    if name in ("hwi", "eks"):
        if partner is None:
            raise ConfigError("partner", f"check {name} needs a partner initial density")
        if "t" not in cc:
            raise ConfigError(f"{key}.t", f"check {name} needs a time t")
        t = _nearest_time(flow, cc["t"], key)
        pair = (flow, partner)
        if name == "hwi":
            return lambda: vf.check_hwi_type(pair, t, tol)
        return lambda: vf.check_eks_distortion(pair, t, K, N, tol)
    if name == "rigidity":
        return lambda: vf.rigidity_scan(flow, N=N, tolerances=cc.get("tolerances"),
                                        time_window=win, cache=cache)
    raise ConfigError(f"{key}.name", f"unknown check {name!r}")


def _labels(checks):
    seen = {}
    out = []
    for cc in checks:
        base = cc.get("label", cc["name"])
        seen[base] = seen.get(base, 0) + 1
        out.append(base if seen[base] == 1 else f"{base}_{seen[base]}")
    return out


def _strict(config, args):
    return bool(args.strict or config.get("strict", False))


def _environment(ctx):
    return {"grid_size": ctx.space.size if ctx.space is not None else None,
            "solver": ctx.flow.solver}


def cmd_verify(config: dict, out: str, args) -> int:
    ctx = _build_flow(config, args.seed)
    partner = None
    if "partner" in config:
        partner = _build_flow(config, args.seed, config["partner"]["initial"], ctx.space).flow
    cache = vf.SeriesCache()
    labels = _labels(config["checks"])
    tasks = [_check_task(i, cc, ctx, partner, cache) for i, cc in enumerate(config["checks"])]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        results = vf.run_checks(tasks)
    results = [dataclasses.replace(r, name=lab) for r, lab in zip(results, labels)]
    report = vf.Report(config.get("suite", "suite"), results, _environment(ctx))
    write_json(report.to_dict(), os.path.join(out, "report.json"))
    for r in results:
        vf.write_check_csv(r, os.path.join(out, f"{r.name}.csv"))
        extra = f"  ({'; '.join(r.notes)})" if r.notes else ""
        print(f"{r.name:<20s} {r.status:<13s} worst_margin={r.worst_margin:.6g}{extra}")
    if args.plots:
        from . import plotting

        plotting.plot_margins(results, out)
    if report.any_fail:
        return EXIT_FAIL
    if report.any_inconclusive and _strict(config, args):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def cmd_lsi(config: dict, out: str, args) -> int:
    space = _build_space(config["space"])
    init = _initial(space, config["initial"], args.seed) if "initial" in config else None
    try:
        problem = OptProblem.from_dict(config, space, init)
    except ValueError as exc:
        raise ConfigError("<root>", str(exc)) from exc
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        res = minimize_w_entropy(problem)
    write_json(res.to_dict(), os.path.join(out, "result.json"))
    write_csv(os.path.join(out, "minimizer.csv"), ("x", "rho"),
              zip(space.nodes, res.minimizer.values))
    if args.plots:
        from . import plotting

        plotting.plot_minimizer(res, out)
    print(f"mu {res.mu_value:.10g}  el_residual {res.el_residual:.3g}  iters {res.iterations}"
          f"  {'converged' if res.converged else 'NOT converged'}")
    for note in res.notes:
        print(f"note: {note}")
    if not res.converged and _strict(config, args):
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_rigidity(config: dict, out: str, args) -> int:
    ctx = _build_flow(config, args.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = vf.rigidity_scan(ctx.flow, N=ctx.N, tolerances=config.get("tolerances"))
    d = res.details
    doc = res.to_dict()
    doc["criteria"] = {k: {"value": d[k], "tolerance": d["tolerances"][k]}
                       for k in ("h_sup", "W_range", "lap_dev", "bg_max")}
    doc["notes"] = list(res.notes)
    doc["environment"] = _environment(ctx)
    write_json(doc, os.path.join(out, "rigidity.json"))
    vf.write_check_csv(res, os.path.join(out, "rigidity.csv"))
    print(f"rigidity {res.status}")
    for k, v in doc["criteria"].items():
        print(f"  {k:<8s} {v['value']:.3e}  (tolerance {v['tolerance']:g})")
    return EXIT_OK


COMMANDS = {"space": cmd_space, "flow": cmd_flow, "verify": cmd_verify, "lsi": cmd_lsi,
            "rigidity": cmd_rigidity}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entroflow",
        description="Heat-flow entropy functionals and curvature-dimension checks on 1-D weighted spaces.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} command")
        src = p.add_mutually_exclusive_group(required=True)
        src.add_argument("--config", help="path to a JSON config")
        src.add_argument("--scenario", help="name of a packaged scenario config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--strict", action="store_true",
                       help="treat boundary contamination / inconclusive checks as errors")
        p.add_argument("--plots", action="store_true", help="also write PNG figures")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized densities")
    sub.add_parser("scenarios", help="list packaged scenario configs")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "scenarios":
        for name in scenario_names():
            print(name)
        return EXIT_OK
    try:
        config = validate_config(args.command, load_config(args.config, args.scenario))
        os.makedirs(args.out, exist_ok=True)
        return COMMANDS[args.command](config, args.out, args)
    except ConfigError as exc:
        print(f"error: invalid config at {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, FlowError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
