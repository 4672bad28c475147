"""Command-line interface.

    sspickands info FAMILY --alpha A [--K K] [--k k]
    sspickands estimate FAMILY --alpha A --R R --T T [--paths N --seed S ...]
    sspickands pickands-curve FAMILY --alpha A --T-list 10,20,40
    sspickands bounds FAMILY --alpha A --R R
    sspickands exceedance FAMILY --alpha A --a A --b B --beta BETA --T T --u-list 2.5,3
    sspickands verify

Every subcommand also takes ``--config FILE`` (YAML or JSON, same schema as
:data:`SCHEMA`); flags given on the command line override the file. Output
goes to ``--output`` (relative paths resolve against ``$SSPICKANDS_OUTPUT_DIR``
when set), else to ``$SSPICKANDS_OUTPUT_DIR/<command>.<format>``, else stdout.
The one-line summary goes to stderr.

Exit codes: 0 success, 1 invalid input, 2 computation failure, 3 failed
verification.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import yaml

from . import __version__
from .bounds import compute_c1_c2, piterbarg_bounds
from .errors import InsufficientSamplesError, ParameterError
from .estimator import convergence_report, estimate_levels, estimate_pickands_curve
from .exceedance import ExceedanceSpec, ratio_series
from .processes import FORMULAS, ProcessSpec
from .sampler import Scheme, build_grid, grid_from_density
from .verify import run_checks

OUTPUT_DIR_ENV = "SSPICKANDS_OUTPUT_DIR"

EXIT_OK, EXIT_INVALID, EXIT_COMPUTE, EXIT_VERIFY = 0, 1, 2, 3

COMMANDS = ("info", "estimate", "pickands-curve", "bounds", "exceedance", "verify")

# allowed keys; nested dicts are sections
SCHEMA = {
    "command": None,
    "process": {"family": None, "alpha": None, "K": None, "k": None},
    "R": None,
    "T": None,
    "T_list": None,
    "u_list": None,
    "grid": {"n": None, "density": None, "scheme": None},
    "mc": {"n_paths": None, "seed": None, "method": None, "levels": None},
    "exceedance": {"a": None, "b": None, "beta": None, "budget": None, "reference_paths": None},
    "output": {"format": None, "path": None},
}

DEFAULTS = {
    "process": {"K": 1.0, "k": 1},
    "R": [1.0],
    "grid": {"density": 16.0, "scheme": "uniform"},
    "mc": {"n_paths": 10_000, "seed": 0, "method": "plain", "levels": 2},
    "exceedance": {"a": 1.0, "b": 0.0, "beta": 1.0, "budget": 1_000_000, "reference_paths": 100_000},
    "output": {"format": "csv"},
}

ESTIMATE_COLUMNS = [
    "family", "params", "R", "T", "grid_n", "n_paths", "seed", "value", "stderr", "log_mean", "flags",
]
BOUNDS_COLUMNS = [
    "family", "params", "R", "c1", "c2", "argmin_x", "argmax_x",
    "lower", "upper", "universal_lower", "pickands_coefficient", "pickands_value",
]
EXCEEDANCE_COLUMNS = [
    "u", "p_hat", "stderr", "psi", "ratio", "ratio_stderr", "reference", "reference_stderr",
]
VERIFY_COLUMNS = ["name", "spec", "passed", "detail"]


class ConfigError(ParameterError):
    pass


# ---------------------------------------------------------------------------
# config handling


def _check_keys(data, schema, where="config"):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    for key, val in data.items():
        if key not in schema:
            raise ConfigError(f"{where}: unknown key {key!r} (allowed: {', '.join(schema)})")
        if isinstance(schema[key], dict):
            _check_keys(val, schema[key], f"{where}.{key}")


def load_config(path) -> dict:
    """Read a YAML or JSON config and reject unknown keys."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text) if not str(path).endswith(".json") else json.loads(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        raise ConfigError(f"{path}:{mark.line + 1}:{mark.column + 1}: {exc.problem}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    data = data or {}
    _check_keys(data, SCHEMA, str(path))
    return data


def _merge(base, over):
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, dict):
            out[k] = _merge(out.get(k, {}), v)
        elif v is not None:
            out[k] = v
    return out


def _float_list(value, name):
    if value is None:
        return None
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    if not isinstance(value, (list, tuple)):
        value = [value]
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected numbers, got {value!r}") from None


def _flags_to_config(args) -> dict:
    g = lambda name: getattr(args, name, None)  # noqa: E731
    return {
        "command": args.command,
        "process": {"family": g("family"), "alpha": g("alpha"), "K": g("K"), "k": g("k")},
        "R": g("R"),
        "T": g("T"),
        "T_list": g("T_list"),
        "u_list": g("u_list"),
        "grid": {"n": g("grid_n"), "density": g("density"), "scheme": g("scheme")},
        "mc": {"n_paths": g("paths"), "seed": g("seed"), "method": g("method"), "levels": g("levels")},
        "exceedance": {
            "a": g("a"),
            "b": g("b"),
            "beta": g("beta"),
            "budget": g("budget"),
            "reference_paths": g("reference_paths"),
        },
        "output": {"format": g("format"), "path": g("output")},
    }


def resolve_config(args) -> dict:
    """Defaults, then the config file, then command-line flags."""
    cfg = _merge({}, DEFAULTS)
    if getattr(args, "config", None):
        file_cfg = load_config(args.config)
        if file_cfg.get("command") not in (None, args.command):
            raise ConfigError(
                f"config is for command {file_cfg['command']!r}, invoked as {args.command!r}"
            )
        cfg = _merge(cfg, file_cfg)
    cfg = _merge(cfg, _flags_to_config(args))
    cfg["R"] = _float_list(cfg.get("R"), "R")
    cfg["T_list"] = _float_list(cfg.get("T_list"), "T_list")
    cfg["u_list"] = _float_list(cfg.get("u_list"), "u_list")
    if cfg["output"]["format"] not in ("csv", "json"):
        raise ConfigError(f"output.format must be csv or json, got {cfg['output']['format']!r}")
    if cfg["mc"]["method"] not in ("plain", "tilted"):
        raise ConfigError(f"mc.method must be plain or tilted, got {cfg['mc']['method']!r}")
    Scheme(cfg["grid"]["scheme"])
    return cfg


def _spec(cfg) -> ProcessSpec:
    p = cfg["process"]
    if p.get("family") is None:
        raise ConfigError("process.family is required")
    if p.get("alpha") is None:
        raise ConfigError("process.alpha is required")
    return ProcessSpec(p["family"], float(p["alpha"]), K=float(p["K"]), k=p["k"])


def _provenance(cfg) -> dict:
    # 'output.path' is where the file lands, not what it contains
    c = {k: v for k, v in cfg.items() if k != "output"}
    c["output"] = {"format": cfg["output"]["format"]}
    return {"artifact": "sspickands", "version": __version__, "config": c}


# ---------------------------------------------------------------------------
# commands


def _grid(cfg, T):
    g = cfg["grid"]
    if g.get("n") is not None:
        return build_grid(T, int(g["n"]), g["scheme"])
    return grid_from_density(T, float(g["density"]), g["scheme"])


def cmd_info(cfg):
    spec = _spec(cfg)
    a, kappa, c = spec.triple
    summary = f"{spec.label()}: (alpha, kappa, c_Y) = ({a:g}, {kappa:g}, {c:g})"
    row = {"family": spec.family.value, "params": spec.params(), "alpha": a, "kappa": kappa, "c_Y": c,
           "formula": FORMULAS[spec.family]}
    return [row], list(row), summary, EXIT_OK


def cmd_estimate(cfg):
    spec = _spec(cfg)
    if cfg.get("T") is None:
        raise ConfigError("T is required")
    T = float(cfg["T"])
    mc = cfg["mc"]
    grid = _grid(cfg, T)
    levels = int(mc["levels"])
    res = estimate_levels(spec, grid, cfg["R"], int(mc["n_paths"]), int(mc["seed"]), levels,
                          mc["method"], cfg["workers"])
    rows = []
    for R, est in res.items():
        base = {
            "family": spec.family.value,
            "params": spec.params(),
            "R": R,
            "T": T,
            "n_paths": est.fine.n_paths,
            "seed": int(mc["seed"]),
        }
        for i, e in enumerate(est.levels):
            flags = [f"method={mc['method']}", f"level={i}"]
            if e.second_moment_flag:
                flags.append("heavy-tail")
            rows.append({**base, "grid_n": e.grid_n, "value": e.value, "stderr": e.stderr,
                         "log_mean": e.log_mean, "flags": ";".join(flags)})
        if levels > 1:
            rows.append({**base, "grid_n": est.fine.grid_n, "value": est.value, "stderr": est.stderr,
                         "log_mean": None,
                         "flags": f"method={mc['method']};extrapolated;levels={levels}"})
    summary = "; ".join(f"R={R:g}: {e.value:.6g} ± {e.stderr:.2g}" for R, e in res.items())
    return rows, ESTIMATE_COLUMNS, f"{spec.label()} T={T:g}: {summary}", EXIT_OK


def cmd_pickands_curve(cfg):
    spec = _spec(cfg)
    T_list = cfg.get("T_list")
    if not T_list:
        raise ConfigError("T_list is required")
    mc = cfg["mc"]
    curve = estimate_pickands_curve(spec, T_list, float(cfg["grid"]["density"]), int(mc["n_paths"]),
                                    int(mc["seed"]), mc["method"], int(mc["levels"]), cfg["workers"])
    rows = []
    for p in curve.points:
        flags = [f"method={mc['method']}", f"exponent={curve.exponent:g}"]
        rows.append({
            "family": spec.family.value,
            "params": spec.params(),
            "R": 0.0,
            "T": p.T,
            "grid_n": p.raw[-1][0],
            "n_paths": int(mc["n_paths"]),
            "seed": int(mc["seed"]),
            "value": p.ratio,
            "stderr": p.stderr,
            "log_mean": None,
            "flags": ";".join(flags),
        })
    tail = ""
    if len(curve.points) >= 3:
        rep = convergence_report(curve)
        tail = f", plateau {rep.plateau:.4g} ± {rep.plateau_stderr:.2g}"
    if curve.cap is not None or len(curve.points) < len(T_list):
        tail += f", capped after T={curve.cap}"
    last = curve.points[-1] if curve.points else None
    head = f"last ratio {last.ratio:.4g} ± {last.stderr:.2g}" if last else "no points"
    return rows, ESTIMATE_COLUMNS, f"{spec.label()} H(T)/T^{curve.exponent:g}: {head}{tail}", EXIT_OK


def cmd_bounds(cfg):
    spec = _spec(cfg)
    k = compute_c1_c2(spec)
    rows = []
    for R in cfg["R"]:
        rep = piterbarg_bounds(spec, R, k)
        d = rep.to_dict()
        rows.append({
            "family": rep.family,
            "params": rep.params,
            "R": rep.R,
            "c1": rep.c1,
            "c2": rep.c2,
            "argmin_x": rep.argmin_x,
            "argmax_x": rep.argmax_x,
            "lower": d["piterbarg_lower"],
            "upper": d["piterbarg_upper"],
            "universal_lower": rep.universal_lower,
            "pickands_coefficient": rep.pickands.coefficient,
            "pickands_value": rep.pickands.value,
        })

    def fmt(v):
        return f"{v:.6g}" if isinstance(v, float) else str(v)

    summary = "; ".join(
        f"{spec.label()} R={r['R']:g}: c1={r['c1']:.6g} c2={r['c2']:.6g} lower={fmt(r['lower'])} "
        f"upper={fmt(r['upper'])} universal_lower={r['universal_lower']:.6g}"
        for r in rows
    )
    return rows, BOUNDS_COLUMNS, summary, EXIT_OK


def cmd_exceedance(cfg):
    spec = _spec(cfg)
    e = cfg["exceedance"]
    espec = ExceedanceSpec(spec, e["a"], e["b"], e["beta"])
    if cfg.get("T") is None:
        raise ConfigError("T is required")
    u_list = cfg.get("u_list") or [2.5, 3.0, 3.5]
    g = cfg["grid"]
    series = ratio_series(espec, float(cfg["T"]), u_list, int(e["budget"]), float(g["density"]),
                          g.get("n"), int(cfg["mc"]["seed"]), int(e["reference_paths"]), cfg["workers"])
    rows = list(series.rows())
    summary = f"{spec.label()} case ({espec.case}) reference {series.reference:.4g}: " + ", ".join(
        f"u={r['u']:g} ratio {r['ratio']:.4g} ± {r['ratio_stderr']:.2g}" for r in rows
    )
    return rows, EXCEEDANCE_COLUMNS, summary, EXIT_OK


def cmd_verify(cfg):
    results = run_checks(seed=int(cfg["mc"]["seed"]))
    rows = [r.to_dict() for r in results]
    n_fail = sum(not r.passed for r in results)
    summary = f"verify: {len(results) - n_fail}/{len(results)} checks passed"
    return rows, VERIFY_COLUMNS, summary, EXIT_VERIFY if n_fail else EXIT_OK


HANDLERS = {
    "info": cmd_info,
    "estimate": cmd_estimate,
    "pickands-curve": cmd_pickands_curve,
    "bounds": cmd_bounds,
    "exceedance": cmd_exceedance,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# output


def _cell(v):
    if isinstance(v, dict):
        return json.dumps(v, sort_keys=True, separators=(",", ":"))
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def render(rows, columns, cfg) -> str:
    prov = _provenance(cfg)
    if cfg["output"]["format"] == "json":
        return json.dumps({**prov, "columns": columns, "rows": rows}, sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    buf.write("# " + json.dumps(prov, sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def output_path(cfg):
    path = cfg["output"].get("path")
    env = os.environ.get(OUTPUT_DIR_ENV)
    if path:
        p = Path(path)
        return p if p.is_absolute() or not env else Path(env) / p
    if env:
        return Path(env) / f"{cfg['command']}.{cfg['output']['format']}"
    return None


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p, process=True):
    p.add_argument("--config", help="YAML or JSON run configuration")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--output", help="output file (default: stdout)")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, default=1, help="threads (does not change results)")
    p.add_argument("-v", "--verbose", action="store_true")
    if process:
        p.add_argument("family", nargs="?", help="fbm, bifractional, sub-fractional, "
                       "integrated-fbm, time-average or dual")
        p.add_argument("--alpha", type=float)
        p.add_argument("--K", type=float, help="bifractional index")
        p.add_argument("--k", type=int, help="integration order")


def _add_mc(p):
    p.add_argument("--paths", type=int)
    p.add_argument("--method", choices=("plain", "tilted"))
    p.add_argument("--levels", type=int, help="grid refinement levels for extrapolation")
    p.add_argument("--density", type=float, help="grid points per unit time")
    p.add_argument("--grid-n", dest="grid_n", type=int)
    p.add_argument("--scheme", choices=[s.value for s in Scheme])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sspickands", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"sspickands {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", help="self-similarity parameters of a process")
    _add_common(p)

    p = sub.add_parser("estimate", help="Monte Carlo estimate of H_Y^R(T)")
    _add_common(p)
    _add_mc(p)
    p.add_argument("--R", type=str, help="drift parameter(s), comma separated")
    p.add_argument("--T", type=float)

    p = sub.add_parser("pickands-curve", help="H_Y(T)/T^(alpha/kappa) along T")
    _add_common(p)
    _add_mc(p)
    p.add_argument("--T-list", dest="T_list", type=str)

    p = sub.add_parser("bounds", help="c1, c2 and closed-form Piterbarg/Pickands bounds")
    _add_common(p)
    p.add_argument("--R", type=str)

    p = sub.add_parser("exceedance", help="P(sup X > u) / Psi(u) against the limit functional")
    _add_common(p)
    _add_mc(p)
    p.add_argument("--T", type=float)
    p.add_argument("--u-list", dest="u_list", type=str)
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--budget", type=int, help="paths per u")
    p.add_argument("--reference-paths", dest="reference_paths", type=int)

    p = sub.add_parser("verify", help="exact identities, S2 ratios, sandwich and SPD checks")
    _add_common(p, process=False)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; here 2 means a compute failure
        return EXIT_INVALID if exc.code not in (0, None) else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        cfg["workers"] = max(int(args.workers or 1), 1)
        handler = HANDLERS[args.command]
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        rows, columns, summary, status = handler(cfg)
    except (ValueError, InsufficientSamplesError) as exc:  # fixable by changing the request
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # runtime, linear-algebra and memory failures
        print(f"error: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    cfg.pop("workers")
    text = render(rows, columns, cfg)
    path = output_path(cfg)
    if path is None:
        sys.stdout.write(text)
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    print(summary, file=sys.stderr if path is None else sys.stdout)
    return status


if __name__ == "__main__":
    sys.exit(main())
