"""Command-line front end for the analyzer and the simulator.

Five flat subcommands: ``exponent`` prints the scaling report for one
operating point, ``regime-map`` and ``min-backhaul`` sweep the (beta,
gamma) plane into CSV, ``simulate`` runs the seeded Monte Carlo schemes
and fits log-log slopes, and ``bound`` evaluates the cut-set upper
bounds.  A JSON config file (``--config``, ``schema_version`` 1) may
supply any option; explicit flags win.  All randomness flows from the
seeds given on the command line or in the config — there is no
wall-clock seeding anywhere.

CSV files start with ``# key=value`` comment lines carrying the full
effective configuration (sorted by key), so re-running the embedded
configuration reproduces the file byte for byte.  Exit codes: 0 on
success, 2 for invalid configuration or usage, 3 when a run detects an
invariant violation (a simulated aggregate exceeding the cut-set
bound).

Simulation CSV columns: scheme,n,m,l,R_BS,alpha,seed,aggregate,access,
backhaul,exit — one row per (scheme, n, seed) plus a MIN_CUT row per
(n, seed); stage cells are empty for schemes without stages.  Fitted
slopes are appended as trailing ``# slope_<scheme>=...`` comments.
Bound CSV columns: n,m,l,R_BS,alpha,seed,cut,D1,D2,D3,wired,total.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings

import numpy as np

from . import __version__
from .channel import ChannelRealization
from .cutset import bound_l1, bound_l2
from .protocols import (
    SCHEME_ORDER,
    SimConfig,
    estimate_hc_single_level,
    fit_scaling_exponent,
    simulate_imh,
    simulate_ish,
    simulate_mh,
)
from .scaling import (
    InvalidPointError,
    ScalingPoint,
    classify_regime_3d,
    map_finite_n,
    min_backhaul_exponent,
)
from .topology import TopologyConfig, generate_topology

SCHEMA_VERSION = 1

SIM_COLUMNS = (
    "scheme", "n", "m", "l", "R_BS", "alpha", "seed",
    "aggregate", "access", "backhaul", "exit",
)
BOUND_COLUMNS = (
    "n", "m", "l", "R_BS", "alpha", "seed",
    "cut", "D1", "D2", "D3", "wired", "total",
)

_RUNNERS = {
    "MH": simulate_mh,
    "HC": estimate_hc_single_level,
    "IMH": simulate_imh,
    "ISH": simulate_ish,
}


class ConfigError(Exception):
    """Bad config file, bad flag combination, or bad parameter value."""


# ---------------------------------------------------------------------------
# Option plumbing
# ---------------------------------------------------------------------------

def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    if raw.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(
            f"config schema_version must be {SCHEMA_VERSION}, "
            f"got {raw.get('schema_version')!r}"
        )
    return {k: v for k, v in raw.items() if k != "schema_version"}


_REQUIRED = object()


def _effective(args: argparse.Namespace, defaults: dict) -> dict:
    """Merge defaults < config file < explicit flags (flags parse to None)."""
    config = _load_config(args.config) if getattr(args, "config", None) else {}
    unknown = set(config) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    out = {}
    for key, fallback in defaults.items():
        flag = getattr(args, key, None)
        if flag is not None:
            out[key] = flag
        elif key in config:
            out[key] = config[key]
        elif fallback is _REQUIRED:
            raise ConfigError(f"missing required option --{key.replace('_', '-')}")
        else:
            out[key] = fallback
    return out


def _resolve_seeds(opts: dict) -> list[int]:
    seeds, count = opts["seeds"], opts["num_seeds"]
    if seeds is not None and count is not None:
        raise ConfigError("give either --seeds or --num-seeds, not both")
    if seeds is None:
        if count is None:
            raise ConfigError("simulation commands need explicit seeds")
        if count < 1:
            raise ConfigError(f"--num-seeds must be positive, got {count}")
        base = opts["seed_base"] or 0
        seeds = list(range(base, base + count))
    seeds = [int(s) for s in seeds]
    if not seeds:
        raise ConfigError("at least one seed is required")
    return seeds


def _grid(spec, name: str) -> np.ndarray:
    lo, hi, steps = spec
    if steps != int(steps) or int(steps) < 1:
        raise ConfigError(f"{name} steps must be a positive integer, got {steps}")
    if hi < lo:
        raise ConfigError(f"{name} grid has max < min")
    return np.linspace(float(lo), float(hi), int(steps))


def _fmt(v) -> str:
    """Stable cell text: repr for floats, str otherwise, '' for None."""
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _emit(opts: dict, header: dict, columns, rows, trailers, extra: dict) -> None:
    """Write one table as CSV (default) or a JSON mirror of the same values."""
    header = dict(header)
    header["schema_version"] = SCHEMA_VERSION
    header["tool"] = f"hybridscale {__version__}"
    if opts.get("format", "csv") == "json":
        payload = {
            "header": {k: header[k] for k in sorted(header)},
            "columns": list(columns),
            "rows": [list(r) for r in rows],
            **extra,
        }
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    else:
        lines = [f"# {k}={_fmt(header[k])}" for k in sorted(header)]
        lines.append(",".join(columns))
        lines.extend(",".join(_fmt(c) for c in row) for row in rows)
        lines.extend(trailers)
        text = "\n".join(lines) + "\n"
    out = opts.get("output")
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _point(opts: dict) -> ScalingPoint:
    try:
        return ScalingPoint(
            alpha=float(opts["alpha"]),
            beta=float(opts["beta"]),
            gamma=float(opts["gamma"]),
            eta=float(opts["eta"]),
        )
    except InvalidPointError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_exponent(args: argparse.Namespace) -> int:
    opts = _effective(args, {
        "alpha": _REQUIRED, "beta": _REQUIRED, "gamma": _REQUIRED,
        "eta": _REQUIRED, "json": False,
    })
    p = _point(opts)
    report = classify_regime_3d(p.beta, p.gamma, p.eta, alpha=p.alpha)
    eta_star = min_backhaul_exponent(p.beta, p.gamma)
    if opts["json"]:
        blob = report.to_dict()
        blob["min_backhaul_exponent"] = eta_star
        blob["point"] = {"alpha": p.alpha, "beta": p.beta,
                         "gamma": p.gamma, "eta": p.eta}
        sys.stdout.write(json.dumps(blob, sort_keys=True) + "\n")
        return 0
    lines = [
        f"point: alpha={_fmt(p.alpha)} beta={_fmt(p.beta)} "
        f"gamma={_fmt(p.gamma)} eta={_fmt(p.eta)}",
        f"exponent: {_fmt(report.exponent)}",
        f"best_scheme: {report.best_scheme}",
        f"regime_2d: {report.label2d}",
        f"regime_3d: {report.label3d}",
        f"dof_limited: {str(report.dof_limited).lower()}",
        f"infra_limited: {str(report.infra_limited).lower()}",
        f"min_backhaul_exponent: {_fmt(eta_star)}",
        "alpha_breakpoints:",
    ]
    lines += [
        f"  ({_fmt(seg.alpha_min)}, {_fmt(seg.alpha_max)}): "
        f"{seg.scheme}  e = {seg.formula}"
        for seg in report.alpha_breakpoints
    ]
    sys.stdout.write("\n".join(lines) + "\n")
    return 0


def _simplex(beta_grid: np.ndarray, gamma_grid: np.ndarray):
    for b in beta_grid:
        for g in gamma_grid:
            if 0.0 <= b < 1.0 and 0.0 <= g < 1.0 and b + g <= 1.0:
                yield float(b), float(g)


def _cmd_regime_map(args: argparse.Namespace) -> int:
    opts = _effective(args, {
        "eta": _REQUIRED,
        "beta_grid": (0.0, 0.95, 20), "gamma_grid": (0.0, 0.95, 20),
        "alphas": (2.5, 3.0, 5.0),
        "output": None, "format": "csv",
    })
    eta = float(opts["eta"])
    alphas = [float(a) for a in opts["alphas"]]
    if any(a <= 2.0 for a in alphas):
        raise ConfigError("reference alphas must exceed 2")
    bg = _grid(opts["beta_grid"], "beta")
    gg = _grid(opts["gamma_grid"], "gamma")
    columns = ["beta", "gamma", "label3d"] + [f"e_alpha_{_fmt(a)}" for a in alphas]
    rows = []
    for b, g in _simplex(bg, gg):
        report = classify_regime_3d(b, g, eta)
        es = [report.interval_at(a).exponent_at(a) for a in alphas]
        rows.append([b, g, report.label3d, *es])
    header = {
        "command": "regime-map", "eta": eta,
        "alphas": " ".join(_fmt(a) for a in alphas),
        "beta_grid": " ".join(_fmt(v) for v in opts["beta_grid"]),
        "gamma_grid": " ".join(_fmt(v) for v in opts["gamma_grid"]),
    }
    _emit(opts, header, columns, rows, [], {})
    return 0


def _cmd_min_backhaul(args: argparse.Namespace) -> int:
    opts = _effective(args, {
        "beta_grid": (0.0, 0.95, 20), "gamma_grid": (0.0, 0.95, 20),
        "output": None, "format": "csv",
    })
    bg = _grid(opts["beta_grid"], "beta")
    gg = _grid(opts["gamma_grid"], "gamma")
    rows = []
    for b, g in _simplex(bg, gg):
        report = classify_regime_3d(b, g, math.inf)
        eta_star = min_backhaul_exponent(b, g)
        negligible = not (eta_star > 0.0)  # covers eta* = -inf as well
        rows.append([b, g, report.label2d, eta_star, str(negligible).lower()])
    header = {
        "command": "min-backhaul",
        "beta_grid": " ".join(_fmt(v) for v in opts["beta_grid"]),
        "gamma_grid": " ".join(_fmt(v) for v in opts["gamma_grid"]),
    }
    _emit(opts, header, ["beta", "gamma", "regime", "eta_star", "negligible"],
          rows, [], {})
    return 0


def _sim_defaults() -> dict:
    return {
        "sizes": _REQUIRED, "alpha": _REQUIRED, "beta": _REQUIRED,
        "gamma": _REQUIRED, "eta": _REQUIRED,
        "seeds": None, "num_seeds": None, "seed_base": 0,
        "power": 100.0, "tdma_k": 9,
        "hc_cluster_exponent": 0.5, "hc_quant_bits": 8,
        "output": None, "format": "csv",
    }


def _instance(n: int, seed: int, p: ScalingPoint, opts: dict):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fm = map_finite_n(n, p)
    topo = generate_topology(TopologyConfig(n=n, m=fm.m, l=fm.l, seed=seed))
    ch = ChannelRealization(topo, alpha=p.alpha, phase_seed=seed)
    cfg = SimConfig(
        p=float(opts["power"]),
        tdma_k=int(opts["tdma_k"]),
        r_bs=fm.r_bs,
        hc_cluster_exponent=float(opts["hc_cluster_exponent"]),
        hc_quant_bits=int(opts["hc_quant_bits"]),
    )
    return fm, topo, ch, cfg


def _cmd_simulate(args: argparse.Namespace) -> int:
    defaults = _sim_defaults()
    defaults["schemes"] = list(SCHEME_ORDER)
    opts = _effective(args, defaults)
    seeds = _resolve_seeds(opts)
    sizes = [int(n) for n in opts["sizes"]]
    schemes = [s.upper() for s in opts["schemes"]]
    bad = [s for s in schemes if s not in _RUNNERS]
    if bad or not schemes:
        raise ConfigError(f"unknown schemes {bad}; choose from {list(_RUNNERS)}")
    schemes = [s for s in SCHEME_ORDER if s in schemes]
    p = _point(opts)

    rows = []
    agg: dict[str, dict[int, list[float]]] = {s: {} for s in schemes}
    violations = 0
    for n in sizes:
        for seed in seeds:
            fm, topo, ch, cfg = _instance(n, seed, p, opts)
            cut = min(bound_l1(topo, ch, cfg).total,
                      bound_l2(topo, ch, cfg).total)
            for scheme in schemes:
                res = _RUNNERS[scheme](topo, ch, cfg)
                stages = res.stage_rates
                rows.append([
                    scheme, n, fm.m, fm.l, fm.r_bs, p.alpha, seed,
                    res.aggregate_throughput,
                    stages.access if stages else None,
                    stages.backhaul if stages else None,
                    stages.exit if stages else None,
                ])
                agg[scheme].setdefault(n, []).append(res.aggregate_throughput)
                if res.aggregate_throughput > cut + 1e-9:
                    violations += 1
            rows.append(["MIN_CUT", n, fm.m, fm.l, fm.r_bs, p.alpha, seed,
                         cut, None, None, None])

    slopes = {}
    for scheme in schemes:
        means = [(n, float(np.mean(v))) for n, v in sorted(agg[scheme].items())]
        if len(means) >= 3 and all(t > 0.0 for _, t in means):
            slope, stderr = fit_scaling_exponent(means)
            slopes[scheme] = {"slope": slope, "stderr": stderr}
    trailers = [
        f"# slope_{s}={_fmt(slopes[s]['slope'])} "
        f"stderr={_fmt(slopes[s]['stderr'])}"
        for s in sorted(slopes)
    ]

    header = {
        "command": "simulate",
        "alpha": p.alpha, "beta": p.beta, "gamma": p.gamma, "eta": p.eta,
        "sizes": " ".join(str(n) for n in sizes),
        "seeds": " ".join(str(s) for s in seeds),
        "schemes": " ".join(schemes),
        "power": float(opts["power"]), "tdma_k": int(opts["tdma_k"]),
        "hc_cluster_exponent": float(opts["hc_cluster_exponent"]),
        "hc_quant_bits": int(opts["hc_quant_bits"]),
    }
    _emit(opts, header, SIM_COLUMNS, rows, trailers, {"slopes": slopes})
    if violations:
        print(f"invariant violation: {violations} row(s) exceed the cut-set "
              "bound", file=sys.stderr)
        return 3
    return 0


def _cmd_bound(args: argparse.Namespace) -> int:
    defaults = _sim_defaults()
    for key in ("tdma_k", "hc_cluster_exponent", "hc_quant_bits"):
        del defaults[key]
    opts = _effective(args, defaults)
    seeds = _resolve_seeds(opts)
    sizes = [int(n) for n in opts["sizes"]]
    p = _point(opts)
    rows = []
    for n in sizes:
        for seed in seeds:
            fm, topo, ch, cfg = _instance(n, seed, p,
                                          {**opts, "tdma_k": 9,
                                           "hc_cluster_exponent": 0.5,
                                           "hc_quant_bits": 8})
            b1 = bound_l1(topo, ch, cfg)
            b2 = bound_l2(topo, ch, cfg)
            base = [n, fm.m, fm.l, fm.r_bs, p.alpha, seed]
            for b in (b1, b2):
                rows.append(base + [b.cut, b.wireless_terms["D1"],
                                    b.wireless_terms["D2"], b.wireless_terms["D3"],
                                    b.wired_term, b.total])
            rows.append(base + ["MIN", None, None, None, None,
                                min(b1.total, b2.total)])
    header = {
        "command": "bound",
        "alpha": p.alpha, "beta": p.beta, "gamma": p.gamma, "eta": p.eta,
        "sizes": " ".join(str(n) for n in sizes),
        "seeds": " ".join(str(s) for s in seeds),
        "power": float(opts["power"]),
    }
    _emit(opts, header, BOUND_COLUMNS, rows, [], {})
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _add_point_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--alpha", type=float, help="path-loss exponent (> 2)")
    sp.add_argument("--beta", type=float, help="BS density exponent, m = n^beta")
    sp.add_argument("--gamma", type=float, help="antenna exponent, l = n^gamma")
    sp.add_argument("--eta", type=float,
                    help="backhaul exponent, R_BS = n^eta (inf/-inf allowed)")


def _add_io_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--output", "-o", help="output path (default: stdout)")
    sp.add_argument("--format", choices=("csv", "json"),
                    help="output format (default csv)")


def _add_seed_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--seeds", type=int, nargs="*",
                    help="explicit seed list (exclusive with --num-seeds)")
    sp.add_argument("--num-seeds", type=int, help="run seeds base..base+count-1")
    sp.add_argument("--seed-base", type=int, help="first seed for --num-seeds")


def _add_grid_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--beta-grid", type=float, nargs=3,
                    metavar=("MIN", "MAX", "STEPS"))
    sp.add_argument("--gamma-grid", type=float, nargs=3,
                    metavar=("MIN", "MAX", "STEPS"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hybridscale",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--config", help="JSON config file (schema_version 1); "
                                         "flags override config values")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("exponent", help="scaling report for one operating point")
    _add_point_flags(sp)
    sp.add_argument("--json", action="store_true", default=None,
                    help="machine-readable report")
    sp.set_defaults(func=_cmd_exponent)

    sp = sub.add_parser("regime-map",
                        help="sweep (beta, gamma) into labeled CSV rows")
    sp.add_argument("--eta", type=float)
    sp.add_argument("--alphas", type=float, nargs="+",
                    help="reference alphas for the exponent columns")
    _add_grid_flags(sp)
    _add_io_flags(sp)
    sp.set_defaults(func=_cmd_regime_map)

    sp = sub.add_parser("min-backhaul",
                        help="minimum backhaul exponent eta* over (beta, gamma)")
    _add_grid_flags(sp)
    _add_io_flags(sp)
    sp.set_defaults(func=_cmd_min_backhaul)

    sp = sub.add_parser("simulate",
                        help="seeded Monte Carlo of the schemes plus cut bounds")
    sp.add_argument("--sizes", type=int, nargs="+", help="network sizes n")
    _add_point_flags(sp)
    _add_seed_flags(sp)
    sp.add_argument("--schemes", nargs="+", help="subset of MH HC IMH ISH")
    sp.add_argument("--power", type=float, help="per-node transmit power P")
    sp.add_argument("--tdma-k", type=int, help="spatial reuse factor")
    sp.add_argument("--hc-cluster-exponent", type=float)
    sp.add_argument("--hc-quant-bits", type=int)
    _add_io_flags(sp)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("bound", help="cut-set bounds per instance")
    sp.add_argument("--sizes", type=int, nargs="+", help="network sizes n")
    _add_point_flags(sp)
    _add_seed_flags(sp)
    sp.add_argument("--power", type=float, help="per-node transmit power P")
    _add_io_flags(sp)
    sp.set_defaults(func=_cmd_bound)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except InvalidPointError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
