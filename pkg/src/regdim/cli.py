"""Command-line front end: ``regdim {dims,scan-theta,levy,qs}``.

Exit codes: 0 success, 1 estimation or runtime failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import estimators as est
from .config import load_json, load_measure, measure_from_config
from .errors import ArgumentError, ConfigError, ResolutionError, ToleranceError
from .levy import (StableProcessSpec, blowup_experiment, event_ratio_witness, graph_pushforward,
                   sample_path)
from .qsmaps import PowerMap, check_pushforward_sandwich

DEFAULTS = {
    "theta_lo": 2 ** 0.5,
    "theta_hi": 2.0 ** 10,
    "theta_points": 40,
    "grid_factor": 2 ** 0.25,
    "min_separation": 4.0,
    "triples": 10000,
    "slack": 0.05,
    "levy": {
        "alpha": 2.0,
        "n": 2 ** 16,
        "theta": 2.0,
        "deltas": [2.0 ** -6, 2.0 ** -8, 2.0 ** -10, 2.0 ** -12],
        "seeds": list(range(20)),
        "measure": {"kind": "lebesgue"},
    },
}
SIG = 12


def _clean(obj):
    """Round floats to 12 significant digits; non-finite values become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.{SIG}g}")
    return obj


def _fmt(x) -> str:
    return f"{float(x):.{SIG}g}"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def _csv(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _parse_list(text: str, kind=float) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if kind is int and "-" in part[1:]:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(kind(part))
    if not out:
        raise ConfigError("empty list")
    return out


def _grid(args, measure) -> est.ScaleGrid:
    return est.ScaleGrid.default(measure, r_min=args.r_min, r_max=args.r_max,
                                 factor=args.grid_factor, net_mesh=args.net_mesh,
                                 theta_min=args.min_separation)


def _thetas(args) -> np.ndarray:
    lo, hi, k = args.theta_min, args.theta_max, args.theta_points
    if not (lo > 1 and hi > lo and k >= 2):
        raise ConfigError("theta grid needs 1 < theta-min < theta-max and theta-points >= 2")
    return est.default_thetas(lo, hi, k)


def _theta_config(args) -> dict:
    return {"theta_min": args.theta_min, "theta_max": args.theta_max, "points": args.theta_points}


def cmd_dims(args) -> int:
    measure, mcfg = load_measure(args.measure)
    grid = _grid(args, measure)
    thetas = _thetas(args)
    w = args.workers
    lower_pair = est.lower_regdim_pair_scan(measure, grid, workers=w)
    records = {
        "upper_theta": est.upper_regdim_theta_scan(measure, thetas, grid, workers=w),
        "lower_theta": est.lower_regdim_theta_scan(measure, thetas, grid, workers=w),
        "upper_pair": est.upper_regdim_pair_scan(measure, grid, workers=w),
        "lower_pair": lower_pair,
        "decaying": est.decaying_exponent(measure, grid, workers=w),
    }
    result = {
        "config": {"command": "dims", "measure": mcfg, "grid": grid.to_dict(),
                   "thetas": _theta_config(args)},
        "measure_fingerprint": measure.fingerprint(),
        "estimates": {k: v.to_dict() for k, v in records.items()},
    }
    if measure.support_diameter > 0:
        result["heinonen"] = est.heinonen_check(measure, grid, lower=lower_pair, workers=w).to_dict()
    _emit(_json(result), args.out)
    return 0


def cmd_scan_theta(args) -> int:
    measure, _ = load_measure(args.measure)
    grid = _grid(args, measure)
    prof = est.doubling_profile(measure, _thetas(args), grid, args.kind, workers=args.workers)
    _emit(_csv(["theta", "constant", "exponent"], prof.rows()), args.out)
    return 0


def cmd_qs(args) -> int:
    if not (args.gamma > 0 and math.isfinite(args.gamma)):
        raise ConfigError("gamma must be finite and positive")
    measure, mcfg = load_measure(args.measure)
    grid = _grid(args, measure)
    rep = check_pushforward_sandwich(measure, PowerMap(args.gamma), grid, slack=args.slack,
                                     triple_samples=args.triples, seed=args.seed or 0,
                                     workers=args.workers)
    out = rep.to_dict()
    out["config"] = {"command": "qs", "measure": mcfg, "gamma": args.gamma, "grid": grid.to_dict(),
                     "triples": args.triples, "seed": args.seed or 0, "slack": args.slack}
    _emit(_json(out), args.out)
    return 0


def _levy_config(args) -> dict:
    cfg = dict(DEFAULTS["levy"])
    if args.config:
        cfg.update(load_json(args.config))
    for key in ("alpha", "n", "theta"):
        val = getattr(args, key)
        if val is not None:
            cfg[key] = val
    if args.deltas:
        cfg["deltas"] = _parse_list(args.deltas, float)
    if args.seeds:
        cfg["seeds"] = _parse_list(args.seeds, int)
    try:
        cfg["alpha"] = float(cfg["alpha"])
        cfg["theta"] = float(cfg["theta"])
        n = cfg["n"]
        if isinstance(n, float) and n.is_integer():
            n = int(n)
        if not isinstance(n, int) or n < 2 or n & (n - 1):
            raise ConfigError(f"n must be a power of two, got {n}")
        cfg["n"] = n
        cfg["deltas"] = [float(d) for d in cfg["deltas"]]
        cfg["seeds"] = [int(s) for s in cfg["seeds"]]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid levy config: {exc}") from exc
    return cfg


def cmd_levy(args) -> int:
    cfg = _levy_config(args)
    base_dir = Path(args.config).parent if args.config else Path(".")
    measure = measure_from_config(cfg["measure"], base_dir)
    StableProcessSpec(cfg["alpha"], cfg["n"], 0)
    if args.dump_path:
        seed = args.seed if args.seed is not None else cfg["seeds"][0]
        path = sample_path(StableProcessSpec(cfg["alpha"], cfg["n"], seed))
        with open(args.dump_path, "w", newline="") as fh:
            path.write_csv(fh)
        return 0
    table = blowup_experiment(measure, cfg["alpha"], cfg["n"], cfg["theta"], cfg["deltas"],
                              cfg["seeds"], workers=args.workers)
    header = ["delta", "median_C", "median_K", "min_C", "max_C"]
    rows = [[r[h] for h in header] for r in table.rows()]
    if args.format == "csv":
        _emit(_csv(header, rows), args.out)
        return 0
    result = {"config": dict(cfg, command="levy"), "table": table.rows()}
    if args.event_s is not None:
        lower = est.lower_regdim_pair_scan(measure).value
        witnesses = []
        for seed in cfg["seeds"]:
            path = sample_path(StableProcessSpec(cfg["alpha"], cfg["n"], seed))
            rep = event_ratio_witness(measure, path, args.event_s, lower_dim=lower,
                                      graph=graph_pushforward(measure, path))
            witnesses.append(dict(rep.to_dict(), seed=seed))
        result["events"] = {"s": args.event_s, "lower_dim": lower, "witnesses": witnesses}
    _emit(_json(result), args.out)
    return 0


def _add_grid(p) -> None:
    g = p.add_argument_group("scale grid")
    g.add_argument("--r-min", type=float, help="smallest radius (default 2^-14 * diameter)")
    g.add_argument("--r-max", type=float, help="largest radius (default diameter)")
    g.add_argument("--grid-factor", type=float, default=DEFAULTS["grid_factor"],
                   help="ratio between consecutive radii")
    g.add_argument("--net-mesh", type=float, help="mesh of the center net (default r-min)")
    g.add_argument("--min-separation", type=float, default=DEFAULTS["min_separation"],
                   help="smallest R/r entering the slope fits")


def _add_thetas(p) -> None:
    g = p.add_argument_group("theta grid")
    g.add_argument("--theta-min", type=float, default=DEFAULTS["theta_lo"])
    g.add_argument("--theta-max", type=float, default=DEFAULTS["theta_hi"])
    g.add_argument("--theta-points", type=int, default=DEFAULTS["theta_points"])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regdim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dims", help="upper and lower regularity dimensions by both routes")
    p.add_argument("--measure", required=True)
    _add_grid(p)
    _add_thetas(p)
    p.set_defaults(func=cmd_dims)

    p = sub.add_parser("scan-theta", help="CSV profile of the grid-extremal constants")
    p.add_argument("--measure", required=True)
    p.add_argument("--kind", choices=["upper", "lower"], default="upper",
                   help="doubling (upper) or uniform-perfectness (lower) constants")
    _add_grid(p)
    _add_thetas(p)
    p.set_defaults(func=cmd_scan_theta)

    p = sub.add_parser("qs", help="power-map pushforward dimension bounds")
    p.add_argument("--measure", required=True)
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--triples", type=int, default=DEFAULTS["triples"])
    p.add_argument("--slack", type=float, default=DEFAULTS["slack"])
    _add_grid(p)
    p.set_defaults(func=cmd_qs)

    p = sub.add_parser("levy", help="blow-up table on stable-process graphs")
    p.add_argument("--config", help="experiment JSON: alpha, n, theta, deltas, seeds, measure")
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--theta", type=float)
    p.add_argument("--deltas", help="comma-separated, strictly decreasing")
    p.add_argument("--seeds", help="comma-separated integers or ranges like 0-19")
    p.add_argument("--seed", type=int, help="seed of the path written by --dump-path")
    p.add_argument("--dump-path", help="write the path CSV (t,x) and skip the experiment")
    p.add_argument("--event-s", type=float, help="also scan rectangle events with this exponent")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_levy)

    for action in sub.choices.values():
        action.add_argument("--out", help="output file (default stdout)")
        action.add_argument("--workers", type=int, default=1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.workers < 1:
        print("regdim: --workers must be at least 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ResolutionError, ToleranceError) as exc:
        print(f"regdim: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, ArgumentError, FileNotFoundError) as exc:
        print(f"regdim: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        print(f"regdim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
