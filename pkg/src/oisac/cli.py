"""Command line front end: cost curves, C-D region sweeps, and input CDFs.

Subcommands
-----------
cost    writes cost_<estimator>_<lambda>.csv over the input grid
region  writes region_<solver>_<estimator>.csv plus optional dist_t<t>.csv
        snapshots, printing the com-opt and sens-opt endpoints
cdf     writes cdf_<mode>.csv for modes among
        {com-opt-cf, sens-opt-<est>, isac-<est>-t<val>}

Configuration comes from compiled-in defaults, overridden by an optional flat
`key = value` file (--config), overridden by CLI flags.  Floats are serialized
with their shortest round-trip representation and files are written atomically,
so identical configurations give byte-identical CSVs regardless of thread
count (cap workers with OISAC_THREADS).  Exit codes: 0 success, 2
configuration error, 3 numerical/convergence error.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from .channel import (
    ConfigError,
    ConvergenceError,
    NumericalError,
    QuantizedChannel,
    SystemParams,
    build_quantized_channel,
)
from .cost import COST_KINDS, CostVector, MonteCarloConfig, cost_vector
from .estimators import QuadratureConfig, default_quadrature
from .optimizer import (
    RegionPoint,
    RegionSweepError,
    cd_region,
    dual_power_search,
    cdf_of,
    point_mass,
    sens_opt_endpoint,
)

_PARAM_FIELDS: dict[str, type] = {
    "h_c": float,
    "sigma_c2": float,
    "sigma_s2": float,
    "rho": float,
    "lam": float,
    "n_s": int,
    "power_budget": float,
    "q": float,
    "x_max": float,
    "noise_span": float,
}
_MC_FIELDS: dict[str, type] = {
    "n_r": int,
    "n_y": int,
    "seed": int,
    "clamp_eps": float,
}

COST_HEADER = ["x", "cost", "variance", "bias_sq", "estimator", "n_r", "n_y", "seed"]
REGION_HEADER = ["t", "s_star", "distortion", "rate_bits", "mean_power", "solver", "estimator"]
DIST_HEADER = ["x", "p", "mode_label"]
CDF_HEADER = ["x", "cdf"]


@dataclass
class RunConfig:
    """Fully resolved run settings for one CLI invocation."""

    params: SystemParams
    mc: MonteCarloConfig
    quad: QuadratureConfig
    solver: str
    estimator: str
    t_set: np.ndarray
    out_dir: str
    overwrite: bool
    figures: bool
    snapshot_ts: tuple[float, ...] = ()
    endpoints_only: bool = False


def fmt(value) -> str:
    """Shortest round-trip serialization: ints plain, floats via repr."""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return repr(float(value))


def load_config_file(path: str) -> tuple[dict, dict]:
    """Parse a flat `key = value` file into (params, mc) override dicts."""
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")
    params_kv: dict = {}
    mc_kv: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if key == "lambda":
                key = "lam"
            if key not in _PARAM_FIELDS and key not in _MC_FIELDS:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            try:
                if key in _PARAM_FIELDS:
                    params_kv[key] = _PARAM_FIELDS[key](value)
                else:
                    mc_kv[key] = _MC_FIELDS[key](value)
            except ValueError as exc:
                raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from exc
    return params_kv, mc_kv


def parse_t_spec(spec: str) -> np.ndarray:
    """Parse --t: 'default', a comma list, or 'logspace:<lo>:<hi>:<n>'."""
    spec = spec.strip()
    if spec == "default":
        values = np.concatenate(([0.0], np.logspace(-2.0, 6.0, 40)))
    elif spec.startswith("logspace:"):
        parts = spec.split(":")
        if len(parts) != 4:
            raise ConfigError(f"--t range must be logspace:<lo>:<hi>:<n>, got {spec!r}")
        try:
            lo, hi, n = float(parts[1]), float(parts[2]), int(parts[3])
        except ValueError as exc:
            raise ConfigError(f"bad --t range {spec!r}: {exc}") from exc
        if not (0 < lo < hi) or n < 1:
            raise ConfigError(f"--t range needs 0 < lo < hi and n >= 1, got {spec!r}")
        values = np.logspace(math.log10(lo), math.log10(hi), n)
    else:
        try:
            values = np.array([float(part) for part in spec.split(",") if part.strip() != ""])
        except ValueError as exc:
            raise ConfigError(f"bad --t list {spec!r}: {exc}") from exc
    if values.size == 0:
        raise ConfigError("--t resolved to an empty sweep")
    if np.any(~np.isfinite(values)) or np.any(values < 0):
        raise ConfigError("t values must be finite and nonnegative")
    return np.unique(values)


def write_csv(path: str, header: list[str], rows: list[list], overwrite: bool) -> None:
    """Atomic CSV write (temp file + rename) with clobber protection."""
    if os.path.exists(path) and not overwrite:
        raise ConfigError(f"{path} exists; pass --overwrite to replace it")
    directory = os.path.dirname(path) or "."
    try:
        fd, tmp = tempfile.mkstemp(prefix=".oisac_", suffix=".tmp", dir=directory)
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {directory} ({exc})") from exc
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _ensure_out_dir(out_dir: str) -> None:
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out_dir!r}: {exc}") from exc
    if not os.path.isdir(out_dir):
        raise ConfigError(f"output path is not a directory: {out_dir!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="flat key = value config file")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--seed", type=int, help="Monte Carlo master seed")
    common.add_argument("--lambda", dest="lam", type=float, help="exponential prior rate")
    common.add_argument("--ns", dest="n_s", type=int, help="sensing sample count")
    common.add_argument(
        "--estimator", choices=list(COST_KINDS), help="cost estimator (default bcrb)"
    )
    common.add_argument("--solver", choices=["baa", "cfa"], help="region solver (default baa)")
    common.add_argument(
        "--t", metavar="LIST|RANGE",
        help="distortion duals: comma list, logspace:<lo>:<hi>:<n>, or 'default'",
    )
    common.add_argument("--nr", dest="n_r", type=int, help="prior draws per grid point")
    common.add_argument("--ny", dest="n_y", type=int, help="observation draws per prior draw")
    common.add_argument("--overwrite", action="store_true", help="replace existing outputs")
    common.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    parser = argparse.ArgumentParser(
        prog="oisac",
        description="Capacity-distortion trade-off tools for an IM/DD optical ISAC link",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("cost", parents=[common], help="sensing-cost curve over the input grid")
    region = sub.add_parser("region", parents=[common], help="capacity-distortion region sweep")
    region.add_argument(
        "--snapshot-t", metavar="LIST",
        help="comma list of t values whose distributions are saved as dist_t<t>.csv",
    )
    region.add_argument(
        "--endpoints", action="store_true",
        help="print the com-opt and sens-opt endpoints and exit (no sweep)",
    )
    cdf = sub.add_parser("cdf", parents=[common], help="input CDFs for selected modes")
    cdf.add_argument(
        "modes", nargs="+", metavar="MODE",
        help="com-opt-cf | sens-opt-<est> | isac-<est>-t<val>",
    )
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    params_kv: dict = {}
    mc_kv: dict = {}
    if args.config:
        params_kv, mc_kv = load_config_file(args.config)
    if args.lam is not None:
        params_kv["lam"] = args.lam
    if args.n_s is not None:
        params_kv["n_s"] = args.n_s
    if args.seed is not None:
        mc_kv["seed"] = args.seed
    if args.n_r is not None:
        mc_kv["n_r"] = args.n_r
    if args.n_y is not None:
        mc_kv["n_y"] = args.n_y
    params = SystemParams(**params_kv)
    mc = MonteCarloConfig(**mc_kv)
    snapshot_ts: tuple[float, ...] = ()
    raw_snapshot = getattr(args, "snapshot_t", None)
    if raw_snapshot:
        try:
            snapshot_ts = tuple(float(part) for part in raw_snapshot.split(",") if part.strip())
        except ValueError as exc:
            raise ConfigError(f"bad --snapshot-t list {raw_snapshot!r}: {exc}") from exc
    out_dir = args.out
    _ensure_out_dir(out_dir)
    return RunConfig(
        params=params,
        mc=mc,
        quad=default_quadrature(params),
        solver=args.solver or "baa",
        estimator=args.estimator or "bcrb",
        t_set=parse_t_spec(args.t or "default"),
        out_dir=out_dir,
        overwrite=bool(args.overwrite),
        figures=not args.no_figures,
        snapshot_ts=snapshot_ts,
        endpoints_only=bool(getattr(args, "endpoints", False)),
    )


def _cost_vec(cfg: RunConfig, estimator: str) -> CostVector:
    if estimator == "bcrb":
        return cost_vector("bcrb", cfg.params, quad=cfg.quad)
    return cost_vector(estimator, cfg.params, cfg.mc, cfg.quad)


def cmd_cost(cfg: RunConfig) -> int:
    vec = _cost_vec(cfg, cfg.estimator)
    rows = [
        [
            fmt(vec.x_grid[k]), fmt(vec.values[k]), fmt(vec.variance[k]),
            fmt(vec.bias_sq[k]), vec.kind, fmt(vec.n_r), fmt(vec.n_y), fmt(vec.seed),
        ]
        for k in range(vec.x_grid.size)
    ]
    path = os.path.join(cfg.out_dir, f"cost_{cfg.estimator}_{fmt(cfg.params.lam)}.csv")
    write_csv(path, COST_HEADER, rows, cfg.overwrite)
    print(f"wrote {path}")
    if cfg.figures:
        from . import report

        report.save_cost_figure(vec, path[:-4] + ".png", cfg.params.lam)
    return 0


def _print_endpoints(
    cfg: RunConfig, com: RegionPoint, x_star: float, d_min: float
) -> None:
    print(
        f"com-opt: rate = {fmt(com.rate_bits)} bits at mean power {fmt(com.mean_power)} W"
        f" (s_star = {fmt(com.s_star)})"
    )
    print(f"sens-opt: x_star = {fmt(x_star)}, D_min = {fmt(d_min)}")


def _write_snapshot(cfg: RunConfig, point: RegionPoint) -> str:
    label = f"{cfg.solver}-{cfg.estimator}-t{fmt(point.t)}"
    dist = point.distribution
    rows = [[fmt(x), fmt(p), label] for x, p in zip(dist.x_grid, dist.p)]
    path = os.path.join(cfg.out_dir, f"dist_t{fmt(point.t)}.csv")
    write_csv(path, DIST_HEADER, rows, cfg.overwrite)
    print(f"wrote {path}")
    return path


def cmd_region(cfg: RunConfig) -> int:
    channel = build_quantized_channel(cfg.params)
    vec = _cost_vec(cfg, cfg.estimator)
    x_star, d_min = sens_opt_endpoint(vec, cfg.params.power_budget)

    def search(tv: float) -> RegionPoint:
        return dual_power_search(tv, cfg.solver, channel, vec, cfg.params)

    if cfg.endpoints_only:
        _print_endpoints(cfg, search(0.0), x_star, d_min)
        return 0

    path = os.path.join(cfg.out_dir, f"region_{cfg.solver}_{cfg.estimator}.csv")

    def region_row(point: RegionPoint) -> list:
        return [
            fmt(point.t), fmt(point.s_star), fmt(point.distortion),
            fmt(point.rate_bits), fmt(point.mean_power), cfg.solver, cfg.estimator,
        ]

    try:
        points = cd_region(cfg.t_set, cfg.solver, vec, channel, cfg.params)
    except RegionSweepError as exc:
        rows = [region_row(p) + ["ok"] for p in exc.points]
        rows += [
            [fmt(tv), "nan", "nan", "nan", "nan", cfg.solver, cfg.estimator, "failed"]
            for tv, _ in exc.failures
        ]
        write_csv(path, REGION_HEADER + ["status"], rows, cfg.overwrite)
        for tv, err in exc.failures:
            print(f"power search failed at t = {fmt(tv)}: {err}", file=sys.stderr)
        print(f"wrote partial {path}", file=sys.stderr)
        return 3

    write_csv(path, REGION_HEADER, [region_row(p) for p in points], cfg.overwrite)
    print(f"wrote {path}")

    com = next((p for p in points if p.t == 0.0), None) or search(0.0)
    _print_endpoints(cfg, com, x_star, d_min)

    for tv in cfg.snapshot_ts:
        point = next((p for p in points if p.t == tv), None) or search(tv)
        _write_snapshot(cfg, point)

    if cfg.figures:
        from . import report

        report.save_region_figure(points, path[:-4] + ".png", cfg.solver, cfg.estimator)
    return 0


def _parse_mode(label: str) -> tuple[str, str | None, float | None]:
    if label == "com-opt-cf":
        return "com", None, None
    if label.startswith("sens-opt-"):
        est = label[len("sens-opt-"):]
        if est in COST_KINDS:
            return "sens", est, None
    elif label.startswith("isac-"):
        body = label[len("isac-"):]
        est, sep, t_part = body.rpartition("-t")
        if sep and est in COST_KINDS:
            try:
                return "isac", est, float(t_part)
            except ValueError:
                pass
    raise ConfigError(f"unknown cdf mode {label!r}")


def cmd_cdf(cfg: RunConfig, modes: list[str]) -> int:
    parsed = [(label,) + _parse_mode(label) for label in modes]
    channel = build_quantized_channel(cfg.params)
    curves = []
    for label, kind, est, tv in parsed:
        if kind == "com":
            zero_cost = np.zeros(channel.x_grid.size)
            point = dual_power_search(0.0, "cfa", channel, zero_cost, cfg.params)
            dist = point.distribution
        elif kind == "sens":
            vec = _cost_vec(cfg, est)
            x_star, _ = sens_opt_endpoint(vec, cfg.params.power_budget)
            dist = point_mass(channel.x_grid, x_star)
        else:
            vec = _cost_vec(cfg, est)
            point = dual_power_search(tv, cfg.solver, channel, vec, cfg.params)
            dist = point.distribution
        cdf = cdf_of(dist)
        rows = [[fmt(x), fmt(v)] for x, v in zip(dist.x_grid, cdf)]
        path = os.path.join(cfg.out_dir, f"cdf_{label}.csv")
        write_csv(path, CDF_HEADER, rows, cfg.overwrite)
        print(f"wrote {path}")
        curves.append((label, list(dist.x_grid), list(cdf)))
    if cfg.figures:
        from . import report

        report.save_cdf_figure(curves, os.path.join(cfg.out_dir, "cdf.png"))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        cfg = resolve_config(args)
        if args.command == "cost":
            return cmd_cost(cfg)
        if args.command == "region":
            return cmd_region(cfg)
        return cmd_cdf(cfg, args.modes)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, NumericalError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
