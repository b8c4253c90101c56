"""Command-line front end: tables, series/MC variance, sweeps, scale solving.

Every CSV emission starts with a ``#`` comment recording the full argument
vector and the resolved seed, followed by a header row; identical arguments
and seed produce byte-identical output.  JSON commands emit one object per
invocation.  Exit codes: 0 success, 2 argument errors, 3 unattainable or
unbracketable solve targets.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Sequence

from .mc import McConfig, depth_simulate, mc_output_variance
from .series import (
    DEFAULT_MAX_ORDER,
    LayerSpec,
    WishartSpec,
    convergence_bound,
    expected_trace_power,
    get_table,
    marginal_variance_series,
)
from .solve import (
    BracketError,
    SeriesValidityError,
    UnattainableTargetError,
    estimate_variance,
    solve_sigma,
    variance_sweep,
)
from .wick import OrderCapError

CSV_SCHEMA = [
    "m",
    "n",
    "sigma",
    "sigma2",
    "alpha",
    "gamma",
    "method",
    "k_used",
    "value",
    "std_error",
    "within_validity",
]


def _parse_int_list(text: str) -> list[int]:
    """Parse "2..9" (inclusive range) or "2,4,8" or a single integer."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise ValueError
            return list(range(lo_i, hi_i + 1))
        return [int(part) for part in text.split(",") if part]
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed integer list: {text!r}")


def _parse_float_list(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part]
        if not values:
            raise ValueError
        return values
    except ValueError:
        raise argparse.ArgumentTypeError(f"malformed float list: {text!r}")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(
    argv: Sequence[str], seed, header: Sequence[str], rows: Sequence[Sequence]
) -> str:
    lines = [f"# argv: {' '.join(argv)} | seed: {_fmt(seed) or '-'}"]
    lines.append(",".join(header))
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _resolve_seed(args: argparse.Namespace) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("WISHART_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise SystemExit(
                _usage_error(f"WISHART_SEED must be an integer, got {env!r}")
            )
    return 0


def _usage_error(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


def _schema_row(point, layer: LayerSpec) -> list:
    return [
        point.m,
        point.n,
        point.sigma,
        point.sigma**2,
        layer.alpha,
        layer.gamma,
        point.method,
        point.k_used,
        point.value,
        point.std_error,
        point.within_validity,
    ]


# --- subcommands -------------------------------------------------------------


def _cmd_moments(args, argv) -> int:
    table = get_table(args.k)
    if args.format == "json":
        _emit(json.dumps(table.to_json_dict(), indent=1) + "\n", args.out)
    else:
        header = [f"m^{b}" for b in range(1, args.k + 1)]
        rows = [[int(v) for v in row] for row in table.coeffs]
        _emit(_csv_text(argv, None, header, rows), args.out)
    return 0


def _cmd_eval(args, argv) -> int:
    spec = WishartSpec(m=args.m, n=args.n, sigma2=args.sigma2)
    value = expected_trace_power(spec, args.k)
    doc = {"k": args.k, "m": args.m, "n": args.n, "sigma2": args.sigma2, "value": value}
    _emit(json.dumps(doc, indent=1) + "\n", args.out)
    return 0


def _cmd_variance(args, argv) -> int:
    seed = _resolve_seed(args)
    layer = LayerSpec(alpha=args.alpha, gamma=args.gamma)
    spec = WishartSpec(m=args.m, n=args.n, sigma2=args.sigma2)
    sigma = math.sqrt(args.sigma2)
    bound = convergence_bound(args.m, args.n, args.alpha)
    if args.method == "series" and args.sigma2 >= bound:
        print(
            f"warning: sigma2={args.sigma2:.6g} is outside the series "
            f"validity bound {bound:.6g}; the estimate is unreliable",
            file=sys.stderr,
        )
    if args.method == "series":
        report = marginal_variance_series(
            spec, layer, max_order=args.kmax, policy=args.policy
        )
        doc = {
            "method": "series",
            "m": args.m,
            "n": args.n,
            "sigma2": args.sigma2,
            "alpha": args.alpha,
            "gamma": args.gamma,
            "validity_bound": bound,
            **report.to_dict(),
        }
        point_kwargs = dict(
            method="series",
            k_used=report.truncation_k,
            value=report.value,
            std_error=0.0,
            within_validity=report.within_validity,
        )
    else:
        cfg = McConfig(trials=args.trials, seed=seed)
        est = mc_output_variance(spec, layer, cfg)
        doc = {
            "method": "mc",
            "m": args.m,
            "n": args.n,
            "sigma2": args.sigma2,
            "alpha": args.alpha,
            "gamma": args.gamma,
            "seed": seed,
            "validity_bound": bound,
            **est.to_dict(),
        }
        point_kwargs = dict(
            method="mc",
            k_used=None,
            value=est.mean,
            std_error=est.std_error,
            within_validity=args.sigma2 < bound,
        )
    if args.format == "json":
        _emit(json.dumps(doc, indent=1) + "\n", args.out)
    else:
        row = [
            args.m,
            args.n,
            sigma,
            args.sigma2,
            args.alpha,
            args.gamma,
            point_kwargs["method"],
            point_kwargs["k_used"],
            point_kwargs["value"],
            point_kwargs["std_error"],
            point_kwargs["within_validity"],
        ]
        _emit(_csv_text(argv, seed, CSV_SCHEMA, [row]), args.out)
    return 0


def _cmd_validate(args, argv) -> int:
    seed = _resolve_seed(args)
    layer = LayerSpec(alpha=args.alpha, gamma=args.gamma)
    cfg = McConfig(trials=args.trials, seed=seed)
    rows = []
    for size in args.sizes:
        bound = convergence_bound(size, size, args.alpha)
        for s2 in args.sigma2_grid:
            sigma2 = s2 * bound if args.relative else s2
            sigma = math.sqrt(sigma2)
            ser = estimate_variance(
                size, size, sigma, layer, "series", cfg, args.kmax,
                override_validity=True,
            )
            mcp = estimate_variance(size, size, sigma, layer, "mc", cfg, args.kmax)
            rows.append(_schema_row(ser, layer))
            rows.append(_schema_row(mcp, layer))
            rows.append(
                [
                    size,
                    size,
                    sigma,
                    sigma2,
                    args.alpha,
                    args.gamma,
                    "diff",
                    ser.k_used,
                    ser.value - mcp.value,
                    mcp.std_error,
                    ser.within_validity,
                ]
            )
    _emit(_csv_text(argv, seed, CSV_SCHEMA, rows), args.out)
    return 0


def _cmd_sweep(args, argv) -> int:
    seed = _resolve_seed(args)
    layer = LayerSpec(alpha=args.alpha, gamma=args.gamma)
    cfg = McConfig(trials=args.trials, seed=seed)
    points = variance_sweep(
        dims=args.dims,
        sigma_grid=args.sigma_grid,
        scaling=args.scaling,
        layer=layer,
        method=args.method,
        cfg=cfg,
        max_order=args.kmax,
    )
    header = CSV_SCHEMA + ["sigma_scaled"]
    rows = [_schema_row(p, layer) + [p.sigma_scaled] for p in points]
    _emit(_csv_text(argv, seed, header, rows), args.out)
    return 0


def _cmd_solve(args, argv) -> int:
    seed = _resolve_seed(args)
    layer = LayerSpec(alpha=args.alpha, gamma=args.gamma)
    cfg = McConfig(trials=args.trials, seed=seed)
    sigma = solve_sigma(
        target=args.target,
        m=args.m,
        n=args.n,
        layer=layer,
        method=args.method,
        tol=args.tol,
        cfg=cfg,
        max_order=args.kmax,
        override_validity=args.override_validity,
    )
    achieved = estimate_variance(
        args.m, args.n, sigma, layer, args.method, cfg, args.kmax,
        override_validity=True,
    )
    doc = {
        "sigma": sigma,
        "sigma2": sigma * sigma,
        "target": args.target,
        "achieved": achieved.value,
        "m": args.m,
        "n": args.n,
        "alpha": args.alpha,
        "gamma": args.gamma,
        "method": args.method,
        "tol": args.tol,
        "seed": seed,
    }
    _emit(json.dumps(doc, indent=1) + "\n", args.out)
    return 0


def _cmd_depth(args, argv) -> int:
    seed = _resolve_seed(args)
    layer = LayerSpec(alpha=args.alpha, gamma=args.gamma)
    cfg = McConfig(
        trials=args.trials, seed=seed, x_samples_per_weight=args.x_samples
    )
    estimates = depth_simulate(
        width=args.width,
        layers=args.layers,
        sigma=args.sigma,
        layer=layer,
        activation=args.activation,
        cfg=cfg,
    )
    header = [
        "layer",
        "width",
        "sigma",
        "alpha",
        "gamma",
        "activation",
        "value",
        "std_error",
    ]
    rows = [
        [
            ell + 1,
            args.width,
            args.sigma,
            args.alpha,
            args.gamma,
            args.activation,
            est.mean,
            est.std_error,
        ]
        for ell, est in enumerate(estimates)
    ]
    _emit(_csv_text(argv, seed, header, rows), args.out)
    return 0


# --- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wishartvar",
        description=(
            "Exact Wishart trace-moment tables and initialization-variance "
            "analysis for norm-bounded linear layers."
        ),
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=0,
        help="threads for table enumeration (0 = all cores)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", help="print the coefficient table of order k")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_moments)

    p = sub.add_parser("eval", help="evaluate E[tr(S^k)] for given m, n, sigma2")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma2", type=float, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("variance", help="output-variance estimate (series or MC)")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--sigma2", type=float, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--method", choices=["series", "mc"], default="series")
    p.add_argument("--kmax", type=int, default=DEFAULT_MAX_ORDER)
    p.add_argument("--policy", choices=["optimal", "fixed"], default="optimal")
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--format", choices=["json", "csv"], default="json")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_variance)

    p = sub.add_parser("validate", help="series-vs-MC comparison table")
    p.add_argument("--sizes", type=_parse_int_list, required=True)
    p.add_argument("--sigma2-grid", type=_parse_float_list, required=True)
    p.add_argument(
        "--relative",
        action="store_true",
        help="interpret grid values as fractions of each size's validity bound",
    )
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--kmax", type=int, default=DEFAULT_MAX_ORDER)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("sweep", help="variance sweep over sizes and scale grid")
    p.add_argument("--dims", type=_parse_int_list, required=True)
    p.add_argument("--scaling", choices=["none", "n", "sqrt-n"], default="sqrt-n")
    p.add_argument("--sigma-grid", type=_parse_float_list, required=True)
    p.add_argument("--method", choices=["series", "mc"], default="mc")
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--kmax", type=int, default=DEFAULT_MAX_ORDER)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("solve", help="find sigma achieving a target variance")
    p.add_argument("--target", type=float, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=0.02)
    p.add_argument("--method", choices=["mc", "series"], default="mc")
    p.add_argument(
        "--override-validity",
        action="store_true",
        help="let the series method evaluate outside its validity bound",
    )
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--kmax", type=int, default=DEFAULT_MAX_ORDER)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("depth", help="per-layer variance through a deep stack")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--layers", type=int, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--activation", choices=["identity", "elu"], default="identity")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--x-samples", type=int, default=0)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_depth)

    return parser


def _apply_threads(threads: int) -> None:
    if threads > 0:
        import numba

        numba.set_num_threads(max(1, min(threads, numba.config.NUMBA_NUM_THREADS)))


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _apply_threads(args.threads)
        return args.func(args, argv)
    except (UnattainableTargetError, BracketError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OrderCapError, SeriesValidityError, ValueError) as exc:
        return _usage_error(str(exc))


if __name__ == "__main__":
    raise SystemExit(main())
