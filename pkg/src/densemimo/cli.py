"""Command-line front end: sweeps, figure data, and validation reports.

Every subcommand emits data (CSV or JSON), never plots. Outputs are
byte-stable: fixed column orders, full-precision repr floats, sorted
JSON keys, and the simulator's worker-count-invariant estimators behind
`validate`. Exit codes: 0 success, 2 usage error, 3 domain or model
error, 4 validation-report failure.
"""

import argparse
import json
import math
import sys

import numpy as np

from .analytics import (
    MuCoefficients,
    NetworkParams,
    area_se,
    mu_coefficient,
    nmse_bound,
    optimal_zeta_exhaustive,
    crossover_antenna_ratio,
    rate_asymptotic,
    se_lower_bound,
)
from .pathloss import load_model, make_dual_slope_default
from .simulator import config_for_density, estimate_mu, estimate_nmse

__all__ = ["main"]

_SCHEMES = ("MR", "ZF")


class UsageError(ValueError):
    """Bad command-line input; maps to exit code 2."""


def _parse_grid(text):
    """Sweep grid: comma-separated values or min:max:points:lin|log."""
    text = text.strip()
    if not text:
        raise UsageError("empty sweep grid")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 4 or parts[3] not in ("lin", "log"):
            raise UsageError(
                f"range grid must be min:max:points:lin|log, got {text!r}"
            )
        try:
            lo, hi = float(parts[0]), float(parts[1])
            points = int(parts[2])
        except ValueError:
            raise UsageError(f"malformed range grid {text!r}") from None
        if points < 1:
            raise UsageError("grid needs at least 1 point")
        if points > 1 and not (hi > lo):
            raise UsageError("grid range must be increasing")
        if parts[3] == "log":
            if lo <= 0.0:
                raise UsageError("log grid needs positive endpoints")
            values = np.geomspace(lo, hi, points)
        else:
            values = np.linspace(lo, hi, points)
        grid = [float(v) for v in values]
    else:
        try:
            grid = [float(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise UsageError(f"malformed grid {text!r}") from None
    if not grid:
        raise UsageError("empty sweep grid")
    if any(not math.isfinite(v) for v in grid):
        raise UsageError("grid values must be finite")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise UsageError("grid must be strictly increasing")
    return grid


def _parse_floats(text, flag):
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"malformed {flag} list {text!r}") from None
    if not values:
        raise UsageError(f"empty {flag} list")
    return values


def _parse_schemes(text):
    schemes = tuple(s.strip() for s in text.split(",") if s.strip())
    if not schemes:
        raise UsageError("empty scheme list")
    for s in schemes:
        if s not in _SCHEMES:
            raise UsageError(f"unknown scheme {s!r}, pick from {_SCHEMES}")
    return schemes


def _load(args):
    if args.model is None:
        return make_dual_slope_default()
    return load_model(args.model)


def _emit(columns, rows, args):
    if args.format == "csv":
        lines = [",".join(columns)]
        lines.extend(",".join(str(v) for v in row) for row in rows)
        text = "\n".join(lines) + "\n"
    else:
        payload = {"columns": list(columns), "rows": [list(r) for r in rows]}
        text = json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _base_params(args, lambda_bs_km2, zeta, m=None):
    return NetworkParams(
        lambda_bs_km2=lambda_bs_km2,
        m=m,
        k=args.k,
        zeta=zeta,
        tau_c=args.tau_c,
        snr0_db=args.snr_db,
    )


def cmd_mu(args):
    model = _load(args)
    grid = _parse_grid(args.lam)
    rows = [
        (lam, mu_coefficient(model, lam, 1), mu_coefficient(model, lam, 2))
        for lam in grid
    ]
    _emit(("lambda", "mu1", "mu2"), rows, args)
    return 0


def cmd_nmse(args):
    model = _load(args)
    grid = _parse_grid(args.lam)
    zetas = _parse_floats(args.zeta, "--zeta")
    rows = []
    for lam in grid:
        for zeta in sorted(zetas):
            params = _base_params(args, lam, zeta)
            rows.append((lam, zeta, nmse_bound(model, params)))
    _emit(("lambda", "zeta", "nmse_bound"), rows, args)
    return 0


def cmd_crossover(args):
    model = _load(args)
    grid = _parse_grid(args.lam)
    zetas = _parse_floats(args.zeta, "--zeta")
    schemes = _parse_schemes(args.schemes)
    rows = []
    for lam in grid:
        for scheme in schemes:
            for zeta in sorted(zetas):
                params = _base_params(args, lam, zeta)
                rows.append(
                    (lam, scheme, zeta, crossover_antenna_ratio(model, params, scheme))
                )
    _emit(("lambda", "scheme", "zeta", "m_over_k_crossover"), rows, args)
    return 0


def cmd_se(args):
    model = _load(args)
    grid = _parse_grid(args.lam)
    zetas = _parse_floats(args.zeta, "--zeta")
    if len(zetas) != 1:
        raise UsageError("se takes a single --zeta value")
    mks = _parse_floats(args.mk, "--mk")
    schemes = _parse_schemes(args.schemes)
    # Grid for --optimize-zeta; resolution matches the reported digits.
    zeta_grid = None
    rows = []
    for lam in grid:
        for scheme in schemes:
            for mk in mks:
                m = int(round(mk * args.k))
                params = _base_params(args, lam, zetas[0], m=m)
                if args.optimize_zeta:
                    if zeta_grid is None:
                        hi = args.tau_c / args.k
                        steps = int(math.floor((hi - 1.0) / 0.05 + 1e-9))
                        zeta_grid = np.linspace(1.0, 1.0 + 0.05 * steps, steps + 1)
                        zeta_grid[-1] = min(float(zeta_grid[-1]), hi)
                    zeta_used = optimal_zeta_exhaustive(model, params, scheme, zeta_grid)
                    params = params.with_zeta(zeta_used)
                else:
                    zeta_used = zetas[0]
                se = se_lower_bound(model, params, scheme)
                r_inf = rate_asymptotic(model, params)
                rows.append((lam, scheme, mk, zeta_used, se, r_inf))
    _emit(("lambda", "scheme", "m_over_k", "zeta_used", "se", "r_inf"), rows, args)
    return 0


def cmd_ase(args):
    model = _load(args)
    grid = _parse_grid(args.lam)
    zetas = _parse_floats(args.zeta, "--zeta")
    if len(zetas) != 1:
        raise UsageError("ase takes a single --zeta value")
    mks = _parse_floats(args.mk, "--mk")
    if len(mks) != 1:
        raise UsageError("ase takes a single --mk value")
    schemes = _parse_schemes(args.schemes)
    m = int(round(mks[0] * args.k))
    rows = []
    for lam in grid:
        for scheme in schemes:
            params = _base_params(args, lam, zetas[0], m=m)
            rows.append((lam, scheme, area_se(model, params, scheme)))
    _emit(("lambda", "scheme", "ase"), rows, args)
    return 0


def cmd_validate(args):
    """Simulator-vs-analytics report; any failed check exits 4.

    The model check validates the path-loss file (continuity of the
    slope constants included); when it fails the numeric checks cannot
    run and the report carries the single failure. Numeric checks are
    99% CI containment of the closed-form coefficients and the
    one-sided estimation-error comparison, per density.
    """
    checks = []
    model = None
    if args.model is None:
        model_name = "builtin-dual-slope"
        model = make_dual_slope_default()
        checks.append({"name": "model", "passed": True, "detail": model_name})
    else:
        model_name = args.model
        try:
            model = load_model(args.model)
            checks.append({"name": "model", "passed": True, "detail": model_name})
        except (OSError, ValueError) as err:
            checks.append({"name": "model", "passed": False, "detail": str(err)})

    lambdas = _parse_floats(args.lam, "--lambda")
    if model is not None:
        for lam in lambdas:
            cfg = config_for_density(lam, trials=args.trials, master_seed=args.seed)
            stats = estimate_mu(model, lam, cfg)
            closed = MuCoefficients.from_model(model, lam)
            for name, hat, ci, ref in (
                ("mu1", stats.mu1_hat, stats.ci99("mu1"), closed.mu1),
                ("mu2", stats.mu2_hat, stats.ci99("mu2"), closed.mu2),
            ):
                checks.append(
                    {
                        "name": f"{name}@lambda={lam:g}",
                        "passed": bool(abs(hat - ref) < ci),
                        "estimate": hat,
                        "ci99": ci,
                        "closed_form": ref,
                    }
                )
            params = _base_params(args, lam, _parse_floats(args.zeta, "--zeta")[0])
            nstats = estimate_nmse(model, lam, params, cfg)
            bound = nmse_bound(model, params)
            checks.append(
                {
                    "name": f"nmse@lambda={lam:g}",
                    "passed": bool(nstats.nmse_hat <= bound + nstats.ci99("nmse")),
                    "estimate": nstats.nmse_hat,
                    "ci99": nstats.ci99("nmse"),
                    "bound": bound,
                }
            )

    report = {
        "model": model_name,
        "seed": args.seed,
        "trials": args.trials,
        "lambdas": lambdas,
        "checks": checks,
        "passed": all(c["passed"] for c in checks),
    }
    text = json.dumps(report, sort_keys=True, separators=(",", ":")) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if report["passed"] else 4


def _add_common(parser, lam_default):
    parser.add_argument("--model", default=None, help="path-loss model JSON file")
    parser.add_argument(
        "--lambda",
        dest="lam",
        default=lam_default,
        help="density grid: list `1,10,100` or range `min:max:points:lin|log`",
    )
    parser.add_argument("--k", type=int, default=10, help="UEs per cell")
    parser.add_argument("--tau-c", type=float, default=200.0, help="coherence block length")
    parser.add_argument("--snr-db", type=float, default=5.0, help="per-UE SNR in dB")
    parser.add_argument("--out", default=None, help="output path (default stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="densemimo",
        description="Closed-form dense-network Massive MIMO sweeps and validation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mu", help="interference coefficients vs density")
    _add_common(p, "1:300:25:log")
    p.set_defaults(func=cmd_mu)

    p = sub.add_parser("nmse", help="estimation-error bound vs density")
    _add_common(p, "1:300:25:log")
    p.add_argument("--zeta", default="1,2,4", help="pilot reuse factors")
    p.set_defaults(func=cmd_nmse)

    p = sub.add_parser("crossover", help="antenna ratio where interference equals contamination")
    _add_common(p, "1:300:25:log")
    p.add_argument("--zeta", default="1,4", help="pilot reuse factors")
    p.add_argument("--schemes", default="MR,ZF")
    p.set_defaults(func=cmd_crossover)

    p = sub.add_parser("se", help="spectral efficiency and its large-antenna limit")
    _add_common(p, "1:300:25:log")
    p.add_argument("--zeta", default="1", help="pilot reuse factor")
    p.add_argument("--mk", default="10,50", help="antenna-UE ratios M/K")
    p.add_argument("--schemes", default="MR,ZF")
    p.add_argument("--optimize-zeta", action="store_true")
    p.set_defaults(func=cmd_se)

    p = sub.add_parser("ase", help="area spectral efficiency vs density")
    _add_common(p, "1:300:25:log")
    p.add_argument("--zeta", default="1", help="pilot reuse factor")
    p.add_argument("--mk", default="10", help="antenna-UE ratio M/K")
    p.add_argument("--schemes", default="MR,ZF")
    p.set_defaults(func=cmd_ase)

    p = sub.add_parser("validate", help="Monte Carlo cross-check of the closed forms")
    _add_common(p, "1,10,30,100")
    p.add_argument("--zeta", default="2", help="pilot reuse factor for the error check")
    p.add_argument("--seed", type=int, default=20260822)
    p.add_argument("--trials", type=int, default=2000)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        # argparse exits 2 on usage problems and 0 on --help.
        return int(err.code or 0)
    try:
        return args.func(args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
