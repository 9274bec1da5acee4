"""Command-line entry point.

Exit status: 0 when every bound report passes, 1 when any fails, 2 on bad
input.  Output is a JSON document ``{header, reports, records}`` or CSV with
``#``-prefixed header lines.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .boolean_analysis import (
    average_sensitivity_exact,
    noise_sensitivity_exact,
    restrict_to_cube,
    walsh_hadamard,
)
from .experiments import (
    REPORT_CSV_COLUMNS,
    BoundReport,
    ExperimentConfig,
    derive_seed,
    gotsman_linial_sweep,
    random_polynomial,
    upper_bound_report,
    verify_appendix_energy,
    verify_transfer,
    verify_transfer_as,
)
from .polynomial import (
    IdenticallyZeroRestriction,
    PolynomialFormatError,
    SparsePolynomial,
    count_circle_roots,
    harmonic_decompose,
    parse_polynomial_json,
    restrict_to_great_circle,
    rotate_polynomial,
)
from .sphere import (
    Estimate,
    build_heat_distribution,
    haar_rotation,
    make_rng,
    mean_angle_bounds,
    sample_heat_angle,
    sample_tangent,
    sample_uniform_sphere,
    sign_evaluator,
    simulate_jacobi_angle,
    spherical_sensitivity_exact,
    spherical_sensitivity_mc,
)

SEED_ENV = "HEATCUBE_SEED"

RECORD_COLUMNS = {
    "ns-exact": ("n", "eps", "mode", "ns"),
    "as-exact": ("n", "mode", "as"),
    "ss": ("n", "d", "t", "ss_exact_raw", "ss_mc_sign_mean", "ss_mc_sign_se"),
    "rotate": ("exponents", "coeff"),
    "heat-sample": ("method", "n", "t", "samples", "mean_r", "mean_r2", "crude_bound", "chi_bound"),
    "roots": ("trial", "roots", "max_allowed"),
}


class InputError(Exception):
    """Bad user input; reported with exit status 2."""


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _default_seed() -> int:
    value = os.environ.get(SEED_ENV, "0")
    try:
        return int(value)
    except ValueError:
        return 0


def _load_polynomial(args) -> SparsePolynomial:
    if args.poly:
        try:
            text = Path(args.poly).read_text()
        except OSError as exc:
            raise InputError(f"cannot read polynomial file: {exc}") from exc
        try:
            p = parse_polynomial_json(text)
        except PolynomialFormatError as exc:
            raise InputError(f"{args.poly}: {exc}") from exc
        if args.n is not None and args.n != p.n:
            raise InputError(f"--n {args.n} does not match the polynomial's {p.n} variables")
        return p
    if args.n is None or args.d is None:
        raise InputError("give --poly FILE, or --n and --d for a random polynomial")
    return random_polynomial(args.n, args.d, derive_seed(args.seed, 3))


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InputError(f"precondition violated: {message}")


# commands -------------------------------------------------------------------


def cmd_ns_exact(args, config):
    p = _load_polynomial(args)
    _require(p.n <= 24, "n <= 24")
    for eps in args.eps:
        _require(0 <= eps <= 0.5, "0 <= eps <= 1/2")
    spec = walsh_hadamard(restrict_to_cube(p, threshold=not args.raw))
    mode = "raw" if args.raw else "sign"
    return [], [{"n": p.n, "eps": e, "mode": mode, "ns": noise_sensitivity_exact(spec, e)} for e in args.eps]


def cmd_as_exact(args, config):
    p = _load_polynomial(args)
    _require(p.n <= 24, "n <= 24")
    spec = walsh_hadamard(restrict_to_cube(p, threshold=not args.raw))
    return [], [{"n": p.n, "mode": "raw" if args.raw else "sign", "as": average_sensitivity_exact(spec)}]


def cmd_ss(args, config):
    p = _load_polynomial(args)
    _require(p.n >= 3, "n >= 3")
    for t in args.t:
        _require(t >= 0, "t >= 0")
    dec = harmonic_decompose(p)
    reports, records = [], []
    for j, t in enumerate(args.t):
        est = spherical_sensitivity_mc(
            sign_evaluator(p), p.n, t, args.trials, derive_seed(args.seed, 1, j)
        )
        records.append(
            {
                "n": p.n,
                "d": p.degree,
                "t": t,
                "ss_exact_raw": spherical_sensitivity_exact(dec, t),
                "ss_mc_sign_mean": est.mean,
                "ss_mc_sign_se": est.std_error,
            }
        )
        bound = p.degree / math.pi * math.sqrt(2 * p.n * t)
        params = {"n": p.n, "d": p.degree, "t": t, "trials": args.trials}
        reports.append(upper_bound_report("gl_ss", est, bound, params, config))
    return reports, records


def cmd_rotate(args, config):
    p = _load_polynomial(args)
    _require(p.n >= 2, "n >= 2")
    R = haar_rotation(p.n, make_rng(args.seed))
    q = rotate_polynomial(p, R)
    return [], q.to_json_terms()


def cmd_verify_transfer(args, config):
    p = _load_polynomial(args)
    _require(3 <= p.n <= 14, "3 <= n <= 14")
    for eps in args.eps:
        _require(0 <= eps < 0.5, "0 <= eps < 1/2")
    reports = [
        verify_transfer(p, eps, args.rotations, args.seed, args.mode, config) for eps in args.eps
    ]
    return reports, []


def cmd_verify_transfer_as(args, config):
    p = _load_polynomial(args)
    _require(3 <= p.n <= 14, "3 <= n <= 14")
    for a in args.alpha:
        _require(a > 0, "alpha > 0")
    reports = [
        verify_transfer_as(p, a, args.rotations, args.seed, args.mode, config) for a in args.alpha
    ]
    return reports, []


def cmd_verify_appendix(args, config):
    _require(args.n is not None and 3 <= args.n <= 12, "3 <= n <= 12")
    _require(0 <= args.ell <= 4, "0 <= ell <= 4")
    try:
        report = verify_appendix_energy(args.n, args.ell, args.k, args.rotations, args.seed, config)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    return [report], []


def cmd_gl_sweep(args, config):
    for n in args.n:
        _require(3 <= n <= 14, "3 <= n <= 14")
    for d in args.d:
        _require(d >= 1, "d >= 1")
    for eps in args.eps:
        _require(0 <= eps <= 0.5, "0 <= eps <= 1/2")
    reports = gotsman_linial_sweep(
        args.d, args.n, args.eps, args.rotations, args.seed, args.t, args.polys, config
    )
    return reports, []


def cmd_heat_sample(args, config):
    _require(args.n is not None and args.n >= 3, "n >= 3")
    methods = ["series", "sde"] if args.method == "both" else [args.method]
    reports, records, dump = [], [], []
    for j, t in enumerate(args.t):
        _require(t > 0, "t > 0")
        crude, chi = mean_angle_bounds(args.n, t)
        for method in methods:
            rng = make_rng(derive_seed(args.seed, 2, j), 0 if method == "series" else 1)
            if method == "series":
                r = sample_heat_angle(build_heat_distribution(args.n, t), rng, args.samples)
            else:
                r = simulate_jacobi_angle(args.n, t, rng=rng, size=args.samples)
            params = {"n": args.n, "t": t, "method": method, "samples": args.samples}
            est_r2 = Estimate.from_samples(r**2, args.seed)
            est_r = Estimate.from_samples(r, args.seed)
            reports.append(upper_bound_report("heat_second_moment", est_r2, 2 * (args.n - 1) * t, params, config))
            reports.append(upper_bound_report("heat_mean_angle", est_r, chi, params, config))
            records.append(
                {
                    "method": method,
                    "n": args.n,
                    "t": t,
                    "samples": args.samples,
                    "mean_r": est_r.mean,
                    "mean_r2": est_r2.mean,
                    "crude_bound": crude,
                    "chi_bound": chi,
                }
            )
            if args.dump:
                dump.extend((method, args.n, t, i, repr(float(x))) for i, x in enumerate(r))
    if args.dump:
        with open(args.dump, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "n", "t", "index", "r"])
            writer.writerows(dump)
    return reports, records


def cmd_roots(args, config):
    p = _load_polynomial(args)
    _require(p.n >= 2, "n >= 2")
    rng = make_rng(args.seed)
    records, counts = [], []
    for i in range(args.trials):
        u = sample_uniform_sphere(p.n, rng)
        w = sample_tangent(u, rng)
        try:
            c = count_circle_roots(restrict_to_great_circle(p, u, w))
        except IdenticallyZeroRestriction:
            c = -1
        counts.append(c)
        records.append({"trial": i, "roots": c, "max_allowed": 2 * p.degree})
    valid = [c for c in counts if c >= 0] or [0]
    est = Estimate(float(max(valid)), 0.0, args.trials, args.seed)
    params = {
        "n": p.n,
        "d": p.degree,
        "trials": args.trials,
        "mean_roots": float(np.mean(valid)),
        "identically_zero": counts.count(-1),
    }
    return [upper_bound_report("great_circle_roots_max", est, 2 * p.degree, params, config)], records


COMMANDS = {
    "ns-exact": cmd_ns_exact,
    "as-exact": cmd_as_exact,
    "ss": cmd_ss,
    "rotate": cmd_rotate,
    "verify-transfer": cmd_verify_transfer,
    "verify-transfer-as": cmd_verify_transfer_as,
    "verify-appendix": cmd_verify_appendix,
    "gl-sweep": cmd_gl_sweep,
    "heat-sample": cmd_heat_sample,
    "roots": cmd_roots,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heatcube", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=_default_seed(), help=f"default from ${SEED_ENV}")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--workers", type=int, default=None)
    poly = argparse.ArgumentParser(add_help=False)
    poly.add_argument("--poly", help="polynomial JSON file")
    poly.add_argument("--n", type=int, help="variables (random polynomial if --poly is absent)")
    poly.add_argument("--d", type=int, help="degree of the random polynomial")

    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("ns-exact", parents=[common, poly])
    p.add_argument("--eps", type=_float_list, required=True)
    p.add_argument("--raw", action="store_true", help="skip thresholding")
    p = sub.add_parser("as-exact", parents=[common, poly])
    p.add_argument("--raw", action="store_true")
    p = sub.add_parser("ss", parents=[common, poly])
    p.add_argument("--t", type=_float_list, required=True)
    p.add_argument("--trials", type=int, default=20_000)
    sub.add_parser("rotate", parents=[common, poly])
    for name, flag in (("verify-transfer", "--eps"), ("verify-transfer-as", "--alpha")):
        p = sub.add_parser(name, parents=[common, poly])
        p.add_argument(flag, type=_float_list, required=True)
        p.add_argument("--rotations", type=int, default=200)
        p.add_argument("--mode", choices=("raw", "sign"), default="raw")
        p.add_argument("--ss-trials", type=int, default=20_000)
    p = sub.add_parser("verify-appendix", parents=[common])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ell", type=int, required=True)
    p.add_argument("--k", required=True, help="0/1 string, character i = coordinate i")
    p.add_argument("--rotations", type=int, default=10_000)
    p = sub.add_parser("gl-sweep", parents=[common])
    p.add_argument("--d", type=_int_list, required=True)
    p.add_argument("--n", type=_int_list, required=True)
    p.add_argument("--eps", type=_float_list, required=True)
    p.add_argument("--t", type=_float_list, default=[0.001, 0.01])
    p.add_argument("--rotations", type=int, default=200)
    p.add_argument("--polys", type=int, default=1, help="random polynomials per (d, n) cell")
    p.add_argument("--ss-trials", type=int, default=20_000)
    p = sub.add_parser("heat-sample", parents=[common])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=_float_list, required=True)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--method", choices=("series", "sde", "both"), default="series")
    p.add_argument("--dump", help="write every sample as tidy CSV to this path")
    p = sub.add_parser("roots", parents=[common, poly])
    p.add_argument("--trials", type=int, default=1000)
    return parser


def _header(args) -> dict:
    params = {k: v for k, v in sorted(vars(args).items()) if k != "command"}
    return {"command": args.command, "version": __version__, "seed": args.seed, "params": params}


def render(header: dict, reports: list[BoundReport], records: list[dict], fmt: str, command: str) -> str:
    if fmt == "json":
        doc = {"header": header, "reports": [r.to_dict() for r in reports], "records": records}
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    buf.write(f"# heatcube {__version__}\n")
    buf.write("# header: " + json.dumps(header, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    if reports:
        writer.writerow(REPORT_CSV_COLUMNS)
        for r in reports:
            writer.writerow(r.csv_row())
    if records:
        if reports:
            buf.write("# records\n")
        columns = RECORD_COLUMNS[command]
        writer.writerow(columns)
        for rec in records:
            writer.writerow([json.dumps(rec[c]) if isinstance(rec[c], list) else _cell(rec[c]) for c in columns])
    return buf.getvalue()


def _cell(value):
    return repr(value) if isinstance(value, float) else value


def replay_argv(header: dict) -> list[str]:
    """Command line that reproduces a run from its output header."""
    argv = [header["command"]]
    for key, value in header["params"].items():
        flag = "--" + key.replace("_", "-")
        if value is None or value is False:
            continue
        if value is True:
            argv.append(flag)
        elif isinstance(value, list):
            argv += [flag, ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)]
        else:
            argv += [flag, str(value)]
    return argv


def run(argv: list[str] | None = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    config = ExperimentConfig(
        workers=args.workers, ss_trials=getattr(args, "ss_trials", ExperimentConfig.ss_trials)
    )
    try:
        reports, records = COMMANDS[args.command](args, config)
    except InputError as exc:
        print(f"heatcube {args.command}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"heatcube {args.command}: precondition violated: {exc}", file=sys.stderr)
        return 2
    stdout.write(render(_header(args), reports, records, args.format, args.command))
    return 0 if all(r.passed for r in reports) else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
