"""Command-line front end.

Exit codes: 0 success, 2 malformed input or usage, 3 numerical or domain
failure (including a failed ``verify``).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

import numpy as np

from . import bounds, chi, sampling, scan, schmidt, transforms
from .errors import CobosonError, InvalidInput
from .formats import fmt, grid_to_csv, meta_lines, to_csv, to_json
from .verify import run_suite

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN = 0, 2, 3


def _version() -> str:
    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def _default_seed() -> int:
    raw = os.environ.get("COBOSON_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InvalidInput(f"COBOSON_SEED is not an integer: {raw!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _range(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}")
    return lo, hi


def _add_distribution(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--lambdas", help="comma-separated coefficients")
    g.add_argument("--file", type=Path, help="coefficient file (one per line, '#' comments)")
    g.add_argument("--uniform", type=int, metavar="L", help="uniform distribution on L coefficients")
    g.add_argument("--peaked", type=float, metavar="P", help="peaked distribution of purity P (needs --s)")
    p.add_argument("--renormalize", action="store_true", help="rescale input to unit sum")


def _distribution(args) -> schmidt.SchmidtDistribution | None:
    if getattr(args, "lambdas", None) is not None:
        raw = schmidt.parse_coefficients(args.lambdas)
    elif getattr(args, "file", None) is not None:
        try:
            raw = schmidt.parse_coefficients(args.file.read_text())
        except OSError as exc:
            raise InvalidInput(f"cannot read {args.file}: {exc.strerror}") from None
    elif getattr(args, "uniform", None) is not None:
        if args.uniform < 1:
            raise InvalidInput("--uniform needs L >= 1")
        return schmidt.make_distribution(np.full(args.uniform, 1.0 / args.uniform), renormalize=True)
    elif getattr(args, "peaked", None) is not None:
        if args.s is None:
            raise InvalidInput("--peaked needs --s")
        return schmidt.peaked_distribution(args.peaked, args.s)
    else:
        return None
    return schmidt.make_distribution(raw, renormalize=args.renormalize)


def _meta(args, **extra) -> dict:
    params = {
        k: (str(v) if isinstance(v, Path) else v)
        for k, v in vars(args).items()
        if k not in ("func", "output", "command") and v is not None
    }
    return {"program": "coboson", "version": _version(), "command": args.command, "parameters": params, **extra}


def _emit(args, text: str) -> None:
    if args.output is None or str(args.output) == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(args.output).write_text(text if text.endswith("\n") else text + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_chi(args) -> int:
    d = _distribution(args)
    seq = chi.chi(d, args.n, args.method, workers=args.workers, exact=args.exact)
    _emit(args, to_json({"meta": _meta(args), **seq.to_dict()}))
    return EXIT_OK


def cmd_ratio(args) -> int:
    d = _distribution(args)
    r = chi.chi_ratio(d, args.n, args.method)
    out = {"meta": _meta(args), "n": args.n, "ratio": r, "commutator": 2.0 * r - 1.0}
    _emit(args, to_json(out))
    return EXIT_OK


def cmd_bounds(args) -> int:
    d = _distribution(args)
    p = args.p
    if p is None:
        if d is None:
            raise InvalidInput("bounds needs --p or a distribution")
        p = schmidt.purity(d)
    s = args.s if d is None or args.peaked is None else None
    report = bounds.bounds_chain(p, args.n, s=s, d=d)
    _emit(args, to_json({"meta": _meta(args), **report.to_dict()}))
    return EXIT_OK


def cmd_extremal(args) -> int:
    if args.kind == "uniform":
        d = schmidt.uniform_distribution(args.p)
    else:
        if args.s is None:
            raise InvalidInput("--kind peaked needs --s")
        d = schmidt.peaked_distribution(args.p, args.s)
    lines = meta_lines(_meta(args, purity=schmidt.purity(d), s=d.s))
    _emit(args, "\n".join(lines) + "\n" + schmidt.format_distribution(d))
    return EXIT_OK


def cmd_birthday(args) -> int:
    d = _distribution(args)
    if d is None:
        if args.s is None:
            raise InvalidInput("birthday needs --s or a distribution")
        d = schmidt.make_distribution(np.full(args.s, 1.0 / args.s), renormalize=True)
    out = {"meta": _meta(args), "n": args.n, "mode": args.mode}
    if args.mode == "enumerate":
        out["probability"] = chi.birthday_probability(d, args.n, "enumerate")
    else:
        p, se = chi.birthday_montecarlo(d, args.n, args.trials, args.seed)
        out.update(probability=p, stderr=se, trials=args.trials)
    out["chi"] = float(chi.chi_dp(d, args.n).chi[args.n])
    _emit(args, to_json(out))
    return EXIT_OK


def _config(args) -> sampling.SamplerConfig:
    return sampling.SamplerConfig(args.s, args.measure, args.seed, args.stream_id)


def cmd_sample(args) -> int:
    cfg = _config(args)
    if args.count < 1:
        raise InvalidInput("--count must be >= 1")
    arr = sampling.sample_array(cfg, args.count, args.workers)
    lines = meta_lines(_meta(args, **cfg.metadata()))
    lines += [",".join(fmt(x) for x in row) for row in arr.tolist()]
    _emit(args, "\n".join(lines))
    return EXIT_OK


def cmd_scan(args) -> int:
    cfg = _config(args)
    xb = args.x_bins or args.bins
    yb = args.y_bins or args.bins
    xr = args.x_range or (1.0 / cfg.s, 1.0)
    yr = args.y_range or (0.0, 1.0)
    grid = scan.Grid2D(xb, yb, xr, yr)
    result = scan.scan_random_states(cfg, args.n, args.samples, grid, workers=args.workers)
    extra = {**cfg.metadata(), "p_mean": result.x_mean(), "p_stderr": result.x_stderr()}
    _emit(args, grid_to_csv(result, _meta(args, **extra)))
    return EXIT_OK


def cmd_curves(args) -> int:
    grid = bounds.default_p_grid(args.points, args.p_min, args.p_max)
    rows = bounds.deviation_curves(args.n, grid)
    _emit(args, to_csv(bounds.DEVIATION_HEADER, rows, _meta(args)))
    return EXIT_OK


def cmd_overlay(args) -> int:
    grid = np.linspace(args.p_min, args.p_max, args.points)
    header, rows = scan.bound_overlay(grid, args.n, args.s_list)
    _emit(args, to_csv(header, rows, _meta(args)))
    return EXIT_OK


def cmd_transform(args) -> int:
    d = _distribution(args)
    before = schmidt.power_sums(d, 3)
    out: dict = {"meta": _meta(args), "before": d.lambdas}
    if args.iterate:
        res = transforms.iterate_to_extremal(d, args.op, args.max_iters, args.tol)
        after = res.distribution
        out.update(iterations=res.iterations, converged=res.converged, last_change=res.change)
    else:
        if args.indices is None or len(args.indices) != 3:
            raise InvalidInput("--indices j1,j2,j3 is required without --iterate")
        t = transforms.select_triple(d, *args.indices)
        op = transforms.gamma_uniform if args.op == "uniform" else transforms.gamma_peaked
        after = op(d, t)
        prod = transforms.triple_product_bounds(d, t)
        out["triple"] = {"indices": list(t.indices), "k1": t.k1, "k2": t.k2}
        out["products"] = prod._asdict() | {"holds": prod.holds()}
        if args.n is not None:
            mono = transforms.ratio_monotonicity_check(d, t, args.n)
            out["ratios"] = mono._asdict()
    ps = schmidt.power_sums(after, 3)
    out["after"] = after.lambdas
    out["invariance"] = {
        "delta_m1": math.fsum(after.lambdas) - math.fsum(d.lambdas),
        "delta_m2": ps[2] - before[2],
        "delta_m3": ps[3] - before[3],
    }
    _emit(args, to_json(out))
    return EXIT_OK


def cmd_verify(args) -> int:
    results = run_suite(args.seed)
    lines = meta_lines(_meta(args))
    for r in results:
        lines.append(f"{'PASS' if r.ok else 'FAIL'} {r.name}: {r.detail} ({r.seconds:.2f}s)")
    failed = sum(not r.ok for r in results)
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    _emit(args, "\n".join(lines))
    return EXIT_OK if failed == 0 else EXIT_DOMAIN


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-o", "--output", help="write to this file instead of stdout")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="worker processes")

    parser = _Parser(prog="coboson", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("chi", parents=[common], help="normalization factors chi_0..chi_N")
    _add_distribution(p)
    p.add_argument("--s", type=int, help="number of coefficients for --peaked")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--method", choices=["dp", "newton", "brute", "dc"], default="dp")
    p.add_argument("--exact", action="store_true", help="rational arithmetic for --method newton")
    p.set_defaults(func=cmd_chi)

    p = sub.add_parser("ratio", parents=[common], help="chi_{N+1}/chi_N and the commutator expectation")
    _add_distribution(p)
    p.add_argument("--s", type=int, help="number of coefficients for --peaked")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--method", choices=["dp", "newton"], default="dp")
    p.set_defaults(func=cmd_ratio)

    p = sub.add_parser("bounds", parents=[common], help="the bound chain as JSON")
    _add_distribution(p, required=False)
    p.add_argument("--p", type=float, help="purity (defaults to that of the distribution)")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s", type=int, help="finite number of coefficients")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("extremal", parents=[common], help="uniform or peaked distribution")
    p.add_argument("--kind", choices=["uniform", "peaked"], required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--s", type=int)
    p.set_defaults(func=cmd_extremal)

    p = sub.add_parser("birthday", parents=[common], help="all-distinct probability of n draws")
    _add_distribution(p, required=False)
    p.add_argument("--s", type=int, help="uniform over s outcomes")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--mode", choices=["enumerate", "mc", "montecarlo"], default="enumerate")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_birthday)

    def sampler_flags(p):
        p.add_argument("--s", type=int, required=True)
        p.add_argument("--measure", choices=list(sampling.MEASURES), default="induced")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--stream-id", type=int, default=0)

    p = sub.add_parser("sample", parents=[common], help="random Schmidt spectra")
    sampler_flags(p)
    p.add_argument("--count", type=int, default=10)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("scan", parents=[common], help="(P, ratio) histogram of random spectra")
    sampler_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--samples", type=int, default=10**6)
    p.add_argument("--bins", type=int, default=scan.DEFAULT_BINS)
    p.add_argument("--x-bins", type=int)
    p.add_argument("--y-bins", type=int)
    p.add_argument("--x-range", type=_range, help="P range 'lo,hi' (default 1/s,1)")
    p.add_argument("--y-range", type=_range, help="ratio range 'lo,hi' (default 0,1)")
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("curves", parents=[common], help="deviation 1 - bound against P")
    p.add_argument("--n", type=_int_list, default=[1, 10, 100, 1000])
    p.add_argument("--points", type=int, default=200)
    p.add_argument("--p-min", type=float, default=1e-9)
    p.add_argument("--p-max", type=float, default=1.0)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("overlay", parents=[common], help="bound curves against P")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--s-list", type=_int_list, default=[3, 4, 5])
    p.add_argument("--points", type=int, default=1000)
    p.add_argument("--p-min", type=float, default=1e-3)
    p.add_argument("--p-max", type=float, default=1.0)
    p.set_defaults(func=cmd_overlay)

    p = sub.add_parser("transform", parents=[common], help="uniforming / peaking maps")
    _add_distribution(p)
    p.add_argument("--s", type=int, help="number of coefficients for --peaked")
    p.add_argument("--op", choices=["uniform", "peaked"], required=True)
    p.add_argument("--indices", type=_int_list, help="1-based j1,j2,j3 in descending order")
    p.add_argument("--iterate", action="store_true", help="iterate to the extremal shape")
    p.add_argument("--max-iters", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=1e-13)
    p.add_argument("--n", type=int, help="also check ratio monotonicity at this N")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("verify", parents=[common], help="run the invariant self-checks")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if hasattr(args, "seed") and args.seed is None:
            args.seed = _default_seed()
        if args.workers < 1:
            raise InvalidInput("--workers must be >= 1")
        return args.func(args)
    except CobosonError as exc:
        print(f"coboson {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except BrokenPipeError:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
