"""Command-line interface.

Subcommands: analyze, solve, rates, exp1, exp2, exp3.  Every command is
deterministic given its inputs and the master seed (flag --seed, env
HETEROSOLVE_SEED, then the built-in default).  Angles print in degrees;
files store radians.

Exit codes: 0 ok, 1 usage, 2 input/config parse error, 3 rank or
singularity failure, 4 diverged, 5 stalled.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, heterogeneity, montecarlo, numkernel, rates_bounds, solvers, system
from .errors import (
    BadSizes,
    Diverged,
    HeteroSolveError,
    NotDivisible,
    ParseError,
    RankDeficient,
    Singular,
    SingularDraw,
    Stalled,
)
from .serialize import dump_json, dumps_json


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad flags; the contract wants 1 with usage."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _master_seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("HETEROSOLVE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ParseError(f"HETEROSOLVE_SEED is not an integer: {env!r}") from exc
    return montecarlo.DEFAULT_MASTER_SEED


def _partition(args, sys_: system.LinearSystem) -> system.Partition:
    if args.even is not None:
        return system.partition_even(sys_, args.even)
    sizes = [int(tok) for tok in args.sizes.split(",") if tok.strip()]
    return system.partition_custom(sys_, sizes)


def _deg(rad: float | None) -> float | None:
    return None if rad is None else math.degrees(rad)


def _fmt_opt(x, nd=4) -> str:
    if x is None:
        return "n/a"
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return f"{x:.{nd}f}"


def _add_partition_flags(p) -> None:
    p.add_argument("--even", type=int, metavar="M",
                   help="even partition into M row blocks")
    p.add_argument("--sizes", type=str, metavar="P1,P2,...",
                   help="explicit row-block sizes")


def _require_partition(parser, args) -> None:
    if (args.even is None) == (args.sizes is None):
        parser.error("exactly one of --even / --sizes is required")


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def _cmd_analyze(args) -> int:
    a = system.load_matrix(args.matrix)
    if a.shape[0] != a.shape[1]:
        raise ParseError(f"{args.matrix}: matrix must be square")
    # analysis needs no right-hand side; use x* = 0, b = 0
    sys_ = system.LinearSystem(a=a, b=np.zeros(a.shape[0]), x_star=np.zeros(a.shape[0]))
    _require_partition(args.parser_ref, args)
    part = _partition(args, sys_)
    machines = system.build_machines(sys_, part)
    het = heterogeneity.compute_report(machines)
    bounds = rates_bounds.bound_report_for(machines, het)
    s_spec = numkernel.symmetric_spectrum(system.build_S(machines))
    ata_spec = numkernel.symmetric_spectrum(a.T @ a)
    rates = rates_bounds.rate_report_from_spectra(s_spec, ata_spec, len(machines))

    doc = {
        "n": sys_.n,
        "partition": list(part.sizes),
        "heterogeneity": het.to_dict(),
        "bounds": bounds.to_dict(),
        "kappa_s": rates.kappa_s,
        "kappa_ata": rates.kappa_ata,
        "lambda_min_s": rates.lambda_min_s,
    }
    print(f"n = {sys_.n}, m = {part.m}, sizes = {list(part.sizes)}")
    print(f"theta_H = {_fmt_opt(_deg(het.theta_h))} deg")
    print(f"phi_min = {_fmt_opt(_deg(het.phi_min))} deg")
    print(f"kappa(S) = {rates.kappa_s:.6g}   kappa(A^T A) = {rates.kappa_ata:.6g}")
    print(f"kappa(S) lower bound = {_fmt_opt(bounds.kappa_s_lower, 6)}   "
          f"upper bound = {_fmt_opt(bounds.kappa_s_upper, 6)}")
    print(f"kappa(A) row-geometry lower bound = {bounds.kappa_a_row_bound:.6g}")
    if args.out:
        dump_json(args.out, doc)
        _write_manifest(Path(args.out).with_suffix(".manifest.json"), "analyze",
                        {"matrix": args.matrix, "even": args.even, "sizes": args.sizes},
                        None, [args.out], args._t0)
        print(f"wrote {args.out}")
    if args.json:
        print(dumps_json(doc))
    return 0


# ---------------------------------------------------------------------------
# rates
# ---------------------------------------------------------------------------


def _cmd_rates(args) -> int:
    a = system.load_matrix(args.matrix)
    if a.shape[0] != a.shape[1]:
        raise ParseError(f"{args.matrix}: matrix must be square")
    sys_ = system.LinearSystem(a=a, b=np.zeros(a.shape[0]), x_star=np.zeros(a.shape[0]))
    _require_partition(args.parser_ref, args)
    part = _partition(args, sys_)
    machines = system.build_machines(sys_, part)
    report = rates_bounds.rate_report_for(sys_, machines)
    for name in ("kappa_s", "kappa_ata", "lambda_min_s"):
        print(f"{name} = {getattr(report, name):.10g}")
    for name in ("rho_apc", "rho_bcm", "rho_mlm", "rho_hbm", "rho_nag", "rho_dgd"):
        print(f"{name} = {getattr(report, name):.10g}")
    outputs = []
    if args.out_json:
        dump_json(args.out_json, report.to_dict())
        outputs.append(args.out_json)
    if args.out_csv:
        from .serialize import write_csv

        write_csv(args.out_csv, rates_bounds.RATE_CSV_COLUMNS, [report.csv_row()])
        outputs.append(args.out_csv)
    if outputs:
        _write_manifest(Path(outputs[0]).with_suffix(".manifest.json"), "rates",
                        {"matrix": args.matrix, "even": args.even, "sizes": args.sizes},
                        None, outputs, args._t0)
    return 0


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------


def _cmd_solve(args) -> int:
    a = system.load_matrix(args.matrix)
    if a.shape[0] != a.shape[1]:
        raise ParseError(f"{args.matrix}: matrix must be square")
    seed = _master_seed(args)
    if args.b:
        sys_ = system.from_matrix(a, b=system.load_vector(args.b))
    elif args.derive_b:
        rng = system.rng_from_seed(seed)
        x_star = rng.normal(0.0, 1.0, size=a.shape[0])
        sys_ = system.from_matrix(a, x_star=x_star)
    else:
        args.parser_ref.error("one of --b / --derive-b is required")
    _require_partition(args.parser_ref, args)
    part = _partition(args, sys_)
    machines = system.build_machines(sys_, part)
    config = solvers.SolverConfig(
        method=args.method,
        gamma=args.gamma,
        eta=args.eta,
        alpha=args.alpha,
        beta=args.beta,
        mu=args.mu,
        max_iters=args.max_iters,
        tol=args.tol,
    )

    s_spec = numkernel.symmetric_spectrum(system.build_S(machines))
    ata_spec = numkernel.symmetric_spectrum(sys_.a.T @ sys_.a)
    report = rates_bounds.rate_report_from_spectra(s_spec, ata_spec, len(machines))
    closed = {
        "APC": report.rho_apc,
        "BCM": report.rho_bcm,
        "MLM": report.rho_mlm,
        "DHBM": report.rho_hbm,
        "DNAG": report.rho_nag,
        "DGD": report.rho_dgd,
    }[config.method]

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def emit(trace, code: int) -> int:
        csv_path = out_dir / f"{config.method.lower()}_trace.csv"
        json_path = out_dir / f"{config.method.lower()}_trace.json"
        solvers.write_trace_csv(trace, csv_path)
        solvers.write_trace_sidecar(
            trace, json_path,
            extra={"closed_form_rate": closed, "matrix": str(args.matrix),
                   "master_seed": seed},
        )
        _write_manifest(out_dir / "manifest.json", "solve",
                        {"matrix": args.matrix, "method": config.method,
                         "even": args.even, "sizes": args.sizes,
                         "b": args.b, "derive_b": args.derive_b,
                         "tol": config.tol, "max_iters": config.max_iters},
                        seed, [str(csv_path), str(json_path)], args._t0)
        print(f"method: {config.method}")
        print(f"rounds: {trace.rounds}")
        print(f"messages_per_round: {trace.messages_per_round}")
        print(f"fitted_rate: {trace.fitted_rate:.10g}")
        print(f"closed_form_rate: {closed:.10g}")
        print(f"final_error: {trace.errors[-1]:.3e}")
        return code

    try:
        trace = solvers.run(sys_, machines, config)
    except Diverged as exc:
        emit(exc.trace, 4)
        print("run diverged", file=sys.stderr)
        return 4
    except Stalled as exc:
        emit(exc.trace, 5)
        print("run stalled before reaching tolerance", file=sys.stderr)
        return 5
    return emit(trace, 0)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def _write_manifest(path, command: str, params: dict, master_seed, outputs, t0) -> None:
    dump_json(
        path,
        {
            "tool": "heterosolve",
            "version": __version__,
            "command": command,
            "params": params,
            "master_seed": master_seed,
            "outputs": [str(Path(p).name) for p in outputs],
            "wall_time_s": time.perf_counter() - t0,
        },
    )


def _cmd_experiment(args) -> int:
    exp = args.command
    if args.from_manifest:
        try:
            with open(args.from_manifest) as fh:
                manifest = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ParseError(f"{args.from_manifest}: {exc}") from exc
        if manifest.get("command") != exp:
            raise ParseError(
                f"manifest is for {manifest.get('command')!r}, not {exp!r}"
            )
        cfg = montecarlo.config_from_dict(manifest["params"])
    else:
        seed = _master_seed(args)
        if args.config:
            try:
                with open(args.config) as fh:
                    doc = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ParseError(f"{args.config}: {exc}") from exc
            doc.setdefault("experiment", exp)
            doc.setdefault("master_seed", seed)
            if args.trials is not None:
                doc["trials"] = args.trials
            cfg = montecarlo.config_from_dict(doc)
        else:
            cfg = montecarlo.default_config(exp, master_seed=seed, trials=args.trials)
    if cfg.experiment != exp:
        raise ParseError(f"config is for {cfg.experiment!r}, not {exp!r}")

    result = montecarlo.run_experiment(cfg, jobs=args.jobs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{exp}.csv"
    result.write_csv(csv_path)
    _write_manifest(out_dir / "manifest.json", exp, cfg.to_dict(),
                    cfg.master_seed, [str(csv_path)], args._t0)
    print(f"wrote {csv_path} ({len(result.rows)} rows)")
    return 0


# ---------------------------------------------------------------------------
# parser wiring
# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="heterosolve",
                     description="distributed linear-system solver toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="heterogeneity metrics and bounds")
    p.add_argument("matrix")
    _add_partition_flags(p)
    p.add_argument("--out", help="write the JSON report here")
    p.add_argument("--json", action="store_true", help="dump JSON to stdout")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("rates", help="closed-form optimal rates")
    p.add_argument("matrix")
    _add_partition_flags(p)
    p.add_argument("--out-json")
    p.add_argument("--out-csv")
    p.set_defaults(func=_cmd_rates)

    p = sub.add_parser("solve", help="run one solver to tolerance")
    p.add_argument("matrix")
    _add_partition_flags(p)
    p.add_argument("--b", help="right-hand side vector file")
    p.add_argument("--derive-b", action="store_true",
                   help="draw x* from the master seed and set b = A x*")
    p.add_argument("--method", required=True, choices=sorted(solvers.METHODS))
    p.add_argument("--gamma", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--max-iters", type=int, default=20000)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_solve)

    for exp in montecarlo.EXPERIMENTS:
        p = sub.add_parser(exp, help=f"run {exp} and write {exp}.csv")
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--out-dir", default=".")
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, default=1)
        p.add_argument("--from-manifest",
                       help="re-run with the exact config stored in a manifest")
        p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.parser_ref = parser
    args._t0 = time.perf_counter()
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (BadSizes, NotDivisible) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RankDeficient, Singular, SingularDraw) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except Diverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except Stalled as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5
    except HeteroSolveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
