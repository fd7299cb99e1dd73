"""Benchmark command line: solve single instances, run table sweeps,
phase-transition grids, and multiplier traces.

Subcommands::

 solve   one instance (from a file or generated), one solver
 sweep   mean SNR / iterations / wall time over an axis of instances
 phase   empirical success-rate grid over (rank, sampling) fractions
 trace   per-iteration multiplier norm / relative change / SNR, averaged

Every command is reproducible: the same configuration and seed give
byte-identical CSV bodies (timestamps only appear in '#' headers, and
wall-time columns are environment-dependent by nature and excluded from
that guarantee). Exit codes: 0 success, 1 runtime failure, 2 usage error.
The environment variable ``LOWRANK_ADMM_SEED`` overrides ``--seed``.
"""

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import fileio
from .problems import (
    PhaseGrid,
    _limit_worker_threads,
    derive_seeds,
    generate_instance,
    run_phase_transition,
    snr_reconstruction,
    sufficient_samples,
)
from .solvers import SOLVERS, SolverOptions

__all__ = ["main", "build_parser", "UsageError"]

_SOLVER_NAMES = tuple(SOLVERS)
_PAPER_FRACS = tuple(round(0.02 * k, 2) for k in range(1, 26))  # 0.02 .. 0.50
_CI_RANK_FRACS = (0.05, 0.20, 0.40)
_CI_SAMPLING_FRACS = (0.05, 0.20, 0.35)


class UsageError(Exception):
    """Invalid configuration detected before any compute starts."""


def _positive(kind, name, value):
    if value is None or value < 1:
        raise UsageError(f"{name} must be a positive {kind}, got {value}")
    return value


def _parse_list(text: str, convert, name: str) -> list:
    try:
        values = [convert(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse {name} list {text!r}") from exc
    if not values:
        raise UsageError(f"{name} list is empty")
    return values


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mu", type=float, default=1.0, help="ADMM penalty parameter")
    p.add_argument(
        "--lambda-nn", type=float, default=1.0, dest="lambda_nn",
        help="nuclear-norm weight for nn-admm",
    )
    p.add_argument("--tol", type=float, default=1e-4,
                   help="relative-change stop threshold; 0 disables the stop")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--multiplier-tol", type=float, default=None,
                   help="optional early stop on the multiplier norm")
    p.add_argument("--mu-safe", action="store_true",
                   help="raise mu above twice the operator Lipschitz constant")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--jobs", type=int, default=os.cpu_count() or 1,
                   help="worker processes (default: logical cores)")
    p.add_argument("--out", type=Path, default=None, help="output CSV path")
    p.add_argument("--config", type=Path, default=None,
                   help="flat key-value config file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lowrank-admm",
        description="rank-constrained matrix recovery benchmarks",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve a single instance")
    p.add_argument("--instance", type=Path, default=None, help="instance file to load")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--r", type=int, default=None, help="solver rank estimate")
    p.add_argument("--r-true", type=int, default=None, help="generated ground-truth rank")
    p.add_argument("--d", type=int, default=None, help="number of observed entries")
    p.add_argument("--sampling-frac", type=float, default=None,
                   help="observed fraction d/(m n), alternative to --d")
    p.add_argument("--snr-m", type=float, default=None,
                   help="measurement SNR in dB (omit for noiseless)")
    p.add_argument("--solver", choices=_SOLVER_NAMES, default="rc-admm")
    p.add_argument("--save-instance", type=Path, default=None,
                   help="also write the generated instance to this path")
    _add_solver_flags(p)
    _add_common_flags(p)

    p = sub.add_parser("sweep", help="mean results over an axis of instances")
    p.add_argument("--axis", choices=("sampling", "rank", "size"), required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=str, default=None,
                   help="matrix side; comma list for the size axis")
    p.add_argument("--r", type=str, default=None,
                   help="rank; comma list for the rank axis")
    p.add_argument("--sampling-frac", type=str, default=None,
                   help="sampling fraction; comma list for the sampling axis")
    p.add_argument("--snr-m", type=float, default=None)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--scale-c", type=float, default=1.0,
                   help="sample-budget scale for the size axis")
    p.add_argument("--solver", type=str, default="all",
                   help="comma list of solvers, or 'all'")
    _add_solver_flags(p)
    _add_common_flags(p)

    p = sub.add_parser("phase", help="success-rate phase-transition grid")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--rank-fracs", type=str, default=None,
                   help="comma list of r/n values (default: 0.02:0.02:0.5)")
    p.add_argument("--sampling-fracs", type=str, default=None,
                   help="comma list of d/n^2 values (default: 0.02:0.02:0.5)")
    p.add_argument("--ci-grid", action="store_true",
                   help="small fixed 3x3 grid for smoke tests")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--success-snr", type=float, default=70.0)
    p.add_argument("--solver", choices=_SOLVER_NAMES, default="rc-admm")
    _add_common_flags(p)

    p = sub.add_parser("trace", help="per-iteration trace averaged over trials")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--r", type=int, default=None)
    p.add_argument("--r-true", type=int, default=None)
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--sampling-frac", type=float, default=None)
    p.add_argument("--snr-m", type=float, default=None)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--solver", choices=_SOLVER_NAMES, default="rc-admm")
    _add_solver_flags(p)
    _add_common_flags(p)

    return parser


def _expand_config(argv: list[str]) -> list[str]:
    """Inject config-file entries as flags ahead of the user's flags.

    The file holds one ``key value`` or ``key = value`` entry per line
    ('#' comments allowed); keys are long option names with '-' or '_'.
    Explicit command-line flags come later in argv, so they win.
    """
    if "--config" in argv:
        path = argv[argv.index("--config") + 1]
    else:
        hits = [a for a in argv if a.startswith("--config=")]
        if not hits:
            return argv
        path = hits[0].split("=", 1)[1]
    injected: list[str] = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, _, value = line.replace("=", " ", 1).partition(" ")
        key = key.strip().replace("_", "-")
        value = value.strip()
        flag = f"--{key}"
        if value.lower() in ("true", "yes", "on") and key in ("mu-safe", "ci-grid"):
            injected.append(flag)
        elif value.lower() in ("false", "no", "off") and key in ("mu-safe", "ci-grid"):
            continue
        else:
            if not value:
                raise UsageError(f"config entry {key!r} has no value")
            injected.extend([flag, value])
    return argv[:1] + injected + argv[1:]


def _resolve_dims(args, need_r_true: bool = True):
    m = args.m if args.m is not None else args.n
    n = args.n if args.n is not None else args.m
    _positive("integer", "--m/--n", m)
    _positive("integer", "--m/--n", n)
    if args.d is not None:
        d = args.d
    elif args.sampling_frac is not None:
        d = int(round(args.sampling_frac * m * n))
    else:
        raise UsageError("need --d or --sampling-frac")
    if not 1 <= d <= m * n:
        raise UsageError(f"need 1 <= d <= {m * n}, got d={d}")
    r_true = args.r_true if args.r_true is not None else args.r
    if need_r_true and r_true is None:
        raise UsageError("need --r-true (or --r) to generate an instance")
    return m, n, d, r_true


def _solver_options(args, r: int, *, record_trace: bool = False, seed=None) -> SolverOptions:
    try:
        return SolverOptions(
            rank_estimate=r,
            mu=args.mu,
            tol=args.tol,
            max_iter=args.max_iter,
            multiplier_tol=args.multiplier_tol,
            seed=args.seed if seed is None else seed,
            record_trace=record_trace,
            enforce_mu_gt_2l=args.mu_safe,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _run_solver(name: str, instance, opts: SolverOptions, lambda_nn: float):
    solve = SOLVERS[name]
    if name == "nn-admm":
        return solve(instance, opts, lambda_nn=lambda_nn)
    return solve(instance, opts)


def _cmd_solve(args) -> int:
    if args.instance is not None:
        try:
            instance, meta = fileio.read_instance(args.instance)
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot load instance: {exc}") from exc
        gen_seed = meta.get("seed")
        snr_m = meta.get("snr_m")
    else:
        m, n, d, r_true = _resolve_dims(args)
        if not 1 <= r_true <= min(m, n):
            raise UsageError(f"need 1 <= r_true <= {min(m, n)}, got {r_true}")
        instance = generate_instance(m, n, r_true, d, snr_m=args.snr_m, seed=args.seed)
        gen_seed = args.seed
        snr_m = args.snr_m
    r = args.r if args.r is not None else instance.r_true
    if r is None:
        raise UsageError("need --r (rank estimate)")
    if not 1 <= r <= min(instance.m, instance.n):
        raise UsageError(f"need 1 <= r <= {min(instance.m, instance.n)}, got r={r}")
    opts = _solver_options(args, r)

    if args.save_instance is not None:
        fileio.write_instance(args.save_instance, instance, seed=gen_seed)

    result = _run_solver(args.solver, instance, opts, args.lambda_nn)
    snr = (
        snr_reconstruction(instance.x_true, result.x_hat)
        if instance.x_true is not None
        else None
    )
    print(f"solver: {args.solver}")
    print(f"iterations: {result.iterations}")
    print(f"converged: {result.converged.value}")
    print(f"snr_r: {f'{snr:.2f} dB' if snr is not None else 'n/a (no ground truth)'}")
    print(f"wall_time: {result.wall_time:.3f} s")

    if args.out is not None:
        meta = {"command": "solve", "solver": args.solver, "seed": args.seed}
        row = {
            "solver": args.solver,
            "m": instance.m,
            "n": instance.n,
            "d": instance.d,
            "r": r,
            "r_true": instance.r_true,
            "snr_m": snr_m,
            "mu": args.mu,
            "lambda_nn": args.lambda_nn if args.solver == "nn-admm" else None,
            "tol": args.tol,
            "max_iter": args.max_iter,
            "multiplier_tol": args.multiplier_tol,
            "seed": args.seed,
            "iterations": result.iterations,
            "converged": result.converged.value,
            "snr_r": snr,
            "wall_time": result.wall_time,
        }
        fileio.write_csv(args.out, meta, list(row), [row])
    return 0


def _sweep_axis(args):
    """Return (axis_name, [(value, m, n, r, d), ...]) for the sweep."""
    if args.axis == "sampling":
        if args.sampling_frac is None:
            raise UsageError("sampling sweep needs --sampling-frac values")
        if args.n is None or args.r is None:
            raise UsageError("sampling sweep needs --n and --r")
        n = int(args.n)
        m = args.m if args.m is not None else n
        r = int(args.r)
        points = []
        for f in _parse_list(args.sampling_frac, float, "--sampling-frac"):
            d = int(round(f * m * n))
            points.append((f, m, n, r, d))
    elif args.axis == "rank":
        if args.r is None:
            raise UsageError("rank sweep needs --r values")
        if args.n is None or args.sampling_frac is None:
            raise UsageError("rank sweep needs --n and --sampling-frac")
        n = int(args.n)
        m = args.m if args.m is not None else n
        frac = float(args.sampling_frac)
        d = int(round(frac * m * n))
        points = [(r, m, n, r, d) for r in _parse_list(args.r, int, "--r")]
    else:  # size
        if args.n is None or args.r is None:
            raise UsageError("size sweep needs --n values and --r")
        r = int(args.r)
        points = []
        for n in _parse_list(args.n, int, "--n"):
            d = sufficient_samples(n, r, args.scale_c)
            points.append((n, n, n, r, d))
    for value, m, n, r, d in points:
        if not 1 <= r <= min(m, n):
            raise UsageError(f"rank {r} out of range for {m}x{n}")
        if not 1 <= d <= m * n:
            raise UsageError(f"d={d} out of range for {m}x{n}")
    return args.axis, points


def _sweep_solvers(args) -> list[str]:
    if args.solver.strip() == "all":
        return ["niht", "nn-admm", "rc-admm"]
    names = [s.strip() for s in args.solver.split(",") if s.strip()]
    for name in names:
        if name not in SOLVERS:
            raise UsageError(f"unknown solver {name!r}; choose from {sorted(SOLVERS)}")
    return names


def _sweep_unit(payload):
    """One (axis point, trial): generate an instance, run every solver on it."""
    (axis_i, trial, m, n, r, d, snr_m, solvers, master_seed, opt_kw, lambda_nn) = payload
    inst_seed, solver_seed = derive_seeds(master_seed, axis_i, trial)
    instance = generate_instance(m, n, r, d, snr_m=snr_m, seed=inst_seed)
    out = {}
    for name in solvers:
        opts = SolverOptions(rank_estimate=r, seed=solver_seed, **opt_kw)
        result = _run_solver(name, instance, opts, lambda_nn)
        out[name] = (
            snr_reconstruction(instance.x_true, result.x_hat),
            result.iterations,
            result.wall_time,
        )
    return axis_i, trial, out


def _pool_map(fn, payloads, jobs: int):
    if jobs > 1 and len(payloads) > 1:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_limit_worker_threads) as pool:
            yield from pool.map(fn, payloads)
    else:
        for payload in payloads:
            yield fn(payload)


def _cmd_sweep(args) -> int:
    if args.out is None:
        raise UsageError("sweep needs --out")
    _positive("integer", "--trials", args.trials)
    axis, points = _sweep_axis(args)
    solvers = _sweep_solvers(args)
    opt_kw = dict(
        mu=args.mu,
        tol=args.tol,
        max_iter=args.max_iter,
        multiplier_tol=args.multiplier_tol,
        enforce_mu_gt_2l=args.mu_safe,
    )
    try:
        SolverOptions(rank_estimate=points[0][3], **opt_kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    payloads = [
        (i, t, m, n, r, d, args.snr_m, tuple(solvers), args.seed, opt_kw, args.lambda_nn)
        for i, (value, m, n, r, d) in enumerate(points)
        for t in range(args.trials)
    ]
    acc: dict[tuple[int, str], list] = {}
    for axis_i, trial, per_solver in _pool_map(_sweep_unit, payloads, args.jobs):
        for name, stats in per_solver.items():
            acc.setdefault((axis_i, name), []).append((trial, stats))

    rows = []
    for i, (value, m, n, r, d) in enumerate(points):
        for name in solvers:
            stats = [s for _, s in sorted(acc[(i, name)])]
            rows.append(
                {
                    "axis": axis,
                    "value": value,
                    "solver": name,
                    "trials": args.trials,
                    "mean_snr_r": float(np.mean([s[0] for s in stats])),
                    "mean_iterations": float(np.mean([s[1] for s in stats])),
                    "mean_wall_time": float(np.mean([s[2] for s in stats])),
                }
            )
    meta = {
        "command": "sweep",
        "axis": axis,
        "solvers": "+".join(solvers),
        "trials": args.trials,
        "snr_m": args.snr_m,
        "seed": args.seed,
        "note": "mean_wall_time is environment-dependent and not reproducible",
    }
    fieldnames = ["axis", "value", "solver", "trials",
                  "mean_snr_r", "mean_iterations", "mean_wall_time"]
    fileio.write_csv(args.out, meta, fieldnames, rows)
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


def _cmd_phase(args) -> int:
    if args.out is None:
        raise UsageError("phase needs --out")
    if args.ci_grid:
        rank_fracs, sampling_fracs = _CI_RANK_FRACS, _CI_SAMPLING_FRACS
    else:
        rank_fracs = (
            _parse_list(args.rank_fracs, float, "--rank-fracs")
            if args.rank_fracs is not None
            else _PAPER_FRACS
        )
        sampling_fracs = (
            _parse_list(args.sampling_fracs, float, "--sampling-fracs")
            if args.sampling_fracs is not None
            else _PAPER_FRACS
        )
    try:
        grid = PhaseGrid(
            n=args.n,
            rank_fractions=tuple(rank_fracs),
            sampling_fractions=tuple(sampling_fracs),
            trials=args.trials,
            success_snr=args.success_snr,
            max_iter=args.max_iter,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    rates = run_phase_transition(grid, solver=args.solver, jobs=args.jobs)
    meta = {
        "command": "phase",
        "solver": args.solver,
        "n": args.n,
        "trials": args.trials,
        "max_iter": args.max_iter,
        "success_snr": args.success_snr,
        "seed": args.seed,
    }
    fileio.write_grid_files(args.out, grid, rates, meta)
    print(f"wrote {args.out} and {Path(args.out).with_suffix('.dat')}")
    return 0


def _trace_unit(payload):
    (trial, m, n, r, r_true, d, snr_m, solver, master_seed, opt_kw, lambda_nn) = payload
    inst_seed, solver_seed = derive_seeds(master_seed, 0, trial)
    instance = generate_instance(m, n, r_true, d, snr_m=snr_m, seed=inst_seed)
    opts = SolverOptions(rank_estimate=r, seed=solver_seed, record_trace=True, **opt_kw)
    result = _run_solver(solver, instance, opts, lambda_nn)
    t = result.trace
    return trial, t.multiplier_norm, t.rel_change, t.snr_r


def _cmd_trace(args) -> int:
    if args.out is None:
        raise UsageError("trace needs --out")
    _positive("integer", "--trials", args.trials)
    m, n, d, r_true = _resolve_dims(args)
    r = args.r if args.r is not None else r_true
    if not 1 <= r <= min(m, n):
        raise UsageError(f"need 1 <= r <= {min(m, n)}, got r={r}")
    if not 1 <= r_true <= min(m, n):
        raise UsageError(f"need 1 <= r_true <= {min(m, n)}, got r_true={r_true}")
    opt_kw = dict(
        mu=args.mu,
        tol=args.tol,
        max_iter=args.max_iter,
        multiplier_tol=args.multiplier_tol,
        enforce_mu_gt_2l=args.mu_safe,
    )
    try:
        SolverOptions(rank_estimate=r, **opt_kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    payloads = [
        (t, m, n, r, r_true, d, args.snr_m, args.solver, args.seed, opt_kw, args.lambda_nn)
        for t in range(args.trials)
    ]
    traces = [rec for rec in _pool_map(_trace_unit, payloads, args.jobs)]
    traces.sort(key=lambda rec: rec[0])

    # trials may stop at different iterations: average what is present per k
    max_len = max(len(rec[1]) for rec in traces)

    def padded(col_index):
        out = np.full((len(traces), max_len), np.nan)
        for row, rec in enumerate(traces):
            col = rec[col_index]
            out[row, : len(col)] = col
        return out

    import warnings as _warnings

    with _warnings.catch_warnings():
        _warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN tail columns
        columns = {
            "lambda_fro_norm": np.nanmean(padded(1), axis=0),
            "rel_change": np.nanmean(padded(2), axis=0),
            "snr_r": np.nanmean(padded(3), axis=0),
        }
    meta = {
        "command": "trace",
        "solver": args.solver,
        "m": m,
        "n": n,
        "d": d,
        "r": r,
        "r_true": r_true,
        "snr_m": args.snr_m,
        "trials": args.trials,
        "seed": args.seed,
    }
    fileio.write_trace_csv(args.out, meta, columns)
    print(f"wrote {args.out} ({max_len} iterations)")
    return 0


_COMMANDS = {
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "phase": _cmd_phase,
    "trace": _cmd_trace,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        argv = _expand_config(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    env_seed = os.environ.get("LOWRANK_ADMM_SEED")
    if env_seed is not None:
        try:
            args.seed = int(env_seed)
        except ValueError:
            print(f"error: LOWRANK_ADMM_SEED={env_seed!r} is not an integer",
                  file=sys.stderr)
            return 2
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
