"""Command-line interface: ``slrimat <subcommand> ...``.

Exit codes: 0 success, 1 error, 2 solver stopped at its iteration cap (all
outputs are still written).
"""

import argparse
import csv
import dataclasses
import json
import logging
from pathlib import Path
import sys
import time

import numpy as np

from . import bench
from .errors import InvalidConfig, InvalidSpec, SlrImatError
from .ialm import IalmConfig
from .imaging import background_subtract, export_stacks, load_stack
from .io import read_matrix, write_json, write_matrix
from .metrics import numerical_rank, snr_db
from .problems import NOISE_KINDS, RANDOM_SIGN, ProblemSpec, make_problem
from .solver import SolverConfig

log = logging.getLogger("slrimat")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

# CLI flag name -> IalmConfig field
IALM_FIELDS = {"lambda": "lam", "mu0": "mu0", "rho": "rho", "tol": "tol",
               "max_iterations": "max_iterations"}


class _Parser(argparse.ArgumentParser):
    """Usage errors exit 1 so that 2 keeps meaning "not converged"."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _optional_float(text):
    if text.lower() == "none":
        return None
    return float(text)


def _common_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=None,
                   help="RNG seed (problem generation, trial derivation, randomized SVD)")
    p.add_argument("--output-dir", type=Path, default=Path("."), help="directory for output files")
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="tabular output format (default csv)")
    p.add_argument("-v", "--verbose", action="store_true", help="log per-iteration progress")
    return p


def _solver_flags():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--solver", choices=bench.SOLVERS, default="slr_imat")
    g = p.add_argument_group("slr_imat options")
    g.add_argument("--alpha", type=float)
    g.add_argument("--beta", type=float)
    g.add_argument("--epsilon", type=float, help="absolute stop threshold")
    g.add_argument("--relative-tolerance", type=float,
                   help="stop threshold as a fraction of ||Y||_F when --epsilon is not given")
    g.add_argument("--outer-max", type=int)
    g.add_argument("--inner-count", type=int)
    g.add_argument("--inner-tolerance", type=float,
                   help="end a level once a step moves the iterate by at most this times ||Y||_F")
    g.add_argument("--svd-strategy", choices=("exact", "truncated"))
    g.add_argument("--threshold-mode", choices=("hard", "soft"))
    g.add_argument("--entry-scale", type=_optional_float, default=argparse.SUPPRESS,
                   help='entry-threshold scale, or "none" for a shared threshold')
    g.add_argument("--spectral-floor", type=_optional_float, default=argparse.SUPPRESS,
                   help='lower bound on the spectral threshold in units of the entry '
                        'threshold, or "none"')
    g.add_argument("--anchor", choices=("iterate", "input"))
    g.add_argument("--power-iterations", type=int)
    g = p.add_argument_group("ialm options")
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--mu0", type=float)
    g.add_argument("--rho", type=float)
    g.add_argument("--tol", type=float)
    g.add_argument("--max-iterations", type=int)
    return p


def build_slr_config(overrides, seed=None):
    """SolverConfig from a mapping of field names; unknown fields are rejected."""
    overrides = dict(overrides or {})
    names = {f.name for f in dataclasses.fields(SolverConfig)}
    for key in overrides:
        if key not in names:
            raise InvalidConfig(key, "unknown slr_imat option")
    if seed is not None:
        overrides["seed"] = seed
    return SolverConfig(**overrides)


def build_ialm_config(overrides):
    kwargs = {}
    for key, value in dict(overrides or {}).items():
        if key not in IALM_FIELDS and key != "lam":
            raise InvalidConfig(key, "unknown ialm option")
        kwargs[IALM_FIELDS.get(key, key)] = value
    return IalmConfig(**kwargs)


def _configs_from_args(args):
    slr = {}
    for f in dataclasses.fields(SolverConfig):
        if f.name != "seed" and hasattr(args, f.name) and getattr(args, f.name) is not None:
            slr[f.name] = getattr(args, f.name)
    for name in ("entry_scale", "spectral_floor"):
        if name in vars(args):
            slr[name] = getattr(args, name)
    ia = {flag: getattr(args, attr) for flag, attr in IALM_FIELDS.items()
          if getattr(args, attr, None) is not None}
    return build_slr_config(slr, seed=args.seed), build_ialm_config(ia)


def _solver_config(args, slr, ia):
    return slr if args.solver == "slr_imat" else ia


def _write_report_row(path, row):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(row), lineterminator="\n")
        writer.writeheader()
        writer.writerow(row)


def cmd_decompose(args):
    slr, ia = _configs_from_args(args)
    y = read_matrix(args.matrix)
    reference = read_matrix(args.reference) if args.reference else None
    if reference is not None and reference.shape != y.shape:
        raise InvalidSpec(f"reference shape {reference.shape} differs from input {y.shape}")
    result, seconds = bench.solve(args.solver, y, slr, ia)

    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    suffix = ".slrm" if args.binary else ".csv"
    write_matrix(out / f"L{suffix}", result.low_rank)
    write_matrix(out / f"E{suffix}", result.sparse)
    report = {
        "solver": args.solver,
        "input": str(args.matrix),
        "shape": list(y.shape),
        "config": _solver_config(args, slr, ia).to_dict(),
        "converged": result.converged,
        "outer_iterations": result.outer_iterations,
        "final_residual": result.final_residual,
        "residual_history": result.residual_history,
        "rank_est": numerical_rank(result.low_rank) if np.any(result.low_rank) else 0,
        "nnz_e": int(np.count_nonzero(result.sparse)),
        "time_s": seconds,
        "snr_in_db": snr_db(reference, y) if reference is not None else None,
        "snr_out_db": snr_db(reference, result.low_rank) if reference is not None else None,
    }
    write_json(out / "report.json", report)
    if args.format == "csv":
        keys = ("solver", "converged", "outer_iterations", "final_residual", "rank_est",
                "nnz_e", "time_s", "snr_in_db", "snr_out_db")
        _write_report_row(out / "report.csv", {k: report[k] for k in keys})
    print(f"{args.solver}: {'converged' if result.converged else 'NOT converged'} after "
          f"{result.outer_iterations} iterations, rank {report['rank_est']}, nnz(E) {report['nnz_e']}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_synth(args):
    if args.noise_kind == RANDOM_SIGN:
        if args.p is not None:
            raise InvalidSpec("random_sign noise takes --k0, not --p")
        k0 = args.k0 if args.k0 is not None else round(0.05 * args.m * args.n)
        spec = ProblemSpec(m=args.m, n=args.n, r0=args.r0, noise_kind=RANDOM_SIGN, k0=k0)
    else:
        if args.k0 is not None:
            raise InvalidSpec(f"{args.noise_kind} noise takes --p, not --k0")
        spec = ProblemSpec(m=args.m, n=args.n, r0=args.r0, noise_kind=args.noise_kind,
                           p=args.p if args.p is not None else 0.05)
    seed = 0 if args.seed is None else args.seed
    problem = make_problem(spec, seed=seed)

    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    prefix = args.prefix
    write_matrix(out / f"{prefix}Y.csv", problem.y)
    write_matrix(out / f"{prefix}L_star.csv", problem.l_star)
    write_matrix(out / f"{prefix}E_star.csv", problem.e_star)
    write_json(out / f"{prefix}meta.json", {
        "spec": spec.to_dict(),
        "seed": seed,
        "nnz_e": problem.sparsity_k0,
        "snr_in_db": snr_db(problem.l_star, problem.y),
        "generator": "PCG64",
    })
    print(f"wrote {spec.m}x{spec.n} problem (r0={spec.r0}, {spec.noise_kind}, "
          f"nnz={problem.sparsity_k0}) to {out}")
    return EXIT_OK


def _load_spec_file(path):
    if path is None:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidSpec(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise InvalidSpec(f"{path}: expected a JSON object")
    return data


def _split_spec(data, cls, seed):
    """Separate solver sections from experiment fields and build ``cls``."""
    data = dict(data)
    slr = build_slr_config(data.pop("slr_imat", None))
    ia = build_ialm_config(data.pop("ialm", None))
    workers = data.pop("workers", None)
    names = {f.name for f in dataclasses.fields(cls)} - {"slr_config", "ialm_config"}
    for key in data:
        if key not in names:
            raise InvalidSpec(f"unknown spec field {key!r}; expected one of {sorted(names)}")
    if seed is not None:
        data["master_seed"] = seed
    spec = cls(slr_config=slr, ialm_config=ia, **data)
    spec.validate()
    return spec, workers


def cmd_bench(args):
    spec, workers = _split_spec(_load_spec_file(args.spec_file), bench.TableExperimentSpec, args.seed)
    start = time.perf_counter()
    reports = bench.run_table_experiment(spec, workers=args.workers or workers or 1)
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        bench.write_reports_csv(reports, out / "results.csv")
    else:
        bench.write_reports_json(reports, out / "results.json")
    write_json(out / "spec.json", spec.to_dict())
    errors = sum(r.error is not None for r in reports)
    for row in bench.summarize(reports):
        print(f"{row['solver']:>8} n={row['n']:<5} success {row['successes']}/{row['trials']}  "
              f"median SNR {row['median_snr_db']:.1f} dB  mean time {row['mean_time_s']:.3f} s")
    print(f"{len(reports)} runs, {errors} failed, {time.perf_counter() - start:.1f} s")
    return EXIT_OK


def cmd_phase(args):
    spec, workers = _split_spec(_load_spec_file(args.spec_file), bench.PhaseGridSpec, args.seed)
    start = time.perf_counter()
    grid = bench.run_phase_transition(spec, workers=args.workers or workers or 1)
    out = args.output_dir
    out.mkdir(parents=True, exist_ok=True)
    bench.write_grid_csv(grid, out / "grid.csv")
    bench.emit_grid_pgm(grid, out / "grid.pgm")
    write_json(out / "spec.json", spec.to_dict())
    if args.format == "json":
        write_json(out / "grid.json", {
            "rank_ratios": grid.rank_ratios, "sparsity_probs": grid.sparsity_probs,
            "trials": grid.trials, "noise_kind": grid.noise_kind, "n": grid.matrix_size,
            "success_rate": grid.success_rate.tolist(), "failed_trials": grid.failures,
        })
    print(f"{len(grid.rank_ratios)}x{len(grid.sparsity_probs)} grid, {grid.noise_kind} noise, "
          f"{grid.failures} failed trials, {time.perf_counter() - start:.1f} s")
    return EXIT_OK


def cmd_bg_subtract(args):
    slr, ia = _configs_from_args(args)
    stack = load_stack(args.input)
    background, foreground, report, result = background_subtract(
        stack, args.solver, _solver_config(args, slr, ia))
    out = args.output_dir
    export_stacks(background, foreground, out)
    if args.dump_matrices:
        write_matrix(out / "L.csv", result.low_rank)
        write_matrix(out / "E.csv", result.sparse)
    write_json(out / "report.json", {
        "solver": args.solver,
        "input": str(args.input),
        "frames": stack.frame_count,
        "height": stack.height,
        "width": stack.width,
        "layout": "frame j is column j, pixels in row-major order",
        "config": _solver_config(args, slr, ia).to_dict(),
        "converged": report.converged,
        "outer_iterations": result.outer_iterations,
        "rank_est": report.numerical_rank_l,
        "nnz_e": report.nnz_e,
        "time_s": report.wall_time_seconds,
    })
    print(f"{stack.frame_count} frames {stack.height}x{stack.width}: background rank "
          f"{report.numerical_rank_l}, {'converged' if report.converged else 'NOT converged'}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def build_parser():
    common = _common_flags()
    solver = _solver_flags()
    parser = _Parser(prog="slrimat", description="Sparse plus low-rank matrix decomposition.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("decompose", parents=[common, solver], help="decompose a matrix file")
    p.add_argument("matrix", type=Path, help="input matrix (.csv or .slrm)")
    p.add_argument("--reference", type=Path, help="ground-truth low-rank matrix for SNR fields")
    p.add_argument("--binary", action="store_true", help="write L and E as .slrm instead of .csv")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("synth", parents=[common], help="generate a synthetic problem")
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--r0", type=int, default=5)
    p.add_argument("--noise-kind", choices=NOISE_KINDS, default=RANDOM_SIGN)
    p.add_argument("--k0", type=int, help="nonzero count for random_sign noise (default 0.05 m n)")
    p.add_argument("--p", type=float, help="corruption probability for bernoulli/coherent noise")
    p.add_argument("--prefix", default="", help="prefix for the output file names")
    p.set_defaults(func=cmd_synth)

    for name, func, text in (("bench", cmd_bench, "run a recovery table experiment"),
                             ("phase", cmd_phase, "run a phase-transition grid")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("spec_file", nargs="?", type=Path,
                       help="JSON experiment spec (desk-scale defaults when omitted)")
        p.add_argument("--workers", type=int, help="worker processes (capped by SLR_THREADS)")
        p.set_defaults(func=func)

    p = sub.add_parser("bg-subtract", parents=[common, solver],
                       help="split an image stack into background and foreground")
    p.add_argument("input", type=Path,
                   help="directory of .pgm frames, concatenated PGM file, or list of paths")
    p.add_argument("--dump-matrices", action="store_true", help="also write L.csv and signed E.csv")
    p.set_defaults(func=cmd_bg_subtract)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return exc.code
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvalidConfig as exc:
        print(f"error: invalid configuration field {exc.field!r}: {exc}", file=sys.stderr)
    except (SlrImatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
