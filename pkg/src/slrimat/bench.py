"""Recovery experiments: random-problem tables and phase-transition grids.

Every trial draws its problem from a seed derived from the master seed and
the trial's coordinates, so results do not depend on execution order or on
how many worker processes run them. Output order is canonical: by size (or
grid cell), then trial, then solver in the order given.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import dataclass, field
import json
import logging
import math
import os
import time

import numpy as np

from .errors import InvalidSpec
from .ialm import IalmConfig, ialm
from .metrics import RecoveryReport, SUCCESS_DB, numerical_rank, snr_db
from .problems import BERNOULLI, COHERENT, RANDOM_SIGN, ProblemSpec, make_problem, trial_seed
from .solver import SolverConfig, slr_imat

log = logging.getLogger(__name__)

SOLVERS = ("slr_imat", "ialm")
PHASE_NOISE = {"random": BERNOULLI, "coherent": COHERENT}


def worker_count(requested=None):
    """Parallelism for the harness, capped by the ``SLR_THREADS`` variable."""
    cap = os.environ.get("SLR_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise InvalidSpec(f"SLR_THREADS must be an integer, got {cap!r}") from None
    return max(1, n)


def _map(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def solve(name, y, slr_config=None, ialm_config=None):
    """Run the named solver and return ``(decomposition, seconds)``."""
    start = time.perf_counter()
    if name == "slr_imat":
        result = slr_imat(y, slr_config)
    elif name == "ialm":
        result = ialm(y, ialm_config)
    else:
        raise InvalidSpec(f"unknown solver {name!r}; expected one of {SOLVERS}")
    return result, time.perf_counter() - start


def evaluate(name, problem, slr_config=None, ialm_config=None, k0_or_p=None):
    """Solve ``problem`` with one solver and score it against the ground truth.

    Solver exceptions are captured in the report's ``error`` field.
    """
    n = problem.y.shape[1]
    report = RecoveryReport(
        solver_name=name,
        snr_db=None,
        input_snr_db=snr_db(problem.l_star, problem.y),
        numerical_rank_l=0,
        nnz_e=0,
        wall_time_seconds=0.0,
        converged=False,
        n=n,
        r0=problem.rank_r0,
        k0_or_p=problem.spec.k0_or_p if k0_or_p is None else k0_or_p,
        seed=problem.seed,
    )
    try:
        result, seconds = solve(name, problem.y, slr_config, ialm_config)
    except Exception as exc:  # recorded per trial, never fatal to a batch
        log.warning("%s failed on seed %s: %s", name, problem.seed, exc)
        report.error = f"{type(exc).__name__}: {exc}"
        return report
    report.snr_db = snr_db(problem.l_star, result.low_rank)
    report.numerical_rank_l = numerical_rank(result.low_rank) if np.any(result.low_rank) else 0
    report.nnz_e = int(np.count_nonzero(result.sparse))
    report.wall_time_seconds = seconds
    report.converged = result.converged
    return report


@dataclass
class TableExperimentSpec:
    """Square random-sign problems: ``r0 = round(rank_ratio n)``, ``k0 = round(sparsity_ratio n^2)``."""

    sizes: list = field(default_factory=lambda: [100, 200])
    rank_ratio: float = 0.05
    sparsity_ratio: float = 0.05
    trials_per_cell: int = 5
    solvers: list = field(default_factory=lambda: list(SOLVERS))
    master_seed: int = 0
    slr_config: SolverConfig = field(default_factory=SolverConfig)
    ialm_config: IalmConfig = field(default_factory=IalmConfig)

    def validate(self):
        if not 0 < self.rank_ratio < 1:
            raise InvalidSpec(f"rank_ratio must be in (0, 1), got {self.rank_ratio}")
        if not 0 < self.sparsity_ratio < 1:
            raise InvalidSpec(f"sparsity_ratio must be in (0, 1), got {self.sparsity_ratio}")
        if not self.sizes or any(int(s) != s or s < 10 for s in self.sizes):
            raise InvalidSpec(f"sizes must be integers >= 10, got {self.sizes}")
        if self.trials_per_cell < 1:
            raise InvalidSpec(f"trials_per_cell must be >= 1, got {self.trials_per_cell}")
        unknown = [s for s in self.solvers if s not in SOLVERS]
        if unknown:
            raise InvalidSpec(f"unknown solver(s) {unknown}; expected a subset of {SOLVERS}")

    def problem_spec(self, n):
        return ProblemSpec(m=n, n=n, r0=max(1, round(self.rank_ratio * n)),
                           noise_kind=RANDOM_SIGN, k0=round(self.sparsity_ratio * n * n))

    def to_dict(self):
        return {
            "sizes": list(self.sizes), "rank_ratio": self.rank_ratio,
            "sparsity_ratio": self.sparsity_ratio, "trials_per_cell": self.trials_per_cell,
            "solvers": list(self.solvers), "master_seed": self.master_seed,
            "slr_imat": self.slr_config.to_dict(), "ialm": self.ialm_config.to_dict(),
        }


def _table_task(args):
    spec, n, trial = args
    seed = trial_seed(spec.master_seed, n, trial)
    problem = make_problem(spec.problem_spec(n), seed=seed)
    return [evaluate(name, problem, spec.slr_config, spec.ialm_config) for name in spec.solvers]


def run_table_experiment(spec, workers=1):
    """All (size, trial, solver) runs of ``spec``; solvers share each problem instance."""
    spec.validate()
    if not spec.solvers:
        return []
    tasks = [(spec, int(n), t) for n in spec.sizes for t in range(spec.trials_per_cell)]
    return [r for batch in _map(_table_task, tasks, worker_count(workers)) for r in batch]


@dataclass
class PhaseGridSpec:
    n: int = 100
    rank_ratios: list = field(default_factory=lambda: [round(v, 10) for v in np.linspace(0.05, 0.4, 8)])
    sparsity_probs: list = field(default_factory=lambda: [round(v, 10) for v in np.linspace(0.05, 0.4, 8)])
    trials: int = 10
    noise_kind: str = "random"
    master_seed: int = 0
    solver: str = "slr_imat"
    slr_config: SolverConfig = field(default_factory=SolverConfig)
    ialm_config: IalmConfig = field(default_factory=IalmConfig)

    def validate(self):
        if self.trials < 1:
            raise InvalidSpec(f"trials must be >= 1, got {self.trials}")
        if self.n < 2:
            raise InvalidSpec(f"n must be >= 2, got {self.n}")
        if self.noise_kind not in PHASE_NOISE:
            raise InvalidSpec(f"noise_kind must be one of {tuple(PHASE_NOISE)}, got {self.noise_kind!r}")
        if self.solver not in SOLVERS:
            raise InvalidSpec(f"unknown solver {self.solver!r}; expected one of {SOLVERS}")
        for name, values in (("rank_ratios", self.rank_ratios), ("sparsity_probs", self.sparsity_probs)):
            if not values:
                raise InvalidSpec(f"{name} must not be empty")
            if list(values) != sorted(values):
                raise InvalidSpec(f"{name} must be sorted ascending")
            if values[0] <= 0 or values[-1] > 1:
                raise InvalidSpec(f"{name} must lie in (0, 1]")

    def rank_for(self, ratio):
        return min(self.n, max(1, round(ratio * self.n)))

    def to_dict(self):
        return {
            "n": self.n, "rank_ratios": list(self.rank_ratios),
            "sparsity_probs": list(self.sparsity_probs), "trials": self.trials,
            "noise_kind": self.noise_kind, "master_seed": self.master_seed, "solver": self.solver,
            "slr_imat": self.slr_config.to_dict(), "ialm": self.ialm_config.to_dict(),
        }


@dataclass
class PhaseTransitionGrid:
    """Success rates, rows indexed by rank ratio and columns by sparsity probability."""

    rank_ratios: list
    sparsity_probs: list
    trials: int
    noise_kind: str
    matrix_size: int
    success_rate: np.ndarray
    failures: int = 0

    def __post_init__(self):
        self.success_rate = np.asarray(self.success_rate, dtype=np.float64)
        shape = (len(self.rank_ratios), len(self.sparsity_probs))
        if self.success_rate.shape != shape:
            raise InvalidSpec(f"success_rate shape {self.success_rate.shape} != {shape}")
        if ((self.success_rate < 0) | (self.success_rate > 1)).any():
            raise InvalidSpec("success rates must lie in [0, 1]")

    def rate(self, rank_ratio, p):
        i = int(np.argmin(np.abs(np.asarray(self.rank_ratios) - rank_ratio)))
        j = int(np.argmin(np.abs(np.asarray(self.sparsity_probs) - p)))
        return float(self.success_rate[i, j])


def _phase_task(args):
    spec, i, j, t = args
    ratio, p = spec.rank_ratios[i], spec.sparsity_probs[j]
    seed = trial_seed(spec.master_seed, i, j, t)
    pspec = ProblemSpec(m=spec.n, n=spec.n, r0=spec.rank_for(ratio),
                        noise_kind=PHASE_NOISE[spec.noise_kind], p=p)
    problem = make_problem(pspec, seed=seed)
    report = evaluate(spec.solver, problem, spec.slr_config, spec.ialm_config)
    ok = report.error is None and report.snr_db >= SUCCESS_DB
    return ok, report.error is not None


def run_phase_transition(spec, workers=1):
    """Empirical success rate of ``spec.solver`` on every (rank ratio, p) cell."""
    spec.validate()
    shape = (len(spec.rank_ratios), len(spec.sparsity_probs))
    tasks = [(spec, i, j, t) for i in range(shape[0]) for j in range(shape[1])
             for t in range(spec.trials)]
    outcomes = _map(_phase_task, tasks, worker_count(workers))
    successes = np.zeros(shape)
    failures = 0
    for (_, i, j, _), (ok, errored) in zip(tasks, outcomes):
        successes[i, j] += ok
        failures += errored
    return PhaseTransitionGrid(
        rank_ratios=list(spec.rank_ratios),
        sparsity_probs=list(spec.sparsity_probs),
        trials=spec.trials,
        noise_kind=spec.noise_kind,
        matrix_size=spec.n,
        success_rate=successes / spec.trials,
        failures=failures,
    )


def monotonicity_violations(grid, window=3):
    """Count rises in the smoothed success rate along both grid axes.

    Each row and column is smoothed with a ``window``-cell moving average;
    a rise between neighbouring smoothed values larger than one trial's
    worth (``1 / trials``) counts as a violation. Returns
    ``(violations, comparisons)``.
    """
    rates = grid.success_rate
    kernel = np.ones(window) / window
    slack = 1.0 / grid.trials + 1e-12
    violations = comparisons = 0
    for lines in (rates, rates.T):
        for line in lines:
            if len(line) < window + 1:
                continue
            smooth = np.convolve(line, kernel, mode="valid")
            rises = np.diff(smooth)
            violations += int((rises > slack).sum())
            comparisons += len(rises)
    return violations, comparisons


def grid_pixels(grid):
    """Gray levels ``floor(255 * rate + 0.5)``: white is success, black failure."""
    return np.floor(255.0 * grid.success_rate + 0.5).astype(int)


def emit_grid_pgm(grid, path):
    """Write the grid as an ASCII (P2) graymap.

    Rows run over rank ratio ascending from the top, columns over the
    sparsity probability ascending from the left.
    """
    pixels = grid_pixels(grid)
    h, w = pixels.shape
    lines = [
        "P2",
        "# phase transition success rate, white = success, black = failure",
        "# rows: rank ratio r0/n ascending top to bottom; columns: p ascending left to right",
        "# rank_ratios: " + " ".join(f"{v:g}" for v in grid.rank_ratios),
        "# sparsity_probs: " + " ".join(f"{v:g}" for v in grid.sparsity_probs),
        f"# noise: {grid.noise_kind}; n = {grid.matrix_size}; trials per cell = {grid.trials}",
        f"{w} {h}",
        "255",
    ]
    lines.extend(" ".join(str(v) for v in row) for row in pixels)
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_grid_csv(grid, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rank_ratio", "p", "success_rate", "successes", "trials"])
        for i, ratio in enumerate(grid.rank_ratios):
            for j, p in enumerate(grid.sparsity_probs):
                rate = grid.success_rate[i, j]
                writer.writerow([f"{ratio:g}", f"{p:g}", f"{rate:.6f}",
                                 int(round(rate * grid.trials)), grid.trials])


def write_reports_csv(reports, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RecoveryReport.CSV_FIELDS, lineterminator="\n")
        writer.writeheader()
        for r in reports:
            writer.writerow(r.row())


def write_reports_json(reports, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump([r.to_json() for r in reports], fh, indent=2)
        fh.write("\n")


def summarize(reports):
    """Per (solver, n) summary rows: trials, successes, median SNR, mean time."""
    groups = {}
    for r in reports:
        groups.setdefault((r.solver_name, r.n), []).append(r)
    rows = []
    for (name, n), rs in groups.items():
        snrs = [r.snr_db for r in rs if r.error is None]
        rows.append({
            "solver": name,
            "n": n,
            "trials": len(rs),
            "successes": sum(1 for s in snrs if s >= SUCCESS_DB),
            "errors": sum(1 for r in rs if r.error is not None),
            "median_snr_db": float(np.median(snrs)) if snrs else math.nan,
            "mean_time_s": float(np.mean([r.wall_time_seconds for r in rs])),
        })
    return rows
