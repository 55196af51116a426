"""Sweep slr_imat parameters around the defaults and print a comparison table.

Three panels:

* table: n=200, r0=10, random-sign noise at k0 = 0.05, 0.1, 0.3, 0.4 n^2,
  5 seeds each (the exact-recovery protocol the defaults must pass);
* hard: n=100 phase-grid cells near the success boundary, 10 trials each,
  seeded exactly as the phase grid seeds them;
* clean: uncorrupted Gaussian low-rank matrices and a stack of identical
  frames, which must pass through with nothing moved to the sparse part.

Each candidate changes one field of the default configuration. Run with
``--quick`` for a 2-seed / 4-trial version.
"""

import argparse
import dataclasses
import statistics
import time

import numpy as np

from slrimat.bench import PHASE_NOISE, PhaseGridSpec
from slrimat.metrics import SUCCESS_DB, snr_db
from slrimat.problems import ProblemSpec, make_problem, trial_seed
from slrimat.solver import SolverConfig, slr_imat

CANDIDATES = [
    {},
    {"entry_scale": 0.7}, {"entry_scale": 0.9},
    {"spectral_floor": 3.0}, {"spectral_floor": 8.0},
    {"beta": 2.0},
    {"inner_count": 5}, {"inner_count": 20},
    {"inner_tolerance": 0.0}, {"inner_tolerance": 1e-5},
    {"alpha": 0.1}, {"alpha": 0.3},
]

# (rank index, p index, noise kind) on the default 8 x 8 grid
HARD_CELLS = [(0, 4, "random"), (0, 7, "random"), (4, 6, "random"), (5, 0, "random"),
              (6, 1, "random"), (6, 4, "random"), (7, 0, "random"), (3, 3, "coherent"),
              (5, 5, "coherent")]


def table_panel(cfg, seeds):
    snrs = []
    for ratio in (0.05, 0.1, 0.3, 0.4):
        for seed in range(seeds):
            p = make_problem(ProblemSpec(m=200, n=200, r0=10, k0=round(ratio * 200 * 200)), seed=seed)
            snrs.append(snr_db(p.l_star, slr_imat(p.y, cfg).low_rank))
    return sum(s >= SUCCESS_DB for s in snrs), len(snrs), statistics.median(snrs)


def hard_panel(cfg, trials):
    grid = PhaseGridSpec()
    ok = total = 0
    for i, j, kind in HARD_CELLS:
        spec = ProblemSpec(m=grid.n, n=grid.n, r0=grid.rank_for(grid.rank_ratios[i]),
                           noise_kind=PHASE_NOISE[kind], p=grid.sparsity_probs[j])
        for t in range(trials):
            p = make_problem(spec, seed=trial_seed(grid.master_seed, i, j, t))
            ok += snr_db(p.l_star, slr_imat(p.y, cfg).low_rank) >= SUCCESS_DB
            total += 1
    return ok, total


def clean_panel(cfg):
    ok = total = 0
    for m, n, r in [(30, 20, 2), (60, 60, 3), (100, 100, 5), (100, 100, 20), (200, 50, 1)]:
        for seed in range(3):
            rng = np.random.default_rng(seed)
            y = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
            ok += snr_db(y, slr_imat(y, cfg).low_rank) >= 100
            total += 1
    frame = np.random.default_rng(0).random(32 * 32)
    y = np.repeat(frame[:, None], 10, axis=1)
    ok += np.linalg.norm(slr_imat(y, cfg).sparse) <= 1e-6 * np.linalg.norm(y)
    return ok, total + 1


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--quick", action="store_true")
    args = parser.parse_args()
    seeds, trials = (2, 4) if args.quick else (5, 10)

    defaults = SolverConfig()
    print("defaults:", {f.name: getattr(defaults, f.name) for f in dataclasses.fields(defaults)})
    print(f"{'change':<24} {'table ok':>9} {'median dB':>10} {'hard ok':>8} {'clean ok':>9} {'time s':>7}")
    for change in CANDIDATES:
        cfg = dataclasses.replace(defaults, **change)
        start = time.perf_counter()
        t_ok, t_total, t_med = table_panel(cfg, seeds)
        h_ok, h_total = hard_panel(cfg, trials)
        c_ok, c_total = clean_panel(cfg)
        label = ", ".join(f"{k}={v}" for k, v in change.items()) or "(defaults)"
        print(f"{label:<24} {t_ok:>4}/{t_total:<4} {t_med:>10.1f} {h_ok:>3}/{h_total:<4} "
              f"{c_ok:>4}/{c_total:<4} {time.perf_counter() - start:>7.1f}", flush=True)


if __name__ == "__main__":
    main()
