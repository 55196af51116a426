"""Recovery quality metrics."""

from dataclasses import asdict, dataclass
import math

import numpy as np

from .errors import ShapeMismatch, ZeroReference
from .linalg import frobenius_norm, singular_values

SUCCESS_DB = 60.0


def snr_db(reference, estimate):
    """``20 log10(||ref||_F / ||ref - est||_F)``; ``math.inf`` for an exact match."""
    reference = np.asarray(reference, dtype=np.float64)
    estimate = np.asarray(estimate, dtype=np.float64)
    if reference.shape != estimate.shape:
        raise ShapeMismatch(f"shapes differ: {reference.shape} vs {estimate.shape}")
    ref_norm = frobenius_norm(reference)
    if ref_norm == 0:
        raise ZeroReference("reference matrix is identically zero")
    err = frobenius_norm(reference - estimate)
    if err == 0:
        return math.inf
    return 20.0 * math.log10(ref_norm / err)


def numerical_rank(x, rel_tol=1e-9):
    """Number of singular values ``>= rel_tol * sigma_1``."""
    if not 0 < rel_tol < 1:
        raise ValueError(f"rel_tol must be in (0, 1), got {rel_tol}")
    s = singular_values(x)
    if s[0] == 0:
        return 0
    return int((s >= rel_tol * s[0]).sum())


def is_success(reference, estimate, threshold_db=SUCCESS_DB):
    """Recovery counts as a success at ``snr >= 60 dB`` (boundary inclusive)."""
    return snr_db(reference, estimate) >= threshold_db


def format_db(value):
    """Render a dB value for CSV/JSON; infinities become ``"inf"``/``"-inf"``."""
    if value is None:
        return ""
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    if math.isnan(value):
        return "nan"
    return f"{value:.6f}"


@dataclass
class RecoveryReport:
    """One solver run on one problem.

    The reference fields (``snr_db``, ``input_snr_db``) are None when there
    is no ground truth, as in the imaging application.
    """

    solver_name: str
    snr_db: float | None
    input_snr_db: float | None
    numerical_rank_l: int
    nnz_e: int
    wall_time_seconds: float
    converged: bool
    n: int = 0
    r0: int = 0
    k0_or_p: float = 0
    seed: int = 0
    error: str | None = None

    CSV_FIELDS = ("solver", "n", "r0", "k0_or_p", "seed", "snr_in_db", "snr_out_db",
                  "rank_est", "nnz_e", "time_s", "converged")

    def row(self):
        """Values keyed by the fixed CSV header, as strings."""
        return {
            "solver": self.solver_name,
            "n": str(self.n),
            "r0": str(self.r0),
            "k0_or_p": repr(self.k0_or_p) if isinstance(self.k0_or_p, float) else str(self.k0_or_p),
            "seed": str(self.seed),
            "snr_in_db": format_db(self.input_snr_db),
            "snr_out_db": format_db(self.snr_db) if self.error is None else "nan",
            "rank_est": str(self.numerical_rank_l),
            "nnz_e": str(self.nnz_e),
            "time_s": f"{self.wall_time_seconds:.6f}",
            "converged": "true" if self.converged else "false",
        }

    def to_json(self):
        """JSON object with the CSV fields; infinite SNRs as the string "inf"."""
        obj = self.row()
        for key in ("n", "r0", "seed", "rank_est", "nnz_e"):
            obj[key] = int(obj[key])
        obj["k0_or_p"] = self.k0_or_p
        obj["time_s"] = self.wall_time_seconds
        obj["converged"] = self.converged
        out_db = None if self.error is not None else self.snr_db
        for key, value in (("snr_in_db", self.input_snr_db), ("snr_out_db", out_db)):
            if value is None:
                obj[key] = None
            elif math.isinf(value):
                obj[key] = format_db(value)
            else:
                obj[key] = value
        if self.error is not None:
            obj["error"] = self.error
        return obj

    def to_dict(self):
        return asdict(self)
