"""Inexact augmented Lagrange multiplier baseline for principal component pursuit.

Solves ``min ||L||_* + lambda ||E||_1  s.t.  Y = L + E`` with one
singular-value shrinkage and one entrywise shrinkage per iteration followed
by a dual ascent step and a geometric penalty increase.
"""

from dataclasses import asdict, dataclass
import math

import numpy as np

from .errors import ConvergenceFailure, InvalidConfig, NonFiniteError
from .linalg import as_matrix, entry_threshold, frobenius_norm, svd, top_singular_value
from .solver import Decomposition


def default_lambda(m, n):
    """Standard PCP weight ``1 / sqrt(max(m, n))``."""
    if m < 1 or n < 1:
        raise ValueError("dimensions must be positive")
    return 1.0 / math.sqrt(max(m, n))


@dataclass(frozen=True)
class IalmConfig:
    """IALM parameters. ``lam`` and ``mu0`` default from the input when None."""

    lam: float | None = None
    mu0: float | None = None
    rho: float = 1.5
    tol: float = 1e-7
    max_iterations: int = 1000

    def __post_init__(self):
        if self.lam is not None and not self.lam > 0:
            raise InvalidConfig("lambda", f"must be > 0, got {self.lam}")
        if self.mu0 is not None and not self.mu0 > 0:
            raise InvalidConfig("mu0", f"must be > 0, got {self.mu0}")
        if not self.rho > 1:
            raise InvalidConfig("rho", f"must be > 1, got {self.rho}")
        if not self.tol > 0:
            raise InvalidConfig("tol", f"must be > 0, got {self.tol}")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise InvalidConfig("max_iterations", f"must be an integer >= 1, got {self.max_iterations}")

    def to_dict(self):
        return asdict(self)


def ialm(y, config=None, trace=None):
    """Run IALM on ``y``.

    ``trace``, when a list, receives ``(mu, shrink_input, sparse)`` for every
    iteration so tests can audit the entrywise update.
    """
    y = as_matrix(y, "y")
    config = config or IalmConfig()
    m, n = y.shape
    lam = config.lam if config.lam is not None else default_lambda(m, n)
    y_norm = frobenius_norm(y)
    if y_norm == 0:
        zeros = np.zeros_like(y)
        return Decomposition(zeros, zeros.copy(), 0, True, 0.0, [], solver="ialm")

    sigma1 = top_singular_value(y)
    mu = config.mu0 if config.mu0 is not None else 1.25 / sigma1
    # Dual start scaled so both the spectral and the l_inf/lambda norms are <= 1.
    dual = y / max(sigma1, float(np.abs(y).max()) / lam)
    low = np.zeros_like(y)
    sparse = np.zeros_like(y)
    history = []
    converged = False
    t = 0
    while t < config.max_iterations:
        try:
            f = svd(y - sparse + dual / mu)
        except ConvergenceFailure as exc:
            raise ConvergenceFailure(f"{exc} (iteration {t})") from exc
        s = np.maximum(f.singular_values - 1.0 / mu, 0.0)
        keep = s > 0
        low = (f.u[:, keep] * s[keep]) @ f.vt[keep]
        shrink_input = y - low + dual / mu
        sparse = entry_threshold(shrink_input, lam / mu, mode="soft")
        if trace is not None:
            trace.append((mu, shrink_input, sparse))
        gap = y - low - sparse
        dual = dual + mu * gap
        mu *= config.rho
        t += 1
        if not np.isfinite(low).all() or not np.isfinite(dual).all():
            raise NonFiniteError(f"iterate became non-finite at iteration {t}")
        rel = frobenius_norm(gap) / y_norm
        history.append(rel)
        if rel <= config.tol:
            converged = True
            break

    return Decomposition(
        low_rank=low,
        sparse=sparse,
        outer_iterations=t,
        converged=converged,
        final_residual=history[-1] if history else 0.0,
        residual_history=history,
        solver="ialm",
    )
