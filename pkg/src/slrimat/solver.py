"""SLR-IMAT: sparse plus low-rank recovery by iterative adaptive thresholding.

The outer loop lowers two thresholds along the exponential schedule
``exp(-alpha * k)``; at each level the inner loop alternates a singular-value
hard threshold on the low-rank estimate with an entrywise hard threshold on
the residual, keeping ``L + E == Y`` after every step.

With one threshold ``beta * sigma_1(Y) * exp(-alpha * k)`` shared by both
steps, the iteration cannot leave its starting point ``L = Y``: every entry
of the part removed by the spectral step is bounded by that part's spectral
norm, hence by the threshold itself, so the entry step never fires. The
thresholds used here therefore live on their own scales:

* entry threshold ``entry_scale * max|Y| * exp(-alpha * k)``, which sweeps
  the entries of ``Y`` from the largest down;
* spectral threshold ``beta * sigma_1(A_k) * exp(-alpha * k)`` with ``A_k``
  the current low-rank estimate (``Y`` itself with ``anchor="input"``), but
  never below ``spectral_floor`` times the entry threshold. The floor keeps
  corruption that the entry step has not reached yet from being absorbed
  into the low-rank part, where it would shield itself from later steps.

``entry_scale=None`` restores the single shared threshold (the floor is then
unused); with ``anchor="input"`` that is the unmodified recursion.
"""

from dataclasses import asdict, dataclass, field
import logging
import math

import numpy as np

from .errors import ConvergenceFailure, InvalidConfig, NonFiniteError
from .linalg import (
    HARD,
    THRESHOLD_MODES,
    as_matrix,
    entry_threshold,
    frobenius_norm,
    leading_svd_above,
    svd,
    threshold_schedule,
    threshold_singular_values,
)

log = logging.getLogger(__name__)

EXACT = "exact"
TRUNCATED = "truncated"
SVD_STRATEGIES = (EXACT, TRUNCATED)
ANCHORS = ("iterate", "input")

# Singular values below this fraction of sigma_1(Y) count as numerically zero.
RANK_FLOOR = 1e-9


@dataclass(frozen=True)
class SolverConfig:
    """Parameters of :func:`slr_imat`.

    ``outer_max`` caps the number of threshold levels and ``inner_count``
    the alternating steps per level. A level ends early once a step moves the
    iterate by at most ``inner_tolerance * ||Y||_F`` (0 means only an
    unchanged iterate does). The stop threshold is ``epsilon`` when given,
    otherwise ``relative_tolerance * ||Y||_F``.
    """

    alpha: float = 0.2
    beta: float = 1.0
    epsilon: float | None = None
    relative_tolerance: float = 1e-7
    outer_max: int = 200
    inner_count: int = 10
    inner_tolerance: float = 1e-6
    svd_strategy: str = EXACT
    threshold_mode: str = HARD
    entry_scale: float | None = 0.8
    spectral_floor: float | None = 5.0
    anchor: str = "iterate"
    power_iterations: int = 2
    seed: int = 0

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidConfig("alpha", f"must be > 0, got {self.alpha}")
        if not self.beta > 0:
            raise InvalidConfig("beta", f"must be > 0, got {self.beta}")
        if self.epsilon is not None and not self.epsilon > 0:
            raise InvalidConfig("epsilon", f"must be > 0, got {self.epsilon}")
        if not self.relative_tolerance > 0:
            raise InvalidConfig("relative_tolerance", f"must be > 0, got {self.relative_tolerance}")
        if int(self.outer_max) != self.outer_max or self.outer_max < 1:
            raise InvalidConfig("outer_max", f"must be an integer >= 1, got {self.outer_max}")
        if int(self.inner_count) != self.inner_count or self.inner_count < 1:
            raise InvalidConfig("inner_count", f"must be an integer >= 1, got {self.inner_count}")
        if self.svd_strategy not in SVD_STRATEGIES:
            raise InvalidConfig("svd_strategy", f"must be one of {SVD_STRATEGIES}, got {self.svd_strategy!r}")
        if self.threshold_mode not in THRESHOLD_MODES:
            raise InvalidConfig("threshold_mode", f"must be one of {THRESHOLD_MODES}, got {self.threshold_mode!r}")
        if self.entry_scale is not None and not self.entry_scale > 0:
            raise InvalidConfig("entry_scale", f"must be > 0 or None, got {self.entry_scale}")
        if self.spectral_floor is not None and not self.spectral_floor >= 0:
            raise InvalidConfig("spectral_floor", f"must be >= 0 or None, got {self.spectral_floor}")
        if not self.inner_tolerance >= 0:
            raise InvalidConfig("inner_tolerance", f"must be >= 0, got {self.inner_tolerance}")
        if self.anchor not in ANCHORS:
            raise InvalidConfig("anchor", f"must be one of {ANCHORS}, got {self.anchor!r}")
        if self.power_iterations < 0:
            raise InvalidConfig("power_iterations", "must be >= 0")

    def stop_threshold(self, y_norm):
        if self.epsilon is not None:
            return self.epsilon
        return self.relative_tolerance * y_norm

    def to_dict(self):
        return asdict(self)


def default_config(y_shape):
    """Calibrated defaults for an ``m x n`` input.

    The values come from ``scripts/calibrate.py``; see the README for the
    calibration table.
    """
    m, n = y_shape
    if m < 1 or n < 1:
        raise InvalidConfig("shape", f"must be positive, got {y_shape}")
    return SolverConfig()


@dataclass
class Decomposition:
    """Result of a decomposition ``Y ~ low_rank + sparse``.

    ``residual_history`` holds the stop statistic after each outer step;
    ``converged`` is True only when the loop ended on that statistic.
    """

    low_rank: np.ndarray
    sparse: np.ndarray
    outer_iterations: int
    converged: bool
    final_residual: float
    residual_history: list = field(default_factory=list)
    thresholds: list = field(default_factory=list)
    entry_thresholds: list = field(default_factory=list)
    solver: str = "slr_imat"


class _Spectral:
    """Singular-value step for one input, exact or randomized."""

    def __init__(self, config):
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        self.rank_hint = 1

    def factor(self, x, tau=math.inf):
        """Factorization holding at least every singular value >= ``tau``.

        With ``tau=inf`` the truncated strategy returns just its current rank
        guess, which always contains sigma_1.
        """
        if self.config.svd_strategy == EXACT:
            return svd(x)
        return leading_svd_above(x, tau, self.rng, rank_hint=self.rank_hint + 1,
                                 power_iterations=self.config.power_iterations)

    def complete(self, f, x, tau):
        """Extend a truncated factorization of ``x`` until it reaches below ``tau``."""
        if self.config.svd_strategy == EXACT or f.rank >= min(x.shape) or f.singular_values[-1] < tau:
            return f
        return self.factor(x, tau)

    def threshold(self, f, tau):
        """Return (thresholded low-rank matrix, kept count, spectrum seen).

        Under the truncated strategy the spectrum is only the computed head,
        so rank figures derived from it are lower bounds.
        """
        s = threshold_singular_values(f.singular_values, tau, self.config.threshold_mode)
        keep = s > 0
        kept = int(keep.sum())
        self.rank_hint = max(kept, 1)
        return (f.u[:, keep] * s[keep]) @ f.vt[keep], kept, f.singular_values


def slr_imat(y, config=None):
    """Decompose ``y`` into low-rank plus sparse parts.

    Parameters
    ----------
    y : array_like, shape (m, n)
        Finite real data matrix.
    config : SolverConfig, optional
        Defaults to :func:`default_config`.

    Returns
    -------
    Decomposition
        ``sparse`` is the entry-thresholded state of the last inner step and
        ``low_rank`` is ``y - sparse``.

    Notes
    -----
    The stop test ``||L_k - L_{k-1}||_F <= eps`` is only honoured once the
    spectral step keeps every numerically nonzero singular value of the
    iterate. Before that the iterate can sit still for a few levels (nothing
    kept yet, or a partial rank whose inner loop has settled) only because the
    threshold has not come down to the next singular value.

    An inner step that moves the iterate by no more than
    ``inner_tolerance * ||Y||_F`` ends its level early.
    """
    y = as_matrix(y, "y")
    if config is None:
        config = default_config(y.shape)
    y_norm = frobenius_norm(y)
    y_peak = float(np.abs(y).max())
    eps = config.stop_threshold(y_norm)
    inner_eps = config.inner_tolerance * y_norm
    sigma_y = float(svd(y).singular_values[0])
    floor = RANK_FLOOR * sigma_y
    spectral = _Spectral(config)

    low = y.copy()
    prev = y
    sparse = np.zeros_like(y)
    history, taus, entry_taus = [], [], []
    residual = math.inf
    converged = False
    k = 0
    while k < config.outer_max:
        try:
            # sigma_1 of the anchor comes from the factorization the first
            # inner step thresholds, so tau_0 == sigma_1 keeps that component.
            f = spectral.factor(low)
            sigma1 = float(f.singular_values[0]) if config.anchor == "iterate" else sigma_y
            tau = threshold_schedule(sigma1, config.alpha, config.beta, k) if sigma1 > 0 else 0.0
            if config.entry_scale is None:
                tau_e = tau
            else:
                tau_e = config.entry_scale * y_peak * math.exp(-config.alpha * k)
                if config.spectral_floor:
                    tau = max(tau, config.spectral_floor * tau_e)
            taus.append(tau)
            entry_taus.append(tau_e)

            for i in range(config.inner_count):
                f = spectral.complete(f, low, tau) if i == 0 else spectral.factor(low, tau)
                part, kept, spectrum = spectral.threshold(f, tau)
                sparse = entry_threshold(y - part, tau_e, config.threshold_mode)
                step = y - sparse
                moved = frobenius_norm(step - low)
                low = step
                if moved <= inner_eps:
                    break
        except ConvergenceFailure as exc:
            raise ConvergenceFailure(f"{exc} (outer iteration {k})") from exc

        if not np.isfinite(low).all():
            raise NonFiniteError(f"iterate became non-finite at outer iteration {k}")
        k += 1
        residual = frobenius_norm(low - prev)
        history.append(residual)
        settled = kept >= int((spectrum > floor).sum())
        log.debug("outer %d tau=%.3g tau_e=%.3g kept=%d nnz=%d residual=%.3g%s",
                  k, tau, tau_e, kept, int(np.count_nonzero(sparse)), residual,
                  "" if settled else " (rank not settled)")
        if residual <= eps and settled:
            converged = True
            break
        prev = low

    return Decomposition(
        low_rank=low,
        sparse=sparse,
        outer_iterations=k,
        converged=converged,
        final_residual=residual,
        residual_history=history,
        thresholds=taus,
        entry_thresholds=entry_taus,
        solver="slr_imat",
    )
