"""Dense matrix helpers, SVD and the thresholding operators.

Matrices are plain 2-D ``float64`` numpy arrays. Everything here is a pure
function: inputs are never modified in place.
"""

from dataclasses import dataclass
import math

import numpy as np
import scipy.linalg

from .errors import ConvergenceFailure, NonFiniteError, ShapeMismatch

HARD = "hard"
SOFT = "soft"
THRESHOLD_MODES = (HARD, SOFT)

# Relative Frobenius tolerance that an exact SVD is expected to reconstruct to.
RECONSTRUCTION_RTOL = 1e-10


def as_matrix(x, name="matrix"):
    """Validate ``x`` as a finite real 2-D matrix and return it as float64.

    1-D input is treated as a single row. NaN/Inf entries are rejected,
    never sanitized.
    """
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ShapeMismatch(f"{name} must be 2-D, got {a.ndim}-D")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeMismatch(f"{name} must have at least one row and column, got {a.shape}")
    if not np.isfinite(a).all():
        bad = np.argwhere(~np.isfinite(a))[0]
        raise NonFiniteError(f"{name} has a non-finite entry at ({bad[0]}, {bad[1]})")
    return a


def frobenius_norm(x):
    """Frobenius norm, scaled by the largest magnitude so tiny or huge entries
    do not underflow or overflow when squared."""
    x = np.asarray(x, dtype=np.float64)
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    if peak == 0.0 or not math.isfinite(peak):
        return peak
    return peak * float(np.linalg.norm(x / peak))


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``x = u @ diag(singular_values) @ vt``.

    ``singular_values`` is non-increasing and non-negative. For an exact SVD
    its length is ``min(m, n)``; truncated factorizations carry fewer.
    """

    u: np.ndarray
    singular_values: np.ndarray
    vt: np.ndarray

    @property
    def rank(self):
        return len(self.singular_values)

    def reconstruct(self, count=None):
        """Rebuild the matrix from the first ``count`` components (all by default)."""
        if count is None:
            count = self.rank
        return (self.u[:, :count] * self.singular_values[:count]) @ self.vt[:count]


def svd(x):
    """Exact thin SVD.

    Uses LAPACK ``gesdd`` and falls back to the slower but more robust
    ``gesvd`` driver. Raises ConvergenceFailure if both fail.
    """
    x = np.asarray(x, dtype=np.float64)
    try:
        u, s, vt = scipy.linalg.svd(x, full_matrices=False, check_finite=False,
                                    lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        try:
            u, s, vt = scipy.linalg.svd(x, full_matrices=False, check_finite=False,
                                        lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise ConvergenceFailure(f"SVD did not converge on {x.shape} matrix") from exc
    return SvdFactors(u, s, vt)


def singular_values(x):
    x = np.asarray(x, dtype=np.float64)
    try:
        return scipy.linalg.svd(x, compute_uv=False, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"SVD did not converge on {x.shape} matrix") from exc


def top_singular_value(x):
    return float(singular_values(x)[0])


def randomized_svd(x, rank, rng, oversample=10, power_iterations=2):
    """Leading ``rank`` singular triplets by a randomized range finder.

    ``power_iterations`` is the accuracy knob: each extra pass sharpens the
    captured subspace by a factor of the spectral gap ratio. Falls back to
    the exact SVD when the requested sketch would not be smaller than the
    matrix.
    """
    m, n = x.shape
    p = min(m, n)
    width = rank + oversample
    if width >= p:
        f = svd(x)
        return SvdFactors(f.u[:, :rank], f.singular_values[:rank], f.vt[:rank])
    omega = rng.standard_normal((n, width))
    q, _ = np.linalg.qr(x @ omega)
    for _ in range(power_iterations):
        q, _ = np.linalg.qr(x.T @ q)
        q, _ = np.linalg.qr(x @ q)
    f = svd(q.T @ x)
    return SvdFactors((q @ f.u)[:, :rank], f.singular_values[:rank], f.vt[:rank])


def leading_svd_above(x, tau, rng, rank_hint=1, oversample=10, power_iterations=2):
    """Randomized SVD that captures every singular value >= ``tau``.

    The rank guess starts at ``rank_hint`` and doubles while the smallest
    computed singular value still reaches ``tau``. Returns the factors
    together with the total number of singular values in the factorization
    (``min(m, n)`` once the exact fallback was used).
    """
    p = min(x.shape)
    rank = max(1, min(rank_hint, p))
    while True:
        f = randomized_svd(x, rank, rng, oversample, power_iterations)
        if rank >= p or f.singular_values[-1] < tau:
            return f
        rank = min(2 * rank, p)


def _shrink(values, tau):
    return np.sign(values) * np.maximum(np.abs(values) - tau, 0.0)


def entry_threshold(x, tau, mode=HARD):
    """Entrywise thresholding.

    Hard mode zeroes entries with ``|x| < tau`` and keeps survivors
    unchanged (``|x| == tau`` survives). Soft mode shrinks magnitudes by
    ``tau`` and clips at zero.
    """
    if tau < 0:
        raise ValueError(f"threshold must be non-negative, got {tau}")
    x = np.asarray(x, dtype=np.float64)
    if mode == HARD:
        return np.where(np.abs(x) < tau, 0.0, x)
    if mode == SOFT:
        return _shrink(x, tau)
    raise ValueError(f"unknown threshold mode {mode!r}")


def threshold_singular_values(s, tau, mode=HARD):
    """Apply the scalar thresholding rule to a vector of singular values."""
    if mode == HARD:
        return np.where(s < tau, 0.0, s)
    if mode == SOFT:
        return np.maximum(s - tau, 0.0)
    raise ValueError(f"unknown threshold mode {mode!r}")


def sv_threshold(x, tau, mode=HARD):
    """Singular value thresholding: SVD, threshold the spectrum, rebuild."""
    if tau < 0:
        raise ValueError(f"threshold must be non-negative, got {tau}")
    f = svd(x)
    s = threshold_singular_values(f.singular_values, tau, mode)
    keep = s > 0
    return (f.u[:, keep] * s[keep]) @ f.vt[keep]


def threshold_schedule(sigma1, alpha, beta, k):
    """Exponentially decaying threshold ``beta * sigma1 * exp(-alpha * k)``."""
    if sigma1 <= 0 or alpha <= 0 or beta <= 0:
        raise ValueError("sigma1, alpha and beta must be positive")
    if k < 0:
        raise ValueError("k must be non-negative")
    return beta * sigma1 * math.exp(-alpha * k)


def truncate_rank(x, r):
    """Best rank-``r`` approximation in Frobenius/spectral norm."""
    x = np.asarray(x, dtype=np.float64)
    if r < 0 or r > min(x.shape):
        raise ValueError(f"rank {r} out of range for shape {x.shape}")
    if r == 0:
        return np.zeros_like(x)
    return svd(x).reconstruct(r)
