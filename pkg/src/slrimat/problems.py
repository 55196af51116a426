"""Seeded synthetic low-rank plus sparse problems.

Random numbers come from numpy's PCG64 ``Generator``; Gaussian draws use its
ziggurat sampler. Independent per-trial streams are derived with
:func:`trial_rng`, which feeds ``(master_seed, *indices)`` into a
``SeedSequence``.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import InvalidSpec
from .linalg import as_matrix

RANDOM_SIGN = "random_sign"
BERNOULLI = "bernoulli"
COHERENT = "coherent"
NOISE_KINDS = (RANDOM_SIGN, BERNOULLI, COHERENT)

_SEED_MASK = (1 << 64) - 1


def make_rng(seed):
    return np.random.Generator(np.random.PCG64(int(seed) & _SEED_MASK))


def trial_rng(master_seed, *indices):
    """Independent stream for one trial, e.g. ``trial_rng(seed, cell, trial)``."""
    entropy = [int(master_seed) & _SEED_MASK, *(int(i) for i in indices)]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def trial_seed(master_seed, *indices):
    """64-bit seed derived the same way as :func:`trial_rng`, for recording."""
    entropy = [int(master_seed) & _SEED_MASK, *(int(i) for i in indices)]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def gen_low_rank(m, n, r0, rng):
    """``A @ B.T`` with ``A`` (m x r0) and ``B`` (n x r0) drawn i.i.d. N(0, 1/n)."""
    if not 1 <= r0 <= min(m, n):
        raise InvalidSpec(f"r0={r0} must be in [1, min(m, n)={min(m, n)}]")
    scale = 1.0 / math.sqrt(n)
    a = rng.standard_normal((m, r0)) * scale
    b = rng.standard_normal((n, r0)) * scale
    return a @ b.T


def _partial_fisher_yates(size, count, rng):
    """First ``count`` positions of a Fisher-Yates shuffle of ``range(size)``."""
    idx = np.arange(size)
    if count == 0:
        return idx[:0]
    picks = rng.integers(np.arange(count), size)
    for i, j in enumerate(picks.tolist()):
        idx[i], idx[j] = idx[j], idx[i]
    return idx[:count]


def gen_sparse_random_sign(m, n, k0, rng):
    """Exactly ``k0`` entries of +-1 on a support drawn uniformly without replacement."""
    if not 0 <= k0 <= m * n:
        raise InvalidSpec(f"k0={k0} must be in [0, m*n={m * n}]")
    support = _partial_fisher_yates(m * n, k0, rng)
    signs = np.where(rng.random(k0) < 0.5, -1.0, 1.0)
    e = np.zeros(m * n)
    e[support] = signs
    return e.reshape(m, n)


def _check_probability(p):
    if not 0.0 <= p <= 1.0:
        raise InvalidSpec(f"p={p} must be in [0, 1]")


def gen_sparse_bernoulli(m, n, p, rng):
    """Each entry 0, -1, +1 with probabilities 1-p, p/2, p/2."""
    _check_probability(p)
    u = rng.random((m, n))
    return np.where(u < p / 2, -1.0, np.where(u < p, 1.0, 0.0))


def gen_sparse_coherent(l_star, p, rng):
    """Bernoulli(p) support whose values are ``sign(l_star)`` (sign(0) = 0)."""
    _check_probability(p)
    l_star = np.asarray(l_star, dtype=np.float64)
    support = rng.random(l_star.shape) < p
    return np.where(support, np.sign(l_star), 0.0)


@dataclass(frozen=True)
class ProblemSpec:
    """What to generate. Random-sign noise takes ``k0``; the other kinds take ``p``."""

    m: int
    n: int
    r0: int
    noise_kind: str = RANDOM_SIGN
    k0: int | None = None
    p: float | None = None

    def validate(self):
        if self.m < 1 or self.n < 1:
            raise InvalidSpec(f"m and n must be >= 1, got {self.m}x{self.n}")
        if not 1 <= self.r0 <= min(self.m, self.n):
            raise InvalidSpec(f"r0={self.r0} must be in [1, {min(self.m, self.n)}]")
        if self.noise_kind not in NOISE_KINDS:
            raise InvalidSpec(f"noise_kind must be one of {NOISE_KINDS}, got {self.noise_kind!r}")
        if self.noise_kind == RANDOM_SIGN:
            if self.k0 is None or self.p is not None:
                raise InvalidSpec("random_sign noise takes k0 and not p")
            if not 0 <= self.k0 <= self.m * self.n:
                raise InvalidSpec(f"k0={self.k0} must be in [0, m*n={self.m * self.n}]")
        else:
            if self.p is None or self.k0 is not None:
                raise InvalidSpec(f"{self.noise_kind} noise takes p and not k0")
            _check_probability(self.p)

    @property
    def k0_or_p(self):
        return self.k0 if self.noise_kind == RANDOM_SIGN else self.p

    def to_dict(self):
        return {"m": self.m, "n": self.n, "r0": self.r0, "noise_kind": self.noise_kind,
                "k0": self.k0, "p": self.p}


@dataclass(frozen=True)
class SyntheticProblem:
    l_star: np.ndarray
    e_star: np.ndarray
    y: np.ndarray
    rank_r0: int
    sparsity_k0: int
    noise_kind: str
    seed: int
    spec: ProblemSpec = None


def make_problem(spec, seed=None, rng=None):
    """Generate ``y = l_star + e_star`` for ``spec``.

    Draw order is fixed (A, B, then the sparse part) so a given seed always
    yields the same triple. Pass ``rng`` to use a caller-derived stream; the
    recorded ``seed`` is then whatever the caller passed.
    """
    spec.validate()
    if rng is None:
        if seed is None:
            raise InvalidSpec("either seed or rng is required")
        rng = make_rng(seed)
    l_star = gen_low_rank(spec.m, spec.n, spec.r0, rng)
    if spec.noise_kind == RANDOM_SIGN:
        e_star = gen_sparse_random_sign(spec.m, spec.n, spec.k0, rng)
    elif spec.noise_kind == BERNOULLI:
        e_star = gen_sparse_bernoulli(spec.m, spec.n, spec.p, rng)
    else:
        e_star = gen_sparse_coherent(l_star, spec.p, rng)
    y = l_star + e_star
    return SyntheticProblem(
        l_star=l_star,
        e_star=e_star,
        y=as_matrix(y, "y"),
        rank_r0=spec.r0,
        sparsity_k0=int(np.count_nonzero(e_star)),
        noise_kind=spec.noise_kind,
        seed=seed,
        spec=spec,
    )
