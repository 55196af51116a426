import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

import slrimat.solver as solver_mod
from slrimat.errors import ConvergenceFailure, InvalidConfig, NonFiniteError
from slrimat.metrics import snr_db
from slrimat.problems import ProblemSpec, make_problem
from slrimat.solver import SolverConfig, default_config, slr_imat

LITERAL = SolverConfig(beta=1.0, entry_scale=None, anchor="input", inner_count=20)
FAST = SolverConfig(outer_max=40)

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
small = st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(
    lambda s: arrays(np.float64, s, elements=finite))


def problem(n=60, r0=3, k0=None, seed=0, m=None):
    m = m or n
    k0 = round(0.05 * m * n) if k0 is None else k0
    return make_problem(ProblemSpec(m=m, n=n, r0=r0, k0=k0), seed=seed)


def test_default_config_is_valid_and_hard():
    for shape in [(1, 1), (10, 3), (200, 200)]:
        c = default_config(shape)
        assert c.alpha > 0 and c.beta > 0 and c.outer_max >= 1 and c.inner_count >= 1
        assert c.threshold_mode == "hard"
    with pytest.raises(InvalidConfig):
        default_config((0, 3))


@pytest.mark.parametrize("field, value", [
    ("alpha", 0.0), ("beta", -1.0), ("epsilon", 0.0), ("relative_tolerance", -1e-7),
    ("outer_max", 0), ("inner_count", 0), ("inner_count", 2.5), ("svd_strategy", "lanczos"),
    ("threshold_mode", "medium"), ("entry_scale", 0.0), ("spectral_floor", -1.0),
    ("anchor", "nowhere"), ("inner_tolerance", -1.0), ("inner_tolerance", float("nan")),
])
def test_invalid_config_names_field(field, value):
    with pytest.raises(InvalidConfig) as info:
        SolverConfig(**{field: value})
    assert info.value.field == field


def test_zero_input():
    d = slr_imat(np.zeros((4, 3)))
    assert d.converged and d.outer_iterations == 1
    assert not d.low_rank.any() and not d.sparse.any()


def test_diag_example_with_shared_threshold():
    # diag(5, 3, 0, 0) is both rank 2 and 2-sparse; only the shared-threshold
    # recursion is bound to read it as all low-rank.
    y = np.diag([5.0, 3.0, 0.0, 0.0])
    d = slr_imat(y, LITERAL)
    assert snr_db(y, d.low_rank) >= 100
    assert np.linalg.norm(d.sparse) <= 1e-12


def test_clean_incoherent_low_rank_passes_through():
    rng = np.random.default_rng(3)
    y = rng.standard_normal((30, 2)) @ rng.standard_normal((2, 20))
    d = slr_imat(y)
    assert snr_db(y, d.low_rank) >= 100
    assert np.linalg.norm(d.sparse) <= 1e-5 * np.linalg.norm(y)


def test_shared_threshold_stalls_at_input():
    # The removed part never has an entry above the shared threshold, so the
    # unmodified recursion returns Y untouched.
    p = problem(n=40, r0=2)
    d = slr_imat(p.y, LITERAL)
    assert d.converged
    np.testing.assert_array_equal(d.low_rank, p.y)


def test_recovers_small_random_problem():
    p = problem(n=60, r0=3)
    d = slr_imat(p.y)
    assert d.converged
    assert snr_db(p.l_star, d.low_rank) >= 100


def test_recovers_non_square_problem():
    p = problem(m=90, n=50, r0=3)
    d = slr_imat(p.y)
    assert snr_db(p.l_star, d.low_rank) >= 100


def test_truncated_strategy_recovers():
    p = problem(n=100, r0=5)
    d = slr_imat(p.y, SolverConfig(svd_strategy="truncated"))
    assert snr_db(p.l_star, d.low_rank) >= 100


def test_diagnostics_shape_and_stop_rule():
    p = problem()
    cfg = SolverConfig()
    d = slr_imat(p.y, cfg)
    assert len(d.residual_history) == d.outer_iterations
    assert len(d.thresholds) == len(d.entry_thresholds) == d.outer_iterations
    assert d.converged
    assert d.residual_history[-1] <= cfg.stop_threshold(np.linalg.norm(p.y))
    assert d.final_residual == d.residual_history[-1]


def test_entry_thresholds_follow_schedule():
    p = problem()
    cfg = SolverConfig()
    d = slr_imat(p.y, cfg)
    e = np.array(d.entry_thresholds)
    assert e[0] == pytest.approx(cfg.entry_scale * np.abs(p.y).max())
    np.testing.assert_allclose(e[1:] / e[:-1], math.exp(-cfg.alpha), rtol=1e-12)
    assert np.all(np.array(d.thresholds) >= cfg.spectral_floor * e * (1 - 1e-12))


def test_outer_cap_reports_not_converged():
    p = problem()
    d = slr_imat(p.y, SolverConfig(outer_max=3))
    assert d.outer_iterations == 3 and not d.converged


def test_determinism_bit_for_bit():
    p = problem(seed=5)
    a, b = slr_imat(p.y), slr_imat(p.y)
    np.testing.assert_array_equal(a.low_rank, b.low_rank)
    np.testing.assert_array_equal(a.sparse, b.sparse)
    assert a.residual_history == b.residual_history


@pytest.mark.parametrize("c", [-3.7, 0.01, 250.0])
def test_scale_equivariance(c):
    p = problem(seed=2)
    a = slr_imat(p.y)
    b = slr_imat(c * p.y)
    for x, y in ((a.low_rank, b.low_rank), (a.sparse, b.sparse)):
        assert np.linalg.norm(c * x - y) <= 1e-9 * np.linalg.norm(c * p.y)


def test_scale_equivariance_with_absolute_epsilon():
    p = problem(seed=4)
    eps = 1e-7 * np.linalg.norm(p.y)
    a = slr_imat(p.y, SolverConfig(epsilon=eps))
    b = slr_imat(8.5 * p.y, SolverConfig(epsilon=8.5 * eps))
    assert np.linalg.norm(8.5 * a.low_rank - b.low_rank) <= 1e-9 * np.linalg.norm(8.5 * p.y)


@settings(max_examples=60, deadline=None)
@given(small)
def test_conservation_property(y):
    d = slr_imat(y, FAST)
    assert np.linalg.norm(d.low_rank + d.sparse - y) <= 1e-12 * np.linalg.norm(y)


@settings(max_examples=60, deadline=None)
@given(small, st.sampled_from([SolverConfig(outer_max=40), LITERAL, SolverConfig(outer_max=40, threshold_mode="soft")]))
def test_sparsity_structure_property(y, cfg):
    d = slr_imat(y, cfg)
    nz = d.sparse[d.sparse != 0]
    if cfg.threshold_mode == "hard":
        assert np.all(np.abs(nz) >= d.entry_thresholds[-1])
    assert len(d.residual_history) == d.outer_iterations
    if d.converged:
        assert d.residual_history[-1] <= cfg.stop_threshold(np.linalg.norm(y))


def test_sparsity_structure_on_problem():
    p = problem(seed=7)
    d = slr_imat(p.y)
    nz = d.sparse[d.sparse != 0]
    assert nz.size > 0
    assert np.all(np.abs(nz) >= d.entry_thresholds[-1])


def test_non_finite_input_rejected():
    y = np.ones((3, 3))
    y[2, 1] = np.nan
    with pytest.raises(NonFiniteError):
        slr_imat(y)


def test_svd_failure_carries_iteration(monkeypatch):
    def fail(self, x, tau=math.inf):
        raise ConvergenceFailure("SVD did not converge")

    monkeypatch.setattr(solver_mod._Spectral, "factor", fail)
    with pytest.raises(ConvergenceFailure, match="outer iteration 0"):
        slr_imat(np.eye(3))
