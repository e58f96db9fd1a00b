import itertools

import numpy as np
import pytest

from srrr.exceptions import DegenerateDesignError, EmptyModelError, ParameterError
from srrr.matrix_core import ols_fit
from srrr.patterns import (
    StructuralPattern,
    candidate_from_matrix,
    extract_pattern,
    factor_design,
    reduced_rank_refit,
    restricted_estimate,
    restricted_estimate_pinv,
)


def test_extract_full_rank_block_uses_identity():
    B = np.zeros((4, 2))
    B[:2] = np.eye(2)
    pat = extract_pattern(B)
    assert pat.support == (0, 1)
    assert pat.rank == 2
    np.testing.assert_array_equal(pat.U, np.eye(2))


def test_extract_rank_one_block():
    B = np.zeros((5, 2))
    B[0] = B[1] = [1.0, 1.0]
    pat = extract_pattern(B)
    assert pat.support == (0, 1) and pat.rank == 1
    np.testing.assert_allclose(pat.U @ pat.U.T, np.full((2, 2), 0.5), atol=1e-12)


def test_extract_zero_raises():
    with pytest.raises(EmptyModelError):
        extract_pattern(np.zeros((3, 2)))


def test_pattern_equality_ignores_rotation():
    U = np.array([[1.0], [1.0]]) / np.sqrt(2)
    a = StructuralPattern(4, (0, 2), U)
    b = StructuralPattern(4, (0, 2), -U)
    assert a == b
    assert a != StructuralPattern(4, (0, 3), U)


def test_factor_design_examples():
    X = np.random.default_rng(1).standard_normal((6, 3))
    np.testing.assert_array_equal(factor_design(X, StructuralPattern.full(3)), X)
    U = np.array([[1.0], [1.0]]) / np.sqrt(2)
    z = factor_design(np.eye(4), StructuralPattern(4, (0, 1), U))
    np.testing.assert_allclose(z[:, 0], [1 / np.sqrt(2), 1 / np.sqrt(2), 0, 0])


def test_factor_design_row_permutation_equivariance():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((7, 4))
    pat = StructuralPattern(4, (1, 3), np.eye(2))
    perm = rng.permutation(7)
    np.testing.assert_array_equal(factor_design(X[perm], pat), factor_design(X, pat)[perm])


def test_restricted_estimate_noiseless_interpolation():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((12, 5))
    pat = StructuralPattern(5, (0, 2, 3), np.linalg.qr(rng.standard_normal((3, 2)))[0])
    C0 = rng.standard_normal((2, 4))
    Y = factor_design(X, pat) @ C0
    est = restricted_estimate(X, Y, pat)
    np.testing.assert_allclose(est.B, pat.SU @ C0, atol=1e-10)


def test_restricted_estimate_full_pattern_is_ols():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((10, 3))
    Y = rng.standard_normal((10, 2))
    est = restricted_estimate(X, Y, StructuralPattern.full(3))
    np.testing.assert_allclose(est.B, np.linalg.lstsq(X, Y, rcond=None)[0], atol=1e-12)


def test_restricted_estimate_orthogonal_cross_term_is_zero():
    X = np.zeros((4, 2))
    X[0, 0] = X[1, 1] = 1.0
    Y = X[:, [0]] * 3.0
    est = restricted_estimate(X, Y, StructuralPattern(2, (1,), np.eye(1)))
    np.testing.assert_allclose(est.B, np.zeros((2, 1)), atol=1e-15)


def test_restricted_estimate_degenerate_raises():
    X = np.ones((6, 2))
    with pytest.raises(DegenerateDesignError):
        restricted_estimate(X, np.ones((6, 1)), StructuralPattern.full(2))


def test_pinv_variant_matches_and_survives_degeneracy():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((9, 4))
    Y = rng.standard_normal((9, 2))
    pat = StructuralPattern(4, (0, 1, 3), np.eye(3))
    np.testing.assert_allclose(restricted_estimate_pinv(X, Y, pat), restricted_estimate(X, Y, pat).B, atol=1e-10)
    X[:, 1] = X[:, 0]
    B = restricted_estimate_pinv(X, Y, pat)
    assert np.all(np.isfinite(B))


def test_reduced_rank_full_rank_equals_restricted_ols():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((10, 4))
    Y = rng.standard_normal((10, 3))
    a = reduced_rank_refit(X, Y, (0, 2), 2)
    b = restricted_estimate(X, Y, StructuralPattern(4, (0, 2), np.eye(2)))
    np.testing.assert_allclose(a.B, b.B, atol=1e-12)


def test_reduced_rank_single_response_is_ols():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((10, 4))
    y = rng.standard_normal((10, 1))
    a = reduced_rank_refit(X, y, (1, 2, 3), 1)
    B = np.zeros((4, 1))
    B[[1, 2, 3]] = ols_fit(X[:, [1, 2, 3]], y)
    np.testing.assert_allclose(a.B, B, atol=1e-12)


def _rank1_grid_oracle(XJ, Y, steps=721):
    # B_J = c v' with unit v (m = 3 sphere grid, m = 2 circle grid)
    m = Y.shape[1]
    best = np.inf
    if m == 2:
        thetas = np.linspace(0, np.pi, steps)
        dirs = np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
    else:
        th, ph = np.meshgrid(np.linspace(0, np.pi, steps // 4), np.linspace(0, np.pi, steps // 4))
        dirs = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], -1).reshape(-1, 3)
    for v in dirs:
        c = np.linalg.lstsq(XJ, Y @ v, rcond=None)[0]
        best = min(best, float(np.sum((Y - np.outer(XJ @ c, v)) ** 2)))
    return best


def test_reduced_rank_tiny_instance_matches_grid():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((6, 3))
    Y = rng.standard_normal((6, 3))
    fit = reduced_rank_refit(X, Y, (0, 2), 1)
    grid = _rank1_grid_oracle(X[:, [0, 2]], Y, steps=1200)
    # a grid can only overestimate the minimum
    assert fit.rss(X, Y) <= grid + 1e-9
    assert grid - fit.rss(X, Y) < 1e-3


def test_reduced_rank_parameter_errors():
    X = np.random.default_rng(9).standard_normal((6, 3))
    Y = np.ones((6, 2))
    with pytest.raises(ParameterError):
        reduced_rank_refit(X, Y, (0, 1), 3)
    with pytest.raises(ParameterError):
        reduced_rank_refit(X, Y, (), 1)
    Xd = X.copy()
    Xd[:, 1] = Xd[:, 0]
    with pytest.raises(DegenerateDesignError):
        reduced_rank_refit(Xd, Y, (0, 1), 1)


def test_training_error_monotone_in_rank():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((15, 5))
    Y = rng.standard_normal((15, 4))
    for support in itertools.combinations(range(5), 3):
        errs = [reduced_rank_refit(X, Y, support, r).rss(X, Y) for r in (1, 2, 3)]
        assert errs[0] >= errs[1] - 1e-10 >= errs[2] - 2e-10


def test_candidate_invariants():
    rng = np.random.default_rng(11)
    B = np.zeros((6, 3))
    B[[1, 4]] = np.outer(rng.standard_normal(2), rng.standard_normal(3))
    c = candidate_from_matrix(B)
    assert c.support == (1, 4) and c.J == 2 and c.r == 1
