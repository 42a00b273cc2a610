"""Tests for matrix recovery by singular value thresholding."""

import numpy as np
import pytest

from gradspace.completion import RevealedEntries, SvtParams, reveal_uniform, svt_complete
from gradspace.core import Hyperrectangle, JacobianSamples, detect_subspace, subspace_distance
from gradspace.util import make_rng


def low_rank_matrix(rows, cols, singular_values, seed):
    rng = make_rng(seed)
    rank = len(singular_values)
    U = np.linalg.qr(rng.standard_normal((rows, rank)))[0]
    V = np.linalg.qr(rng.standard_normal((cols, rank)))[0]
    return (U * np.asarray(singular_values, dtype=float)) @ V.T


class TestRevealUniform:
    def test_full_reveal(self):
        J = make_rng(60).standard_normal((8, 11))
        observed = reveal_uniform(J, 1.0, make_rng(61))
        assert observed.count == 8 * 11
        dense = np.zeros_like(J)
        dense[observed.rows, observed.cols] = observed.values
        np.testing.assert_array_equal(dense, J)

    def test_binomial_count(self):
        # oracle: binomial statistics for a Bernoulli(0.5) mask over 10^4 entries
        J = np.ones((100, 100))
        observed = reveal_uniform(J, 0.5, make_rng(62))
        n, p = J.size, 0.5
        three_sigma = 3 * np.sqrt(n * p * (1 - p))
        assert abs(observed.count - n * p) <= three_sigma

    def test_deterministic_mask(self):
        J = make_rng(63).standard_normal((20, 30))
        o1 = reveal_uniform(J, 0.3, make_rng(64))
        o2 = reveal_uniform(J, 0.3, make_rng(64))
        np.testing.assert_array_equal(o1.rows, o2.rows)
        np.testing.assert_array_equal(o1.cols, o2.cols)

    def test_rejects_bad_gamma(self):
        J = np.ones((2, 2))
        with pytest.raises(ValueError):
            reveal_uniform(J, 0.0, make_rng(65))
        with pytest.raises(ValueError):
            reveal_uniform(J, 1.1, make_rng(65))

    def test_warns_on_empty_row(self):
        with pytest.warns(RuntimeWarning, match="no revealed entry"):
            RevealedEntries((3, 2), np.array([0, 0]), np.array([0, 1]), np.ones(2))

    def test_rejects_duplicates_and_out_of_range(self):
        with pytest.raises(ValueError, match="duplicate"):
            RevealedEntries((2, 2), np.array([0, 0]), np.array([1, 1]), np.ones(2))
        with pytest.raises(ValueError, match="out of range"):
            RevealedEntries((2, 2), np.array([2]), np.array([0]), np.ones(1))


class TestSvtComplete:
    def test_fully_revealed_rank_one(self):
        # oracle: exact SVD of the complete matrix
        rng = make_rng(66)
        u = 10.0 * rng.standard_normal(40)
        v = 10.0 * rng.standard_normal(60)
        J = np.outer(u, v)  # spectral norm ~ ||u|| ||v|| >> tau
        assert np.linalg.norm(J, 2) > 10 * 100.0
        observed = reveal_uniform(J, 1.0, make_rng(67))
        result = svt_complete(observed, SvtParams())
        u_true = np.linalg.svd(J, full_matrices=False)[0][:, 0]
        err = min(
            np.linalg.norm(result.left_vectors[:, 0] - u_true),
            np.linalg.norm(result.left_vectors[:, 0] + u_true),
        )
        assert err < 1e-3

    def test_all_zero_values(self):
        observed = RevealedEntries((5, 7), np.array([1, 2]), np.array([3, 4]), np.zeros(2))
        result = svt_complete(observed)
        assert result.rank == 0
        assert result.residual == 0.0
        assert result.converged

    def test_recovery_improves_with_reveal_fraction(self):
        J = low_rank_matrix(100, 400, np.linspace(800, 400, 5), seed=68)
        truth = np.linalg.svd(J, full_matrices=False)[0][:, :5]
        rng = make_rng(69)
        errors = {}
        for gamma in (0.1, 0.5, 0.9):
            observed = reveal_uniform(J, gamma, rng)
            result = svt_complete(observed)
            if result.rank >= 5:
                errors[gamma] = subspace_distance(result.left_vectors[:, :5], truth)
            else:
                errors[gamma] = 1.0
        assert errors[0.9] < errors[0.1]
        assert errors[0.9] < 1e-2

    def test_sample_count_economy(self):
        # rank-3 recovery from about 3.8 * rank * (rows + cols) entries; the
        # nuclear-norm weight follows the 5*sqrt(rows*cols) scaling rule so the
        # low-rank bias is strong enough at this reveal budget
        J = low_rank_matrix(60, 200, [500.0, 400.0, 300.0], seed=70)
        observed = reveal_uniform(J, 0.25, make_rng(71))
        budget = 3.8 * 3 * (60 + 200)
        assert observed.count <= 1.2 * budget
        params = SvtParams(tau=3000.0, delta=2.0, tol=1e-3, max_iter=4000)
        result = svt_complete(observed, params)
        assert result.converged
        truth = np.linalg.svd(J, full_matrices=False)[0][:, :3]
        assert result.rank >= 3
        assert subspace_distance(result.left_vectors[:, :3], truth) < 0.05

    def test_residual_matches_independent_recomputation(self):
        J = low_rank_matrix(30, 50, [300.0, 200.0], seed=72)
        observed = reveal_uniform(J, 0.6, make_rng(73))
        result = svt_complete(observed, SvtParams(max_iter=5000))
        assert result.converged
        X = (result.left_vectors * result.singular_values) @ result.right_vectors.T
        recomputed = np.linalg.norm(
            X[observed.rows, observed.cols] - observed.values
        ) / np.linalg.norm(observed.values)
        assert abs(result.residual - recomputed) <= 1e-12

    def test_residual_recomputation_holds_even_unconverged(self):
        J = low_rank_matrix(30, 50, [300.0, 200.0], seed=72)
        observed = reveal_uniform(J, 0.6, make_rng(73))
        with pytest.warns(RuntimeWarning, match="max_iter"):
            result = svt_complete(observed, SvtParams(max_iter=50))
        X = (result.left_vectors * result.singular_values) @ result.right_vectors.T
        recomputed = np.linalg.norm(
            X[observed.rows, observed.cols] - observed.values
        ) / np.linalg.norm(observed.values)
        assert abs(result.residual - recomputed) <= 1e-12

    def test_revealed_entries_reproduced_within_tolerance(self):
        params = SvtParams(max_iter=5000)
        J = low_rank_matrix(40, 80, [400.0, 300.0, 200.0], seed=74)
        observed = reveal_uniform(J, 0.7, make_rng(75))
        result = svt_complete(observed, params)
        assert result.converged
        X = (result.left_vectors * result.singular_values) @ result.right_vectors.T
        max_err = np.max(np.abs(X[observed.rows, observed.cols] - observed.values))
        assert max_err <= params.tol * np.linalg.norm(observed.values)

    def test_factors_orthonormal_and_descending(self):
        J = low_rank_matrix(30, 45, [350.0, 250.0, 150.0], seed=76)
        observed = reveal_uniform(J, 0.8, make_rng(77))
        result = svt_complete(observed)
        r = result.rank
        np.testing.assert_allclose(
            result.left_vectors.T @ result.left_vectors, np.eye(r), atol=1e-8
        )
        np.testing.assert_allclose(
            result.right_vectors.T @ result.right_vectors, np.eye(r), atol=1e-8
        )
        assert np.all(result.singular_values > 0)
        assert np.all(np.diff(result.singular_values) <= 0)

    def test_agreement_with_gradient_subspace_detection(self):
        # fully revealed gradient matrix: the recovered left vectors span the
        # same subspace as the eigenvectors found by the detection path
        rng = make_rng(78)
        d, k = 12, 40
        box = Hyperrectangle.cube(d, 1.0)
        J = low_rank_matrix(d, k, [900.0, 600.0, 300.0], seed=79)
        samples = JacobianSamples(box.sample(rng, k), J)
        sub = detect_subspace(samples, box)
        observed = reveal_uniform(J, 1.0, make_rng(80))
        result = svt_complete(observed)
        assert result.rank >= 3
        dist = subspace_distance(result.left_vectors[:, :3], sub.basis_a[:, :3])
        assert dist < 1e-6

    def test_eps_early_exit(self):
        # with a huge eps, the first iterate already satisfies the noise bound
        J = low_rank_matrix(20, 30, [500.0], seed=81)
        observed = reveal_uniform(J, 1.0, make_rng(82))
        result = svt_complete(observed, SvtParams(eps=1e9))
        assert result.converged
        assert result.iterations == 1

    def test_max_iter_flags_non_convergence(self):
        J = low_rank_matrix(40, 60, [300.0, 200.0], seed=83)
        observed = reveal_uniform(J, 0.5, make_rng(84))
        with pytest.warns(RuntimeWarning, match="max_iter"):
            result = svt_complete(observed, SvtParams(max_iter=2))
        assert not result.converged

    def test_rejects_empty_observation(self):
        with pytest.warns(RuntimeWarning, match="no revealed entry"):
            observed = RevealedEntries.from_triples((3, 3), [])
        with pytest.raises(ValueError):
            svt_complete(observed)


class TestSvtParams:
    def test_defaults(self):
        p = SvtParams()
        assert (p.tau, p.delta, p.tol, p.eps, p.max_iter) == (100.0, 1.0, 1e-4, 1e-6, 1000)

    def test_rejects_bad_values(self):
        with pytest.raises(ValueError):
            SvtParams(tau=0.0)
        with pytest.raises(ValueError):
            SvtParams(delta=-1.0)
        with pytest.raises(ValueError):
            SvtParams(max_iter=0)
