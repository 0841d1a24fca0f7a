"""
Tests for importance weights, the ranking matrix and the ranking losses
"""

import itertools

import numpy as np
import pytest

from src import noise_weights
from src.data_stream import NoiseSpec
from src.errors import ShapeError
from src.noise_weights import OmegaMatrix


def _random_labels(rng, N, q):
    return np.where(rng.random((N, q)) < 0.4, 1.0, -1.0)


def exact_expectation(truth, spec, value):
    """Sum of value(observed) weighted by the probability of every joint flip outcome of one instance"""
    q = truth.shape[0]
    total = 0.0
    for flips in itertools.product([False, True], repeat=q):
        flips = np.array(flips)
        rates = np.where(truth > 0, spec.rho_plus, spec.rho_minus)
        probability = float(np.prod(np.where(flips, rates, 1.0 - rates)))
        observed = np.where(flips, -truth, truth)
        total += probability * value(observed)
    return total


class TestOmega:

    def test_clean_labels_give_unit_weights(self):
        rng = np.random.default_rng(0)
        Y = _random_labels(rng, 10, 4)
        omega = noise_weights.compute_omega(rng.uniform(0.05, 0.95, (10, 4)), Y, NoiseSpec.clean(4))
        np.testing.assert_allclose(omega.values, 1.0)

    def test_hand_value(self):
        spec = NoiseSpec(np.array([0.3]), np.array([0.2]))
        omega = noise_weights.compute_omega(np.array([[0.8]]), np.array([[1.0]]), spec)
        np.testing.assert_allclose(omega.values, [[1.5]])

    def test_negative_clamped_to_zero(self):
        spec = NoiseSpec(np.array([0.3]), np.array([0.2]))
        omega = noise_weights.compute_omega(np.array([[0.1]]), np.array([[1.0]]), spec)
        assert omega.values[0, 0] == 0.0

    def test_cap(self):
        spec = NoiseSpec(np.array([0.49]), np.array([0.49]))
        omega = noise_weights.compute_omega(np.array([[0.95]]), np.array([[-1.0]]), spec, clamp_max=10.0)
        assert omega.values[0, 0] == 10.0

    def test_unclamped_keeps_sign(self):
        spec = NoiseSpec(np.array([0.3]), np.array([0.2]))
        omega = noise_weights.compute_omega(np.array([[0.1]]), np.array([[1.0]]), spec, clamp=False)
        np.testing.assert_allclose(omega.values, [[(0.1 - 0.2) / (0.5 * 0.1)]])
        assert omega.clamp_max is None

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            noise_weights.compute_omega(np.ones((2, 3)), np.ones((2, 2)), NoiseSpec.clean(3))


class TestOraclePosteriors:

    def test_probabilities_of_each_outcome(self):
        spec = NoiseSpec(np.array([0.3, 0.1]), np.array([0.2, 0.4]))
        truth = np.array([[1.0, -1.0]])
        np.testing.assert_allclose(noise_weights.oracle_posteriors(truth, np.array([[1.0, 1.0]]), spec), [[0.7, 0.4]])
        np.testing.assert_allclose(noise_weights.oracle_posteriors(truth, np.array([[-1.0, -1.0]]), spec), [[0.3, 0.6]])


class TestRankingMatrix:

    def test_two_labels(self):
        A = noise_weights.build_ranking_matrix(OmegaMatrix(np.ones((1, 2))), np.array([[1.0, -1.0]]))
        np.testing.assert_allclose(A.A, [[-1.0, 1.0]])

    def test_all_relevant_is_zero(self):
        A = noise_weights.build_ranking_matrix(OmegaMatrix(np.full((1, 4), 0.7)), np.ones((1, 4)))
        np.testing.assert_array_equal(A.A, 0.0)

    def test_quadratic_in_row_scale(self):
        rng = np.random.default_rng(1)
        W = rng.uniform(0, 2, (5, 6))
        Y = _random_labels(rng, 5, 6)
        base = noise_weights.build_ranking_matrix(OmegaMatrix(W), Y).A
        scaled = noise_weights.build_ranking_matrix(OmegaMatrix(3.0 * W), Y).A
        np.testing.assert_allclose(scaled, 9.0 * base)

    def test_equal_weights_rows_sum_to_zero(self):
        Y = _random_labels(np.random.default_rng(2), 8, 5)
        A = noise_weights.build_ranking_matrix(noise_weights.unit_omega(Y), Y)
        np.testing.assert_allclose(A.A.sum(axis=1), 0.0, atol=1e-12)

    def test_relevant_labels_pushed_up(self):
        Y = np.array([[1.0, -1.0, -1.0, 1.0]])
        A = noise_weights.build_ranking_matrix(noise_weights.unit_omega(Y), Y)
        assert np.all(A.A[Y > 0] < 0) and np.all(A.A[Y < 0] > 0)


class TestTargetMatrix:

    def test_no_ranking_term(self):
        Y = _random_labels(np.random.default_rng(3), 4, 3)
        A = noise_weights.build_ranking_matrix(noise_weights.unit_omega(Y), Y)
        np.testing.assert_allclose(noise_weights.build_target_matrix(Y, A, 0.55, 0.0), 0.55 * Y)
        np.testing.assert_array_equal(noise_weights.build_target_matrix(Y, A, 1.0, 0.0), Y)

    def test_operating_point(self):
        Y = _random_labels(np.random.default_rng(4), 4, 3)
        A = noise_weights.build_ranking_matrix(noise_weights.unit_omega(Y), Y)
        np.testing.assert_allclose(noise_weights.build_target_matrix(Y, A, 0.55, 2.0 ** -6),
                                   0.55 * Y - 2.0 ** -6 * A.A)


class TestRankingLosses:

    def test_constant_scores(self):
        rng = np.random.default_rng(5)
        Y = _random_labels(rng, 6, 4)
        O = np.repeat(rng.normal(size=(6, 1)), 4, axis=1)
        assert noise_weights.unbiased_ranking_loss(O, Y, OmegaMatrix(rng.random((6, 4)))) == pytest.approx(0.0)

    def test_two_label_expansion(self):
        loss = noise_weights.unbiased_ranking_loss(np.array([[2.0, 0.0]]), np.array([[1.0, -1.0]]),
                                                   OmegaMatrix(np.ones((1, 2))))
        assert loss == pytest.approx(-4.0)

    def test_twice_trace_identity(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            Y = _random_labels(rng, 7, 5)
            omega = OmegaMatrix(rng.uniform(0, 3, (7, 5)))
            O = rng.normal(size=(7, 5))
            A = noise_weights.build_ranking_matrix(omega, Y)
            assert noise_weights.unbiased_ranking_loss(O, Y, omega) == pytest.approx(2.0 * np.sum(A.A * O))

    def test_unit_weights_match_clean_loss(self):
        rng = np.random.default_rng(7)
        Y = _random_labels(rng, 5, 4)
        O = rng.normal(size=(5, 4))
        assert noise_weights.unbiased_ranking_loss(O, Y, noise_weights.unit_omega(Y)) == \
            pytest.approx(noise_weights.clean_ranking_loss(O, Y))

    def test_clean_loss_zero_for_identical_labels(self):
        O = np.random.default_rng(8).normal(size=(3, 4))
        assert noise_weights.clean_ranking_loss(O, -np.ones((3, 4))) == 0.0


class TestUnbiasedness:
    """Exact expectations over every flip outcome with oracle posteriors"""

    def _expected_loss(self, truth, spec, O):
        def loss(observed):
            Y = observed[None, :]
            posteriors = noise_weights.oracle_posteriors(truth[None, :], Y, spec)
            omega = noise_weights.compute_omega(posteriors, Y, spec, clamp=False)
            return noise_weights.unbiased_ranking_loss(O, Y, omega)
        return exact_expectation(truth, spec, loss)

    def test_two_labels(self):
        spec = NoiseSpec(np.array([0.3, 0.3]), np.array([0.2, 0.2]))
        truth = np.array([1.0, -1.0])
        O = np.array([[0.7, -0.4]])
        expected = self._expected_loss(truth, spec, O)
        assert abs(expected - noise_weights.clean_ranking_loss(O, truth[None, :])) <= 1e-10

    def test_five_labels(self):
        rng = np.random.default_rng(9)
        spec = NoiseSpec(rng.uniform(0.2, 0.4, 5), rng.uniform(0.2, 0.4, 5))
        truth = np.array([1.0, -1.0, 1.0, 1.0, -1.0])
        O = rng.normal(size=(1, 5))
        expected = self._expected_loss(truth, spec, O)
        assert abs(expected - noise_weights.clean_ranking_loss(O, truth[None, :])) <= 1e-10

    def test_weights_have_unit_mean(self):
        spec = NoiseSpec(np.array([0.25, 0.35, 0.4]), np.array([0.3, 0.2, 0.4]))
        truth = np.array([1.0, -1.0, 1.0])

        def weights(observed):
            Y = observed[None, :]
            return noise_weights.compute_omega(noise_weights.oracle_posteriors(truth[None, :], Y, spec), Y, spec,
                                               clamp=False).values[0]
        np.testing.assert_allclose(exact_expectation(truth, spec, weights), 1.0, atol=1e-12)
