"""
Tests for initialization, scoring, the recursive update and the batch oracles
"""

from dataclasses import replace

import numpy as np
import pytest

from src import online_model
from src.errors import ConfigurationError, NumericalError, ShapeError

ALPHA, BETA, GAMMA = 1.0, 0.55, 2.0 ** -6


def _relative(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def _run(chunks, alpha=ALPHA, beta=BETA, gamma=GAMMA):
    state = online_model.initialize(chunks[0], alpha, beta, gamma)
    for ws in chunks[1:]:
        state = online_model.update(state, ws)
    return state


class TestInitialize:

    def test_zero_activations(self, workspace_factory):
        ws = workspace_factory(0)
        ws = replace(ws, h=np.zeros_like(ws.h))
        state = online_model.initialize(ws, 2.0, BETA, GAMMA)
        np.testing.assert_allclose(state.p, np.eye(20) / 2.0)
        np.testing.assert_array_equal(state.phi, 0.0)

    def test_gamma_zero_gives_zero_offset(self, workspace_factory):
        state = online_model.initialize(workspace_factory(1, gamma=0.0), ALPHA, BETA, 0.0)
        np.testing.assert_array_equal(state.z, 0.0)

    def test_defining_system_residual(self, workspace_factory):
        ws = workspace_factory(2)
        state = online_model.initialize(ws, ALPHA, BETA, GAMMA)
        K = ALPHA * np.eye(20) + ws.hrh()
        np.testing.assert_allclose(K @ state.phi, ws.h.T @ ws.m, atol=1e-8)
        assert state.chunks_seen == 1

    def test_alpha_must_be_positive(self, workspace_factory):
        with pytest.raises(ConfigurationError):
            online_model.initialize(workspace_factory(3), 0.0, BETA, GAMMA)

    def test_one_chunk_batch_matches(self, workspace_factory):
        ws = workspace_factory(4)
        state = online_model.initialize(ws, ALPHA, BETA, GAMMA)
        np.testing.assert_allclose(state.phi, online_model.batch_solve([ws], ALPHA), rtol=1e-10, atol=1e-12)


class TestScoreAndPredict:

    def _state(self, phi):
        L = phi.shape[0]
        return online_model.ModelState(phi, np.eye(L), np.zeros_like(phi), ALPHA, BETA, GAMMA)

    def test_zero_model(self):
        O = online_model.score(self._state(np.zeros((4, 3))), np.random.default_rng(0).random((5, 4)))
        np.testing.assert_array_equal(O, 0.0)

    def test_linear_in_activations(self):
        rng = np.random.default_rng(1)
        state = self._state(rng.normal(size=(4, 3)))
        H1, H2 = rng.random((5, 4)), rng.random((5, 4))
        np.testing.assert_allclose(online_model.score(state, H1 + H2),
                                   online_model.score(state, H1) + online_model.score(state, H2))

    def test_single_hidden_unit(self):
        state = self._state(np.array([[1.0, -2.0]]))
        O = online_model.score(state, np.array([[0.5], [0.25]]))
        np.testing.assert_allclose(O, np.outer([0.5, 0.25], [1.0, -2.0]))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            online_model.score(self._state(np.zeros((4, 3))), np.ones((5, 3)))

    def test_strict_threshold(self):
        np.testing.assert_array_equal(online_model.predict(np.zeros((2, 2))), -1.0)
        np.testing.assert_array_equal(online_model.predict(np.array([[0.1, -0.1]])), [[1.0, -1.0]])

    def test_nan_raises(self):
        with pytest.raises(NumericalError):
            online_model.predict(np.array([[np.nan, 1.0]]))


class TestWoodburyConsistency:

    def test_two_chunks_match_batch(self, stream_factory):
        chunks = stream_factory(1, n_chunks=2)
        state = _run(chunks)
        assert _relative(state.phi, online_model.batch_solve(chunks, ALPHA)) <= 1e-6
        assert state.chunks_seen == 2

    def test_inverse_gram_matches_direct_inverse(self, stream_factory):
        chunks = stream_factory(2, n_chunks=2)
        state = _run(chunks)
        direct = np.linalg.inv(online_model.gram_matrix(chunks, ALPHA))
        assert _relative(state.p, direct) <= 1e-6

    def test_three_chunks_p_times_k(self, stream_factory):
        chunks = stream_factory(3, n_chunks=3)
        state = _run(chunks)
        K = online_model.gram_matrix(chunks, ALPHA)
        assert np.linalg.norm(state.p @ K - np.eye(20)) <= 1e-6

    def test_p_stays_symmetric_positive_definite(self, stream_factory):
        chunks = stream_factory(4, n_chunks=4)
        state = online_model.initialize(chunks[0], ALPHA, BETA, GAMMA)
        rng = np.random.default_rng(0)
        for ws in chunks[1:]:
            state = online_model.update(state, ws)
            np.testing.assert_array_equal(state.p, state.p.T)
            vectors = rng.normal(size=(20, 20))
            assert np.all(np.einsum("il,lm,im->i", vectors, state.p, vectors) > 0)

    def test_split_update_equals_full_update(self, stream_factory):
        chunks = stream_factory(5, n_chunks=2)
        state = online_model.initialize(chunks[0], ALPHA, BETA, GAMMA)
        full = online_model.update(state, chunks[1])
        split = online_model.update_coefficients(online_model.update_gram_inverse(state, chunks[1]), chunks[1])
        np.testing.assert_array_equal(full.phi, split.phi)
        np.testing.assert_array_equal(full.z, split.z)

    def test_update_leaves_previous_state_untouched(self, stream_factory):
        chunks = stream_factory(6, n_chunks=2)
        state = online_model.initialize(chunks[0], ALPHA, BETA, GAMMA)
        phi, p, z = state.phi.copy(), state.p.copy(), state.z.copy()
        online_model.update(state, chunks[1])
        np.testing.assert_array_equal(state.phi, phi)
        np.testing.assert_array_equal(state.p, p)
        np.testing.assert_array_equal(state.z, z)
        assert state.chunks_seen == 1


class TestRankingOffset:

    def test_offset_is_ranking_free_gap(self, stream_factory):
        chunks = stream_factory(6, n_chunks=3)
        state = _run(chunks)
        psi = online_model.batch_solve(chunks, ALPHA, use_ranking_target=False)
        assert _relative(state.phi + state.z, psi) <= 1e-6


class TestObjective:

    def test_zero_model_value(self, workspace_factory):
        ws = workspace_factory(7, gamma=0.0)
        value = online_model.objective_value(np.zeros((20, 8)), ws, ALPHA, BETA, 0.0)
        assert value == pytest.approx(BETA / 2 * 100 * 8)

    def test_batch_minimizer_beats_perturbations(self, workspace_factory):
        ws = workspace_factory(8)
        phi = online_model.batch_solve([ws], ALPHA)
        best = online_model.objective_value(phi, ws, ALPHA, BETA, GAMMA)
        rng = np.random.default_rng(0)
        for _ in range(10):
            other = phi + 1e-3 * rng.normal(size=phi.shape)
            assert best <= online_model.objective_value(other, ws, ALPHA, BETA, GAMMA)

    def test_gradient_vanishes_at_minimizer(self, workspace_factory):
        ws = workspace_factory(9)
        phi = online_model.batch_solve([ws], ALPHA)
        gradient = online_model.objective_gradient(phi, ws, ALPHA, BETA, GAMMA)
        assert np.linalg.norm(gradient) <= 1e-6 * np.linalg.norm(ws.h.T @ ws.m)

    def test_beta_one_reduces_to_ridge(self, workspace_factory):
        ws = workspace_factory(10, beta=1.0, gamma=0.0)
        phi = np.random.default_rng(1).normal(size=(20, 8))
        ridge = ALPHA * phi + ws.h.T @ (ws.h @ phi) - ws.h.T @ ws.y
        np.testing.assert_allclose(online_model.objective_gradient(phi, ws, ALPHA, 1.0, 0.0), ridge, atol=1e-10)

    def test_beta_one_has_no_reconstruction_term(self, workspace_factory):
        ws = workspace_factory(11, beta=1.0, gamma=0.0)
        phi = np.random.default_rng(2).normal(size=(20, 8))
        expected = 0.5 * np.sum((ws.h @ phi - ws.y) ** 2) + ALPHA / 2 * np.sum(phi ** 2)
        assert online_model.objective_value(phi, ws, ALPHA, 1.0, 0.0) == pytest.approx(expected)


class TestLiteralKernel:

    def test_stream_stays_finite(self, stream_factory):
        chunks = stream_factory(12, n_chunks=3, paper_literal=True)
        state = _run(chunks)
        assert np.all(np.isfinite(state.phi))
        assert np.all(np.isfinite(state.p))


class TestCheckpoint:

    def test_round_trip_is_bit_exact(self, stream_factory, tmp_path):
        state = _run(stream_factory(13, n_chunks=2))
        state.prev_cardinality = 1.2345678901234567
        path = tmp_path / "model" / "state.json"
        online_model.save_checkpoint(state, 7, str(path))
        loaded, seed = online_model.load_checkpoint(str(path))
        assert seed == 7
        for name in ("phi", "p", "z"):
            np.testing.assert_array_equal(getattr(loaded, name), getattr(state, name))
        assert (loaded.alpha, loaded.beta, loaded.gamma) == (state.alpha, state.beta, state.gamma)
        assert loaded.chunks_seen == 2
        assert loaded.prev_cardinality == state.prev_cardinality

    def test_unknown_version(self, tmp_path):
        path = tmp_path / "old.json"
        path.write_text('{"version": 99}')
        with pytest.raises(ConfigurationError):
            online_model.load_checkpoint(str(path))
