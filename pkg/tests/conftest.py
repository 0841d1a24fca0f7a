"""
Shared fixtures: chunk workspaces built through the real pipeline
"""

import numpy as np
import pytest

from src import data_stream, elm_features, neighbor_graph, noise_weights
from src.data_stream import DataChunk
from src.online_model import ChunkWorkspace


def build_workspace(seed, hidden, N=100, d=30, q=8, K=10, beta=0.55, gamma=2.0 ** -6, index=0,
                    paper_literal=False):
    """Random chunk with noisy labels, mapped and turned into a workspace"""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(N, d))
    truth = np.where(rng.random((N, q)) < 0.3, 1.0, -1.0)
    spec = data_stream.sample_noise_spec(q, 0.2, 0.4, seed)
    chunk = data_stream.inject_noise(DataChunk(X, truth, truth, index), spec, seed + 1)
    Y = chunk.observed_labels

    H = elm_features.map_features(hidden, X)
    graph = neighbor_graph.solve_reconstruction_weights(X, neighbor_graph.knn_indices(X, K))
    kernel = neighbor_graph.build_scoring_kernel(graph, beta, paper_literal)
    model = elm_features.fit_chunk_probability_model(H, Y)
    omega = noise_weights.compute_omega(elm_features.estimate_observed_posteriors(model, H, Y), Y, spec)
    ranking = noise_weights.build_ranking_matrix(omega, Y)
    target = noise_weights.build_target_matrix(Y, ranking, beta, gamma)
    return ChunkWorkspace(H, kernel, target, ranking, Y, graph, index)


@pytest.fixture
def hidden():
    return elm_features.init_hidden_map(30, 20, seed=7)


@pytest.fixture
def workspace_factory(hidden):
    """build_workspace with the shared hidden map bound"""
    def factory(seed, **kwargs):
        return build_workspace(seed, kwargs.pop("hidden", hidden), **kwargs)
    return factory


@pytest.fixture
def stream_factory(workspace_factory):
    """Consecutive chunk workspaces with one seed per chunk"""
    def factory(seed, n_chunks=4, **kwargs):
        return [workspace_factory(seed * 100 + i, index=i, **kwargs) for i in range(n_chunks)]
    return factory
