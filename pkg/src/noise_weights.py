"""
Noise Weights - Importance reweighting of noisy labels and the ranking terms built on it
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from config.settings import OMEGA_CLAMP_MAX
from src.data_stream import NoiseSpec
from src.errors import ShapeError


@dataclass(frozen=True)
class OmegaMatrix:
    """Per instance-label ratio of clean to noisy posterior"""

    values: np.ndarray
    clamp_max: Optional[float] = OMEGA_CLAMP_MAX


@dataclass(frozen=True)
class RankingMatrix:
    """A[t, j] = w_tj * sum_k w_tk (y_tk - y_tj) / 2"""

    A: np.ndarray


def _check_shapes(*matrices: np.ndarray):
    shape = matrices[0].shape
    for m in matrices[1:]:
        if m.shape != shape:
            raise ShapeError(f"shape mismatch: {shape} vs {m.shape}")


def compute_omega(posteriors: np.ndarray, Y: np.ndarray, spec: NoiseSpec,
                  clamp_max: Optional[float] = OMEGA_CLAMP_MAX, clamp: bool = True) -> OmegaMatrix:
    """
    Importance weights for the observed labels

    Args:
        posteriors: N x q probability of the observed label given x
        Y: N x q observed labels
        spec: Flip rates
        clamp_max: Cap on the weights
        clamp: Apply the [0, clamp_max] clamp; off only for unbiasedness checks

    Returns:
        OmegaMatrix
    """
    _check_shapes(posteriors, Y)
    if Y.shape[1] != spec.q:
        raise ShapeError(f"noise spec covers {spec.q} labels, labels have {Y.shape[1]}")
    # rate of flipping into the observed value
    rho_into = np.where(Y > 0, spec.rho_minus[None, :], spec.rho_plus[None, :])
    scale = 1.0 - spec.rho_plus - spec.rho_minus
    omega = (posteriors - rho_into) / (scale[None, :] * posteriors)
    if clamp:
        omega = np.clip(omega, 0.0, clamp_max)
        return OmegaMatrix(omega, clamp_max)
    return OmegaMatrix(omega, None)


def unit_omega(Y: np.ndarray) -> OmegaMatrix:
    """Weights of one everywhere; the ranking term without reweighting"""
    return OmegaMatrix(np.ones_like(Y, dtype=float))


def oracle_posteriors(truth: np.ndarray, Y: np.ndarray, spec: NoiseSpec) -> np.ndarray:
    """
    Exact probability of each observed label when the ground truth is known

    Args:
        truth: N x q ground-truth labels
        Y: N x q observed labels
        spec: Flip rates used to corrupt truth

    Returns:
        N x q matrix of P(observed label | x)
    """
    _check_shapes(truth, Y)
    p_plus = np.where(truth > 0, 1.0 - spec.rho_plus[None, :], spec.rho_minus[None, :])
    return np.where(Y > 0, p_plus, 1.0 - p_plus)


def build_ranking_matrix(omega: OmegaMatrix, Y: np.ndarray) -> RankingMatrix:
    """
    Ranking matrix of the linearized pairwise loss

    Args:
        omega: Importance weights
        Y: N x q observed labels

    Returns:
        RankingMatrix
    """
    W = omega.values
    _check_shapes(W, Y)
    # sum_k w_k (y_k - y_j) / 2 = (sum_k w_k y_k - y_j sum_k w_k) / 2
    weighted = (W * Y).sum(axis=1, keepdims=True)
    total = W.sum(axis=1, keepdims=True)
    return RankingMatrix(W * (weighted - Y * total) / 2.0)


def build_target_matrix(Y: np.ndarray, A: RankingMatrix, beta: float, gamma: float) -> np.ndarray:
    """M = beta Y - gamma A"""
    _check_shapes(Y, A.A)
    return beta * Y - gamma * A.A


def unbiased_ranking_loss(O: np.ndarray, Y: np.ndarray, omega: OmegaMatrix) -> float:
    """
    Reweighted pairwise ranking loss with the affine surrogate

    Args:
        O: N x q scores
        Y: N x q observed labels
        omega: Importance weights

    Returns:
        sum_t sum_j sum_k w_tj w_tk (y_tk - y_tj)/2 (o_tj - o_tk)
    """
    W = omega.values
    _check_shapes(O, Y, W)
    pair_labels = (Y[:, None, :] - Y[:, :, None]) / 2.0     # [t, j, k] = (y_k - y_j) / 2
    pair_scores = O[:, :, None] - O[:, None, :]             # [t, j, k] = o_j - o_k
    pair_weights = W[:, :, None] * W[:, None, :]
    return float(np.sum(pair_weights * pair_labels * pair_scores))


def clean_ranking_loss(O: np.ndarray, G: np.ndarray) -> float:
    """
    Pairwise ranking loss on ground truth with the affine surrogate

    Args:
        O: N x q scores
        G: N x q ground-truth labels

    Returns:
        sum_t sum_j sum_k -(g_j - g_k)/2 (o_j - o_k)
    """
    _check_shapes(O, G)
    pair_labels = (G[:, :, None] - G[:, None, :]) / 2.0
    pair_scores = O[:, :, None] - O[:, None, :]
    return float(np.sum(-pair_labels * pair_scores))
