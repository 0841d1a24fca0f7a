"""
ELM Features - Frozen random hidden layer and the per-chunk posterior model
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import expit
from sklearn.preprocessing import StandardScaler

from config.settings import BIAS_RANGE, POSTERIOR_FLOOR, PROB_RIDGE, WEIGHT_RANGE
from src.errors import ConfigurationError, ShapeError


@dataclass(frozen=True)
class HiddenMap:
    """Random sigmoid feature map; never retrained"""

    weights: np.ndarray
    biases: np.ndarray
    seed: int = 0

    def __post_init__(self):
        weights = np.array(self.weights, dtype=float)
        biases = np.array(self.biases, dtype=float)
        weights.setflags(write=False)
        biases.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def L(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True)
class ProbModel:
    """Ridge readout fitted on one chunk to estimate noisy posteriors"""

    coeffs: np.ndarray
    ridge: float


def init_hidden_map(d: int, L: int, seed: int) -> HiddenMap:
    """
    Draw the hidden layer

    Args:
        d: Input dimension
        L: Number of hidden units
        seed: Generator seed

    Returns:
        HiddenMap with uniform weights and biases
    """
    if d < 1 or L < 1:
        raise ConfigurationError(f"hidden map needs d >= 1 and L >= 1, got d={d}, L={L}")
    rng = np.random.default_rng(seed)
    weights = rng.uniform(WEIGHT_RANGE[0], WEIGHT_RANGE[1], size=(L, d))
    biases = rng.uniform(BIAS_RANGE[0], BIAS_RANGE[1], size=L)
    return HiddenMap(weights, biases, seed)


def map_features(hidden: HiddenMap, X: np.ndarray) -> np.ndarray:
    """
    Apply the hidden layer

    Args:
        hidden: HiddenMap
        X: N x d features

    Returns:
        N x L activations in (0, 1)
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != hidden.d:
        raise ShapeError(f"expected features with {hidden.d} columns, got shape {X.shape}")
    return expit(X @ hidden.weights.T + hidden.biases)


def fit_feature_scaler(X0: np.ndarray) -> StandardScaler:
    """Standardization statistics from the initialization chunk only"""
    return StandardScaler().fit(X0)


def fit_chunk_probability_model(H: np.ndarray, Y: np.ndarray, ridge: float = PROB_RIDGE) -> ProbModel:
    """
    Regularized least squares on the hidden features of one chunk

    Args:
        H: N x L activations
        Y: N x q observed labels
        ridge: Positive ridge factor

    Returns:
        ProbModel with coeffs = (ridge I + H'H)^-1 H'Y
    """
    if H.shape[0] != Y.shape[0]:
        raise ShapeError(f"H has {H.shape[0]} rows, Y has {Y.shape[0]}")
    if ridge <= 0:
        raise ConfigurationError(f"ridge must be positive, got {ridge}")
    gram = H.T @ H + ridge * np.eye(H.shape[1])
    coeffs = cho_solve(cho_factor(gram), H.T @ Y)
    return ProbModel(coeffs, ridge)


def estimate_observed_posteriors(model: ProbModel, H: np.ndarray, Y: np.ndarray,
                                 p_floor: float = POSTERIOR_FLOOR) -> np.ndarray:
    """
    Probability of each observed label under the chunk model

    Args:
        model: ProbModel fitted on this chunk
        H: N x L activations
        Y: N x q observed labels
        p_floor: Clamp margin

    Returns:
        N x q matrix in [p_floor, 1 - p_floor]
    """
    if H.shape[1] != model.coeffs.shape[0] or Y.shape != (H.shape[0], model.coeffs.shape[1]):
        raise ShapeError("activations, labels and model coefficients do not agree")
    p_plus = expit(H @ model.coeffs)
    observed = np.where(Y > 0, p_plus, 1.0 - p_plus)
    return np.clip(observed, p_floor, 1.0 - p_floor)
