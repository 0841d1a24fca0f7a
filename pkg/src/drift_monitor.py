"""
Drift Monitor - Noise-corrected label cardinality, Hoeffding threshold and adaptation
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from config.settings import DELTA, STRATEGY
from src.errors import ConfigurationError, ShapeError
from src.noise_weights import OmegaMatrix
from src.online_model import ChunkWorkspace, ModelState, spd_inverse

logger = logging.getLogger(__name__)


class Strategy(Enum):
    """Reaction to a detected drift"""
    NONE = "none"        # ELM-O
    RETRAIN = "retrain"  # ELM-I
    ADJUST = "adjust"    # ELM-II


@dataclass(frozen=True)
class CardinalityEstimate:
    """Per-instance and chunk-level cardinality estimates"""

    per_instance: np.ndarray
    mean: float
    range: float

    @property
    def N(self) -> int:
        return self.per_instance.shape[0]


@dataclass(frozen=True)
class DriftConfig:
    """Confidence and strategy of the detector"""

    delta: float = DELTA
    strategy: Strategy = Strategy(STRATEGY)

    def __post_init__(self):
        if not 0 < self.delta < 1:
            raise ConfigurationError(f"delta must lie strictly inside (0, 1), got {self.delta}")
        if not isinstance(self.strategy, Strategy):
            object.__setattr__(self, "strategy", Strategy(self.strategy))


@dataclass(frozen=True)
class DriftEvent:
    """One detection, as written to events.csv"""

    chunk_index: int
    prev_mean: float
    new_mean: float
    epsilon: float
    strategy: str


def estimate_cardinality(omega: OmegaMatrix, Y: np.ndarray) -> CardinalityEstimate:
    """
    Reweighted count of observed relevant labels

    Args:
        omega: Importance weights of this chunk
        Y: N x q observed labels

    Returns:
        CardinalityEstimate
    """
    if omega.values.shape != Y.shape:
        raise ShapeError(f"shape mismatch: {omega.values.shape} vs {Y.shape}")
    per_instance = np.sum(np.where(Y > 0, omega.values, 0.0), axis=1)
    return CardinalityEstimate(per_instance, float(per_instance.mean()),
                               float(per_instance.max() - per_instance.min()))


def hoeffding_threshold(card: CardinalityEstimate, delta: float) -> float:
    """
    Deviation bound for the chunk mean

    Args:
        card: Cardinality estimate of the current chunk
        delta: Confidence in (0, 1)

    Returns:
        range * sqrt(ln(2 / delta) / (2 N))
    """
    if not 0 < delta < 1:
        raise ConfigurationError(f"delta must lie strictly inside (0, 1), got {delta}")
    return card.range * math.sqrt(math.log(2.0 / delta) / (2.0 * card.N))


def detect(prev_mean: float, card: CardinalityEstimate, delta: float) -> bool:
    """True when adjacent chunk means differ by more than the threshold"""
    return abs(card.mean - prev_mean) > hoeffding_threshold(card, delta)


def adapt_retrain(state: ModelState, ws: ChunkWorkspace) -> ModelState:
    """
    Forget the past: Phi = 0, Z = 0, P from the current chunk alone

    Args:
        state: Model at drift detection
        ws: Workspace of the chunk where drift was detected

    Returns:
        Reset model, ready for the coefficient step of this chunk
    """
    L = state.phi.shape[0]
    p = spd_inverse(state.alpha * np.eye(L) + ws.hrh(), ws.index, allow_pseudo=ws.r.paper_literal)
    logger.info(f"Chunk {ws.index}: model reset for retraining")
    return replace(state, phi=np.zeros_like(state.phi), z=np.zeros_like(state.z), p=p)


def adapt_adjust(state: ModelState) -> ModelState:
    """
    Drop the old ranking information: Phi <- Phi + Z, Z <- 0

    Args:
        state: Model at drift detection

    Returns:
        Model holding the ranking-free solution
    """
    return replace(state, phi=state.phi + state.z, z=np.zeros_like(state.z))
