"""
Metrics - Prequential multi-label evaluation
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.metrics import f1_score
from sklearn.metrics import hamming_loss as sk_hamming_loss

from src.errors import ShapeError


@dataclass
class ChunkReport:
    """Scores of one chunk, computed before its labels were used"""

    chunk_index: int
    hamming_loss: float
    micro_f1: float
    average_precision: Optional[float]
    gm: float
    drift_detected: bool = False
    epsilon: float = 0.0
    cardinality_mean: float = 0.0
    wall_time: float = 0.0


def _indicator(labels: np.ndarray) -> np.ndarray:
    return (np.asarray(labels) > 0).astype(int)


def _check(pred: np.ndarray, truth: np.ndarray):
    if np.shape(pred) != np.shape(truth):
        raise ShapeError(f"shape mismatch: {np.shape(pred)} vs {np.shape(truth)}")


def hamming_loss(pred: np.ndarray, truth: np.ndarray) -> float:
    """Fraction of disagreeing instance-label pairs"""
    _check(pred, truth)
    return float(sk_hamming_loss(_indicator(truth), _indicator(pred)))


def micro_f1(pred: np.ndarray, truth: np.ndarray) -> float:
    """2TP / (2TP + FP + FN) over all pairs, 0 when nothing is positive"""
    _check(pred, truth)
    return float(f1_score(_indicator(truth), _indicator(pred), average="micro", zero_division=0))


def average_precision(scores: np.ndarray, truth: np.ndarray) -> Optional[float]:
    """
    Ranking average precision

    Args:
        scores: N x q real scores
        truth: N x q bipolar labels

    Returns:
        Mean over instances with a relevant label, or None when there are none
    """
    _check(scores, truth)
    # descending score, ties by ascending label index
    order = np.argsort(-np.asarray(scores, dtype=float), axis=1, kind="stable")
    relevant_sorted = np.take_along_axis(_indicator(truth), order, axis=1)
    counts = relevant_sorted.sum(axis=1)
    keep = counts > 0
    if not keep.any():
        return None
    ranks = np.arange(1, relevant_sorted.shape[1] + 1)
    precision_at = np.cumsum(relevant_sorted, axis=1) / ranks
    per_instance = (precision_at * relevant_sorted).sum(axis=1)[keep] / counts[keep]
    return float(per_instance.mean())


def gm_score(hl: float, f1: float) -> float:
    """sqrt((1 - HL) * F1)"""
    return math.sqrt(max(0.0, (1.0 - hl) * f1))
