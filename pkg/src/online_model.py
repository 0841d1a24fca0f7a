"""
Online Model - Learner state, initialization, recursive updates and batch oracles
"""

import json
import logging
import os
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as la

from config.settings import CHECKPOINT_VERSION
from src.errors import ConfigurationError, NumericalError, ShapeError
from src.neighbor_graph import GraphWeights, ScoringKernel
from src.noise_weights import RankingMatrix

logger = logging.getLogger(__name__)


@dataclass
class ChunkWorkspace:
    """Everything the solver needs from one chunk"""

    h: np.ndarray
    r: ScoringKernel
    m: np.ndarray
    a: RankingMatrix
    y: np.ndarray
    graph: GraphWeights
    index: int = 0

    def hrh(self) -> np.ndarray:
        """H' R H, L x L"""
        return self.h.T @ (self.r.R @ self.h)


@dataclass
class ModelState:
    """Coefficients, inverse Gram matrix and ranking offset"""

    phi: np.ndarray
    p: np.ndarray
    z: np.ndarray
    alpha: float
    beta: float
    gamma: float
    chunks_seen: int = 0
    prev_cardinality: Optional[float] = None


def spd_inverse(K: np.ndarray, chunk_index: Optional[int] = None, allow_pseudo: bool = False) -> np.ndarray:
    """Inverse of a symmetric positive definite matrix via Cholesky"""
    try:
        factor = la.cho_factor(K)
        inverse = la.cho_solve(factor, np.eye(K.shape[0]))
    except la.LinAlgError as exc:
        if not allow_pseudo:
            raise NumericalError(f"Gram matrix is not positive definite: {exc}", chunk_index) from exc
        logger.warning(f"Gram matrix not positive definite, using pseudo-inverse (cond={np.linalg.cond(K):.3e})")
        inverse = np.linalg.pinv(K)
    return (inverse + inverse.T) / 2.0


def initialize(ws: ChunkWorkspace, alpha: float, beta: float, gamma: float) -> ModelState:
    """
    Closed-form model on the initialization chunk

    Args:
        ws: Workspace of D0
        alpha: Ridge factor, positive
        beta: Observed-label weight
        gamma: Ranking weight

    Returns:
        ModelState with P0 = (alpha I + H'RH)^-1, Phi0 = P0 H'M, Z0 = gamma P0 H'A
    """
    if alpha <= 0:
        raise ConfigurationError(f"alpha must be positive, got {alpha}")
    L = ws.h.shape[1]
    p = spd_inverse(alpha * np.eye(L) + ws.hrh(), ws.index, allow_pseudo=ws.r.paper_literal)
    phi = p @ (ws.h.T @ ws.m)
    z = gamma * (p @ (ws.h.T @ ws.a.A))
    return ModelState(phi, p, z, alpha, beta, gamma, chunks_seen=1)


def score(state: ModelState, H: np.ndarray) -> np.ndarray:
    """O = H Phi"""
    if H.ndim != 2 or H.shape[1] != state.phi.shape[0]:
        raise ShapeError(f"expected activations with {state.phi.shape[0]} columns, got shape {H.shape}")
    return H @ state.phi


def predict(O: np.ndarray) -> np.ndarray:
    """
    Threshold scores at zero

    Args:
        O: N x q scores

    Returns:
        +1 where the score is strictly positive, -1 elsewhere
    """
    if np.isnan(O).any():
        raise NumericalError("NaN label score")
    return np.where(O > 0, 1.0, -1.0)


def _woodbury_correction(p: np.ndarray, ws: ChunkWorkspace) -> np.ndarray:
    """
    P H' (R^-1 + H P H')^-1 H P without forming R^-1

    The inner system (R^-1 + HPH') X = HP is multiplied through by R:
    (I + R H P H') X = R H P.
    """
    H = ws.h
    HP = H @ p
    RH = ws.r.R @ H
    RHP = RH @ p
    inner = np.eye(H.shape[0]) + RHP @ H.T
    if ws.r.paper_literal:
        logger.debug(f"Chunk {ws.index}: inner Woodbury condition number {np.linalg.cond(inner):.3e}")
        X = np.linalg.lstsq(inner, RHP, rcond=None)[0]
    else:
        try:
            X = la.lu_solve(la.lu_factor(inner, check_finite=True), RHP)
        except (la.LinAlgError, ValueError) as exc:
            raise NumericalError(f"inner Woodbury factorization failed: {exc}", ws.index) from exc
    return HP.T @ X


def update_gram_inverse(state: ModelState, ws: ChunkWorkspace) -> ModelState:
    """P <- P - P H'(R^-1 + H P H')^-1 H P, symmetrized"""
    p = state.p - _woodbury_correction(state.p, ws)
    p = (p + p.T) / 2.0
    if not np.all(np.isfinite(p)):
        raise NumericalError("inverse Gram matrix became non-finite", ws.index)
    return replace(state, p=p)


def update_coefficients(state: ModelState, ws: ChunkWorkspace) -> ModelState:
    """
    Coefficient and ranking-offset step with the already updated P

    Args:
        state: State whose P includes the current chunk
        ws: Current chunk workspace

    Returns:
        State with Phi, Z advanced and the chunk counted
    """
    hrh = ws.hrh()
    phi = state.phi - state.p @ (hrh @ state.phi - ws.h.T @ ws.m)
    z = state.z - state.p @ (hrh @ state.z - state.gamma * (ws.h.T @ ws.a.A))
    return replace(state, phi=phi, z=z, chunks_seen=state.chunks_seen + 1)


def update(state: ModelState, ws: ChunkWorkspace) -> ModelState:
    """
    Full recursive update for one chunk

    Args:
        state: Current model
        ws: Current chunk workspace

    Returns:
        Updated model
    """
    return update_coefficients(update_gram_inverse(state, ws), ws)


def batch_solve(chunks: Sequence[ChunkWorkspace], alpha: float, use_ranking_target: bool = True) -> np.ndarray:
    """
    Closed-form solution on block-concatenated chunks

    Args:
        chunks: Workspaces, at least one
        alpha: Ridge factor
        use_ranking_target: False replaces every M by beta Y (the ranking-free solution)

    Returns:
        L x q coefficient matrix
    """
    if not chunks:
        raise ConfigurationError("batch solve needs at least one chunk")
    L = chunks[0].h.shape[1]
    K = alpha * np.eye(L)
    rhs = np.zeros((L, chunks[0].m.shape[1]))
    for ws in chunks:
        K += ws.hrh()
        target = ws.m if use_ranking_target else ws.r.beta * ws.y
        rhs += ws.h.T @ target
    return la.cho_solve(la.cho_factor(K), rhs)


def gram_matrix(chunks: Sequence[ChunkWorkspace], alpha: float) -> np.ndarray:
    """alpha I + sum_i H_i' R_i H_i, accumulated densely"""
    K = alpha * np.eye(chunks[0].h.shape[1])
    for ws in chunks:
        K += ws.hrh()
    return K


def objective_value(phi: np.ndarray, ws: ChunkWorkspace, alpha: float, beta: float, gamma: float) -> float:
    """
    Single-chunk objective

    Args:
        phi: L x q coefficients
        ws: Chunk workspace
        alpha, beta, gamma: Regularization factors

    Returns:
        beta/2 ||H Phi - Y||^2 + (1-beta)/2 ||(I - S) H Phi||^2 + gamma tr(A' H Phi) + alpha/2 ||Phi||^2
    """
    O = ws.h @ phi
    residual = O - ws.graph.to_sparse() @ O
    return float(beta / 2.0 * np.sum((O - ws.y) ** 2)
                 + (1.0 - beta) / 2.0 * np.sum(residual ** 2)
                 + gamma * np.sum(ws.a.A * O)
                 + alpha / 2.0 * np.sum(phi ** 2))


def objective_gradient(phi: np.ndarray, ws: ChunkWorkspace, alpha: float, beta: float, gamma: float) -> np.ndarray:
    """[alpha I + H'RH] Phi - H'(beta Y - gamma A)"""
    L = phi.shape[0]
    return (alpha * np.eye(L) + ws.hrh()) @ phi - ws.h.T @ (beta * ws.y - gamma * ws.a.A)


def save_checkpoint(state: ModelState, hidden_seed: int, path: str):
    """
    Write the model as versioned JSON

    Args:
        state: Model to save
        hidden_seed: Seed that regenerates the hidden map
        path: Destination file
    """
    data = {
        'version': CHECKPOINT_VERSION,
        'hidden_seed': hidden_seed,
        'alpha': state.alpha,
        'beta': state.beta,
        'gamma': state.gamma,
        'chunks_seen': state.chunks_seen,
        'prev_cardinality': state.prev_cardinality,
        'phi': state.phi.tolist(),
        'p': state.p.tolist(),
        'z': state.z.tolist(),
    }
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as f:
        json.dump(data, f, indent=2)
    logger.info(f"Checkpoint saved: {path}")


def load_checkpoint(path: str):
    """
    Read a checkpoint written by save_checkpoint

    Args:
        path: Checkpoint file

    Returns:
        (ModelState, hidden_seed)
    """
    with open(path, 'r') as f:
        data = json.load(f)
    if data.get('version') != CHECKPOINT_VERSION:
        raise ConfigurationError(f"unsupported checkpoint version {data.get('version')} in {path}")
    state = ModelState(
        phi=np.array(data['phi'], dtype=float),
        p=np.array(data['p'], dtype=float),
        z=np.array(data['z'], dtype=float),
        alpha=data['alpha'],
        beta=data['beta'],
        gamma=data['gamma'],
        chunks_seen=data['chunks_seen'],
        prev_cardinality=data['prev_cardinality'],
    )
    logger.info(f"Checkpoint loaded: {path}")
    return state, data['hidden_seed']
