"""
Neighbor Graph - Local reconstruction weights and the scoring kernel built on them

Each instance is written as a convex combination of its K nearest neighbours.
The row problems are K-dimensional quadratic programs over the simplex, solved
by projected gradient descent with the sort-based projection.
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.spatial.distance import cdist
from scipy.sparse.linalg import spsolve

from config.settings import NEIGHBORS, QP_MAX_ITERS, QP_TOL
from src.errors import ConfigurationError, ShapeError

logger = logging.getLogger(__name__)

_POWER_ITERS = 50


@dataclass(frozen=True)
class GraphWeights:
    """Sparse row-stochastic reconstruction weights"""

    neighbors: np.ndarray     # N x K neighbour indices
    weights: np.ndarray       # N x K simplex weights
    objectives: np.ndarray    # per-row reconstruction error
    iterations: np.ndarray
    unconverged: np.ndarray   # rows that hit the iteration cap

    @property
    def N(self) -> int:
        return self.neighbors.shape[0]

    @property
    def K(self) -> int:
        return self.neighbors.shape[1]

    @property
    def rows(self) -> List[List[Tuple[int, float]]]:
        """Per-row (neighbour, weight) pairs with nonzero weight"""
        return [[(int(m), float(w)) for m, w in zip(nb, ws) if w > 0]
                for nb, ws in zip(self.neighbors, self.weights)]

    def to_sparse(self) -> sp.csr_matrix:
        """S as an N x N CSR matrix"""
        rows = np.repeat(np.arange(self.N), self.K)
        S = sp.csr_matrix((self.weights.ravel(), (rows, self.neighbors.ravel())), shape=(self.N, self.N))
        S.eliminate_zeros()
        return S


@dataclass(frozen=True)
class ScoringKernel:
    """R = beta I + (1 - beta)(I - S)'(I - S), or the literal variant"""

    R: sp.csr_matrix
    beta: float
    paper_literal: bool = False

    @property
    def N(self) -> int:
        return self.R.shape[0]


def knn_indices(X: np.ndarray, K: int = NEIGHBORS) -> np.ndarray:
    """
    Exact Euclidean K nearest neighbours, excluding the point itself

    Args:
        X: N x d features
        K: Neighbour count, below N

    Returns:
        N x K index matrix; ties go to the lower index
    """
    N = X.shape[0]
    if K < 1 or K >= N:
        raise ConfigurationError(f"K must lie in [1, N-1] = [1, {N - 1}], got {K}")
    dist = cdist(X, X, "sqeuclidean")
    np.fill_diagonal(dist, np.inf)
    # stable sort keeps equal distances in index order
    return np.argsort(dist, axis=1, kind="stable")[:, :K]


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """
    Euclidean projection onto the probability simplex along the last axis

    Args:
        v: Nonempty vector, or a stack of vectors

    Returns:
        argmin ||w - v|| subject to w >= 0, sum(w) = 1, per vector
    """
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise ShapeError("cannot project an empty vector")
    K = v.shape[-1]
    u = np.sort(v, axis=-1)[..., ::-1]
    cumulative = np.cumsum(u, axis=-1) - 1.0
    positive = u - cumulative / np.arange(1, K + 1) > 0
    # last index where the sorted entry stays above the running threshold
    rho = K - 1 - np.argmax(positive[..., ::-1], axis=-1)
    theta = np.take_along_axis(cumulative, rho[..., None], axis=-1) / (rho[..., None] + 1)
    return np.maximum(v - theta, 0.0)


def _quadratic(C: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.einsum("nk,nkl,nl->n", w, C, w)


def _largest_eigenvalues(C: np.ndarray) -> np.ndarray:
    """Power iteration on a stack of small symmetric PSD matrices"""
    n, K = C.shape[:2]
    x = np.full((n, K), 1.0 / np.sqrt(K))
    value = np.zeros(n)
    for _ in range(_POWER_ITERS):
        y = np.einsum("nkl,nl->nk", C, x)
        norm = np.linalg.norm(y, axis=1)
        nonzero = norm > 0
        x[nonzero] = y[nonzero] / norm[nonzero, None]
        value = np.where(nonzero, _quadratic(C, x), 0.0)
    return value


def _solve_rows(Z: np.ndarray, max_iters: int, tol: float, keep_trace: bool = False):
    """
    Minimize ||sum_m w_m z_m||^2 over the simplex for a stack of rows, z_m = x_m - x_t

    Args:
        Z: n x K x d neighbour offsets
        max_iters: Iteration cap per row
        tol: Relative decrease that ends a row
        keep_trace: Record the objective after every accepted iteration

    Returns:
        weights, objectives, iterations, unconverged mask, per-row traces (empty without keep_trace)
    """
    n, K = Z.shape[:2]
    C = Z @ np.swapaxes(Z, 1, 2)
    w = np.full((n, K), 1.0 / K)
    f = _quadratic(C, w)
    f0 = f.copy()
    traces = [[float(v)] for v in f] if keep_trace else []
    lam = _largest_eigenvalues(C)
    iterations = np.zeros(n, dtype=int)
    # zero objective or zero spectrum: every simplex point is optimal
    active = (lam > 0) & (f > 0)
    step = np.where(active, 1.0 / (2.0 * np.where(lam > 0, lam, 1.0)), 0.0)

    for it in range(1, max_iters + 1):
        rows = np.flatnonzero(active)
        if rows.size == 0:
            break
        Cr, wr, fr = C[rows], w[rows], f[rows]
        gradient = 2.0 * np.einsum("nkl,nl->nk", Cr, wr)
        candidate = project_to_simplex(wr - step[rows, None] * gradient)
        f_new = _quadratic(Cr, candidate)
        # power iteration can undershoot the top eigenvalue
        worse = f_new > fr
        retry = worse & (step[rows] > 1e-16)
        while retry.any():
            step[rows[retry]] *= 0.5
            candidate[retry] = project_to_simplex(wr[retry] - step[rows[retry], None] * gradient[retry])
            f_new[retry] = _quadratic(Cr[retry], candidate[retry])
            worse = f_new > fr
            retry = worse & (step[rows] > 1e-16)

        accepted = ~worse
        moved = rows[accepted]
        w[moved], f[moved], iterations[moved] = candidate[accepted], f_new[accepted], it
        if keep_trace:
            for r, v in zip(moved, f_new[accepted]):
                traces[r].append(float(v))
        decrease = fr[accepted] - f_new[accepted]
        done = (decrease <= tol * np.maximum(fr[accepted], 1e-300)) | (f_new[accepted] <= tol * tol * f0[moved])
        active[moved[done]] = False
        # rounding-level increase at the optimum
        active[rows[worse]] = False

    return w, f, iterations, active, traces


def solve_reconstruction_weights(X: np.ndarray, neighbors: np.ndarray, max_iters: int = QP_MAX_ITERS,
                                 tol: float = QP_TOL) -> GraphWeights:
    """
    Per-row simplex-constrained reconstruction from neighbours

    Args:
        X: N x d features
        neighbors: N x K indices from knn_indices
        max_iters: Iteration cap per row
        tol: Relative objective decrease that ends a row

    Returns:
        GraphWeights
    """
    X = np.asarray(X, dtype=float)
    if neighbors.ndim != 2 or neighbors.shape[0] != X.shape[0]:
        raise ShapeError(f"neighbour matrix of shape {neighbors.shape} does not match {X.shape[0]} instances")
    Z = X[neighbors] - X[:, None, :]
    weights, objectives, iterations, unconverged, _ = _solve_rows(Z, max_iters, tol)
    N = X.shape[0]
    if unconverged.any():
        logger.warning(f"Reconstruction QP hit the iteration cap on {int(unconverged.sum())} of {N} rows")
    logger.debug(f"Reconstruction QP: mean {iterations.mean():.1f} iterations over {N} rows")
    return GraphWeights(neighbors.copy(), weights, objectives, iterations, unconverged)


def reconstruction_objective_trace(X: np.ndarray, neighbors: np.ndarray, t: int,
                                   max_iters: int = QP_MAX_ITERS, tol: float = QP_TOL) -> List[float]:
    """Objective after every accepted iteration of row t"""
    X = np.asarray(X, dtype=float)
    Z = (X[neighbors[t]] - X[t])[None, :, :]
    return _solve_rows(Z, max_iters, tol, keep_trace=True)[4][0]




def build_scoring_kernel(S: GraphWeights, beta: float, paper_literal: bool = False) -> ScoringKernel:
    """
    Build the N x N scoring kernel

    Args:
        S: Reconstruction weights
        beta: Weight of the observed-label fit, in (0, 1]
        paper_literal: Use beta I + (1 - beta)(S'S - S' - S) instead of the derived form

    Returns:
        ScoringKernel with an exactly symmetric sparse R
    """
    if not 0 < beta <= 1:
        raise ConfigurationError(f"beta must lie in (0, 1], got {beta}")
    Smat = S.to_sparse()
    identity = sp.identity(S.N, format="csr")
    if paper_literal:
        R = beta * identity + (1.0 - beta) * (Smat.T @ Smat - Smat.T - Smat)
    else:
        D = identity - Smat
        R = beta * identity + (1.0 - beta) * (D.T @ D)
    R = ((R + R.T) * 0.5).tocsr()
    return ScoringKernel(R, beta, paper_literal)


def label_score_fixed_point(S: GraphWeights, Y: np.ndarray, beta: float) -> np.ndarray:
    """
    Scores meeting o = beta y + (1 - beta) S o entry-wise

    Args:
        S: Reconstruction weights
        Y: N x q labels
        beta: Weight in (0, 1]

    Returns:
        N x q scores solving (I - (1 - beta) S) O = beta Y
    """
    A = (sp.identity(S.N, format="csc") - (1.0 - beta) * S.to_sparse()).tocsc()
    return np.asarray(spsolve(A, beta * Y)).reshape(Y.shape)


def reconstruction_minimizer(kernel: ScoringKernel, Y: np.ndarray) -> np.ndarray:
    """Joint minimizer of beta/2 ||O - Y||^2 + (1 - beta)/2 ||O - SO||^2: R O = beta Y"""
    return np.asarray(spsolve(kernel.R.tocsc(), kernel.beta * Y)).reshape(Y.shape)
