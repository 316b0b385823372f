"""
Orthogonal Matching Pursuit with a least-squares refit on the growing support.
"""

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.linalg import lstsq

logger = logging.getLogger(__name__)


@dataclass
class OmpResult:
    coefficients: np.ndarray
    support: List[int]
    residual_norm: float
    residual_history: List[float] = field(default_factory=list)
    rank_deficient: bool = False


def omp(c: np.ndarray, y: np.ndarray, p: int, normalize_columns: bool = False) -> OmpResult:
    """Recover a p-sparse s with y ~ C s.

    Each iteration picks the column with the largest correlation modulus
    |[C^H r]_j| (lowest index on ties), then refits all support coefficients
    by least squares. Stops early once the residual vanishes to machine
    precision. With `normalize_columns`, correlations are divided by the
    column norms before the argmax.
    """
    c = np.asarray(c, dtype=np.complex128)
    y = np.asarray(y, dtype=np.complex128)
    rows, size = c.shape
    if p < 1 or p > min(rows, size):
        raise ValueError(f"Sparsity p={p} must lie in [1, min(m, L)] = [1, {min(rows, size)}]")
    if y.shape != (rows,):
        raise ValueError(f"Observation has shape {y.shape}, expected ({rows},)")

    column_norms = np.linalg.norm(c, axis=0) if normalize_columns else None
    coefficients = np.zeros(size, dtype=np.complex128)
    support: List[int] = []
    residual = y.copy()
    y_norm = np.linalg.norm(y)
    history = [float(y_norm)]
    floor = 10.0 * np.finfo(np.float64).eps * y_norm
    rank_deficient = False
    selected = np.zeros(size, dtype=bool)
    refit = np.zeros(0, dtype=np.complex128)

    for _ in range(p):
        if history[-1] <= floor:
            break
        scores = np.abs(c.conj().T @ residual)
        if column_norms is not None:
            scores = np.divide(scores, column_norms, out=np.zeros_like(scores), where=column_norms > 0)
        scores[selected] = -np.inf
        j = int(np.argmax(scores))
        selected[j] = True
        support.append(j)

        sub = c[:, support]
        refit, _, rank, _ = lstsq(sub, y)
        if rank < len(support):
            rank_deficient = True
            logger.warning(f"OMP support {support} is rank deficient (rank {rank}); using minimum-norm solution")
        residual = y - sub @ refit
        history.append(float(np.linalg.norm(residual)))

    if support:
        coefficients[support] = refit
    return OmpResult(
        coefficients=coefficients,
        support=support,
        residual_norm=history[-1],
        residual_history=history,
        rank_deficient=rank_deficient,
    )
