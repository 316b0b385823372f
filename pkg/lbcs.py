"""
Learning-based compressive subsampling (row-energy selection) and its
constant-modulus Monte-Carlo variant.

mc_lbcs draws Haar unitaries, forces their entries to constant modulus,
keeps the m rows capturing the most training energy and returns the
candidate with the lowest validation relative MSE at one SNR.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from channels import ChannelSet, Dictionary, normalize_per_sample
from evaluation import evaluate
from numeric_core import ComplexMatrix, SeededRng, parallel_map, random_unitary

logger = logging.getLogger(__name__)


@dataclass
class LbcsSelection:
    indices: Tuple[int, ...]
    scores: np.ndarray
    matrix: ComplexMatrix


@dataclass
class McLbcsResult:
    matrix: ComplexMatrix
    validation_mse: float
    best_iteration: int
    candidate_mse: List[float] = field(default_factory=list)


def lbcs_select(v: ComplexMatrix, data: ChannelSet, m: int) -> LbcsSelection:
    """Keep the m rows of V with the largest captured energy sum_i |(V h_i)_r|^2.

    Training channels are normalized per sample first, whatever their state.
    Ties go to the lowest row index; the returned indices are ascending.
    """
    v = np.asarray(v, dtype=np.complex128)
    if len(data) == 0:
        raise ValueError("LBCS needs at least one training channel")
    if m > v.shape[0]:
        raise ValueError(f"Cannot select m={m} rows from a matrix with {v.shape[0]} rows")
    if v.shape[1] != data.n:
        raise ValueError(f"V has {v.shape[1]} columns, channels have n={data.n}")
    unit = normalize_per_sample(data).samples
    scores = np.sum(np.abs(unit @ v.T) ** 2, axis=0)
    top = np.sort(np.argsort(-scores, kind="stable")[:m])
    return LbcsSelection(indices=tuple(int(r) for r in top), scores=scores, matrix=v[top])


def constant_modulus_project(v: ComplexMatrix) -> ComplexMatrix:
    """Divide every entry by its modulus, then scale rows to unit norm."""
    v = np.asarray(v, dtype=np.complex128)
    moduli = np.abs(v)
    if np.any(moduli == 0):
        row, col = np.argwhere(moduli == 0)[0]
        raise ValueError(f"Cannot project a zero entry at ({row}, {col}) to constant modulus")
    w = v / moduli
    return w / np.linalg.norm(w, axis=1, keepdims=True)


def mc_lbcs(
    train: ChannelSet,
    val: ChannelSet,
    snr_db: float,
    m: int,
    iterations: int,
    p: int,
    dictionary: Dictionary,
    rng: SeededRng,
    workers: int = 1,
) -> McLbcsResult:
    """Monte-Carlo LBCS over `iterations` random unitaries, selected by validation MSE.

    Every candidate is scored with the same validation noise, so comparisons
    are paired. Ties keep the lowest iteration index.
    """
    if iterations < 1:
        raise ValueError(f"Need at least one Monte-Carlo iteration, got {iterations}")
    validation_rng = rng.substream("validation")

    def candidate(i: int) -> Tuple[ComplexMatrix, float]:
        v = constant_modulus_project(random_unitary(train.n, rng.substream("unitary", i)))
        a = lbcs_select(v, train, m).matrix
        record = evaluate(a, val, snr_db, p, dictionary, validation_rng, algorithm="lbcs")
        return a, record.mean

    candidates = parallel_map(candidate, iterations, workers)

    mses = [mse for _, mse in candidates]
    best = int(np.argmin(mses))
    logger.info(
        f"MC-LBCS @ {snr_db} dB: best validation MSE {mses[best]:.6g} at iteration {best} "
        f"(median {np.median(mses):.6g} over {iterations})"
    )
    return McLbcsResult(matrix=candidates[best][0], validation_mse=mses[best], best_iteration=best, candidate_mse=mses)
