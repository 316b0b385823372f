"""
Channel-estimation evaluation: noisy observations at a target SNR, OMP
recovery over a dictionary, and the relative MSE sum ||h_hat - h||^2 / sum ||h||^2.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from channels import ChannelSet, Dictionary, normalize_per_sample
from numeric_core import ComplexMatrix, SeededRng, complex_gaussian, parallel_map, sample_steinhaus_matrix
from recovery import omp

logger = logging.getLogger(__name__)

# (A, y, h) -> h_hat. Only test stubs look at h.
Estimator = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass
class EvalRecord:
    algorithm: str
    snr: float
    mean: float
    extras: Dict[str, str] = field(default_factory=dict)


@dataclass
class RipReport:
    delta: float
    mean_norm: float
    quantiles: Dict[str, float]
    probes: int


def noise_std_for_snr(a: ComplexMatrix, h: np.ndarray, snr_db: float) -> float:
    """sigma with ||A h||^2 / (m sigma^2) equal to the target SNR."""
    energy = float(np.sum(np.abs(a @ h) ** 2))
    if energy == 0:
        raise ValueError("Cannot set an SNR for a zero observation A h = 0")
    return float(np.sqrt(energy / (a.shape[0] * 10.0 ** (snr_db / 10.0))))


def _squared_norm(x: np.ndarray) -> float:
    return float(np.sum(np.abs(x) ** 2))


def _sample_error(
    a: ComplexMatrix,
    c: Optional[np.ndarray],
    h: np.ndarray,
    snr_db: float,
    p: int,
    dictionary: Dictionary,
    noise_rng: SeededRng,
    estimator: Optional[Estimator],
    noiseless: bool,
) -> float:
    y = a @ h
    if not noiseless:
        sigma = noise_std_for_snr(a, h, snr_db)
        y = y + complex_gaussian(a.shape[0], noise_rng, variance=sigma**2)
    if estimator is not None:
        h_hat = estimator(a, y, h)
    else:
        if c is None:
            c = a @ dictionary.matrix
        h_hat = dictionary.matrix @ omp(c, y, p).coefficients
    return _squared_norm(h_hat - h)


def _accumulate(errors: np.ndarray, data: ChannelSet) -> float:
    energy = float(np.sum([_squared_norm(h) for h in data.samples]))
    if energy == 0:
        raise ValueError("Test set has zero total energy")
    return float(np.sum(errors)) / energy


def evaluate(
    a: ComplexMatrix,
    data: ChannelSet,
    snr_db: float,
    p: int,
    dictionary: Dictionary,
    rng: SeededRng,
    algorithm: str = "fixed",
    snr_index: int = 0,
    estimator: Optional[Estimator] = None,
    noiseless: bool = False,
    workers: int = 1,
) -> EvalRecord:
    """Relative MSE of one fixed matrix over a test set.

    Noise for sample i is drawn from rng.substream("noise", i, snr_index),
    so different matrices evaluated with the same rng see paired noise.
    """
    a = np.asarray(a, dtype=np.complex128)
    if dictionary.matrix.shape[0] != data.n or a.shape[1] != data.n:
        raise ValueError(
            f"Inconsistent dimensions: A is {a.shape}, dictionary has {dictionary.matrix.shape[0]} rows, channels have n={data.n}"
        )
    c = a @ dictionary.matrix

    def error(i: int) -> float:
        return _sample_error(
            a, c, data.samples[i], snr_db, p, dictionary,
            rng.substream("noise", i, snr_index), estimator, noiseless,
        )

    mse = _accumulate(np.array(parallel_map(error, len(data), workers)), data)
    logger.debug(f"{algorithm} @ {snr_db} dB: relative MSE {mse:.6g}")
    return EvalRecord(algorithm=algorithm, snr=float(snr_db), mean=mse)


def evaluate_random_baseline(
    data: ChannelSet,
    snr_db: float,
    p: int,
    dictionary: Dictionary,
    m: int,
    rng: SeededRng,
    snr_index: int = 0,
    workers: int = 1,
) -> EvalRecord:
    """Relative MSE when every test channel gets its own fresh Steinhaus matrix."""
    if dictionary.matrix.shape[0] != data.n:
        raise ValueError(f"Dictionary has {dictionary.matrix.shape[0]} rows, channels have n={data.n}")

    def error(i: int) -> float:
        a = sample_steinhaus_matrix(m, data.n, rng.substream("matrix", i))
        return _sample_error(
            a, None, data.samples[i], snr_db, p, dictionary,
            rng.substream("noise", i, snr_index), None, False,
        )

    mse = _accumulate(np.array(parallel_map(error, len(data), workers)), data)
    logger.debug(f"random @ {snr_db} dB: relative MSE {mse:.6g}")
    return EvalRecord(algorithm="random", snr=float(snr_db), mean=mse)


def rip_report(a: ComplexMatrix, probe: ChannelSet) -> RipReport:
    """Empirical isometry constant max |‖A h‖^2 - 1| over unit-norm probes."""
    if probe.normalization != "per-sample":
        probe = normalize_per_sample(probe)
    norms = np.linalg.norm(probe.samples @ np.asarray(a).T, axis=1)
    q05, q50, q95 = np.quantile(norms, [0.05, 0.5, 0.95])
    return RipReport(
        delta=float(np.max(np.abs(norms**2 - 1.0))),
        mean_norm=float(np.mean(norms)),
        quantiles={"q05": float(q05), "q50": float(q50), "q95": float(q95)},
        probes=len(probe),
    )
