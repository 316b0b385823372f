"""
Gaussian mixture kernels and the biased (V-statistic) MMD^2 estimator.

The learning objective compares the stacked images stack(A(Phi) h_t) of a
channel batch against stacked sphere points stack(u_t). The gradient with
respect to Phi is derived by hand: for the Gaussian kernel
dk/dx = -k(x, y) (x - y) / sigma^2, and the phase derivative of the entry
A_kl h_l is i A_kl h_l.
"""

import logging
from typing import Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator
from scipy.spatial.distance import cdist

from numeric_core import PhaseMatrix, apply_stacked, phases_to_matrix, stack

logger = logging.getLogger(__name__)

PUBLISHED_BANDWIDTHS = (2.0, 5.0, 10.0, 20.0, 40.0, 80.0)


class KernelSpec(BaseModel):
    """Bandwidth set S of the mixture kernel k = sum_sigma k_sigma."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    bandwidths: Tuple[float, ...] = PUBLISHED_BANDWIDTHS

    @field_validator("bandwidths")
    @classmethod
    def _positive(cls, value):
        if len(value) == 0:
            raise ValueError("Kernel needs at least one bandwidth")
        if any(not np.isfinite(s) or s <= 0 for s in value):
            raise ValueError(f"Bandwidths must be positive and finite, got {value}")
        return value


def _as_batch(points) -> np.ndarray:
    batch = np.asarray(points, dtype=np.float64)
    if batch.ndim == 1:
        batch = batch[None, :]
    if batch.ndim != 2 or batch.shape[0] == 0:
        raise ValueError(f"Sample batch must be a non-empty list of vectors, got shape {batch.shape}")
    return batch


def _check_same_dim(x: np.ndarray, y: np.ndarray):
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"Dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")


def gaussian_kernel(x, y, sigma: float) -> float:
    x, y = np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)
    _check_same_dim(x, y)
    if sigma <= 0:
        raise ValueError(f"Bandwidth must be positive, got {sigma}")
    d = x - y
    return float(np.exp(-np.dot(d, d) / (2.0 * sigma**2)))


def mixture_kernel(x, y, spec: KernelSpec) -> float:
    return sum(gaussian_kernel(x, y, sigma) for sigma in spec.bandwidths)


def _kernel_terms(x: np.ndarray, y: np.ndarray, spec: KernelSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Mixture kernel matrix K and the weighted matrix W = sum_sigma K_sigma / sigma^2."""
    sq_dists = cdist(x, y, "sqeuclidean")
    kernel = np.zeros_like(sq_dists)
    weights = np.zeros_like(sq_dists)
    for sigma in spec.bandwidths:
        k_sigma = np.exp(-sq_dists / (2.0 * sigma**2))
        kernel += k_sigma
        weights += k_sigma / sigma**2
    return kernel, weights


def kernel_matrix(x, y, spec: KernelSpec) -> np.ndarray:
    x, y = _as_batch(x), _as_batch(y)
    _check_same_dim(x, y)
    return _kernel_terms(x, y, spec)[0]


def mmd2_biased(x, y, spec: KernelSpec) -> float:
    """Biased MMD^2: mean K(X, X) - 2 mean K(X, Y) + mean K(Y, Y), diagonals included."""
    x, y = _as_batch(x), _as_batch(y)
    _check_same_dim(x, y)
    kxx = _kernel_terms(x, x, spec)[0]
    kyy = _kernel_terms(y, y, spec)[0]
    kxy = _kernel_terms(x, y, spec)[0]
    return float(kxx.mean() - 2.0 * kxy.mean() + kyy.mean())


def _check_objective_inputs(phi: Union[PhaseMatrix, np.ndarray], h: np.ndarray, u: np.ndarray):
    phases = phi.phases if isinstance(phi, PhaseMatrix) else np.asarray(phi)
    if h.ndim != 2 or u.ndim != 2:
        raise ValueError("Channel and sphere batches must be 2-D (count, dim)")
    if h.shape[0] != u.shape[0]:
        raise ValueError(f"Batch size mismatch: {h.shape[0]} channels vs {u.shape[0]} sphere points")
    if h.shape[0] == 0:
        raise ValueError("Empty batch")
    m, n = phases.shape
    if h.shape[1] != n or u.shape[1] != m:
        raise ValueError(f"Expected channels of dim {n} and sphere points of dim {m}, got {h.shape[1]} and {u.shape[1]}")


def mmd2_objective(phi: Union[PhaseMatrix, np.ndarray], h, u, spec: KernelSpec) -> float:
    """MMD^2 between {stack(A(Phi) h_t)} and {stack(u_t)}."""
    h, u = np.atleast_2d(h), np.atleast_2d(u)
    _check_objective_inputs(phi, h, u)
    return mmd2_biased(apply_stacked(phi, h), stack(u), spec)


def mmd2_value_and_gradient(phi: Union[PhaseMatrix, np.ndarray], h, u, spec: KernelSpec) -> Tuple[float, np.ndarray]:
    """Objective value and its exact gradient with respect to the phases (m x n)."""
    h, u = np.atleast_2d(h), np.atleast_2d(u)
    _check_objective_inputs(phi, h, u)
    x = apply_stacked(phi, h)
    y = stack(u)
    big_m, big_n = x.shape[0], y.shape[0]

    kxx, wxx = _kernel_terms(x, x, spec)
    kxy, wxy = _kernel_terms(x, y, spec)
    kyy, _ = _kernel_terms(y, y, spec)
    value = float(kxx.mean() - 2.0 * kxy.mean() + kyy.mean())

    # d MMD^2 / d x_i; both orderings of the XX pair contribute, hence 2 / M^2
    grad_x = -(2.0 / big_m**2) * (wxx.sum(axis=1)[:, None] * x - wxx @ x)
    grad_x += (2.0 / (big_m * big_n)) * (wxy.sum(axis=1)[:, None] * x - wxy @ y)

    m = grad_x.shape[1] // 2
    g = grad_x[:, :m] + 1j * grad_x[:, m:]
    a = phases_to_matrix(phi)
    # dx/dphi_kl = stack(i A_kl h_l e_k); contract against g
    correlation = np.conj(g).T @ h
    gradient = np.real(1j * a * correlation)
    return value, gradient


def mmd2_gradient_phases(phi: Union[PhaseMatrix, np.ndarray], h, u, spec: KernelSpec) -> np.ndarray:
    return mmd2_value_and_gradient(phi, h, u, spec)[1]

