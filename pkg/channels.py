"""
Channel data models, recovery dictionaries and training-data normalization.

Three models are supported:
  canonical-sparse  h = s             (p nonzero entries, each CN(0, 1/p))
  dft-sparse        h = F s           (F the unitary DFT)
  multipath         h = sum_k s_k a(theta_k), theta_k ~ U[0, 2*pi)
"""

import json
import logging
from dataclasses import dataclass, replace
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.linalg import dft

from numeric_core import TWO_PI, ComplexMatrix, SeededRng, complex_gaussian

logger = logging.getLogger(__name__)

ChannelModel = Literal["canonical-sparse", "dft-sparse", "multipath"]
Normalization = Literal["raw", "per-sample", "average"]

# Oversampling factor of the steering grid (L = 16 n).
GRID_OVERSAMPLING = 16


class ChannelModelSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    model: ChannelModel
    n: int = Field(gt=0)
    p: int = Field(gt=0)
    grid_size: Optional[int] = None

    @model_validator(mode="after")
    def _check_sizes(self):
        if self.p > self.n:
            raise ValueError(f"Sparsity p={self.p} exceeds dimension n={self.n}")
        if self.grid_size is not None and self.grid_size < self.n:
            raise ValueError(f"Grid size L={self.grid_size} must be at least n={self.n}")
        return self

    @property
    def grid(self) -> int:
        return self.grid_size if self.grid_size is not None else GRID_OVERSAMPLING * self.n


@dataclass(frozen=True)
class Dictionary:
    matrix: ComplexMatrix
    kind: Literal["identity", "dft", "steering-grid"]
    angles: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class ChannelSet:
    """A batch of channels, one per row of `samples`."""

    samples: np.ndarray
    spec: ChannelModelSpec
    normalization: Normalization = "raw"

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim != 2 or samples.shape[1] != self.spec.n:
            raise ValueError(f"Samples must have shape (count, {self.spec.n}), got {samples.shape}")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def n(self) -> int:
        return self.spec.n

    def subset(self, indices) -> "ChannelSet":
        return replace(self, samples=self.samples[np.asarray(indices)])


def steering_vector(theta: float, n: int) -> np.ndarray:
    """ULA response a(theta) = exp(i * k * theta) / sqrt(n), k = 0..n-1."""
    if not np.isfinite(theta):
        raise ValueError(f"Angle must be finite, got {theta}")
    return np.exp(1j * np.arange(n) * theta) / np.sqrt(n)


def steering_matrix(angles: np.ndarray, n: int) -> ComplexMatrix:
    """Steering vectors for every angle, as columns."""
    return np.exp(1j * np.outer(np.arange(n), angles)) / np.sqrt(n)


def build_dictionary(n: int, grid_size: int) -> Dictionary:
    """Steering-grid dictionary on theta_l = 2*pi*l / L, l = 0..L-1 (2*pi excluded)."""
    if grid_size < 1:
        raise ValueError(f"Grid size must be positive, got {grid_size}")
    angles = TWO_PI * np.arange(grid_size) / grid_size
    return Dictionary(matrix=steering_matrix(angles, n), kind="steering-grid", angles=angles)


def dft_matrix(n: int) -> ComplexMatrix:
    return dft(n, scale="sqrtn")


def dictionary_for(spec: ChannelModelSpec) -> Dictionary:
    if spec.model == "canonical-sparse":
        return Dictionary(matrix=np.eye(spec.n, dtype=np.complex128), kind="identity")
    if spec.model == "dft-sparse":
        return Dictionary(matrix=dft_matrix(spec.n), kind="dft")
    return build_dictionary(spec.n, spec.grid)


def _sparse_coefficients(spec: ChannelModelSpec, count: int, rng: SeededRng) -> np.ndarray:
    gen = rng.generator
    s = np.zeros((count, spec.n), dtype=np.complex128)
    # ranks of iid uniform keys give a uniform support without replacement
    support = np.argsort(gen.random((count, spec.n)), axis=1)[:, : spec.p]
    gains = complex_gaussian((count, spec.p), rng, variance=1.0 / spec.p)
    np.put_along_axis(s, support, gains, axis=1)
    return s


def _require_model(spec: ChannelModelSpec, expected: str):
    if spec.model != expected:
        raise ValueError(f"Expected a {expected} spec, got {spec.model}")


def gen_canonical_sparse(spec: ChannelModelSpec, count: int, rng: SeededRng) -> ChannelSet:
    _require_model(spec, "canonical-sparse")
    return ChannelSet(_sparse_coefficients(spec, count, rng), spec)


def gen_dft_sparse(spec: ChannelModelSpec, count: int, rng: SeededRng) -> ChannelSet:
    _require_model(spec, "dft-sparse")
    s = _sparse_coefficients(spec, count, rng)
    return ChannelSet(s @ dft_matrix(spec.n).T, spec)


def gen_multipath(spec: ChannelModelSpec, count: int, rng: SeededRng) -> ChannelSet:
    _require_model(spec, "multipath")
    gen = rng.generator
    angles = gen.uniform(0.0, TWO_PI, size=(count, spec.p))
    gains = complex_gaussian((count, spec.p), rng, variance=1.0 / spec.p)
    k = np.arange(spec.n)
    h = np.zeros((count, spec.n), dtype=np.complex128)
    for path in range(spec.p):
        h += gains[:, path, None] * np.exp(1j * angles[:, path, None] * k) / np.sqrt(spec.n)
    return ChannelSet(h, spec)


GENERATORS = {
    "canonical-sparse": gen_canonical_sparse,
    "dft-sparse": gen_dft_sparse,
    "multipath": gen_multipath,
}


def generate(spec: ChannelModelSpec, count: int, rng: SeededRng) -> ChannelSet:
    if count < 1:
        raise ValueError(f"Sample count must be positive, got {count}")
    data = GENERATORS[spec.model](spec, count, rng)
    logger.debug(f"Generated {count} {spec.model} channels (n={spec.n}, p={spec.p})")
    return data


def normalize_per_sample(data: ChannelSet) -> ChannelSet:
    """Project every channel onto the unit sphere."""
    norms = np.linalg.norm(data.samples, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ValueError(f"Cannot normalize zero-norm sample at index {int(zero[0])}")
    return replace(data, samples=data.samples / norms[:, None], normalization="per-sample")


def normalize_average(data: ChannelSet) -> ChannelSet:
    """Divide every channel by sqrt(mean squared norm), so the set lies on the sphere on average."""
    mean_square = np.mean(np.sum(np.abs(data.samples) ** 2, axis=1))
    if mean_square == 0:
        raise ValueError("Cannot apply average normalization to an all-zero channel set")
    return replace(data, samples=data.samples / np.sqrt(mean_square), normalization="average")


def normalize(data: ChannelSet, mode: Normalization) -> ChannelSet:
    if mode == "per-sample":
        return normalize_per_sample(data)
    if mode == "average":
        return normalize_average(data)
    return data


def save_channel_set(path: str, data: ChannelSet) -> None:
    """Store samples as interleaved float64 (re, im) with a JSON header in an .npz container."""
    header = {
        "model": data.spec.model,
        "n": data.spec.n,
        "p": data.spec.p,
        "grid_size": data.spec.grid_size,
        "count": len(data),
        "normalization": data.normalization,
    }
    interleaved = np.ascontiguousarray(data.samples).view(np.float64)
    with open(path, "wb") as f:
        np.savez(f, header=np.array(json.dumps(header)), samples=interleaved)
    logger.info(f"Wrote {len(data)} channels to {path}")


def load_channel_set(path: str) -> ChannelSet:
    with np.load(path, allow_pickle=False) as archive:
        header = json.loads(str(archive["header"]))
        interleaved = archive["samples"]
    samples = np.ascontiguousarray(interleaved).view(np.complex128)
    if samples.shape[0] != header["count"]:
        raise ValueError(f"{path}: header says {header['count']} samples, found {samples.shape[0]}")
    spec = ChannelModelSpec(model=header["model"], n=header["n"], p=header["p"], grid_size=header["grid_size"])
    return ChannelSet(samples, spec, header["normalization"])
