"""
Numeric core shared by every other module.

Holds the seeded random streams, the constant-modulus phase parameterization
A(Phi) = exp(i*Phi) / sqrt(m), the real stacking map and the random matrix
samplers (Haar unitaries, sphere points, Steinhaus matrices).
"""

import json
import logging
import zlib
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, TypeVar, Union

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import qr

logger = logging.getLogger(__name__)

# Complex matrices are plain 2-D complex128 arrays.
ComplexMatrix = np.ndarray

TWO_PI = 2.0 * np.pi

T = TypeVar("T")


def parallel_map(fn: Callable[[int], T], count: int, workers: int = 1) -> List[T]:
    """[fn(0), ..., fn(count - 1)] in index order, on `workers` threads when > 1."""
    if workers <= 1:
        return [fn(i) for i in range(count)]
    return Parallel(n_jobs=workers, prefer="threads")(delayed(fn)(i) for i in range(count))


@dataclass(frozen=True)
class SeededRng:
    """Named, splittable random stream.

    The same (seed, stream, index) always yields the same sequence. Streams are
    derived with `substream`, never by drawing seeds from a parent, so the
    order in which substreams are created does not matter.
    """

    seed: int
    stream: str = "main"
    index: Tuple[int, ...] = ()
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError(f"Seed must be a 64-bit unsigned integer, got {self.seed}")
        label = zlib.crc32(self.stream.encode("utf-8"))
        seq = np.random.SeedSequence(self.seed, spawn_key=(label, *self.index))
        object.__setattr__(self, "generator", np.random.Generator(np.random.Philox(seq)))

    def substream(self, label: str, *index: int) -> "SeededRng":
        return SeededRng(self.seed, f"{self.stream}/{label}", self.index + tuple(int(i) for i in index))

    def derive_seed(self) -> int:
        """Draw a fresh 63-bit seed, e.g. for a training trial."""
        return int(self.generator.integers(0, 2**63, dtype=np.int64))


@dataclass(frozen=True)
class PhaseMatrix:
    """Real m x n phase parameters of a constant-modulus matrix."""

    phases: np.ndarray

    def __post_init__(self):
        phases = np.array(self.phases, dtype=np.float64)
        if phases.ndim != 2 or 0 in phases.shape:
            raise ValueError(f"Phase matrix must be a non-empty 2-D array, got shape {phases.shape}")
        if not np.all(np.isfinite(phases)):
            raise ValueError("Phase matrix contains non-finite entries")
        phases.setflags(write=False)
        object.__setattr__(self, "phases", phases)

    @property
    def m(self) -> int:
        return self.phases.shape[0]

    @property
    def n(self) -> int:
        return self.phases.shape[1]


def _phase_array(phi: Union[PhaseMatrix, np.ndarray]) -> np.ndarray:
    return phi.phases if isinstance(phi, PhaseMatrix) else np.asarray(phi, dtype=np.float64)


def phases_to_matrix(phi: Union[PhaseMatrix, np.ndarray]) -> ComplexMatrix:
    """A(Phi) with entries exp(i*phi_kl) / sqrt(m)."""
    phases = _phase_array(phi)
    return np.exp(1j * phases) / np.sqrt(phases.shape[0])


def matrix_to_phases(a: ComplexMatrix, rtol: float = 1e-9) -> Tuple[PhaseMatrix, float]:
    """Split a constant-modulus matrix into its phases and the common modulus."""
    a = np.asarray(a, dtype=np.complex128)
    moduli = np.abs(a)
    modulus = float(moduli.mean())
    if modulus == 0 or np.max(np.abs(moduli - modulus)) > rtol * modulus:
        raise ValueError("Matrix entries do not share a common modulus")
    return PhaseMatrix(np.angle(a)), modulus


def stack(z: np.ndarray) -> np.ndarray:
    """[Re(z); Im(z)] along the last axis, so batches of shape (T, m) map to (T, 2m)."""
    z = np.asarray(z)
    return np.concatenate([z.real, z.imag], axis=-1).astype(np.float64)


def unstack(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    half = x.shape[-1] // 2
    return x[..., :half] + 1j * x[..., half:]


def apply_stacked(phi: Union[PhaseMatrix, np.ndarray], h: np.ndarray) -> np.ndarray:
    """stack(A(Phi) h) through the real block map [[C, -S], [S, C]] / sqrt(m).

    `h` is a single complex n-vector or a batch of shape (T, n).
    """
    phases = _phase_array(phi)
    h = np.asarray(h)
    if h.shape[-1] != phases.shape[1]:
        raise ValueError(
            f"Channel dimension {h.shape[-1]} does not match phase matrix with {phases.shape[1]} columns"
        )
    scale = 1.0 / np.sqrt(phases.shape[0])
    cos, sin = np.cos(phases) * scale, np.sin(phases) * scale
    re, im = h.real, h.imag
    real_part = re @ cos.T - im @ sin.T
    imag_part = re @ sin.T + im @ cos.T
    return np.concatenate([real_part, imag_part], axis=-1)


def complex_gaussian(shape, rng: SeededRng, variance: float = 1.0) -> np.ndarray:
    """CN(0, variance) samples: real and imaginary parts each N(0, variance / 2)."""
    gen = rng.generator
    scale = np.sqrt(variance / 2.0)
    return scale * (gen.standard_normal(shape) + 1j * gen.standard_normal(shape))


def random_unitary(n: int, rng: SeededRng) -> ComplexMatrix:
    """Haar-distributed n x n unitary from the QR of a Ginibre matrix.

    Column j of Q is multiplied by R_jj / |R_jj| so that the implied R has a
    positive diagonal, which makes the factorization unique.
    """
    if n < 1:
        raise ValueError(f"Dimension must be positive, got {n}")
    z = complex_gaussian((n, n), rng)
    q, r = qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def sample_sphere(m: int, count: int, rng: SeededRng) -> np.ndarray:
    """`count` points uniform on the unit sphere of C^m, as rows of a (count, m) array."""
    if m < 1 or count < 1:
        raise ValueError(f"Need m >= 1 and count >= 1, got m={m}, count={count}")
    v = complex_gaussian((count, m), rng)
    norms = np.linalg.norm(v, axis=1)
    # measure-zero, but never divide by zero
    while np.any(norms == 0):
        zero = norms == 0
        v[zero] = complex_gaussian((int(zero.sum()), m), rng)
        norms = np.linalg.norm(v, axis=1)
    return v / norms[:, None]


def sample_steinhaus_matrix(m: int, n: int, rng: SeededRng) -> ComplexMatrix:
    """Random constant-modulus matrix with phases uniform in [0, 2*pi)."""
    if m < 1 or n < 1:
        raise ValueError(f"Need m, n >= 1, got m={m}, n={n}")
    return phases_to_matrix(rng.generator.uniform(0.0, TWO_PI, size=(m, n)))


def save_phase_matrix(path: str, phi: PhaseMatrix, modulus: Optional[float] = None, **extra) -> None:
    """Write a phase table (radians) plus the common entry modulus as JSON.

    JSON floats use the shortest round-trip representation, so reading the
    file back reproduces the phases bit-exactly.
    """
    record = {
        "m": phi.m,
        "n": phi.n,
        "modulus": float(modulus) if modulus is not None else float(1.0 / np.sqrt(phi.m)),
        "phases": phi.phases.tolist(),
    }
    record.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(record, f, indent=1)
    logger.info(f"Wrote {phi.m}x{phi.n} phase matrix to {path}")


def load_phase_matrix(path: str) -> Tuple[PhaseMatrix, float]:
    with open(path, "r", encoding="utf-8") as f:
        record = json.load(f)
    phi = PhaseMatrix(np.array(record["phases"], dtype=np.float64))
    if phi.m != record["m"] or phi.n != record["n"]:
        raise ValueError(f"Phase table in {path} has shape {phi.phases.shape}, header says {record['m']}x{record['n']}")
    return phi, float(record["modulus"])


def load_measurement_matrix(path: str) -> ComplexMatrix:
    phi, modulus = load_phase_matrix(path)
    return modulus * np.exp(1j * phi.phases)
