"""
Tests for the phase parameterization, random streams and random matrix samplers.
"""
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from numeric_core import (
    PhaseMatrix,
    SeededRng,
    apply_stacked,
    load_measurement_matrix,
    load_phase_matrix,
    matrix_to_phases,
    parallel_map,
    phases_to_matrix,
    random_unitary,
    sample_sphere,
    sample_steinhaus_matrix,
    save_phase_matrix,
    stack,
    unstack,
)


def test_same_stream_same_sequence():
    """Identical (seed, stream, index) reproduce the draws exactly."""
    a = SeededRng(42, "noise").substream("sample", 3).generator.standard_normal(5)
    b = SeededRng(42, "noise").substream("sample", 3).generator.standard_normal(5)
    np.testing.assert_array_equal(a, b)


def test_substreams_independent_of_creation_order():
    """Creating other substreams first does not change a substream's draws."""
    root = SeededRng(7)
    first = root.substream("x").generator.random(4)

    other = SeededRng(7)
    other.substream("y").generator.random(100)
    other.substream("z", 1, 2)
    second = other.substream("x").generator.random(4)
    np.testing.assert_array_equal(first, second)


def test_different_labels_differ():
    """Different stream labels or indices give different sequences."""
    root = SeededRng(1)
    a = root.substream("a").generator.random(8)
    b = root.substream("b").generator.random(8)
    c = root.substream("a", 1).generator.random(8)
    assert not np.allclose(a, b)
    assert not np.allclose(a, c)


def test_seed_range_checked():
    """Negative or oversized seeds are rejected."""
    with pytest.raises(ValueError):
        SeededRng(-1)
    with pytest.raises(ValueError):
        SeededRng(2**64)


def test_constant_modulus_entries():
    """Every entry of A(Phi) has modulus 1/sqrt(m) over many random draws."""
    gen = SeededRng(3).generator
    for _ in range(1000):
        m, n = gen.integers(1, 12), gen.integers(1, 24)
        phases = gen.uniform(-10.0, 10.0, size=(m, n))
        a = phases_to_matrix(PhaseMatrix(phases))
        assert np.max(np.abs(np.abs(a) - 1.0 / np.sqrt(m))) <= 1e-15


def test_phase_matrix_validation():
    """Non-finite or non-2-D phase tables are rejected, valid ones are read-only copies."""
    with pytest.raises(ValueError):
        PhaseMatrix(np.array([[0.0, np.nan]]))
    with pytest.raises(ValueError):
        PhaseMatrix(np.zeros(4))
    source = np.zeros((2, 3))
    phi = PhaseMatrix(source)
    source[0, 0] = 1.0
    assert phi.phases[0, 0] == 0.0
    assert (phi.m, phi.n) == (2, 3)
    with pytest.raises(ValueError):
        phi.phases[0, 0] = 5.0


def test_matrix_to_phases_round_trip():
    """Phases recovered from A(Phi) reproduce the same matrix."""
    gen = SeededRng(4).generator
    phases = gen.uniform(0, 2 * np.pi, size=(3, 5))
    a = phases_to_matrix(phases)
    phi, modulus = matrix_to_phases(a)
    assert abs(modulus - 1 / np.sqrt(3)) < 1e-15
    np.testing.assert_allclose(phases_to_matrix(phi), a, atol=1e-15)


def test_matrix_to_phases_rejects_unequal_moduli():
    """A matrix without a common entry modulus has no phase representation."""
    with pytest.raises(ValueError):
        matrix_to_phases(np.array([[1.0, 2.0j]]))


def test_stack_layout_and_inverse():
    """stack puts real parts first, imaginary parts second, and unstack inverts it."""
    z = np.array([1 + 2j, 3 - 4j])
    np.testing.assert_array_equal(stack(z), [1.0, 3.0, 2.0, -4.0])
    np.testing.assert_array_equal(unstack(stack(z)), z)


def test_apply_stacked_matches_complex_product():
    """The real block map agrees with stacking the complex product, for vectors and batches."""
    gen = SeededRng(5).generator
    phases = gen.uniform(0, 2 * np.pi, size=(4, 8))
    h = gen.standard_normal((6, 8)) + 1j * gen.standard_normal((6, 8))
    expected = stack(h @ phases_to_matrix(phases).T)
    np.testing.assert_allclose(apply_stacked(phases, h), expected, atol=1e-13)
    np.testing.assert_allclose(apply_stacked(phases, h[0]), expected[0], atol=1e-13)


def test_apply_stacked_dimension_mismatch():
    """A channel of the wrong length is rejected."""
    with pytest.raises(ValueError):
        apply_stacked(np.zeros((2, 4)), np.ones(5, dtype=complex))


def test_random_unitary_gram_residual():
    """Haar samples are unitary to 1e-10 over many draws."""
    root = SeededRng(6)
    for i in range(1000):
        n = 1 + i % 16
        q = random_unitary(n, root.substream("u", i))
        assert np.max(np.abs(q.conj().T @ q - np.eye(n))) <= 1e-10


def test_random_unitary_phase_distribution():
    """Diagonal entries have no preferred phase (mean close to zero)."""
    root = SeededRng(8)
    diagonals = np.array([random_unitary(4, root.substream("u", i))[0, 0] for i in range(4000)])
    assert abs(np.mean(diagonals)) < 0.05


def test_sample_sphere_unit_norm():
    """Sphere points have unit norm and the requested shape."""
    u = sample_sphere(5, 200, SeededRng(9))
    assert u.shape == (200, 5)
    np.testing.assert_allclose(np.linalg.norm(u, axis=1), 1.0, atol=1e-14)


def test_sample_sphere_rejects_bad_sizes():
    with pytest.raises(ValueError):
        sample_sphere(0, 3, SeededRng(0))


def test_steinhaus_matrix_modulus_and_phase_spread():
    """Steinhaus entries have modulus 1/sqrt(m) and phases spread over the circle."""
    a = sample_steinhaus_matrix(8, 500, SeededRng(10))
    np.testing.assert_allclose(np.abs(a), 1 / np.sqrt(8), atol=1e-15)
    assert abs(np.mean(np.exp(1j * np.angle(a)))) < 0.05


def test_phase_matrix_file_round_trip(tmp_path):
    """Stored phases reload bit-exactly, with the modulus and extra fields kept."""
    gen = SeededRng(11).generator
    phi = PhaseMatrix(gen.uniform(0, 2 * np.pi, size=(3, 7)))
    path = str(tmp_path / "phi.json")
    save_phase_matrix(path, phi, snr=20.0)

    loaded, modulus = load_phase_matrix(path)
    np.testing.assert_array_equal(loaded.phases, phi.phases)
    assert modulus == float(1 / np.sqrt(3))
    np.testing.assert_array_equal(load_measurement_matrix(path), modulus * np.exp(1j * phi.phases))


def test_custom_modulus_is_stored(tmp_path):
    """Matrices with a modulus other than 1/sqrt(m) reload with that modulus."""
    phi = PhaseMatrix(np.zeros((2, 4)))
    path = str(tmp_path / "lbcs.json")
    save_phase_matrix(path, phi, 0.5)
    np.testing.assert_array_equal(load_measurement_matrix(path), np.full((2, 4), 0.5 + 0j))


def test_parallel_map_keeps_index_order():
    """Results come back in index order whatever the worker count."""
    square = lambda i: i * i
    assert parallel_map(square, 10) == [i * i for i in range(10)]
    assert parallel_map(square, 10, workers=4) == [i * i for i in range(10)]
    assert parallel_map(square, 0, workers=4) == []


def test_sample_sphere_isotropic():
    """No coordinate of C^4 is preferred: each empirical mean is close to zero."""
    u = sample_sphere(4, 100_000, SeededRng(12))
    assert np.max(np.abs(u.mean(axis=0))) <= 0.02


def test_sample_sphere_scalar_is_unit_phase():
    u = sample_sphere(1, 50, SeededRng(13))
    np.testing.assert_allclose(np.abs(u), 1.0, atol=1e-15)


def test_stack_is_real_linear_isometry():
    """stack adds, scales by real numbers and keeps Euclidean norms."""
    gen = SeededRng(14).generator
    for _ in range(100):
        n = int(gen.integers(1, 10))
        z = gen.standard_normal(n) + 1j * gen.standard_normal(n)
        w = gen.standard_normal(n) + 1j * gen.standard_normal(n)
        c = gen.uniform(-5, 5)
        np.testing.assert_allclose(stack(z + w), stack(z) + stack(w), atol=1e-14)
        np.testing.assert_allclose(stack(c * z), c * stack(z), atol=1e-13)
        assert abs(np.linalg.norm(stack(z)) - np.linalg.norm(z)) <= 1e-13
