"""
Tests for the Adam update, the training loop and the hyperparameter search.
"""
import logging
import os
import sys

import numpy as np
import pytest
from pydantic import ValidationError

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from channels import ChannelModelSpec, generate, normalize_average, normalize_per_sample
from learner import (
    BETA1,
    BETA2,
    EPSILON,
    AdamState,
    SearchSpace,
    TrainConfig,
    adaptive_moment_step,
    load_report,
    random_search,
    train,
)
from mmd import KernelSpec, mmd2_objective
from numeric_core import PhaseMatrix, SeededRng, sample_sphere

KERNEL = KernelSpec()
SPEC = ChannelModelSpec(model="multipath", n=8, p=2)


@pytest.fixture(scope="module")
def datasets():
    root = SeededRng(100)
    return generate(SPEC, 200, root.substream("train")), generate(SPEC, 60, root.substream("val"))


def small_config(**overrides):
    values = dict(batch_size=32, learning_rate=0.02, max_iterations=60, validation_interval=10, patience=20, seed=3)
    values.update(overrides)
    return TrainConfig(**values)


def test_adam_hand_trace():
    """Two steps reproduce the bias-corrected Adam recursion."""
    params = np.array([1.0, -2.0])
    state = AdamState.zeros(2)
    lr = 0.1
    m = v = np.zeros(2)
    expected = params.copy()
    for step, g in enumerate([np.array([0.5, -1.0]), np.array([-0.5, 3.0])], start=1):
        params, state = adaptive_moment_step(params, g, state, step, lr)
        m = BETA1 * m + (1 - BETA1) * g
        v = BETA2 * v + (1 - BETA2) * g * g
        expected = expected - lr * (m / (1 - BETA1**step)) / (np.sqrt(v / (1 - BETA2**step)) + EPSILON)
        np.testing.assert_allclose(params, expected, rtol=1e-14)
        np.testing.assert_allclose(state.first, m, rtol=1e-14)
        np.testing.assert_allclose(state.second, v, rtol=1e-14)


def test_adam_first_step_moves_by_learning_rate():
    """With bias correction the first step has magnitude close to the learning rate."""
    params, _ = adaptive_moment_step(np.zeros(3), np.array([1e-3, -5.0, 40.0]), AdamState.zeros(3), 1, 0.01)
    np.testing.assert_allclose(np.abs(params), 0.01, rtol=1e-4)


def test_adam_rejects_bad_input():
    state = AdamState.zeros(2)
    with pytest.raises(FloatingPointError):
        adaptive_moment_step(np.zeros(2), np.array([np.nan, 1.0]), state, 1, 0.1)
    with pytest.raises(ValueError):
        adaptive_moment_step(np.zeros(2), np.zeros(3), state, 1, 0.1)
    with pytest.raises(ValueError):
        adaptive_moment_step(np.zeros(2), np.zeros(2), state, 0, 0.1)


def test_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig(decay=0.0)
    with pytest.raises(ValidationError):
        TrainConfig(decay=1.5)
    with pytest.raises(ValidationError):
        TrainConfig(batch_size=1)
    with pytest.raises(ValidationError):
        SearchSpace(decay=(0.9, 1.1))
    with pytest.raises(ValidationError):
        SearchSpace(learning_rate=(0.0, 1e-3))
    with pytest.raises(ValidationError):
        SearchSpace(batch_size=(500, 100))
    assert TrainConfig(learning_rate=0.0).learning_rate == 0.0


def test_training_improves_validation(datasets):
    data, val = datasets
    report = train(data, small_config(max_iterations=300, validation_interval=20), KERNEL, 3, val)
    assert report.phases.phases.shape == (3, 8)
    assert report.best_validation < report.trace[0].validation_objective
    assert report.trace[0].iteration == 0
    assert min(point.validation_objective for point in report.trace) == report.best_validation


def test_best_validation_matches_returned_phases(datasets):
    """The reported best validation objective belongs to the returned phases."""
    data, val = datasets
    config = small_config()
    report = train(data, config, KERNEL, 3, val)
    val_u = sample_sphere(3, len(val), SeededRng(config.seed, "train").substream("validation-sphere"))
    value = mmd2_objective(report.phases, normalize_average(val).samples, val_u, KERNEL)
    assert value == pytest.approx(report.best_validation, rel=1e-12)


def test_training_is_deterministic(datasets):
    data, val = datasets
    first = train(data, small_config(), KERNEL, 3, val)
    second = train(data, small_config(), KERNEL, 3, val)
    np.testing.assert_array_equal(first.phases.phases, second.phases.phases)
    assert first.trace == second.trace


def test_zero_learning_rate_keeps_initialization(datasets):
    data, val = datasets
    init = PhaseMatrix(SeededRng(5).generator.uniform(0, 2 * np.pi, size=(3, 8)))
    config = small_config(learning_rate=0.0, init="from-phases", validation_interval=5, patience=3)
    report = train(data, config, KERNEL, 3, val, init_phases=init)
    np.testing.assert_array_equal(report.phases.phases, init.phases)
    # never improves, so training stops after `patience` checks
    assert report.iterations == 15
    assert len(report.trace) == 4


def test_zero_iterations_returns_initialization(datasets):
    data, val = datasets
    init = PhaseMatrix(np.zeros((3, 8)))
    report = train(data, small_config(max_iterations=0, init="from-phases"), KERNEL, 3, val, init_phases=init)
    assert report.iterations == 0
    assert len(report.trace) == 1
    np.testing.assert_array_equal(report.phases.phases, init.phases)


def test_fixed_sphere_samples_mode(datasets):
    data, val = datasets
    report = train(data, small_config(fresh_sphere_samples=False, normalization="per-sample"), KERNEL, 3, val)
    assert report.config.normalization == "per-sample"
    assert np.isfinite(report.best_validation)


def test_batch_larger_than_training_set(datasets, caplog):
    data, val = datasets
    with caplog.at_level(logging.WARNING, logger="learner"):
        report = train(data, small_config(batch_size=500, max_iterations=10), KERNEL, 3, val)
    assert "exceeds" in caplog.text
    assert report.iterations == 10


def test_training_input_validation(datasets):
    data, val = datasets
    with pytest.raises(ValueError):
        train(data, small_config(init="from-phases"), KERNEL, 3, val)
    with pytest.raises(ValueError):
        train(data, small_config(init="from-phases"), KERNEL, 3, val, init_phases=PhaseMatrix(np.zeros((4, 8))))
    with pytest.raises(ValueError):
        train(normalize_per_sample(data), small_config(normalization="average"), KERNEL, 3, val)


def test_report_file_round_trip(datasets, tmp_path):
    data, val = datasets
    report = train(data, small_config(max_iterations=20), KERNEL, 3, val)
    path = str(tmp_path / "learned.json")
    report.save(path)

    loaded = load_report(path)
    np.testing.assert_array_equal(loaded.phases.phases, report.phases.phases)
    assert loaded.trace == report.trace
    assert loaded.config == report.config
    assert loaded.best_validation == report.best_validation


SMALL_SPACE = SearchSpace(batch_size=(16, 64), learning_rate=(1e-3, 5e-2), decay=(0.9, 1.0), trials=3)


def test_random_search_keeps_best_trial(datasets):
    data, val = datasets
    base = small_config(max_iterations=20)
    best = random_search(data, SMALL_SPACE, KERNEL, 3, SeededRng(7), val, base_config=base)
    assert len(best.search) == 3
    assert best.selection_score == min(trial["score"] for trial in best.search)
    for trial in best.search:
        assert 16 <= trial["batch_size"] <= 64
        assert 1e-3 <= trial["learning_rate"] <= 5e-2
        assert 0.9 <= trial["decay"] <= 1.0


def test_random_search_deterministic_and_parallel_safe(datasets):
    data, val = datasets
    base = small_config(max_iterations=20)
    serial = random_search(data, SMALL_SPACE, KERNEL, 3, SeededRng(8), val, base_config=base)
    parallel = random_search(data, SMALL_SPACE, KERNEL, 3, SeededRng(8), val, base_config=base, workers=3)
    np.testing.assert_array_equal(serial.phases.phases, parallel.phases.phases)
    assert serial.search == parallel.search


def test_random_search_from_initial_phases(datasets):
    """The first round(fraction * trials) trials start from the given phases."""
    data, val = datasets
    space = SMALL_SPACE.model_copy(update={"trials": 4, "lbcs_init_fraction": 0.5})
    init = PhaseMatrix(SeededRng(9).generator.uniform(0, 2 * np.pi, size=(3, 8)))
    best = random_search(data, space, KERNEL, 3, SeededRng(10), val,
                         base_config=small_config(max_iterations=10), init_phases=init)
    assert [trial["init"] for trial in best.search] == ["from-phases", "from-phases", "uniform-random", "uniform-random"]


def test_random_search_custom_scorer(datasets):
    data, val = datasets
    base = small_config(max_iterations=10)
    best = random_search(data, SMALL_SPACE, KERNEL, 3, SeededRng(11), val, base_config=base,
                         scorer=lambda report: -report.best_validation)
    assert best.selection_score == -max(trial["best_validation"] for trial in best.search)


def test_random_search_all_trials_fail(datasets):
    data, val = datasets

    def broken(report):
        raise ValueError("scorer unavailable")

    with pytest.raises(RuntimeError, match="scorer unavailable"):
        random_search(data, SMALL_SPACE, KERNEL, 3, SeededRng(12), val,
                      base_config=small_config(max_iterations=5), scorer=broken)


def test_random_search_trials_share_validation_targets(datasets):
    """The same starting phases score the same validation MMD^2 in every trial."""
    data, val = datasets
    space = SMALL_SPACE.model_copy(update={"trials": 4, "lbcs_init_fraction": 1.0})
    init = PhaseMatrix(SeededRng(13).generator.uniform(0, 2 * np.pi, size=(3, 8)))
    best = random_search(data, space, KERNEL, 3, SeededRng(14), val,
                         base_config=small_config(max_iterations=0), init_phases=init)
    scores = [trial["best_validation"] for trial in best.search]
    assert len(scores) == 4
    assert len(set(scores)) == 1


def test_train_uses_given_validation_targets(datasets):
    """Supplied sphere points replace the run's own draw, whatever the seed."""
    data, val = datasets
    init = PhaseMatrix(SeededRng(15).generator.uniform(0, 2 * np.pi, size=(3, 8)))
    targets = sample_sphere(3, len(val), SeededRng(16))
    reports = [
        train(data, small_config(max_iterations=0, init="from-phases", seed=seed), KERNEL, 3, val,
              init_phases=init, validation_targets=targets)
        for seed in (1, 2, 3)
    ]
    expected = mmd2_objective(init.phases, normalize_average(val).samples, targets, KERNEL)
    assert [r.best_validation for r in reports] == [expected] * 3


def test_train_rejects_misshapen_validation_targets(datasets):
    data, val = datasets
    with pytest.raises(ValueError, match="Validation targets"):
        train(data, small_config(), KERNEL, 3, val, validation_targets=sample_sphere(3, len(val) - 1, SeededRng(17)))


def test_train_config_seed_bounded():
    """Seeds outside the 64-bit range fail at validation, not when training starts."""
    TrainConfig(seed=2**64 - 1)
    with pytest.raises(ValidationError):
        TrainConfig(seed=2**64)
