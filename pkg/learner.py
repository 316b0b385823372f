"""
Stochastic-gradient learning of the phase matrix Phi.

Each iteration draws T normalized channels and T sphere points, takes the
analytic MMD^2 gradient and applies an Adam step with the exponentially
decayed rate l_r * beta^epoch. The phases with the best validation MMD^2 are
returned. `random_search` wraps `train` in a random search over (T, l_r, beta).
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Literal, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from channels import ChannelSet, normalize
from mmd import KernelSpec, mmd2_objective, mmd2_value_and_gradient
from numeric_core import (
    TWO_PI,
    PhaseMatrix,
    SeededRng,
    load_phase_matrix,
    parallel_map,
    sample_sphere,
    save_phase_matrix,
)

logger = logging.getLogger(__name__)

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8


class TrainConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    batch_size: int = Field(default=500, ge=2)
    # zero is allowed and freezes the initialization
    learning_rate: float = Field(default=1e-3, ge=0)
    decay: float = Field(default=1.0, gt=0, le=1)
    max_iterations: int = Field(default=10000, ge=0)
    validation_interval: int = Field(default=100, ge=1)
    patience: int = Field(default=20, ge=1)
    init: Literal["uniform-random", "from-phases"] = "uniform-random"
    normalization: Literal["per-sample", "average"] = "average"
    fresh_sphere_samples: bool = True
    seed: int = Field(default=0, ge=0, lt=2**64)


class SearchSpace(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    batch_size: Tuple[int, int] = (150, 1500)
    learning_rate: Tuple[float, float] = (1e-6, 5e-3)
    decay: Tuple[float, float] = (0.94, 1.0)
    trials: int = Field(default=64, ge=1)
    lbcs_init_fraction: float = Field(default=0.0, ge=0, le=1)

    @model_validator(mode="after")
    def _check_ranges(self):
        for name in ("batch_size", "learning_rate", "decay"):
            low, high = getattr(self, name)
            if low > high:
                raise ValueError(f"{name} range is empty: [{low}, {high}]")
        if self.batch_size[0] < 2:
            raise ValueError(f"Batch size must be at least 2, got {self.batch_size[0]}")
        if self.learning_rate[0] <= 0:
            raise ValueError("Learning rate range must be positive (it is sampled log-uniformly)")
        if self.decay[0] <= 0 or self.decay[1] > 1:
            raise ValueError(f"Decay range must lie in (0, 1], got {self.decay}")
        return self


class TracePoint(NamedTuple):
    iteration: int
    train_objective: float
    validation_objective: float


@dataclass
class TrainReport:
    phases: PhaseMatrix
    best_validation: float
    iterations: int
    trace: List[TracePoint]
    config: TrainConfig
    selection_score: Optional[float] = None
    search: List[Dict] = field(default_factory=list)

    def save(self, path: str) -> None:
        save_phase_matrix(
            path,
            self.phases,
            best_validation=self.best_validation,
            iterations=self.iterations,
            selection_score=self.selection_score,
            config=self.config.model_dump(mode="json"),
            trace=[list(point) for point in self.trace],
            search=self.search,
        )


def load_report(path: str) -> TrainReport:
    phases, _ = load_phase_matrix(path)
    with open(path, "r", encoding="utf-8") as f:
        record = json.load(f)
    return TrainReport(
        phases=phases,
        best_validation=record["best_validation"],
        iterations=record["iterations"],
        trace=[TracePoint(*row) for row in record["trace"]],
        config=TrainConfig(**record["config"]),
        selection_score=record.get("selection_score"),
        search=record.get("search", []),
    )


@dataclass(frozen=True)
class AdamState:
    first: np.ndarray
    second: np.ndarray

    @classmethod
    def zeros(cls, shape) -> "AdamState":
        return cls(np.zeros(shape), np.zeros(shape))


def adaptive_moment_step(
    params: np.ndarray, gradient: np.ndarray, state: AdamState, step: int, learning_rate: float
) -> Tuple[np.ndarray, AdamState]:
    """One Adam update; `step` counts from 1 and drives the bias correction."""
    if gradient.shape != params.shape:
        raise ValueError(f"Gradient shape {gradient.shape} does not match parameters {params.shape}")
    if step < 1:
        raise ValueError(f"Adam step index starts at 1, got {step}")
    if not np.all(np.isfinite(gradient)):
        raise FloatingPointError(f"Non-finite gradient at step {step}; aborting training")
    first = BETA1 * state.first + (1.0 - BETA1) * gradient
    second = BETA2 * state.second + (1.0 - BETA2) * (gradient * gradient)
    first_hat = first / (1.0 - BETA1**step)
    second_hat = second / (1.0 - BETA2**step)
    updated = params - learning_rate * first_hat / (np.sqrt(second_hat) + EPSILON)
    return updated, AdamState(first, second)


def _prepare(data: ChannelSet, mode: str, role: str) -> ChannelSet:
    if data.normalization == mode:
        return data
    if data.normalization == "raw":
        return normalize(data, mode)
    raise ValueError(f"{role} data is {data.normalization}-normalized but training expects {mode}")


def train(
    data: ChannelSet,
    config: TrainConfig,
    kernel: KernelSpec,
    m: int,
    validation: ChannelSet,
    init_phases: Optional[PhaseMatrix] = None,
    validation_targets: Optional[np.ndarray] = None,
) -> TrainReport:
    """Learn phases for an m-row matrix from `data`.

    `validation_targets` are the sphere points the validation MMD^2 is scored
    against, shape (len(validation), m). Runs that are compared with each
    other must share them; when omitted they come from the run's own seed.
    """
    if len(data) == 0 or len(validation) == 0:
        raise ValueError("Training and validation sets must be non-empty")
    if config.init == "from-phases":
        if init_phases is None:
            raise ValueError("init='from-phases' needs initial phases")
        if init_phases.phases.shape != (m, data.n):
            raise ValueError(f"Initial phases have shape {init_phases.phases.shape}, expected ({m}, {data.n})")

    data = _prepare(data, config.normalization, "Training")
    validation = _prepare(validation, config.normalization, "Validation")
    count = len(data)
    rng = SeededRng(config.seed, "train")

    if config.init == "from-phases":
        phases = np.array(init_phases.phases)
    else:
        phases = rng.substream("init").generator.uniform(0.0, TWO_PI, size=(m, data.n))

    batch = config.batch_size
    if batch > count:
        logger.warning(f"Batch size {batch} exceeds {count} training samples; using {count}")
        batch = count

    if validation_targets is None:
        val_u = sample_sphere(m, len(validation), rng.substream("validation-sphere"))
    else:
        val_u = np.asarray(validation_targets, dtype=np.complex128)
        if val_u.shape != (len(validation), m):
            raise ValueError(f"Validation targets have shape {val_u.shape}, expected ({len(validation)}, {m})")
    fixed_u = None if config.fresh_sphere_samples else sample_sphere(m, count, rng.substream("train-sphere"))
    batch_gen = rng.substream("train-batch").generator
    noise = rng.substream("noise")

    def draw(gen: np.random.Generator, sphere_rng: SeededRng):
        idx = gen.choice(count, size=batch, replace=False)
        u = sample_sphere(m, batch, sphere_rng) if fixed_u is None else fixed_u[idx]
        return data.samples[idx], u

    probe_rng = rng.substream("probe")
    probe_h, probe_u = draw(probe_rng.generator, probe_rng)
    best_val = mmd2_objective(phases, validation.samples, val_u, kernel)
    best_phases = phases.copy()
    trace = [TracePoint(0, mmd2_objective(phases, probe_h, probe_u, kernel), best_val)]

    state = AdamState.zeros(phases.shape)
    running: List[float] = []
    stale_checks = 0
    iteration = 0
    for iteration in range(1, config.max_iterations + 1):
        h, u = draw(batch_gen, noise)
        value, gradient = mmd2_value_and_gradient(phases, h, u, kernel)
        epoch = ((iteration - 1) * batch) // count
        rate = config.learning_rate * config.decay**epoch
        phases, state = adaptive_moment_step(phases, gradient, state, iteration, rate)
        running.append(value)

        if iteration % config.validation_interval and iteration != config.max_iterations:
            continue
        val = mmd2_objective(phases, validation.samples, val_u, kernel)
        trace.append(TracePoint(iteration, float(np.mean(running)), val))
        running = []
        logger.debug(f"iter {iteration}: train {trace[-1].train_objective:.6g}, validation {val:.6g}")
        if val < best_val:
            best_val, best_phases, stale_checks = val, phases.copy(), 0
        else:
            stale_checks += 1
            if stale_checks >= config.patience:
                logger.info(f"Early stopping at iteration {iteration} (best validation {best_val:.6g})")
                break

    return TrainReport(
        phases=PhaseMatrix(best_phases),
        best_validation=best_val,
        iterations=iteration,
        trace=trace,
        config=config,
    )


def random_search(
    data: ChannelSet,
    space: SearchSpace,
    kernel: KernelSpec,
    m: int,
    rng: SeededRng,
    validation: ChannelSet,
    base_config: Optional[TrainConfig] = None,
    init_phases: Optional[PhaseMatrix] = None,
    scorer: Optional[Callable[[TrainReport], float]] = None,
    workers: int = 1,
) -> TrainReport:
    """Best of `space.trials` training runs with random (T, l_r, beta).

    T is drawn uniformly from the integers, l_r log-uniformly and beta
    uniformly. With `init_phases`, the first round(fraction * trials) trials
    start from them. Every trial scores validation MMD^2 against the same
    sphere sample. Trials are ranked by `scorer` when given, otherwise by
    their best validation MMD^2; ties keep the lowest trial index.
    """
    base = base_config or TrainConfig()
    gen = rng.substream("hyperparameters").generator
    from_phases = round(space.lbcs_init_fraction * space.trials) if init_phases is not None else 0

    val_u = sample_sphere(m, len(validation), rng.substream("validation-sphere"))

    configs = []
    for i in range(space.trials):
        log_lr = gen.uniform(np.log(space.learning_rate[0]), np.log(space.learning_rate[1]))
        configs.append(TrainConfig(**{
            **base.model_dump(),
            "batch_size": int(gen.integers(space.batch_size[0], space.batch_size[1], endpoint=True)),
            "learning_rate": float(np.exp(log_lr)),
            "decay": float(gen.uniform(space.decay[0], space.decay[1])),
            "seed": rng.substream("trial", i).derive_seed(),
            "init": "from-phases" if i < from_phases else "uniform-random",
        }))

    def run_trial(i: int):
        config = configs[i]
        try:
            report = train(data, config, kernel, m, validation,
                           init_phases=init_phases if config.init == "from-phases" else None,
                           validation_targets=val_u)
            report.selection_score = scorer(report) if scorer is not None else report.best_validation
        except Exception as e:
            logger.error(f"Trial {i} failed: {e}")
            return None, f"trial {i}: {e}"
        logger.info(
            f"Trial {i}: T={config.batch_size}, l_r={config.learning_rate:.3g}, beta={config.decay:.4f}, "
            f"init={config.init} -> score {report.selection_score:.6g} after {report.iterations} iterations"
        )
        return report, None

    outcomes = parallel_map(run_trial, space.trials, workers)

    failures = [error for _, error in outcomes if error is not None]
    summary = []
    best: Optional[TrainReport] = None
    for i, (report, _) in enumerate(outcomes):
        if report is None:
            continue
        summary.append({
            "trial": i,
            "batch_size": report.config.batch_size,
            "learning_rate": report.config.learning_rate,
            "decay": report.config.decay,
            "init": report.config.init,
            "best_validation": report.best_validation,
            "score": report.selection_score,
        })
        if best is None or report.selection_score < best.selection_score:
            best = report

    if best is None:
        raise RuntimeError(f"All {space.trials} random-search trials failed: " + "; ".join(failures))
    best.search = summary
    return best
