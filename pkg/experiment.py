"""
End-to-end experiment: generate data, obtain one measurement matrix per
algorithm (one per SNR for LBCS), evaluate every matrix over the SNR grid and
write the results CSV plus a metadata file.

Output layout, under <output_dir>/<model>/:
    nAntennas_<n>_nPaths_<p>_nObservations_<m>.csv
    nAntennas_<n>_nPaths_<p>_nObservations_<m>_metadata.json
    nAntennas_<n>_nPaths_<p>_nObservations_<m>_matrices/<label>.json
"""

import csv
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from channels import ChannelModel, ChannelModelSpec, ChannelSet, Dictionary, dictionary_for, generate
from evaluation import EvalRecord, evaluate, evaluate_random_baseline, rip_report
from lbcs import mc_lbcs
from learner import SearchSpace, TrainConfig, TrainReport, random_search
from mmd import PUBLISHED_BANDWIDTHS, KernelSpec
from numeric_core import ComplexMatrix, SeededRng, matrix_to_phases, phases_to_matrix, save_phase_matrix

logger = logging.getLogger(__name__)

VERSION = "0.1.0"

Algorithm = Literal["random", "lbcs", "learned", "learned-lbcs-init"]

DEFAULT_SNR_GRID = [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    model: ChannelModel
    n: int = Field(gt=0)
    m: int = Field(gt=0)
    p: int = Field(gt=0)
    grid_size: Optional[int] = None
    snr_grid: List[float] = Field(default_factory=lambda: list(DEFAULT_SNR_GRID))
    algorithms: List[Algorithm] = Field(default_factory=lambda: ["random", "lbcs", "learned"])
    test_count: int = Field(default=10000, gt=0)
    train_count: int = Field(default=50000, gt=0)
    lbcs_train_count: int = Field(default=100000, gt=0)
    val_count: int = Field(default=1000, gt=0)
    bandwidths: Tuple[float, ...] = PUBLISHED_BANDWIDTHS
    search: SearchSpace = SearchSpace()
    training: TrainConfig = TrainConfig()
    mc_iterations: int = Field(default=100, gt=0)
    lbcs_init_snr_db: float = 20.0
    selection_metric: Literal["mmd", "mse"] = "mmd"
    selection_snr_db: float = 20.0
    compare_normalizations: bool = False
    seed: int = Field(ge=0, lt=2**64)
    output_dir: str = "results"
    workers: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def _check(self):
        if not self.snr_grid:
            raise ValueError("SNR grid must not be empty")
        if len(set(self.snr_grid)) != len(self.snr_grid):
            raise ValueError(f"SNR grid has duplicates: {self.snr_grid}")
        if not self.algorithms or len(set(self.algorithms)) != len(self.algorithms):
            raise ValueError(f"Algorithm set must be non-empty without duplicates, got {self.algorithms}")
        if self.m >= self.n:
            raise ValueError(f"Need fewer measurements than dimensions, got m={self.m}, n={self.n}")
        if self.p > self.m:
            raise ValueError(f"OMP cannot recover p={self.p} paths from m={self.m} measurements")
        if self.grid_size is not None and self.grid_size < self.n:
            raise ValueError(f"Grid size L={self.grid_size} must be at least n={self.n}")
        if not self.bandwidths or any(s <= 0 for s in self.bandwidths):
            raise ValueError(f"Bandwidths must be a non-empty set of positive values, got {self.bandwidths}")
        return self

    @property
    def channel_spec(self) -> ChannelModelSpec:
        return ChannelModelSpec(model=self.model, n=self.n, p=self.p, grid_size=self.grid_size)

    @property
    def stem(self) -> str:
        return f"nAntennas_{self.n}_nPaths_{self.p}_nObservations_{self.m}"


def _merge(values: Dict, overrides: Dict) -> Dict:
    merged = dict(values)
    for key, value in overrides.items():
        if value is None:
            continue
        if isinstance(value, dict):
            merged[key] = _merge(merged.get(key, {}), value)
        else:
            merged[key] = value
    return merged


def load_config(
    path: Optional[str] = None, overrides: Optional[Dict] = None, defaults: Optional[Dict] = None
) -> ExperimentConfig:
    """Build a config from defaults, an optional JSON key-value file and overrides.

    Later layers win; nested sections (`search`, `training`) are merged key
    by key and None values are ignored.
    """
    values: Dict = {}
    if path:
        with open(path, "r", encoding="utf-8") as f:
            values = json.load(f)
    return ExperimentConfig(**_merge(_merge(defaults or {}, values), overrides or {}))


@dataclass
class ExperimentResult:
    csv_path: str
    metadata_path: str
    records: List[EvalRecord]
    matrix_paths: Dict[str, List[str]] = field(default_factory=dict)


class _Run:
    """Mutable state of one run_experiment call."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.out_dir = os.path.join(config.output_dir, config.model)
        self.matrix_dir = os.path.join(self.out_dir, f"{config.stem}_matrices")
        self.master = SeededRng(config.seed, "experiment")
        self.eval_rng = self.master.substream("evaluation")
        self.kernel = KernelSpec(bandwidths=config.bandwidths)
        self.dictionary: Optional[Dictionary] = None
        self.records: List[EvalRecord] = []
        self.matrix_paths: Dict[str, List[str]] = {}
        self.written: List[str] = []
        self.rip: Dict[str, Dict] = {}
        self.search: Dict[str, List[Dict]] = {}
        self.test: Optional[ChannelSet] = None
        self.val: Optional[ChannelSet] = None
        self.train: Optional[ChannelSet] = None
        self.lbcs_train: Optional[ChannelSet] = None

    def store_matrix(self, label: str, a: ComplexMatrix, **extra) -> str:
        os.makedirs(self.matrix_dir, exist_ok=True)
        path = os.path.join(self.matrix_dir, f"{label}.json")
        phases, modulus = matrix_to_phases(a)
        save_phase_matrix(path, phases, modulus, **extra)
        self.written.append(path)
        self.rip[label] = asdict(rip_report(a, self.test))
        return path

    def store_report(self, label: str, report: TrainReport) -> str:
        os.makedirs(self.matrix_dir, exist_ok=True)
        path = os.path.join(self.matrix_dir, f"{label}.json")
        report.save(path)
        self.written.append(path)
        self.rip[label] = asdict(rip_report(phases_to_matrix(report.phases), self.test))
        self.search[label] = report.search
        return path

    def evaluate_fixed(self, label: str, a: ComplexMatrix, snrs=None, **extras):
        c = self.config
        for k, snr in enumerate(c.snr_grid):
            if snrs is not None and k not in snrs:
                continue
            record = evaluate(a, self.test, snr, c.p, self.dictionary, self.eval_rng,
                              algorithm=label, snr_index=k, workers=c.workers)
            record.extras.update(extras)
            self.records.append(record)
            logger.info(f"{label} @ {snr} dB: relative MSE {record.mean:.6g}")


def _generate_data(run: _Run):
    c = run.config
    spec = c.channel_spec
    run.dictionary = dictionary_for(spec)
    run.test = generate(spec, c.test_count, run.master.substream("test-data"))
    run.val = generate(spec, c.val_count, run.master.substream("validation-data"))
    if any(a.startswith("learned") for a in c.algorithms):
        run.train = generate(spec, c.train_count, run.master.substream("train-data"))
    if "lbcs" in c.algorithms or "learned-lbcs-init" in c.algorithms:
        run.lbcs_train = generate(spec, c.lbcs_train_count, run.master.substream("lbcs-train-data"))
    logger.info(f"Generated {c.test_count} test / {c.val_count} validation {c.model} channels")


def _run_random(run: _Run):
    c = run.config
    for k, snr in enumerate(c.snr_grid):
        record = evaluate_random_baseline(run.test, snr, c.p, run.dictionary, c.m, run.eval_rng,
                                          snr_index=k, workers=c.workers)
        run.records.append(record)
        logger.info(f"random @ {snr} dB: relative MSE {record.mean:.6g}")


def _mse_scorer(run: _Run):
    c = run.config
    selection_rng = run.master.substream("selection")

    def score(report: TrainReport) -> float:
        a = phases_to_matrix(report.phases)
        return evaluate(a, run.val, c.selection_snr_db, c.p, run.dictionary, selection_rng).mean

    return score


def _search(run: _Run, label: str, mode: str, space: SearchSpace, init_phases=None) -> TrainReport:
    c = run.config
    base = TrainConfig(**{**c.training.model_dump(), "normalization": mode})
    scorer = _mse_scorer(run) if c.selection_metric == "mse" else None
    logger.info(f"Random search for {label}: {space.trials} trials, {mode} normalization")
    return random_search(run.train, space, run.kernel, c.m, run.master.substream(f"search-{label}"), run.val,
                         base_config=base, init_phases=init_phases, scorer=scorer, workers=c.workers)


def _run_learned(run: _Run):
    c = run.config
    primary = c.training.normalization
    modes = [primary]
    if c.compare_normalizations:
        modes.append("per-sample" if primary == "average" else "average")
    for mode in modes:
        label = "learned" if mode == primary else f"learned-{mode}"
        report = _search(run, label, mode, c.search)
        run.matrix_paths[label] = [run.store_report(label, report)]
        extras = {"delta": mode} if c.compare_normalizations else {}
        run.evaluate_fixed(label, phases_to_matrix(report.phases), **extras)


def _run_lbcs(run: _Run):
    c = run.config
    paths = []
    for k, snr in enumerate(c.snr_grid):
        result = mc_lbcs(run.lbcs_train, run.val, snr, c.m, c.mc_iterations, c.p, run.dictionary,
                         run.master.substream("mc-lbcs", k), workers=c.workers)
        paths.append(run.store_matrix(f"lbcs_snr{k}", result.matrix, snr=snr,
                                      validation_mse=result.validation_mse,
                                      best_iteration=result.best_iteration))
        run.evaluate_fixed("lbcs", result.matrix, snrs={k})
    run.matrix_paths["lbcs"] = paths


def _run_learned_lbcs_init(run: _Run):
    c = run.config
    result = mc_lbcs(run.lbcs_train, run.val, c.lbcs_init_snr_db, c.m, c.mc_iterations, c.p, run.dictionary,
                     run.master.substream("mc-lbcs-init"), workers=c.workers)
    init_phases, _ = matrix_to_phases(result.matrix)
    space = c.search.model_copy(update={"lbcs_init_fraction": 1.0})
    report = _search(run, "learned-lbcs-init", c.training.normalization, space, init_phases=init_phases)
    run.matrix_paths["learned-lbcs-init"] = [run.store_report("learned-lbcs-init", report)]
    run.evaluate_fixed("learned-lbcs-init", phases_to_matrix(report.phases))


STAGES = {
    "random": _run_random,
    "learned": _run_learned,
    "lbcs": _run_lbcs,
    "learned-lbcs-init": _run_learned_lbcs_init,
}


def _check_complete(run: _Run):
    seen = {}
    for r in run.records:
        seen[(r.algorithm, r.snr)] = seen.get((r.algorithm, r.snr), 0) + 1
    labels = {r.algorithm for r in run.records}
    for label in labels:
        for snr in run.config.snr_grid:
            if seen.get((label, float(snr))) != 1:
                raise RuntimeError(f"Result rows incomplete: ({label}, {snr}) appears {seen.get((label, float(snr)), 0)} times")


def write_csv(path: str, records: List[EvalRecord]) -> None:
    """UTF-8, LF endings, shortest round-trip float formatting."""
    extra = sorted({key for r in records for key in r.extras})
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["algorithm", "snr", "mean", *extra])
        for r in records:
            writer.writerow([r.algorithm, repr(r.snr), repr(r.mean), *(r.extras.get(k, "") for k in extra)])


def read_csv(path: str) -> List[EvalRecord]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    records = []
    for row in rows:
        extras = {k: v for k, v in row.items() if k not in ("algorithm", "snr", "mean") and v != ""}
        records.append(EvalRecord(row["algorithm"], float(row["snr"]), float(row["mean"]), extras))
    return records


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    run = _Run(config)
    os.makedirs(run.out_dir, exist_ok=True)
    csv_path = os.path.join(run.out_dir, f"{config.stem}.csv")
    metadata_path = os.path.join(run.out_dir, f"{config.stem}_metadata.json")

    stage = "generate-data"
    try:
        _generate_data(run)
        for algorithm in config.algorithms:
            stage = algorithm
            logger.info(f"Stage {algorithm} starting")
            STAGES[algorithm](run)
        stage = "write-results"
        _check_complete(run)
        write_csv(csv_path, run.records)
        run.written.append(csv_path)
        metadata = {
            "version": VERSION,
            "numpy": np.__version__,
            "seed": config.seed,
            "config": config.model_dump(mode="json"),
            "csv": csv_path,
            "matrices": run.matrix_paths,
            "rip": run.rip,
            "search": run.search,
        }
        with open(metadata_path, "w", encoding="utf-8") as f:
            json.dump(metadata, f, indent=2)
        run.written.append(metadata_path)
    except Exception as e:
        for path in run.written:
            if os.path.exists(path):
                os.remove(path)
        if os.path.isdir(run.matrix_dir) and not os.listdir(run.matrix_dir):
            os.rmdir(run.matrix_dir)
        logger.error(f"Experiment stage '{stage}' failed: {e}")
        raise RuntimeError(f"Experiment stage '{stage}' failed: {e}") from e

    logger.info(f"Wrote {len(run.records)} rows to {csv_path}")
    return ExperimentResult(csv_path, metadata_path, run.records, run.matrix_paths)
