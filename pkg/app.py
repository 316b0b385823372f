"""
Command-line entry point.

Subcommands:
    gen-data        generate a channel set (.npz)
    train           learn a phase matrix (single run or random search)
    lbcs            Monte-Carlo LBCS matrix for one SNR
    evaluate        relative MSE of a stored matrix (or the random baseline) over SNRs
    run-experiment  full comparison, writes CSV + metadata
    rip-report      empirical isometry statistics of a stored matrix

Usage:
    python app.py run-experiment --config configs/desk_dft.json --seed 7
    python app.py gen-data --model multipath --n 32 --p 2 --count 5000 --seed 1 --out train.npz
"""

import argparse
import logging
import os
import sys
from dataclasses import asdict

from dotenv import load_dotenv

from channels import ChannelModelSpec, dictionary_for, generate, load_channel_set, normalize, save_channel_set
from evaluation import evaluate, evaluate_random_baseline, rip_report
from experiment import load_config, run_experiment, write_csv
from lbcs import mc_lbcs
from learner import SearchSpace, TrainConfig, random_search, train
from mmd import PUBLISHED_BANDWIDTHS, KernelSpec
from numeric_core import SeededRng, load_measurement_matrix, load_phase_matrix, matrix_to_phases, save_phase_matrix

# Load environment variables from .env file
load_dotenv()

logging.basicConfig(
    level=getattr(logging, os.getenv("LOG_LEVEL", "INFO").upper(), logging.INFO),
    format="%(asctime)s %(levelname)s %(name)s: %(message)s",
)
logger = logging.getLogger(__name__)

OUTPUT_DIR = os.getenv("CMS_OUTPUT_DIR", "results")
WORKERS = int(os.getenv("CMS_WORKERS", 1))


def banner(title: str):
    print("=" * 60)
    print(title)
    print("=" * 60)


def cmd_gen_data(args):
    spec = ChannelModelSpec(model=args.model, n=args.n, p=args.p, grid_size=args.grid_size)
    data = generate(spec, args.count, SeededRng(args.seed, args.stream))
    data = normalize(data, args.normalization)
    save_channel_set(args.out, data)
    banner("GENERATED CHANNELS")
    print(f"  {len(data)} {spec.model} channels, n={spec.n}, p={spec.p}, normalization={data.normalization}")
    print(f"  Written to {args.out}")


def cmd_train(args):
    data = load_channel_set(args.data)
    validation = load_channel_set(args.val)
    kernel = KernelSpec(bandwidths=tuple(args.bandwidths))
    init_phases = load_phase_matrix(args.init_phases)[0] if args.init_phases else None
    config = TrainConfig(
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        decay=args.decay,
        max_iterations=args.max_iterations,
        validation_interval=args.validation_interval,
        patience=args.patience,
        init="from-phases" if init_phases is not None else "uniform-random",
        normalization=args.normalization,
        fresh_sphere_samples=not args.fixed_sphere_samples,
        seed=args.seed,
    )
    if args.search_trials:
        space = SearchSpace(trials=args.search_trials, lbcs_init_fraction=args.lbcs_init_fraction)
        report = random_search(data, space, kernel, args.m, SeededRng(args.seed, "search"), validation,
                               base_config=config, init_phases=init_phases, workers=args.workers)
    else:
        report = train(data, config, kernel, args.m, validation, init_phases=init_phases)
    report.save(args.out)

    banner("TRAINING REPORT")
    print(f"  Matrix: {args.m} x {data.n}")
    print(f"  Iterations: {report.iterations}")
    print(f"  Validation MMD^2: {report.trace[0].validation_objective:.6g} (init) -> {report.best_validation:.6g} (best)")
    print(f"  Written to {args.out}")


def cmd_lbcs(args):
    train_set = load_channel_set(args.train)
    val_set = load_channel_set(args.val)
    dictionary = dictionary_for(train_set.spec)
    p = args.p or train_set.spec.p
    result = mc_lbcs(train_set, val_set, args.snr, args.m, args.iterations, p, dictionary,
                     SeededRng(args.seed, "mc-lbcs"), workers=args.workers)
    phases, modulus = matrix_to_phases(result.matrix)
    save_phase_matrix(args.out, phases, modulus, snr=args.snr, validation_mse=result.validation_mse,
                      best_iteration=result.best_iteration)

    banner(f"MC-LBCS @ {args.snr} dB")
    print(f"  Best validation MSE: {result.validation_mse:.6g} (iteration {result.best_iteration} of {args.iterations})")
    print(f"  Written to {args.out}")


def cmd_evaluate(args):
    data = load_channel_set(args.data)
    dictionary = dictionary_for(data.spec)
    p = args.p or data.spec.p
    rng = SeededRng(args.seed, "evaluation")
    records = []
    if args.matrix:
        a = load_measurement_matrix(args.matrix)
    elif not args.m:
        raise ValueError("Pass --matrix, or --m for the random baseline")
    for k, snr in enumerate(args.snr):
        if args.matrix:
            record = evaluate(a, data, snr, p, dictionary, rng, algorithm=args.label, snr_index=k, workers=args.workers)
        else:
            record = evaluate_random_baseline(data, snr, p, dictionary, args.m, rng, snr_index=k, workers=args.workers)
        records.append(record)

    banner("EVALUATION")
    for r in records:
        print(f"  {r.algorithm:>10} @ {r.snr:6.1f} dB: relative MSE {r.mean:.6g}")
    if args.out:
        write_csv(args.out, records)
        print(f"  Written to {args.out}")


def cmd_run_experiment(args):
    overrides = {
        "model": args.model,
        "n": args.n,
        "m": args.m,
        "p": args.p,
        "grid_size": args.grid_size,
        "snr_grid": args.snr_grid,
        "algorithms": args.algorithms,
        "test_count": args.test_count,
        "train_count": args.train_count,
        "lbcs_train_count": args.lbcs_train_count,
        "val_count": args.val_count,
        "bandwidths": args.bandwidths,
        "mc_iterations": args.mc_iterations,
        "selection_metric": args.selection_metric,
        "lbcs_init_snr_db": args.lbcs_init_snr,
        "selection_snr_db": args.selection_snr,
        "compare_normalizations": args.compare_normalizations or None,
        "seed": args.seed,
        "output_dir": args.output_dir,
        "workers": args.workers,
        "search": {
            "trials": args.search_trials,
            "batch_size": args.batch_size_range,
            "learning_rate": args.learning_rate_range,
            "decay": args.decay_range,
            "lbcs_init_fraction": args.lbcs_init_fraction,
        },
        "training": {
            "normalization": args.normalization,
            "decay": args.decay,
            "max_iterations": args.max_iterations,
            "validation_interval": args.validation_interval,
            "patience": args.patience,
            "fresh_sphere_samples": False if args.fixed_sphere_samples else None,
        },
    }
    config = load_config(args.config, overrides, defaults={"output_dir": OUTPUT_DIR, "workers": WORKERS})

    banner(f"EXPERIMENT {config.model} n={config.n} m={config.m} p={config.p}")
    print(f"  Algorithms: {', '.join(config.algorithms)}")
    print(f"  SNR grid: {config.snr_grid}")
    print(f"  Seed: {config.seed}")
    result = run_experiment(config)

    print()
    for r in result.records:
        print(f"  {r.algorithm:>20} @ {r.snr:6.1f} dB: {r.mean:.6g}")
    print(f"\n  CSV: {result.csv_path}")
    print(f"  Metadata: {result.metadata_path}")


def cmd_rip_report(args):
    a = load_measurement_matrix(args.matrix)
    report = rip_report(a, load_channel_set(args.data))
    banner("RIP REPORT")
    for key, value in asdict(report).items():
        print(f"  {key}: {value}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Constant-modulus measurement matrix design and evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="Generate a channel set")
    p.add_argument("--model", required=True, choices=["canonical-sparse", "dft-sparse", "multipath"])
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--grid-size", type=int)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--stream", default="data", help="RNG stream label (use different labels for train/val/test)")
    p.add_argument("--normalization", default="raw", choices=["raw", "per-sample", "average"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="Learn a phase matrix")
    p.add_argument("--data", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch-size", type=int, default=500)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--decay", type=float, default=1.0)
    p.add_argument("--max-iterations", type=int, default=10000)
    p.add_argument("--validation-interval", type=int, default=100)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--normalization", default="average", choices=["per-sample", "average"])
    p.add_argument("--fixed-sphere-samples", action="store_true", help="Pair sphere points with channels once")
    p.add_argument("--bandwidths", type=float, nargs="+", default=list(PUBLISHED_BANDWIDTHS))
    p.add_argument("--init-phases", help="Phase table to start from (e.g. an lbcs output)")
    p.add_argument("--search-trials", type=int, default=0, help="Random search over (T, l_r, beta) when > 0")
    p.add_argument("--lbcs-init-fraction", type=float, default=1.0)
    p.add_argument("--workers", type=int, default=WORKERS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("lbcs", help="Monte-Carlo LBCS for one SNR")
    p.add_argument("--train", required=True)
    p.add_argument("--val", required=True)
    p.add_argument("--snr", type=float, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--p", type=int, help="Sparsity used by OMP (default: from the data header)")
    p.add_argument("--iterations", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=WORKERS)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_lbcs)

    p = sub.add_parser("evaluate", help="Relative MSE over an SNR sweep")
    p.add_argument("--data", required=True)
    p.add_argument("--matrix", help="Stored matrix; omit for the random baseline")
    p.add_argument("--m", type=int, help="Rows of the random baseline matrices")
    p.add_argument("--snr", type=float, nargs="+", required=True)
    p.add_argument("--p", type=int)
    p.add_argument("--label", default="fixed")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=WORKERS)
    p.add_argument("--out", help="Optional CSV output")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run-experiment", help="Full comparison with CSV output")
    p.add_argument("--config", help="JSON key-value config file; flags override it")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--model", choices=["canonical-sparse", "dft-sparse", "multipath"])
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--grid-size", type=int)
    p.add_argument("--snr-grid", type=float, nargs="+")
    p.add_argument("--algorithms", nargs="+", choices=["random", "lbcs", "learned", "learned-lbcs-init"])
    p.add_argument("--test-count", type=int)
    p.add_argument("--train-count", type=int)
    p.add_argument("--lbcs-train-count", type=int)
    p.add_argument("--val-count", type=int)
    p.add_argument("--bandwidths", type=float, nargs="+")
    p.add_argument("--search-trials", type=int)
    p.add_argument("--batch-size-range", type=int, nargs=2, metavar=("LOW", "HIGH"))
    p.add_argument("--learning-rate-range", type=float, nargs=2, metavar=("LOW", "HIGH"))
    p.add_argument("--decay-range", type=float, nargs=2, metavar=("LOW", "HIGH"))
    p.add_argument("--lbcs-init-fraction", type=float)
    p.add_argument("--mc-iterations", type=int)
    p.add_argument("--lbcs-init-snr", type=float, help="SNR (dB) of the LBCS run seeding learned-lbcs-init")
    p.add_argument("--selection-metric", choices=["mmd", "mse"])
    p.add_argument("--selection-snr", type=float, help="SNR (dB) for --selection-metric mse")
    p.add_argument("--normalization", choices=["per-sample", "average"])
    p.add_argument("--compare-normalizations", action="store_true")
    p.add_argument("--decay", type=float, help="Base decay, replaced by the searched value in every trial")
    p.add_argument("--fixed-sphere-samples", action="store_true", help="Pair sphere points with channels once")
    p.add_argument("--max-iterations", type=int)
    p.add_argument("--validation-interval", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--output-dir", help="Default: $CMS_OUTPUT_DIR or results")
    p.add_argument("--workers", type=int, help="Default: $CMS_WORKERS or 1")
    p.set_defaults(func=cmd_run_experiment)

    p = sub.add_parser("rip-report", help="Empirical isometry statistics")
    p.add_argument("--matrix", required=True)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_rip_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except Exception as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"ERROR: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
