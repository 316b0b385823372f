"""
Determinism check: the same config and seed give byte-identical CSV output
single-threaded, and values within 1e-12 with a worker pool.

Usage:
    python scripts/005_determinism_check.py
    python scripts/005_determinism_check.py --workers 8
"""

import argparse
import os
import sys
import tempfile

from dotenv import load_dotenv

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from experiment import ExperimentConfig, run_experiment

load_dotenv()


def desk_config(output_dir: str, seed: int, workers: int) -> ExperimentConfig:
    return ExperimentConfig(
        model="multipath",
        n=32,
        m=8,
        p=2,
        algorithms=["random", "lbcs", "learned"],
        test_count=500,
        train_count=5000,
        lbcs_train_count=5000,
        val_count=200,
        search={"trials": 2},
        training={"max_iterations": 500},
        mc_iterations=10,
        seed=seed,
        output_dir=output_dir,
        workers=workers,
    )


def main():
    parser = argparse.ArgumentParser(description="Rerun determinism")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--workers", type=int, default=4)
    args = parser.parse_args()

    print("=" * 60)
    print("DETERMINISM CHECK")
    print("=" * 60)

    with tempfile.TemporaryDirectory() as tmp:
        runs = {
            name: run_experiment(desk_config(os.path.join(tmp, name), args.seed, workers))
            for name, workers in (("first", 1), ("second", 1), ("parallel", args.workers))
        }
        with open(runs["first"].csv_path, "rb") as f:
            first = f.read()
        with open(runs["second"].csv_path, "rb") as f:
            second = f.read()

    failures = []
    identical = first == second
    print(f"  Single-threaded reruns byte-identical: {identical}")
    if not identical:
        failures.append("single-threaded CSV differs")

    worst = max(abs(a.mean - b.mean) for a, b in zip(runs["first"].records, runs["parallel"].records))
    print(f"  Max |serial - parallel| ({args.workers} workers): {worst:.3g}")
    if worst > 1e-12 or len(runs["first"].records) != len(runs["parallel"].records):
        failures.append("parallel run differs")

    if failures:
        print(f"FAIL: {', '.join(failures)}")
        sys.exit(1)
    print("PASS")


if __name__ == "__main__":
    main()
