"""
Desk-scale check: learned matrices beat random ones on DFT-sparse channels.

A random Steinhaus matrix is nearly coherent with the DFT basis, so on
dft-sparse channels (p=1) it recovers poorly. The learned matrix must reach
at least a 2x lower relative MSE than the random baseline at 20 dB.

Setup: n=64, m=8, p=1, 2000 test channels, >= 8 search trials.

Usage:
    python scripts/001_dft_sparse_gap.py
    python scripts/001_dft_sparse_gap.py --seed 3 --trials 16 --workers 4
"""

import argparse
import os
import sys

from dotenv import load_dotenv

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from experiment import ExperimentConfig, run_experiment

load_dotenv()

OUTPUT_DIR = os.getenv("CMS_OUTPUT_DIR", "results")
REQUIRED_FACTOR = 2.0


def main():
    parser = argparse.ArgumentParser(description="DFT-sparse learned vs random gap")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--trials", type=int, default=8)
    parser.add_argument("--workers", type=int, default=int(os.getenv("CMS_WORKERS", 1)))
    parser.add_argument("--output-dir", default=os.path.join(OUTPUT_DIR, "desk", "dft_gap"))
    args = parser.parse_args()
    if args.trials < 8:
        print("ERROR: at least 8 search trials are required")
        sys.exit(1)

    config = ExperimentConfig(
        model="dft-sparse",
        n=64,
        m=8,
        p=1,
        snr_grid=[20.0],
        algorithms=["random", "learned"],
        test_count=2000,
        train_count=20000,
        val_count=1000,
        search={"trials": args.trials},
        training={"max_iterations": 3000},
        seed=args.seed,
        output_dir=args.output_dir,
        workers=args.workers,
    )

    print("=" * 60)
    print("DFT-SPARSE GAP (n=64, m=8, p=1, 20 dB)")
    print("=" * 60)
    result = run_experiment(config)
    mse = {r.algorithm: r.mean for r in result.records}
    ratio = mse["random"] / mse["learned"]

    print(f"  random : {mse['random']:.6g}")
    print(f"  learned: {mse['learned']:.6g}")
    print(f"  random / learned = {ratio:.2f} (required >= {REQUIRED_FACTOR})")
    if ratio < REQUIRED_FACTOR:
        print("FAIL")
        sys.exit(1)
    print("PASS")


if __name__ == "__main__":
    main()
