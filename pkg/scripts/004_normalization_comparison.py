"""
Desk-scale check: average normalization of the training channels is at least
as good as per-sample normalization (5% slack) on multipath channels.

Setup: n=32, m=8, p=1, 20 dB. Both values are printed so they can be kept as
regression anchors.

Usage:
    python scripts/004_normalization_comparison.py
    python scripts/004_normalization_comparison.py --seed 5 --trials 16
"""

import argparse
import os
import sys

from dotenv import load_dotenv

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from experiment import ExperimentConfig, run_experiment

load_dotenv()

OUTPUT_DIR = os.getenv("CMS_OUTPUT_DIR", "results")
SLACK = 1.05


def main():
    parser = argparse.ArgumentParser(description="Average vs per-sample normalization")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--trials", type=int, default=8)
    parser.add_argument("--workers", type=int, default=int(os.getenv("CMS_WORKERS", 1)))
    parser.add_argument("--output-dir", default=os.path.join(OUTPUT_DIR, "desk", "normalization"))
    args = parser.parse_args()

    config = ExperimentConfig(
        model="multipath",
        n=32,
        m=8,
        p=1,
        snr_grid=[20.0],
        algorithms=["learned"],
        test_count=2000,
        train_count=20000,
        val_count=1000,
        search={"trials": args.trials},
        training={"max_iterations": 3000, "normalization": "average"},
        compare_normalizations=True,
        seed=args.seed,
        output_dir=args.output_dir,
        workers=args.workers,
    )

    print("=" * 60)
    print("NORMALIZATION COMPARISON (n=32, m=8, p=1, 20 dB)")
    print("=" * 60)
    result = run_experiment(config)
    mse = {r.extras["delta"]: r.mean for r in result.records}

    print(f"  average   : {mse['average']!r}")
    print(f"  per-sample: {mse['per-sample']!r}")
    if mse["average"] > SLACK * mse["per-sample"]:
        print(f"FAIL: average exceeds {SLACK} x per-sample")
        sys.exit(1)
    print("PASS")


if __name__ == "__main__":
    main()
