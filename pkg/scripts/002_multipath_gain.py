"""
Desk-scale check on multipath channels: learned and MC-LBCS matrices are no
worse than fresh random matrices, and the learned path stores a single
matrix for the whole SNR grid while LBCS stores one per SNR.

Setup: n=64, m=16, p=3, steering grid L=16n, six SNR points (-5..20 dB);
the comparison is read at 15 dB.

Usage:
    python scripts/002_multipath_gain.py
    python scripts/002_multipath_gain.py --seed 2 --trials 16 --workers 8
"""

import argparse
import os
import sys

from dotenv import load_dotenv

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from experiment import ExperimentConfig, run_experiment

load_dotenv()

OUTPUT_DIR = os.getenv("CMS_OUTPUT_DIR", "results")
SNR_GRID = [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0]
CHECK_SNR = 15.0


def main():
    parser = argparse.ArgumentParser(description="Multipath learned / MC-LBCS vs random")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--trials", type=int, default=8)
    parser.add_argument("--mc-iterations", type=int, default=100)
    parser.add_argument("--workers", type=int, default=int(os.getenv("CMS_WORKERS", 1)))
    parser.add_argument("--output-dir", default=os.path.join(OUTPUT_DIR, "desk", "multipath_gain"))
    args = parser.parse_args()

    config = ExperimentConfig(
        model="multipath",
        n=64,
        m=16,
        p=3,
        snr_grid=SNR_GRID,
        algorithms=["random", "lbcs", "learned"],
        test_count=2000,
        train_count=20000,
        lbcs_train_count=20000,
        val_count=1000,
        search={"trials": args.trials},
        training={"max_iterations": 3000},
        mc_iterations=args.mc_iterations,
        seed=args.seed,
        output_dir=args.output_dir,
        workers=args.workers,
    )

    print("=" * 60)
    print(f"MULTIPATH GAIN (n=64, m=16, p=3, L={config.channel_spec.grid})")
    print("=" * 60)
    result = run_experiment(config)

    failures = []
    learned_files = len(result.matrix_paths["learned"])
    lbcs_files = len(result.matrix_paths["lbcs"])
    print(f"  Stored matrices: learned {learned_files}, lbcs {lbcs_files} for {len(SNR_GRID)} SNR points")
    if learned_files != 1 or lbcs_files != len(SNR_GRID):
        failures.append("matrix count")

    mse = {r.algorithm: r.mean for r in result.records if r.snr == CHECK_SNR}
    print(f"\n  @ {CHECK_SNR} dB")
    for name in ("random", "lbcs", "learned"):
        print(f"    {name:>8}: {mse[name]:.6g}")
    ratio = mse["learned"] / mse["random"]
    print(f"    learned / random = {ratio:.3f} (expected <= 0.9)")

    if mse["learned"] > mse["random"]:
        failures.append("learned worse than random")
    if mse["lbcs"] > mse["random"]:
        failures.append("lbcs worse than random")

    if failures:
        print(f"FAIL: {', '.join(failures)}")
        sys.exit(1)
    print("PASS")


if __name__ == "__main__":
    main()
