"""
Desk-scale check: training started from an MC-LBCS matrix keeps what LBCS found.

1. Runs MC-LBCS at 20 dB (n=64, m=24, p=1 multipath).
2. Trains from its phases.
3. Requires the trained matrix's best validation MMD^2 to be no higher than
   the value at its initialization, and its test MSE to stay within 1.1x of
   the MC-LBCS matrix.

Usage:
    python scripts/003_lbcs_init_harmonization.py
    python scripts/003_lbcs_init_harmonization.py --seed 4 --trials 4
"""

import argparse
import os
import sys

from dotenv import load_dotenv

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from channels import ChannelModelSpec, dictionary_for, generate
from evaluation import evaluate
from lbcs import mc_lbcs
from learner import SearchSpace, TrainConfig, random_search
from mmd import KernelSpec
from numeric_core import SeededRng, matrix_to_phases, phases_to_matrix

load_dotenv()

SNR_DB = 20.0
TOLERANCE = 1.1


def main():
    parser = argparse.ArgumentParser(description="LBCS-initialized training")
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--trials", type=int, default=4)
    parser.add_argument("--mc-iterations", type=int, default=100)
    parser.add_argument("--workers", type=int, default=int(os.getenv("CMS_WORKERS", 1)))
    args = parser.parse_args()

    spec = ChannelModelSpec(model="multipath", n=64, p=1)
    m = 24
    root = SeededRng(args.seed, "lbcs-init-check")
    train = generate(spec, 20000, root.substream("train-data"))
    val = generate(spec, 1000, root.substream("validation-data"))
    test = generate(spec, 2000, root.substream("test-data"))
    dictionary = dictionary_for(spec)

    print("=" * 60)
    print(f"LBCS-INIT HARMONIZATION (n={spec.n}, m={m}, p={spec.p}, {SNR_DB} dB)")
    print("=" * 60)

    print("\n1. MC-LBCS...")
    lbcs = mc_lbcs(train, val, SNR_DB, m, args.mc_iterations, spec.p, dictionary,
                   root.substream("mc-lbcs"), workers=args.workers)
    init_phases, _ = matrix_to_phases(lbcs.matrix)
    print(f"  Best validation MSE {lbcs.validation_mse:.6g} (iteration {lbcs.best_iteration})")

    print("\n2. Training from the MC-LBCS phases...")
    space = SearchSpace(trials=args.trials, lbcs_init_fraction=1.0)
    report = random_search(train, space, KernelSpec(), m, root.substream("search"), val,
                           base_config=TrainConfig(max_iterations=3000), init_phases=init_phases,
                           workers=args.workers)
    initial = report.trace[0].validation_objective
    print(f"  Validation MMD^2: {initial:.6g} at init -> {report.best_validation:.6g}")

    print("\n3. Test MSE...")
    eval_rng = root.substream("evaluation")
    lbcs_mse = evaluate(lbcs.matrix, test, SNR_DB, spec.p, dictionary, eval_rng, algorithm="lbcs").mean
    learned_mse = evaluate(phases_to_matrix(report.phases), test, SNR_DB, spec.p, dictionary, eval_rng,
                           algorithm="learned-lbcs-init").mean
    print(f"  mc-lbcs          : {lbcs_mse:.6g}")
    print(f"  learned-lbcs-init: {learned_mse:.6g} (limit {TOLERANCE * lbcs_mse:.6g})")

    failures = []
    if report.best_validation > initial:
        failures.append("validation MMD^2 rose above its initialization")
    if learned_mse > TOLERANCE * lbcs_mse:
        failures.append("test MSE regressed beyond tolerance")
    if failures:
        print(f"FAIL: {'; '.join(failures)}")
        sys.exit(1)
    print("PASS")


if __name__ == "__main__":
    main()
