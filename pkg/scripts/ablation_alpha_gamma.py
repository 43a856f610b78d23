"""Sweep learning rate and discount, including the swapped (0.05, 0.8) reading.

For each setting and seed, report the update_sum tail/peak ratio, the largest
qtable_mean step over the last 10 epochs, and greedy agreement with value
iteration at the same discount. Results go to stdout and --csv.

    python scripts/ablation_alpha_gamma.py --csv runs/ablation.csv
"""
import argparse
import csv
import itertools
import sys

from sar_adapt.mdp import RewardParams
from sar_adapt.qlearning import (
    TrainingConfig,
    convergence_summary,
    greedy_policy,
    policy_agreement,
    train,
    value_iteration,
)
from sar_adapt.usersim import default_model

SETTINGS = [(0.8, 0.05), (0.05, 0.8), (0.2, 0.05), (0.05, 0.05), (0.02, 0.05)]


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--seeds", type=int, nargs="+", default=[42, 1, 2, 3, 4, 5])
    parser.add_argument("--csv")
    args = parser.parse_args()

    reward = RewardParams()
    fh = open(args.csv, "w", newline="") if args.csv else None
    writer = csv.writer(fh or sys.stdout)
    writer.writerow(["model", "alpha", "gamma", "seed", "update_ratio", "tail_mean_drift", "agreement"])
    for name, (alpha, gamma) in itertools.product(("healthy", "mci"), SETTINGS):
        model = default_model(name)
        optimal = greedy_policy(value_iteration(model, reward, gamma))
        for seed in args.seeds:
            q, metrics = train(model, reward, TrainingConfig(learning_rate=alpha, discount=gamma), seed)
            c = convergence_summary(metrics)
            row = [name, alpha, gamma, seed, f"{c['update_ratio']:.4f}",
                   f"{c['max_tail_mean_drift']:.5f}",
                   f"{policy_agreement(greedy_policy(q), optimal):.4f}"]
            writer.writerow(row)
            if fh:
                print(",".join(map(str, row)))
    if fh:
        fh.close()


if __name__ == "__main__":
    main()
