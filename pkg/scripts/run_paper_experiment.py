"""Train both default user models with the paper hyperparameters and report.

Writes qtable/metrics CSVs per model under --out and prints convergence,
oracle agreement and a 1000-episode comparison against constant baselines.

    python scripts/run_paper_experiment.py --out runs/paper --seed 42
"""
import argparse
from pathlib import Path

from sar_adapt.mdp import RewardParams, RobotAction
from sar_adapt.qlearning import (
    TrainingConfig,
    convergence_summary,
    greedy_policy,
    policy_agreement,
    save_metrics,
    save_qtable,
    train,
    value_iteration,
)
from sar_adapt.session import constant_policy, evaluate_policy
from sar_adapt.usersim import default_model


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="runs/paper")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--episodes", type=int, default=1000)
    args = parser.parse_args()

    reward, cfg = RewardParams(), TrainingConfig()
    for name in ("healthy", "mci"):
        model = default_model(name)
        out = Path(args.out) / name
        out.mkdir(parents=True, exist_ok=True)
        q, metrics = train(model, reward, cfg, args.seed)
        save_qtable(q, out / "qtable.csv")
        save_metrics(metrics, out / "metrics.csv")

        conv = convergence_summary(metrics)
        oracle = value_iteration(model, reward, cfg.discount)
        learned = greedy_policy(q)
        print(f"== {name} (seed {args.seed})")
        print(f"  update_sum tail/peak {conv['update_ratio']:.3f}, "
              f"max qtable_mean drift {conv['max_tail_mean_drift']:.4f}")
        print(f"  oracle agreement {policy_agreement(learned, greedy_policy(oracle)):.1%} "
              f"(value iteration: {oracle.metadata['sweeps']} sweeps)")
        rows = [("learned", learned), ("oracle", greedy_policy(oracle))]
        rows += [(f"always-{a.label}", constant_policy(a)) for a in RobotAction]
        for label, policy in rows:
            s = evaluate_policy(policy, model, reward, args.episodes, args.seed)
            print(f"  {label:<10} return {s.mean_return:+.3f} +/- {s.ci95_halfwidth:.3f}  "
                  f"medium-or-high {s.medium_or_high_fraction:.3f}  correct {s.correct_rate:.3f}")


if __name__ == "__main__":
    main()
