"""Command-line entry point: ``sar-adapt {train,verify,simulate,play}``.

Exit codes: 0 success, 1 validation or usage error, 2 verification threshold
not met.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .behavior import BehaviorSpec
from .config import ExperimentConfig, load_experiment
from .mdp import (
    N_STATES,
    AnswerOutcome,
    GazeDirection,
    RobotAction,
    SmileState,
    UserObservation,
    decode_state,
)
from .qlearning import (
    CSVFormatError,
    convergence_summary,
    greedy_policy,
    load_qtable,
    policy_agreement,
    save_metrics,
    save_qtable,
    train,
    value_iteration,
)
from .rng import RngStream
from .session import (
    OperatorAbort,
    Question,
    Recipe,
    RoundRecord,
    constant_policy,
    run_episode,
    simulate_episodes,
    summarize,
    table_policy,
)
from .usersim import ConfigError

EXIT_OK, EXIT_INVALID, EXIT_THRESHOLD = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _load(args) -> ExperimentConfig:
    return load_experiment(args.config, seed=args.seed, model=args.model, out=args.out,
                           personality=getattr(args, "personality", None))


def _ensure_out(cfg: ExperimentConfig) -> Path:
    try:
        cfg.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {cfg.out} ({exc.strerror})") from None
    probe = cfg.out / ".write-test"
    try:
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory not writable: {cfg.out} ({exc.strerror})") from None
    return cfg.out


def _qtable_path(args, cfg: ExperimentConfig) -> Path:
    path = Path(args.qtable) if args.qtable else cfg.out / "qtable.csv"
    if not path.is_file():
        raise ConfigError(f"file not found: {path} (run `train` first or pass --qtable)")
    return path


def _load_policy_table(path: Path):
    try:
        return load_qtable(path)
    except CSVFormatError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def cmd_train(args) -> int:
    cfg = _load(args)
    out = _ensure_out(cfg)
    q, metrics = train(cfg.model, cfg.reward, cfg.training, cfg.seed)
    save_qtable(q, out / "qtable.csv")
    save_metrics(metrics, out / "metrics.csv")
    print(f"trained {cfg.model.name} for {cfg.training.epochs} epochs (seed {cfg.seed})")
    print(f"wrote {out / 'qtable.csv'} and {out / 'metrics.csv'}")
    if len(metrics) > 10:
        c = convergence_summary(metrics)
        print(f"last-10-epoch update_sum / peak: {c['update_ratio']:.4f} "
              f"({c['tail_update_sum']:.4f} / {c['peak_update_sum']:.4f})")
        print(f"max |qtable_mean drift| over last 10 epochs: {c['max_tail_mean_drift']:.6f}")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = _load(args)
    q = _load_policy_table(_qtable_path(args, cfg))
    trained_on = q.metadata.get("model")
    if trained_on is not None and str(trained_on) != cfg.model.name:
        raise ConfigError(f"Q-table was trained on model {trained_on!r}, config uses {cfg.model.name!r}")
    gamma = cfg.training.discount
    if "discount" in q.metadata and float(q.metadata["discount"]) != gamma:
        raise ConfigError(f"Q-table discount {q.metadata['discount']} differs from config {gamma}")
    oracle = value_iteration(cfg.model, cfg.reward, gamma, tolerance=args.tolerance)
    learned, optimal = greedy_policy(q), greedy_policy(oracle)
    print(f"value iteration converged in {oracle.metadata['sweeps']} sweeps")
    print(f"{'state':>5}  {'observation':<40} {'engagement':<10} learned  oracle")
    for s in range(N_STATES):
        obs = decode_state(s)
        mark = "" if learned[s] == optimal[s] else "  *"
        print(f"{s:>5}  {str(obs):<40} {obs.engagement.name:<10} {learned[s].label:>7}  "
              f"{optimal[s].label:>6}{mark}")
    pct = 100.0 * policy_agreement(learned, optimal)
    ok = pct >= args.threshold
    print(f"agreement: {pct:.1f}% (threshold {args.threshold:g}%) -> {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_THRESHOLD


def cmd_simulate(args) -> int:
    if args.episodes < 1:
        raise UsageError("--episodes must be >= 1")
    cfg = _load(args)
    if args.baseline:
        policy = constant_policy(RobotAction.parse(args.baseline))
        label = f"constant-{args.baseline}"
    else:
        path = _qtable_path(args, cfg)
        policy = table_policy(greedy_policy(_load_policy_table(path)))
        label = f"greedy({path})"
    out = _ensure_out(cfg)
    logs = simulate_episodes(policy, cfg.model, cfg.reward, args.episodes, cfg.seed,
                             recipe=cfg.recipe, personality=cfg.personality,
                             behaviors=cfg.behaviors)
    summary = summarize(logs).to_dict()
    summary.update(policy=label, model=cfg.model.name, seed=cfg.seed)
    stem = f"simulate_{args.baseline}" if args.baseline else "simulate"
    with (out / f"{stem}_sessions.jsonl").open("w") as fh:
        for i, log in enumerate(logs):
            for rec in log.to_records():
                fh.write(json.dumps({"episode": i, **rec}) + "\n")
    (out / f"{stem}_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    print(json.dumps(summary, indent=2))
    return EXIT_OK


class TerminalOperator:
    """Reads symbolic gaze/smile codes and answer options from stdin."""

    def __init__(self, stdin=None, stdout=None):
        self.stdin = stdin or sys.stdin
        self.stdout = stdout or sys.stdout

    def say(self, text: str = "") -> None:
        print(text, file=self.stdout)

    def ask_int(self, prompt: str, lo: int, hi: int) -> int:
        while True:
            self.stdout.write(f"{prompt} [{lo}-{hi}]: ")
            self.stdout.flush()
            line = self.stdin.readline()
            if not line:
                raise OperatorAbort()
            try:
                value = int(line.strip())
            except ValueError:
                value = None
            if value is not None and lo <= value <= hi:
                return value
            self.say(f"invalid entry {line.strip()!r}; enter a number from {lo} to {hi}")

    def ask_choice(self, prompt: str, choices) -> str:
        lookup = {c.lower(): c for c in choices}
        while True:
            self.stdout.write(f"{prompt} ({'/'.join(choices)}): ")
            self.stdout.flush()
            line = self.stdin.readline()
            if not line:
                raise OperatorAbort()
            key = line.strip().lower()
            if key in lookup:
                return lookup[key]
            self.say(f"invalid entry {line.strip()!r}; choose one of {', '.join(choices)}")

    def _gaze_smile(self) -> tuple[GazeDirection, SmileState]:
        gaze_help = ", ".join(f"{g.value}={g.name.lower()}" for g in GazeDirection)
        smile_help = ", ".join(f"{s.value}={s.name.lower()}" for s in SmileState)
        gaze = GazeDirection(self.ask_int(f"gaze ({gaze_help})", 0, len(GazeDirection) - 1))
        smile = SmileState(self.ask_int(f"smile ({smile_help})", 0, len(SmileState) - 1))
        return gaze, smile

    def start(self, recipe: Recipe) -> UserObservation:
        self.say(f"Hello! Are you ready to cook {recipe.name}?")
        for ing in sorted(recipe.ingredients, key=lambda i: i.order):
            self.say(f"  {ing.order}. {ing.name}: {ing.weight:g} g")
        self.say("Initial user state:")
        gaze, smile = self._gaze_smile()
        return UserObservation(gaze, smile, AnswerOutcome.CORRECT)

    def present(self, question_index: int, question: Question, observation: UserObservation,
                behavior: BehaviorSpec) -> None:
        self.say()
        self.say(f"robot action: {behavior.action.label} ({behavior.action.name.lower()})")
        self.say("behavior: " + json.dumps(behavior.to_dict()))
        self.say(f"Question {question_index + 1}/8: {question.prompt}")
        for i, opt in enumerate(question.options):
            self.say(f"  [{i}] {opt}")

    def respond(self, question_index: int, question: Question):
        gaze, smile = self._gaze_smile()
        option = self.ask_int("chosen option", 0, len(question.options) - 1)
        return gaze, smile, option

    def report(self, record: RoundRecord) -> None:
        after = record.observation_after
        self.say(f"answer {after.answer.name.lower()}; engagement {after.engagement.name}; "
                 f"reward {record.reward:+.2f}")


def cmd_play(args) -> int:
    cfg = _load(args)
    policy = table_policy(greedy_policy(_load_policy_table(_qtable_path(args, cfg))))
    out = _ensure_out(cfg)
    op = TerminalOperator()
    try:
        name = op.ask_choice("Caregiver: select the robot personality",
                             list(cfg.behaviors.personalities))
    except OperatorAbort:
        print("\naborted before the session started", file=sys.stderr)
        return EXIT_INVALID
    personality = cfg.behaviors.load_personality(name)
    log = run_episode(policy, op, cfg.recipe, personality, cfg.reward, RngStream(cfg.seed),
                      behaviors=cfg.behaviors)
    with (out / "play_session.jsonl").open("w") as fh:
        log.write_jsonl(fh)
    op.say()
    op.say("session summary: " + json.dumps(log.summary()))
    if not log.complete:
        print("session aborted; partial log written", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sar-adapt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", help="experiment YAML (default: shipped experiment.yaml)")
        p.add_argument("--seed", type=int)
        p.add_argument("--model", help="user model file, or a shipped name like mci.model")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("train", help="train a Q-table and write qtable.csv and metrics.csv")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("verify", help="compare the learned greedy policy with value iteration")
    common(p)
    p.add_argument("--qtable")
    p.add_argument("--threshold", type=float, default=90.0, help="required agreement in percent")
    p.add_argument("--tolerance", type=float, default=1e-10)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="evaluate a policy over seeded simulated sessions")
    common(p)
    p.add_argument("--qtable")
    p.add_argument("--episodes", type=int, default=1000)
    p.add_argument("--baseline", choices=["a0", "a1", "a2"])
    p.add_argument("--personality")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("play", help="interactive terminal session driven by an operator")
    common(p)
    p.add_argument("--qtable")
    p.set_defaults(func=cmd_play)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
