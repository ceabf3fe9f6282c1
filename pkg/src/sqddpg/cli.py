"""Command-line entry point: train, evaluate, trace credits and run the game-theory oracle."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import analysis, oracle
from .config import ALGORITHMS, DIFFICULTIES, ENVIRONMENTS, load_config
from .train import default_out_dir, run_training

log = logging.getLogger("sqddpg")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sqddpg", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    t = sub.add_parser("train", help="train one algorithm on one environment")
    t.add_argument("--config", help="flat key=value config file; flags override it")
    t.add_argument("--env", choices=ENVIRONMENTS)
    t.add_argument("--algo", dest="algorithm", choices=ALGORITHMS)
    t.add_argument("--difficulty", choices=DIFFICULTIES)
    t.add_argument("--sample-size", type=int)
    t.add_argument("--episodes", type=int)
    t.add_argument("--episode-length", type=int)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--updates-per-round", type=int)
    t.add_argument("--checkpoint-every", type=int)
    t.add_argument("--out", help="run directory (default: $SQDDPG_OUTPUT_DIR or ./runs)")

    s = sub.add_parser("eval-success", help="traffic junction success rate of a checkpoint")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--difficulty", choices=DIFFICULTIES)
    s.add_argument("--episodes", type=int, default=1000)
    s.add_argument("--steps", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--min-rate", type=float, help="exit 1 when the rate is below this")

    c = sub.add_parser("eval-pcc", help="correlation of predator credit with 1/distance to prey")
    c.add_argument("--checkpoint", required=True)
    c.add_argument("--samples", type=int, default=1000)
    c.add_argument("--seed", type=int, default=0)

    r = sub.add_parser("trace", help="credit trace of a checkpoint along a fixed trajectory")
    r.add_argument("--checkpoint", required=True)
    r.add_argument("--trajectory", help="trajectory .npz; recorded from --expert when absent")
    r.add_argument("--expert", help="checkpoint whose greedy episode becomes the trajectory")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", default=".")

    o = sub.add_parser("oracle-check", help="brute-force cooperative game property suite")
    o.add_argument("--games", type=int, default=200)
    o.add_argument("--seed", type=int, default=0)
    return p


def _train(args) -> int:
    flags = {k: getattr(args, k) for k in ("env", "algorithm", "difficulty", "sample_size", "episodes",
                                            "episode_length", "batch_size", "seed", "updates_per_round",
                                            "checkpoint_every")}
    cfg = load_config(args.config, **flags)
    out = Path(args.out) if args.out else default_out_dir(cfg)
    result = run_training(cfg, out)
    print(f"metrics: {result.metrics_path}")
    print(f"checkpoint: {result.checkpoint}")
    return 0


def _eval_success(args) -> int:
    st = analysis.evaluate_traffic(args.checkpoint, args.difficulty, args.episodes, args.steps, args.seed)
    print(f"success-rate: {st.success_rate:.4f}")
    print(f"cars-completed-per-episode: {st.mean_completed:.2f}")
    print(f"mean-step-reward: {st.mean_reward:.4f}")
    return 1 if args.min_rate is not None and st.success_rate < args.min_rate else 0


def _eval_pcc(args) -> int:
    try:
        res = analysis.pcc_credit_distance(args.checkpoint, args.samples, args.seed)
    except ValueError as exc:
        print(f"pcc: undefined ({exc})", file=sys.stderr)
        return 1
    print(f"pcc: {res.r:.4f}")
    print(f"p-value: {res.p:.4e}")
    print(f"points: {res.n}")
    return 0


def _trace(args) -> int:
    if args.trajectory:
        traj = analysis.Trajectory.load(args.trajectory)
    else:
        traj = analysis.record_trajectory(args.expert or args.checkpoint, seed=args.seed)
        Path(args.out).mkdir(parents=True, exist_ok=True)
        traj.save(Path(args.out) / "trajectory.npz")
    trace = analysis.export_credit_trace(args.checkpoint, traj, args.out, seed=args.seed)
    print(f"credit trace: {Path(args.out) / 'credit_trace.csv'} ({len(trace.raw)} steps)")
    if traj.env == "prey":
        print(f"nearest-predator agreement: {analysis.nearest_agreement(trace, traj):.3f}")
    return 0


def _oracle(args) -> int:
    if args.games < 1:
        raise UsageError("--games must be positive")
    results = oracle.run_suite(args.games, args.seed)
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.line():<{width + 12}} {'PASS' if r.ok else 'FAIL'}")
    return 0 if all(r.ok for r in results) else 1


COMMANDS = {
    "train": _train,
    "eval-success": _eval_success,
    "eval-pcc": _eval_pcc,
    "trace": _trace,
    "oracle-check": _oracle,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(parser.format_usage().rstrip(), file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
