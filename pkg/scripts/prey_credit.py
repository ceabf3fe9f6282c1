"""Prey-and-Predator credit analysis across algorithms.

For each algorithm: median turns-to-capture over 100 greedy episodes, the PCC between
each predator's credit and 1/distance to the prey, and a credit trace over one fixed
trajectory recorded from the SQDDPG run (the "expert").
"""

import argparse
import logging
from pathlib import Path

import numpy as np

from sqddpg import analysis as an
from sqddpg.experiments import ensure, prey

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--algos", nargs="+", default=["sqddpg", "iddpg", "maddpg", "coma", "ia2c"])
p.add_argument("--seed", type=int, default=0)
p.add_argument("--out", default="runs/prey_credit")
args = p.parse_args()
logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)
expert = ensure(prey("sqddpg", args.seed)) / "checkpoint"
traj = an.record_trajectory(expert, seed=args.seed)
traj.save(out / "trajectory.npz")

rand = an.capture_turns_of(an.random_policy(3, 5), episodes=100, steps=200, seed=args.seed)
print(f"{'algorithm':<8} {'median turns':>12} {'pcc':>8} {'p-value':>10} {'nearest':>8}")
print(f"{'random':<8} {np.median(rand):>12g}")
for algo in args.algos:
    ck = ensure(prey(algo, args.seed)) / "checkpoint"
    turns = an.evaluate_capture_turns(ck, episodes=100, seed=args.seed)
    try:
        c = an.pcc_credit_distance(ck, samples=1000, seed=args.seed)
        pcc, pval = f"{c.r:.4f}", f"{c.p:.3g}"
    except ValueError as e:
        pcc, pval = "undef", str(e)[:10]
    trace = an.export_credit_trace(ck, traj, out / algo, seed=args.seed)
    print(f"{algo:<8} {np.median(turns):>12g} {pcc:>8} {pval:>10} {an.nearest_agreement(trace, traj):>8.2f}")
