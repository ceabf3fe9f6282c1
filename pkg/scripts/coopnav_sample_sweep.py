"""Cooperative Navigation learning curves for SQDDPG with M in {1, 2, 3} join-order samples.

Writes curves.csv (100-episode moving average of mean step reward per run) and prints
the final-10% average per run next to a random-policy baseline.
"""

import argparse
import csv
import logging
from pathlib import Path

import numpy as np

from sqddpg import analysis as an
from sqddpg.experiments import coopnav, ensure
from sqddpg.train import read_metrics

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--samples", type=int, nargs="+", default=[1, 2, 3])
p.add_argument("--seeds", type=int, nargs="+", default=[0])
p.add_argument("--algos", nargs="+", default=["sqddpg"], help="also try iddpg maddpg ia2c coma (M only affects sqddpg)")
p.add_argument("--out", default="runs/coopnav_sweep")
args = p.parse_args()
logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

curves = {}
for algo in args.algos:
    for m in args.samples if algo == "sqddpg" else [1]:
        for seed in args.seeds:
            run = ensure(coopnav(seed, sample_size=m, algorithm=algo))
            r = np.array([float(row["mean_step_reward"]) for row in read_metrics(run / "metrics.csv")])
            name = f"{algo}_m{m}_s{seed}" if algo == "sqddpg" else f"{algo}_s{seed}"
            curves[name] = an.moving_average(r, 100)

rand = an.mean_step_reward_of(an.random_policy(3, 5), "coopnav", episodes=100)
print(f"random policy: {rand:.3f}")
for name, ma in curves.items():
    tenth = max(len(ma) // 10, 1)
    print(f"{name}: final-10% {ma[-tenth:].mean():.3f}, best {ma.max():.3f}")

out = Path(args.out)
out.mkdir(parents=True, exist_ok=True)
names = list(curves)
with open(out / "curves.csv", "w", newline="") as fh:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["episode"] + names)
    for k in range(max(len(c) for c in curves.values())):
        w.writerow([k] + [repr(float(curves[n][k])) if k < len(curves[n]) else "" for n in names])
print(f"wrote {out / 'curves.csv'}")
