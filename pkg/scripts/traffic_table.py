"""Traffic Junction success rates per difficulty and algorithm.

Success counts collision-free episodes, which a policy that never moves also achieves,
so cars completed per episode is printed next to it. Only easy/SQDDPG is gated by the
acceptance suite; medium and hard are long runs.
"""

import argparse
import logging

from sqddpg import analysis as an
from sqddpg.envs import env_spec
from sqddpg.envs.traffic import BRAKE, GAS
from sqddpg.experiments import ensure, traffic

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--difficulties", nargs="+", default=["easy"], choices=["easy", "medium", "hard"])
p.add_argument("--algos", nargs="+", default=["sqddpg"])
p.add_argument("--episodes", type=int, default=1000)
p.add_argument("--seed", type=int, default=0)
args = p.parse_args()
logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

print(f"{'difficulty':<10} {'policy':<13} {'success':>8} {'completed':>10} {'reward':>8}")
for difficulty in args.difficulties:
    n = env_spec("traffic", difficulty).n_agents
    rows = [("always-brake", an.traffic_stats_of(an.constant_policy(n, BRAKE), difficulty, args.episodes, seed=args.seed)),
            ("always-gas", an.traffic_stats_of(an.constant_policy(n, GAS), difficulty, args.episodes, seed=args.seed)),
            ("random", an.traffic_stats_of(an.random_policy(n, 2), difficulty, args.episodes, seed=args.seed))]
    for algo in args.algos:
        run = ensure(traffic(difficulty, algo, args.seed))
        rows.append((algo, an.evaluate_traffic(run / "checkpoint", difficulty, args.episodes, seed=args.seed)))
    for name, st in rows:
        print(f"{difficulty:<10} {name:<13} {st.success_rate:>8.3f} {st.mean_completed:>10.2f} {st.mean_reward:>8.3f}")
