"""Train (or reuse) every run the acceptance suite gates on."""

import argparse
import logging
import time

from sqddpg.experiments import acceptance_configs, ensure

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("names", nargs="*", help="subset of run names; default all")
args = p.parse_args()
logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

for name, cfg in acceptance_configs().items():
    if args.names and name not in args.names:
        continue
    t = time.time()
    out = ensure(cfg)
    print(f"{name}: {out} ({time.time() - t:.0f}s)", flush=True)
