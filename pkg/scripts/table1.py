"""Mean and std of the estimated rank over random tensors for every grid cell.

Writes the per-trial CSV and prints one summary line per cell next to the
published values. Use --trials 20 for a quick run.
"""
import argparse
import sys

from tensorank.cli import main

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--out", default="table1.csv")
p.add_argument("--trials", default="100")
p.add_argument("--cells", default="all", help="e.g. 5:3,10:5,20:10")
p.add_argument("--jobs", default=None)
p.add_argument("--seed", default="0")
a = p.parse_args()
argv = ["table1", "--cells", a.cells, "--trials", a.trials, "--seed", a.seed, "--out", a.out]
if a.jobs:
    argv += ["--jobs", a.jobs]
sys.exit(main(argv))
