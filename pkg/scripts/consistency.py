"""Lasso support recovery rate against the probability bound (n=200, R=10, k=3)."""
import argparse
import sys

from tensorank.cli import main

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--out", default="consistency.csv")
p.add_argument("--trials", default="500")
p.add_argument("--seed", default="0")
a = p.parse_args()
sys.exit(main(["consistency", "--n", "200", "--R", "10", "--k", "3", "--sigma2", "1e-3",
               "--gamma-target", "0.5", "--trials", a.trials, "--seed", a.seed, "--out", a.out]))
