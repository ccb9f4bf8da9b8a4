"""Residual traces of modALS and LRAT on a seeded 5x5x5 tensor with 3 components."""
import argparse
import sys

from tensorank.cli import main

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--out", default="compare.csv")
p.add_argument("--seed", default="0")
a = p.parse_args()
sys.exit(main(["compare", "--dims", "5", "5", "5", "--cn", "3", "--R", "5", "--seed", a.seed, "--out", a.out]))
