"""Estimated rank against lambda on a seeded 10x10x10 tensor with 5 components."""
import argparse
import sys

from tensorank.cli import main

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--out", default="lambda_sweep.csv")
p.add_argument("--seed", default="0")
a = p.parse_args()
sys.exit(main(["sweep-lambda", "--dims", "10", "10", "10", "--cn", "5", "--R", "10",
               "--seed", a.seed, "--out", a.out]))
