"""Compress a synthetic 30x30x220 frame stack (5 patterns plus noise) with R=50.

Frames are written as PGM files first so the run goes through the same
ingestion path as real footage. Pass --frames DIR to use existing frames.
"""
import argparse
import sys
import tempfile
from pathlib import Path

from tensorank.cli import main
from tensorank.experiments import synthetic_video
from tensorank.io import write_pgm

p = argparse.ArgumentParser(description=__doc__)
p.add_argument("--out", default="video.json")
p.add_argument("--frames", type=Path, default=None)
p.add_argument("--R", default="50")
p.add_argument("--seed", default="0")
a = p.parse_args()

with tempfile.TemporaryDirectory() as tmp:
    frames = a.frames
    if frames is None:
        frames = Path(tmp)
        for t, img in enumerate(synthetic_video(seed=int(a.seed))):
            write_pgm(frames / f"frame{t:04d}.pgm", img)
    sys.exit(main(["video", str(frames), "--R", a.R, "--auto-lambda", "--seed", a.seed, "--out", a.out]))
