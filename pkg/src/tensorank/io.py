"""File formats: TNS3 binary tensors, JSON tensors/factors/results, CSV reports
and 8-bit binary PGM frame stacks."""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .cp import CpFactors
from .solver import TRACE_FIELDS, SolveResult, SolverTrace
from .tensor import TensorError, as_tensor3, vectorize

MAGIC = b"TNS3"
_HEADER = struct.Struct("<4s3I")


class FormatError(ValueError):
    pass


# ---------------------------------------------------------------- tensors

def encode_tns3(A) -> bytes:
    A = as_tensor3(A)
    return _HEADER.pack(MAGIC, *A.shape) + vectorize(A).astype("<f8").tobytes()


def decode_tns3(buf: bytes) -> np.ndarray:
    if len(buf) < _HEADER.size or buf[:4] != MAGIC:
        raise FormatError("not a TNS3 container (bad magic)")
    _, I, J, K = _HEADER.unpack_from(buf)
    n = I * J * K
    body = buf[_HEADER.size:]
    if len(body) != 8 * n:
        raise FormatError(f"TNS3 payload has {len(body)} bytes, expected {8 * n}")
    try:
        return as_tensor3(np.frombuffer(body, dtype="<f8"), (I, J, K))
    except TensorError as e:
        raise FormatError(str(e)) from e


def tensor_to_json(A) -> dict:
    A = as_tensor3(A)
    return {"dims": list(A.shape), "data": vectorize(A).tolist()}


def tensor_from_json(obj: dict) -> np.ndarray:
    try:
        return as_tensor3(obj["data"], obj["dims"])
    except (KeyError, TypeError, TensorError) as e:
        raise FormatError(f"bad JSON tensor: {e}") from e


def write_tensor(path, A):
    """TNS3 unless the path ends in ``.json``."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps(tensor_to_json(A)))
    else:
        path.write_bytes(encode_tns3(A))


def read_tensor(path) -> np.ndarray:
    path = Path(path)
    buf = path.read_bytes()
    if buf[:4] == MAGIC:
        return decode_tns3(buf)
    try:
        obj = json.loads(buf)
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"{path}: neither TNS3 nor JSON tensor") from e
    return tensor_from_json(obj)


# ---------------------------------------------------------------- factors and results

def factors_to_dict(f: CpFactors) -> dict:
    return {
        "R": f.R,
        "dims": list(f.dims),
        "alpha": f.alpha.tolist(),
        "X": f.X.tolist(),
        "Y": f.Y.tolist(),
        "Z": f.Z.tolist(),
    }


def factors_from_dict(d: dict) -> CpFactors:
    f = CpFactors(np.array(d["alpha"]), np.array(d["X"]), np.array(d["Y"]), np.array(d["Z"]))
    if f.R != d.get("R", f.R) or list(f.dims) != list(d.get("dims", f.dims)):
        raise FormatError("factor JSON header does not match its arrays")
    return f


def result_to_dict(res: SolveResult) -> dict:
    return {
        "factors": factors_to_dict(res.factors),
        "estimated_rank": res.estimated_rank,
        "iterations": res.iterations,
        "converged": res.converged,
        "objective": res.objective.total,
        "residual_half": res.objective.residual_half,
        "l1_penalty": res.objective.l1_penalty,
        "kkt_residual": res.kkt_residual,
        "descent_violations": res.descent_violations,
    }


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_trace(path, trace: SolverTrace):
    write_csv(path, TRACE_FIELDS, trace.rows)


# ---------------------------------------------------------------- frames

def read_pgm(path) -> np.ndarray:
    """8-bit binary (P5) PGM as a ``(height, width)`` uint8 array."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            if fh.read(2) != b"P5":
                raise FormatError(f"{path.name}: not a binary P5 PGM")
        with Image.open(path) as im:
            if im.mode != "L":
                raise FormatError(f"{path.name}: expected 8-bit grayscale, got mode {im.mode}")
            return np.asarray(im, dtype=np.uint8).copy()
    except FormatError:
        raise
    except Exception as e:  # PIL raises a zoo of types on truncated files
        raise FormatError(f"{path.name}: malformed PGM ({e})") from e


def write_pgm(path, img):
    img = np.asarray(img)
    if img.dtype != np.uint8 or img.ndim != 2:
        raise ValueError("frames must be 2-D uint8")
    Image.fromarray(img, mode="L").save(path, format="PPM")


def frame_paths(directory, manifest=None):
    directory = Path(directory)
    if manifest is not None:
        names = [ln.strip() for ln in Path(manifest).read_text().splitlines() if ln.strip()]
        return [directory / n for n in names]
    return sorted(p for p in directory.iterdir() if p.suffix.lower() == ".pgm")


def ingest_frames(directory, region=None, manifest=None) -> np.ndarray:
    """Stack PGM frames into a width x height x time tensor scaled to [0, 1].

    ``region`` is ``(x, y, w, h)`` in pixels; frames are ordered by filename
    unless a manifest lists them explicitly.
    """
    paths = frame_paths(directory, manifest)
    if not paths:
        raise FormatError(f"no PGM frames in {directory}")
    frames = []
    shape = None
    for p in paths:
        img = read_pgm(p)
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise FormatError(f"{p.name}: extents {img.shape[::-1]} differ from {shape[::-1]}")
        frames.append(img)
    H, W = shape
    x, y, w, h = region if region is not None else (0, 0, W, H)
    if x < 0 or y < 0 or w < 1 or h < 1 or x + w > W or y + h > H:
        raise FormatError(f"region {(x, y, w, h)} outside {W}x{H} frames")
    stack = np.stack([f[y:y + h, x:x + w] for f in frames], axis=-1)  # h x w x T
    return as_tensor3(stack.transpose(1, 0, 2).astype(np.float64) / 255.0)
