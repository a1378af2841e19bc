"""Artifact writers: profile CSVs, PGM heatmaps and the JSON run summary."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

__all__ = ["write_csv", "write_profile_csv", "write_pgm", "read_pgm", "write_summary", "to_jsonable"]


def _cell(v):
    if isinstance(v, (float, np.floating)):
        # repr round-trips exactly and is platform independent
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return v


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def write_profile_csv(path, x, G, std_error=None, background=None) -> Path:
    x = np.asarray(x, dtype=float)
    G = np.asarray(G, dtype=float)
    se = np.zeros_like(G) if std_error is None else np.broadcast_to(np.asarray(std_error, dtype=float), G.shape)
    bg = np.zeros_like(G) if background is None else np.broadcast_to(np.asarray(background, dtype=float), G.shape)
    return write_csv(path, ["x_r", "G", "std_error", "background"], zip(x, G, se, bg))


def write_pgm(path, image, maxval: int = 255) -> Path:
    """Plain (P2) PGM, rows top to bottom; values scaled linearly onto 0..maxval."""
    a = np.asarray(image, dtype=float)
    if a.ndim != 2:
        raise ValueError("heatmap must be 2-D")
    lo, hi = float(np.nanmin(a)), float(np.nanmax(a))
    scaled = np.zeros(a.shape, dtype=int) if hi == lo else np.rint((a - lo) / (hi - lo) * maxval).astype(int)
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"P2\n{a.shape[1]} {a.shape[0]}\n{maxval}\n")
        for row in scaled:
            fh.write(" ".join(str(v) for v in row) + "\n")
    return path


def read_pgm(path) -> np.ndarray:
    tokens = [t for line in Path(path).read_text().splitlines() if not line.startswith("#") for t in line.split()]
    if tokens[0] != "P2":
        raise ValueError("not a plain PGM file")
    w, h = int(tokens[1]), int(tokens[2])
    return np.array(tokens[4:4 + w * h], dtype=int).reshape(h, w)


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    return obj


def write_summary(path, summary: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(to_jsonable(summary), indent=2, sort_keys=True) + "\n")
    return path
