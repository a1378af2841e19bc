"""Thin-lens imaging conditions, real/virtual classification and ghost-image reconstruction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .optics import DomainError, ObjectMask, ReferenceArm, image_detector_grid

__all__ = [
    "ImageSolution",
    "GhostImage",
    "solve_image_distance",
    "thin_lens_residual",
    "scaled_position",
    "detector_position",
    "image_kind",
    "classify_configuration",
    "reconstruct_ghost_image",
    "image_sharpness",
    "feature_centers",
    "plan_scan",
    "bright_points",
]

REAL, VIRTUAL = "real", "virtual"


@dataclass(frozen=True)
class ImageSolution:
    object_distance: float
    image_distance: float
    magnification: float
    kind: str
    arm: int | None = None


def solve_image_distance(z_r0: float, z1: float, f_r: float, arm: int | None = None) -> ImageSolution:
    """Image distance of the joint path source -> object -> lens for a reference arm.

    The object distance of the joint path is ``z_r0 - z1``.
    """
    if not (z_r0 > z1 > 0 and f_r > 0):
        raise DomainError(f"need z_r0 > z1 > 0 and f_r > 0, got z_r0={z_r0}, z1={z1}, f_r={f_r}")
    o = z_r0 - z1
    if o == f_r:
        raise DomainError("object distance equals the focal length: image at infinity")
    z_r1 = f_r * o / (o - f_r)
    return ImageSolution(o, z_r1, f_r / (f_r - z_r1), REAL if o > f_r else VIRTUAL, arm)


def thin_lens_residual(arm: ReferenceArm, z1: float) -> float:
    """Relative residual of 1/(z_r0 - z1) + 1/z_r1 = 1/f_r, scaled by f_r."""
    return abs(arm.f_r / (arm.z_r0 - z1) + arm.f_r / arm.z_r1 - 1.0)


def scaled_position(arm: ReferenceArm, x_r):
    if arm.z_r1 == arm.f_r:
        raise DomainError("scaled position undefined at z_r1 = f_r")
    return arm.gain * np.asarray(x_r, dtype=float)


def detector_position(arm: ReferenceArm, X):
    return np.asarray(X, dtype=float) / arm.gain


def image_kind(arm, z1: float) -> str:
    o = arm.z_r0 - z1
    if o == arm.f_r:
        raise DomainError(f"arm {getattr(arm, 'index', '?')}: object distance equals f_r")
    return REAL if o > arm.f_r else VIRTUAL


def classify_configuration(arms, z1: float) -> list[str]:
    """Real/virtual kind of each reference arm's ghost image."""
    return [image_kind(arm, z1) for arm in arms]


def image_sharpness(X, profile) -> float:
    """Peak over equivalent width of the profile normalized to unit area.

    Invariant to overall scale, so lens prefactors that change with the
    detector distance do not bias the comparison.
    """
    X = np.asarray(X, dtype=float)
    p = np.clip(np.asarray(profile, dtype=float), 0, None)
    area = np.trapezoid(p, X)
    if area <= 0:
        return 0.0
    peak = p.max() / area
    # equivalent width of the normalized profile is 1 / peak
    return float(peak**2)


def _segments(mask):
    edges = np.diff(np.concatenate(([0], mask.astype(int), [0])))
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))


def feature_centers(obj: ObjectMask) -> np.ndarray:
    """|T|^2-weighted centroids of the connected transmitting regions."""
    w = np.abs(obj.t) ** 2
    if w.max() == 0:
        return np.empty(0)
    segs = _segments(w > 1e-12 * w.max())
    return np.array([np.sum(obj.x[a:b] * w[a:b]) / np.sum(w[a:b]) for a, b in segs])


@dataclass
class GhostImage:
    arm: int
    positions: np.ndarray
    profile: np.ndarray
    std_error: np.ndarray | None
    peaks: np.ndarray
    peak_heights: np.ndarray
    magnification: float | None = None
    diagnostic: str = ""
    extra: dict = field(default_factory=dict)


def reconstruct_ghost_image(result, r: int, background=None, object_mask: ObjectMask | None = None,
                            threshold: float | None = None) -> GhostImage:
    """Background-subtracted profile along arm ``r`` with peak extraction.

    Other reference arms must be parked at a single position.  Peaks are
    contiguous runs above the significance level (3 standard errors for
    Monte Carlo data, 1e-6 of the maximum for analytic data, and at least
    half of the maximum); each peak is reported at its centroid.
    """
    p = r - 2
    axes = result.scan_axes
    if not 0 <= p < len(axes):
        raise ValueError(f"arm {r} not in result")
    idx = tuple(slice(None) if i == p else 0 for i in range(len(axes)))
    if any(len(a) != 1 for i, a in enumerate(axes) if i != p):
        raise ValueError("other reference arms must be parked at a single position")
    if background is None:
        background = result.background
    values = np.asarray(result.values)[idx]
    bg = np.broadcast_to(np.asarray(background, dtype=float), np.shape(result.values))[idx]
    err = None if result.std_error is None else np.asarray(result.std_error)[idx]
    x = np.asarray(axes[p], dtype=float)
    profile = values - bg
    empty = GhostImage(r, x, profile, err, np.empty(0), np.empty(0))
    top = profile.max() if profile.size else 0.0
    if top <= 0:
        empty.diagnostic = "background exceeds all correlation values; no image"
        return empty
    if threshold is None:
        threshold = 3 * err if err is not None else 1e-6 * top
    level = np.maximum(threshold, 0.5 * top)
    mask = profile > level
    # bridge single-cell dropouts
    for i in range(1, mask.size - 1):
        if not mask[i] and mask[i - 1] and mask[i + 1]:
            mask[i] = True
    segs = _segments(mask)
    if err is not None:
        segs = [(a, b) for a, b in segs if b - a > 1]
    if not segs:
        empty.diagnostic = "no significant image above threshold"
        return empty
    peaks, heights = [], []
    for a, b in segs:
        w = np.clip(profile[a:b], 0, None)
        peaks.append(np.sum(x[a:b] * w) / np.sum(w))
        heights.append(profile[a:b].max())
    out = GhostImage(r, x, profile, err, np.array(peaks), np.array(heights))
    if object_mask is not None and len(peaks) >= 2:
        centers = feature_centers(object_mask)
        if centers.size >= 2:
            out.magnification = float((centers[-1] - centers[0]) / (peaks[-1] - peaks[0]))
            out.magnification = abs(out.magnification)
    return out


def plan_scan(config, scan_arms=(2,), n_points: int = 128, margin: float = 0.2, park_gap: float = 10.0):
    """Detector positions per reference arm for a parked-arm scan.

    Scanned arms get a grid covering the geometric image with ``margin``.
    Every other arm is parked at a single position whose scaled value lies
    beyond the object and the scanned range; parked positions are spaced by
    ``park_gap`` speckle widths (an integer number keeps their mutual
    reference-reference correlation at a zero of the band kernel).
    """
    speckle = 1.0 / config.spectrum.effective_bandwidth
    a, b = config.obj.support()
    axes, reach = [], max(abs(a), abs(b))
    for arm in config.refs:
        if arm.index in scan_arms:
            g = image_detector_grid(arm, config.obj, n_points, margin).positions
            axes.append(g)
            reach = max(reach, float(np.max(np.abs(scaled_position(arm, g)))))
        else:
            axes.append(None)
    start = math.ceil(reach / speckle) * speckle + park_gap * speckle
    j = 0
    for i, arm in enumerate(config.refs):
        if axes[i] is None:
            axes[i] = np.array([float(detector_position(arm, start + j * park_gap * speckle))])
            j += 1
    return axes


def bright_points(obj: ObjectMask, count: int, spacing: float) -> np.ndarray:
    """``count`` distinct positions on maximal-transmission plateaus, ``spacing`` apart.

    Points are laid on a lattice centered in each plateau and taken
    alternately from the plateaus, so images spread over all features.
    """
    w = np.abs(obj.t) ** 2
    plateau = w >= w.max() * (1 - 1e-9)
    per_segment = []
    for a, b in _segments(plateau):
        lo, hi = obj.x[a], obj.x[b - 1]
        c, half = (lo + hi) / 2, (hi - lo) / 2
        m = int(math.floor(half / spacing + 1e-9))
        per_segment.append([c + j * spacing for j in sorted(range(-m, m + 1), key=abs)])
    pts = []
    while len(pts) < count and any(per_segment):
        for seg in per_segment:
            if seg and len(pts) < count:
                pts.append(seg.pop(0))
    if len(pts) < count:
        raise ValueError(f"object has room for only {len(pts)} distinct bright points at spacing {spacing}")
    return np.array(pts)
