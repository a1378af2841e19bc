"""Ghost-image visibility: measured, predicted, and the (N-1)/N bound."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .correlator import (
    CorrelationResult,
    SystemConfig,
    cross_C_r1_quadrature,
    intensity_I1_quadrature,
    intensity_Ir_quadrature,
)
from .optics import ObjectMask

__all__ = [
    "VisibilityReport",
    "visibility_from_correlation",
    "visibility_error",
    "visibility_analytic",
    "cauchy_schwarz_ratio",
    "cauchy_schwarz_ratio_measured",
    "visibility_bound",
    "visibility_report",
]


@dataclass(frozen=True)
class VisibilityReport:
    N: int
    measured: float
    analytic: float
    bound: float
    cauchy_schwarz_ratio: float
    passed: bool
    physical: bool
    measured_error: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _mask(result: CorrelationResult, exclude_coincident: bool):
    shape = np.shape(result.values)
    if exclude_coincident and result.valid is not None:
        mask = np.broadcast_to(np.asarray(result.valid, dtype=bool), shape)
    else:
        mask = np.ones(shape, dtype=bool)
    if not mask.any():
        raise ValueError("no valid scan points: every point has coincident image positions")
    return mask


def _terms(result, background):
    if background is None:
        background = result.background
    G = np.asarray(result.values, dtype=float)
    return G, np.broadcast_to(np.asarray(background, dtype=float), G.shape)


def visibility_from_correlation(result: CorrelationResult, background=None, exclude_coincident: bool = True) -> float:
    """[G - prod <I_i>]_max / [G]_max over the scan.

    Points flagged as coincident (reference-reference correlations not
    negligible) are skipped unless ``exclude_coincident`` is False.
    """
    G, bg = _terms(result, background)
    mask = _mask(result, exclude_coincident)
    top = G[mask].max()
    if top == 0:
        raise ValueError("visibility undefined: correlation maximum is zero")
    return float((G - bg)[mask].max() / top)


def visibility_error(result: CorrelationResult, background=None, exclude_coincident: bool = True) -> float:
    """First-order error of the measured visibility from the standard error at the maximum."""
    if result.std_error is None:
        return 0.0
    G, bg = _terms(result, background)
    mask = _mask(result, exclude_coincident)
    i = np.unravel_index(np.argmax(np.where(mask, G, -np.inf)), G.shape)
    # V = 1 - bg/G at the maximum
    return float(bg[i] * np.asarray(result.std_error)[i] / G[i] ** 2)


def visibility_analytic(obj: ObjectMask, q0: float, N: int, image_positions) -> float:
    """Predicted visibility from the bandwidth, the transmission area and the image points.

    ``image_positions`` holds scaled positions X_i, either one tuple of
    length N-1 or an array of candidate tuples (one per row); the maxima
    are taken jointly over the rows.
    """
    X = np.atleast_2d(np.asarray(image_positions, dtype=float))
    if X.shape[1] != N - 1:
        raise ValueError(f"need N-1 = {N - 1} image positions per tuple, got {X.shape[1]}")
    s = np.sum(np.abs(obj(X)) ** 2, axis=1)
    background = q0 * obj.transmission_area()
    return float(s.max() / (background + s).max())


def cauchy_schwarz_ratio(config_or_obj, q0: float | None = None) -> float:
    """q0 * int |T|^2 dx; at least 1 for any physical configuration."""
    if isinstance(config_or_obj, SystemConfig):
        return config_or_obj.spectrum.effective_bandwidth * config_or_obj.obj.transmission_area()
    if q0 is None:
        raise ValueError("q0 required when passing an object")
    return q0 * config_or_obj.transmission_area()


def cauchy_schwarz_ratio_measured(config: SystemConfig, r: int, x_r, x_1: float = 0.0) -> float:
    """<I_1><I_r> / max |C_r1|^2 with every factor from quadrature."""
    I1 = float(intensity_I1_quadrature(config, x_1))
    Ir = float(intensity_Ir_quadrature(config, r, 0.0))
    c2 = np.abs(cross_C_r1_quadrature(config, r, x_1, x_r)) ** 2
    return I1 * Ir / float(c2.max())


def visibility_bound(N: int) -> float:
    if N < 2:
        raise ValueError("visibility bound needs N >= 2")
    return (N - 1) / N


def visibility_report(N: int, measured: float, analytic: float, ratio: float, error: float = 0.0) -> VisibilityReport:
    bound = visibility_bound(N)
    return VisibilityReport(
        N=N,
        measured=float(measured),
        analytic=float(analytic),
        bound=bound,
        cauchy_schwarz_ratio=float(ratio),
        passed=bool(measured <= bound + 3 * error),
        physical=bool(ratio >= 1.0),
        measured_error=float(error),
    )
