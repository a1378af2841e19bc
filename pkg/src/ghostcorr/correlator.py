"""Nth-order intensity correlation: closed forms, quadratures and Monte Carlo.

Closed forms assume the broadband limit (object spectrum well inside the
source band).  Quadratures are midpoint sums over the frequency grid (and
the object grid where the object enters).  Correlation values are reported
either at a point test detector (``bucket=False``) or integrated over the
bucket detector plane (``bucket=True``); the bucket integral of the closed
forms carries the weights from :func:`bucket_weights`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .ensemble import Moments, accumulate_blocks, default_block_size
from .imaging import scaled_position, thin_lens_residual
from .optics import (
    DomainError,
    ObjectMask,
    ReferenceArm,
    TestArm,
    bucket_grid,
    object_spectrum,
    propagation_matrix,
    reference_impulse,
    test_impulse,
)
from .source_model import FrequencyGrid, PowerSpectrum, eval_spectrum, make_frequency_grid, sample_ensemble

__all__ = [
    "SystemConfig",
    "CorrelationResult",
    "PhaseFunctions",
    "CoincidenceWarning",
    "geometry_flags",
    "intensity_I1",
    "intensity_I1_quadrature",
    "intensity_Ir",
    "intensity_Ir_quadrature",
    "cross_C_r1_quadrature",
    "cross_C_r1_impulse",
    "cross_C_r1_closed",
    "cross_C_rr_quadrature",
    "chi",
    "bucket_weights",
    "sampling_report",
    "g_n_analytic",
    "g_n_identical",
    "g_n_monte_carlo",
]

THIN_LENS_TOL = 1e-6


class CoincidenceWarning(UserWarning):
    """Scaled image positions of two reference arms closer than one speckle."""


@dataclass(frozen=True)
class SystemConfig:
    test: TestArm
    refs: tuple
    obj: ObjectMask
    spectrum: PowerSpectrum = PowerSpectrum()
    grid: FrequencyGrid | None = None

    def __post_init__(self):
        refs = tuple(self.refs)
        object.__setattr__(self, "refs", refs)
        if not refs:
            raise DomainError("need at least one reference arm (N >= 2)")
        if [a.index for a in refs] != list(range(2, len(refs) + 2)):
            raise DomainError("reference arm indices must be 2, 3, ..., N in order")
        if any(a.k != self.test.k for a in refs):
            raise DomainError("all arms must share the wavenumber")
        if self.grid is None:
            object.__setattr__(self, "grid", make_frequency_grid(self.spectrum))

    @property
    def N(self) -> int:
        return len(self.refs) + 1

    @property
    def k(self) -> float:
        return self.test.k

    def arm(self, r: int) -> ReferenceArm:
        if not 2 <= r <= self.N:
            raise IndexError(f"no reference arm {r} in an order-{self.N} system")
        return self.refs[r - 2]

    def with_refs(self, refs) -> "SystemConfig":
        return SystemConfig(self.test, tuple(refs), self.obj, self.spectrum, self.grid)

    def with_spectrum(self, spectrum: PowerSpectrum, grid: FrequencyGrid | None = None) -> "SystemConfig":
        return SystemConfig(self.test, self.refs, self.obj, spectrum, grid)

    @classmethod
    def identical(cls, N, test, arm, obj, spectrum=PowerSpectrum(), grid=None) -> "SystemConfig":
        refs = tuple(arm.with_index(r) for r in range(2, N + 1))
        return cls(test, refs, obj, spectrum, grid)

    def identical_arms(self) -> bool:
        a0 = self.refs[0]
        return all(
            math.isclose(a.f_r, a0.f_r, rel_tol=1e-12)
            and math.isclose(a.z_r0, a0.z_r0, rel_tol=1e-12)
            and math.isclose(a.z_r1, a0.z_r1, rel_tol=1e-12)
            for a in self.refs
        )

    def _weights(self):
        return eval_spectrum(self.spectrum, self.grid.samples) * self.grid.spacing


@dataclass
class CorrelationResult:
    """G^(N) on the tensor grid of reference-detector positions."""

    scan_axes: tuple
    values: np.ndarray
    method: str
    std_error: np.ndarray | None = None
    M: int | None = None
    background: np.ndarray | float | None = None
    valid: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def shape(self):
        return np.shape(self.values)


class PhaseFunctions:
    """Cross-correlation phases bound to a system; ``q`` is angular."""

    def __init__(self, config: SystemConfig):
        self.config = config

    def r1(self, r, x, q, x_1, x_r):
        c, a = self.config, self.config.arm(r)
        k, fc, z1 = c.k, c.test.fc, c.test.z1
        X = a.gain * x_r
        return (
            q**2 / (2 * k) * (a.z_r0 - z1 + a.z_r1 * a.gain)
            - (q + k * x_1 / fc) * x
            + q * X
            - k * (a.z_r0 + a.z_r1 - z1 - 2 * fc)
        )

    def rr(self, r, rp, q, x_r, x_rp):
        c = self.config
        a, b, k = c.arm(r), c.arm(rp), c.k
        X, Xp = a.gain * x_r, b.gain * x_rp
        return (
            k * x_r**2 / (2 * (a.f_r - a.z_r1))
            - k * x_rp**2 / (2 * (b.f_r - b.z_r1))
            - q**2 / (2 * k) * (b.z_r0 - a.z_r0 + b.z_r1 * b.gain - a.z_r1 * a.gain)
            - q * (Xp - X)
            + k * (b.z_r0 + b.z_r1 - a.z_r0 - a.z_r1)
        )


def geometry_flags(config: SystemConfig) -> dict:
    """Arms whose closed-form intensity or prefactor radicand is negative (z_r1 > f_r)."""
    return {a.index: "negative-radicand" for a in config.refs if a.f_r - a.z_r1 < 0}


# intensities ------------------------------------------------------------


def intensity_I1(config: SystemConfig) -> float:
    """Mean intensity at a point of the test detector, broadband limit."""
    s0 = config.spectrum.level
    return s0 * config.k / (4 * math.pi**2 * config.test.fc) * config.obj.transmission_area()


def intensity_I1_quadrature(config: SystemConfig, x_1=0.0):
    h = test_impulse(config.test, config.obj, np.asarray(x_1, dtype=float)[..., None], -config.grid.angular)
    return np.sum(config._weights() * np.abs(h) ** 2, axis=-1)


def intensity_Ir(config: SystemConfig, r: int, signed: bool = False) -> float:
    """Mean intensity of reference arm ``r``: f S0 / (2 pi (f - z_r1)).

    The formula is negative whenever z_r1 > f_r (every real-image geometry);
    its magnitude is returned unless ``signed``.
    """
    a = config.arm(r)
    value = a.f_r * config.spectrum.total_power / (2 * math.pi * (a.f_r - a.z_r1))
    return value if signed else abs(value)


def intensity_Ir_quadrature(config: SystemConfig, r: int, x_r=0.0):
    h = reference_impulse(config.arm(r), np.asarray(x_r, dtype=float)[..., None], -config.grid.angular)
    return np.sum(config._weights() * np.abs(h) ** 2, axis=-1)


def chi(config: SystemConfig, r: int = 2) -> float:
    """S(0)^2 k f_r / (8 pi^3 fc (f_r - z_r1)), as a magnitude."""
    a = config.arm(r)
    s0 = config.spectrum.level
    return abs(s0**2 * config.k * a.f_r / (8 * math.pi**3 * config.test.fc * (a.f_r - a.z_r1)))


def bucket_weights(config: SystemConfig) -> tuple[float, float]:
    """Factors converting point-detector closed forms into bucket integrals.

    Returns ``(background, image)``: the bucket integral of I_1 equals
    ``background * I_1`` and that of |C_r1|^2 equals ``image * |C_r1|^2``.
    Both reduce to ``2 pi fc q0 / k`` for the top-hat spectrum.
    """
    base = 2 * math.pi * config.test.fc / config.k
    sp = config.spectrum
    return base * sp.effective_bandwidth, base * sp.squared_bandwidth


# cross-correlations -----------------------------------------------------


def _outer_shape(a, b):
    return np.shape(a) + np.shape(b)


def cross_C_r1_quadrature(config: SystemConfig, r: int, x_1, x_r):
    """C_r1 by a double midpoint sum over the object and frequency grids.

    Output shape is ``shape(x_1) + shape(x_r)``.
    """
    a = config.arm(r)
    k, fc = config.k, config.test.fc
    q = config.grid.angular
    x1 = np.atleast_1d(np.asarray(x_1, dtype=float)).ravel()
    xr = np.atleast_1d(np.asarray(x_r, dtype=float)).ravel()
    pref = (1 / (2 * math.pi)) * np.sqrt(complex(k * a.f_r / (1j * 2 * math.pi * fc * (a.f_r - a.z_r1))))
    # sum over x: object spectrum at q + k x_1 / fc
    spec = object_spectrum(config.obj, q[None, :] + k * x1[:, None] / fc)
    ph = PhaseFunctions(config)
    # x-free part of the phase (set x = 0)
    base = ph.r1(r, 0.0, q[None, :], 0.0, xr[:, None])
    kernel = config._weights()[None, :] * np.exp(1j * base)
    out = pref * (spec @ kernel.T)
    return out.reshape(_outer_shape(x_1, x_r))


def cross_C_r1_impulse(config: SystemConfig, r: int, x_1, x_r):
    """<E_r*(x_r) E_1(x_1)> from the impulse responses directly."""
    q = config.grid.angular
    x1 = np.atleast_1d(np.asarray(x_1, dtype=float)).ravel()
    xr = np.atleast_1d(np.asarray(x_r, dtype=float)).ravel()
    h1 = test_impulse(config.test, config.obj, x1[:, None], -q[None, :])
    hr = reference_impulse(config.arm(r), xr[:, None], -q[None, :])
    out = (h1 * config._weights()) @ np.conj(hr).T
    return out.reshape(_outer_shape(x_1, x_r))


def cross_C_r1_closed(config: SystemConfig, r: int, x_1, x_r, tol: float = THIN_LENS_TOL):
    """Closed form of C_r1 under the thin-lens condition: a phase times T(X_r)."""
    a = config.arm(r)
    res = thin_lens_residual(a, config.test.z1)
    if res > tol:
        raise DomainError(f"arm {r} violates the thin-lens condition (relative residual {res:.3g})")
    k, fc = config.k, config.test.fc
    x1 = np.asarray(x_1, dtype=float)
    X = scaled_position(a, x_r)
    pref = config.spectrum.level / (2 * math.pi) * np.sqrt(
        complex(k * a.f_r / (1j * 2 * math.pi * fc * (a.f_r - a.z_r1)))
    )
    return pref * np.exp(-1j * k * np.multiply.outer(x1, X) / fc) * config.obj(X)


def cross_C_rr_quadrature(config: SystemConfig, r: int, rp: int, x_r, x_rp):
    """C_rr' by a midpoint sum over the frequency grid; shape ``shape(x_r) + shape(x_rp)``."""
    if r == rp:
        raise ValueError("C_rr' needs two distinct reference arms")
    a, b = config.arm(r), config.arm(rp)
    q = config.grid.angular
    xr = np.atleast_1d(np.asarray(x_r, dtype=float)).ravel()
    xp = np.atleast_1d(np.asarray(x_rp, dtype=float)).ravel()
    pref = np.sqrt(complex(a.f_r * b.f_r / ((a.f_r - a.z_r1) * (b.f_r - b.z_r1)))) / (2 * math.pi)
    ph = PhaseFunctions(config)
    w = config._weights()
    out = np.empty((xr.size, xp.size), dtype=complex)
    for i, x in enumerate(xr):
        phase = ph.rr(r, rp, q[None, :], x, xp[:, None])
        out[i] = np.exp(1j * phase) @ w
    return (pref * out).reshape(_outer_shape(x_r, x_rp))


# diagnostics ----------------------------------------------------------


def sampling_report(config: SystemConfig, axes) -> dict:
    """Samples per oscillation of the cross-correlation integrands over the frequency grid.

    Reports the worst case over scanned arms; fewer than 8 samples per
    oscillation means the midpoint sums are not trustworthy.
    """
    nu_max = float(np.max(np.abs(config.grid.samples)))
    dnu = config.grid.spacing
    a_obj, b_obj = config.obj.support()
    worst = math.inf
    per_arm = {}
    for arm, ax in zip(config.refs, axes):
        X = scaled_position(arm, np.asarray(ax, dtype=float))
        sep = max(np.max(np.abs(X - a_obj)), np.max(np.abs(X - b_obj)))
        D = arm.z_r0 - config.test.z1 + arm.z_r1 * arm.gain
        # dphi/dnu for phase (2 pi nu)^2 D / (2k) + 2 pi nu s
        slope = 4 * math.pi**2 * abs(D) * nu_max / config.k + 2 * math.pi * sep
        ratio = 2 * math.pi / (slope * dnu) if slope > 0 else math.inf
        per_arm[arm.index] = ratio
        worst = min(worst, ratio)
    return {"worst_samples_per_oscillation": worst, "per_arm": per_arm, "ok": worst >= 8}


def _coincidence_mask(config: SystemConfig, axes):
    speckle = 1.0 / config.spectrum.effective_bandwidth
    n = len(axes)
    shape = tuple(len(a) for a in axes)
    valid = np.ones(shape, dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            Xi = scaled_position(config.refs[i], axes[i])
            Xj = scaled_position(config.refs[j], axes[j])
            close = np.abs(Xi[:, None] - Xj[None, :]) < speckle
            sh = [1] * n
            sh[i], sh[j] = shape[i], shape[j]
            valid &= ~close.reshape(sh)
    if not valid.all():
        warnings.warn(
            f"{(~valid).sum()} scan points have coincident scaled positions; "
            "reference-reference correlations are neglected there",
            CoincidenceWarning,
            stacklevel=3,
        )
    return valid


def _check_axes(config, axes):
    axes = tuple(np.atleast_1d(np.asarray(a, dtype=float)) for a in axes)
    if len(axes) != len(config.refs):
        raise ValueError(f"expected {len(config.refs)} scan axes, got {len(axes)}")
    return axes


def _broadcast_axis(values, p, n):
    sh = [1] * n
    sh[p] = -1
    return np.reshape(values, sh)


# G^(N) -------------------------------------------------------------------


def g_n_analytic(config: SystemConfig, axes, bucket: bool = True, image_term: str = "closed") -> CorrelationResult:
    """Background product plus one |C_r1|^2 term per reference arm.

    ``image_term='closed'`` uses the thin-lens closed form of C_r1;
    ``'quadrature'`` evaluates C_r1 numerically (with the bucket integral
    done over the conjugate bucket grid) and works off the imaging condition.
    """
    axes = _check_axes(config, axes)
    n = len(axes)
    shape = tuple(len(a) for a in axes)
    valid = _coincidence_mask(config, axes)
    w_bg, w_img = bucket_weights(config) if bucket else (1.0, 1.0)
    I1 = intensity_I1(config)
    Ir = [intensity_Ir(config, a.index) for a in config.refs]
    background = w_bg * I1 * math.prod(Ir)
    total = np.full(shape, background, dtype=float)
    for p, arm in enumerate(config.refs):
        others = math.prod(Ir[:p] + Ir[p + 1 :])
        if image_term == "closed":
            c2 = w_img * np.abs(cross_C_r1_closed(config, arm.index, 0.0, axes[p])) ** 2
        elif image_term == "quadrature":
            if bucket:
                b = bucket_grid(config.test, config.obj)
                c = cross_C_r1_quadrature(config, arm.index, b.positions, axes[p])
                c2 = np.sum(np.abs(c) ** 2, axis=0) * b.spacing
            else:
                c2 = np.abs(cross_C_r1_quadrature(config, arm.index, 0.0, axes[p])) ** 2
        else:
            raise ValueError(f"unknown image_term {image_term!r}")
        total = total + others * _broadcast_axis(c2, p, n)
    return CorrelationResult(
        scan_axes=axes,
        values=total,
        method="analytic-general",
        background=background,
        valid=valid,
        metadata={"bucket": bucket, "bucket_weights": (w_bg, w_img), "I1": I1, "Ir": Ir, "image_term": image_term},
    )


def g_n_identical(config: SystemConfig, axes, bucket: bool = True) -> CorrelationResult:
    """Identical reference arms: I^(N-1) I_1 + chi I^(N-2) sum_i |T(X_i)|^2."""
    if not config.identical_arms():
        raise DomainError("reference arms are not identical")
    axes = _check_axes(config, axes)
    n = len(axes)
    shape = tuple(len(a) for a in axes)
    valid = _coincidence_mask(config, axes)
    N = config.N
    w_bg, w_img = bucket_weights(config) if bucket else (1.0, 1.0)
    I1 = intensity_I1(config)
    I = intensity_Ir(config, 2)
    background = w_bg * I ** (N - 1) * I1
    t2 = np.zeros(shape)
    for p, arm in enumerate(config.refs):
        t2 = t2 + _broadcast_axis(np.abs(config.obj(scaled_position(arm, axes[p]))) ** 2, p, n)
    values = background + w_img * chi(config) * I ** (N - 2) * t2
    return CorrelationResult(
        scan_axes=axes,
        values=values,
        method="analytic-identical",
        background=background,
        valid=valid,
        metadata={"bucket": bucket, "bucket_weights": (w_bg, w_img), "I1": I1, "I": I, "chi": chi(config)},
    )


def g_n_monte_carlo(config: SystemConfig, axes, M: int, seed: int, threads: int = 1,
                    deterministic: bool = True, block_size: int | None = None) -> CorrelationResult:
    """Average of bucket intensity times reference intensities over M speckle realizations.

    Realization ``i`` depends only on ``(seed, i)``.  The standard error is
    the per-point sample standard deviation of the product over sqrt(M).
    """
    if M < 100:
        raise ValueError(f"M = {M} realizations is too few (need >= 100)")
    bad = [a.index for a in config.refs if a.z_r1 <= 0]
    if bad:
        raise DomainError(
            f"arms {bad} have z_r1 <= 0 (virtual image): a physical detector cannot sit "
            "at negative distance behind the lens; use the analytic path"
        )
    axes = _check_axes(config, axes)
    n = len(axes)
    shape = tuple(len(a) for a in axes)
    grid, spectrum = config.grid, config.spectrum
    bucket = bucket_grid(config.test, config.obj)
    H1 = propagation_matrix(lambda x, q: test_impulse(config.test, config.obj, x, q), bucket.positions, grid)
    Hr = [propagation_matrix(lambda x, q, a=a: reference_impulse(a, x, q), ax, grid)
          for a, ax in zip(config.refs, axes)]
    dx1 = bucket.spacing

    def block(start, count):
        E = sample_ensemble(spectrum, grid, seed, start, count)
        b = np.sum(np.abs(E @ H1.T) ** 2, axis=1) * dx1
        out = {"bucket": Moments.of(b)}
        prod = b.reshape((count,) + (1,) * n)
        for p, H in enumerate(Hr):
            I = np.abs(E @ H.T) ** 2
            out[f"I{p + 2}"] = Moments.of(I)
            sh = [count] + [1] * n
            sh[p + 1] = shape[p]
            prod = prod * I.reshape(sh)
        out["G"] = Moments.of(prod)
        return out

    if block_size is None:
        block_size = default_block_size(math.prod(shape))
    acc = accumulate_blocks(block, M, block_size, threads=threads, deterministic=deterministic)
    background = np.asarray(acc["bucket"].mean, dtype=float)
    for p in range(n):
        background = background * _broadcast_axis(acc[f"I{p + 2}"].mean, p, n)
    w_bg, _ = bucket_weights(config)
    analytic_bg = w_bg * intensity_I1(config) * math.prod(intensity_Ir(config, a.index) for a in config.refs)
    return CorrelationResult(
        scan_axes=axes,
        values=acc["G"].mean,
        method="monte-carlo",
        std_error=acc["G"].std_error,
        M=M,
        background=np.broadcast_to(background, shape).copy(),
        valid=_coincidence_mask(config, axes),
        metadata={
            "seed": seed,
            "block_size": block_size,
            "mean_bucket": float(acc["bucket"].mean),
            "mean_reference": [np.asarray(acc[f"I{p + 2}"].mean) for p in range(n)],
            "background_ratio": float(np.mean(background) / analytic_bg) if analytic_bg else math.nan,
        },
    )
