"""Arm geometry, objects, impulse responses and detector-plane fields.

Impulse responses take the angular spatial frequency ``q`` (rad/length).
Fields are assembled from a spectral realization on a
:class:`~ghostcorr.source_model.FrequencyGrid` whose samples are in cycles per
length, so a grid sample ``nu`` enters the optics as ``q = 2*pi*nu`` and the
Riemann sum carries the weight ``dnu``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .source_model import FrequencyGrid, SpectralAmplitude

__all__ = [
    "DomainError",
    "DEFAULT_WAVELENGTH",
    "wavenumber",
    "TestArm",
    "ReferenceArm",
    "ObjectMask",
    "DetectorGrid",
    "reference_impulse",
    "test_impulse",
    "object_spectrum",
    "propagation_matrix",
    "detector_field",
    "bucket_grid",
    "image_detector_grid",
    "covers_image",
]

DEFAULT_WAVELENGTH = 632.8e-9


class DomainError(ValueError):
    """A geometry or parameter outside the domain of a formula."""


def wavenumber(wavelength: float = DEFAULT_WAVELENGTH) -> float:
    return 2 * math.pi / wavelength


def _finite_positive(name, value):
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be finite and positive, got {value}")


@dataclass(frozen=True)
class TestArm:
    """Object at distance ``z1`` from the source, in the front focal plane of the collection lens."""

    __test__ = False

    z1: float = 0.1
    fc: float = 0.1
    k: float = wavenumber()

    def __post_init__(self):
        for name in ("z1", "fc", "k"):
            _finite_positive(name, getattr(self, name))


@dataclass(frozen=True)
class ReferenceArm:
    """Imaging lens at ``z_r0`` from the source, scanning detector ``z_r1`` behind it."""

    index: int
    z_r0: float
    z_r1: float
    f_r: float
    k: float = wavenumber()

    def __post_init__(self):
        if self.index < 2:
            raise DomainError(f"reference arm index must be >= 2, got {self.index}")
        _finite_positive("z_r0", self.z_r0)
        _finite_positive("f_r", self.f_r)
        _finite_positive("k", self.k)
        if not math.isfinite(self.z_r1):
            raise DomainError("z_r1 must be finite")
        if self.z_r1 == self.f_r:
            raise DomainError(
                f"arm {self.index}: z_r1 = f_r = {self.f_r} is the pole of the reference impulse response"
            )

    @property
    def gain(self) -> float:
        """f_r / (f_r - z_r1): the magnification (amplifying rate) of the arm."""
        return self.f_r / (self.f_r - self.z_r1)

    @property
    def defocus(self) -> float:
        """z_r0 + z_r1 f_r / (f_r - z_r1), the coefficient of the quadratic source phase."""
        return self.z_r0 + self.z_r1 * self.gain

    def with_z_r1(self, z_r1: float) -> "ReferenceArm":
        return ReferenceArm(self.index, self.z_r0, z_r1, self.f_r, self.k)

    def with_index(self, index: int) -> "ReferenceArm":
        return ReferenceArm(index, self.z_r0, self.z_r1, self.f_r, self.k)


def _soft_slit(x, center, width, edge):
    a = np.abs(x - center)
    inner = width / 2 - edge / 2
    t = np.where(a <= inner, 1.0, 0.0)
    if edge > 0:
        ramp = (a > inner) & (a < inner + edge)
        t = np.where(ramp, 0.5 * (1 + np.cos(np.pi * (a - inner) / edge)), t)
    return t


@dataclass(frozen=True)
class ObjectMask:
    """Sampled transmission function on a uniform grid.

    Slit presets have raised-cosine edges of width ``edge``; ``width`` is the
    full width at half transmission.  ``edge=0`` gives hard edges.
    """

    x: np.ndarray
    t: np.ndarray
    name: str = "custom"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        t = np.asarray(self.t, dtype=complex)
        if x.ndim != 1 or x.shape != t.shape or x.size < 2:
            raise ValueError("object grid and transmission must be 1-D arrays of equal length")
        if not np.allclose(np.diff(x), x[1] - x[0], rtol=1e-9, atol=0) or x[1] <= x[0]:
            raise ValueError("object grid must be uniform and increasing")
        if np.any(np.abs(t) > 1 + 1e-12):
            raise ValueError("transmission magnitude exceeds 1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", t)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def n(self) -> int:
        return self.x.size

    def transmission_area(self) -> float:
        """int |T(x)|^2 dx by midpoint quadrature."""
        return float(np.sum(np.abs(self.t) ** 2) * self.dx)

    def support(self, threshold: float = 0.0) -> tuple[float, float]:
        nz = np.flatnonzero(np.abs(self.t) > threshold)
        if nz.size == 0:
            return 0.0, 0.0
        return float(self.x[nz[0]] - self.dx / 2), float(self.x[nz[-1]] + self.dx / 2)

    def __call__(self, X):
        """Linear interpolation of T at ``X``; zero outside the grid."""
        X = np.asarray(X, dtype=float)
        re = np.interp(X, self.x, self.t.real, left=0.0, right=0.0)
        im = np.interp(X, self.x, self.t.imag, left=0.0, right=0.0)
        return re + 1j * im

    def __eq__(self, other):
        if not isinstance(other, ObjectMask):
            return NotImplemented
        return self.name == other.name and np.array_equal(self.x, other.x) and np.array_equal(self.t, other.t)

    __hash__ = None

    # presets -----------------------------------------------------------

    @staticmethod
    def _grid(half_support, n, extent):
        if extent is None:
            extent = 4 * 2 * half_support
        dx = extent / n
        return (np.arange(n) - (n - 1) / 2) * dx

    @classmethod
    def single_slit(cls, width=400e-6, edge=150e-6, n=256, extent=None):
        x = cls._grid(width / 2 + edge / 2, n, extent)
        return cls(x, _soft_slit(x, 0.0, width, edge), "single-slit")

    @classmethod
    def double_slit(cls, width=400e-6, separation=1.0e-3, edge=150e-6, n=256, extent=None):
        if separation < width + edge:
            raise ValueError("double-slit separation must exceed width + edge")
        x = cls._grid(separation / 2 + width / 2 + edge / 2, n, extent)
        t = _soft_slit(x, -separation / 2, width, edge) + _soft_slit(x, separation / 2, width, edge)
        return cls(x, t, "double-slit")

    @classmethod
    def point(cls, n=256, extent=1.0e-3):
        """A single fully transmitting grid cell at x = 0 (n odd keeps it centered)."""
        if n % 2 == 0:
            n += 1
        dx = extent / n
        x = (np.arange(n) - (n - 1) / 2) * dx
        t = np.zeros(n)
        t[(n - 1) // 2] = 1.0
        return cls(x, t, "point")

    @classmethod
    def grayscale(cls, width=300e-6, levels=(1.0, 2 / 3, 1 / 3), edge=100e-6, n=256, extent=None):
        """Adjacent soft-edged steps of the given amplitude transmissions."""
        total = width * len(levels)
        x = cls._grid(total / 2 + edge / 2, n, extent)
        idx = np.clip(np.floor((x + total / 2) / width).astype(int), 0, len(levels) - 1)
        t = np.asarray(levels, dtype=float)[idx] * _soft_slit(x, 0.0, total, edge)
        return cls(x, t, "grayscale")

    @classmethod
    def preset(cls, name: str, **params) -> "ObjectMask":
        makers = {
            "single-slit": cls.single_slit,
            "double-slit": cls.double_slit,
            "point": cls.point,
            "grayscale": cls.grayscale,
        }
        if name not in makers:
            raise ValueError(f"unknown object preset {name!r}; choose from {sorted(makers)}")
        return makers[name](**params)


@dataclass(frozen=True)
class DetectorGrid:
    positions: np.ndarray
    arm: int

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.positions, dtype=float))
        if p.ndim != 1 or p.size == 0:
            raise ValueError("detector grid must be a non-empty 1-D array")
        if p.size > 1 and not np.allclose(np.diff(p), p[1] - p[0], rtol=1e-9, atol=0):
            raise ValueError("detector grid must be uniform")
        object.__setattr__(self, "positions", p)

    @property
    def size(self) -> int:
        return self.positions.size

    @property
    def spacing(self) -> float:
        return float(self.positions[1] - self.positions[0]) if self.size > 1 else 0.0


def reference_impulse(arm: ReferenceArm, x_r, q):
    """h_r(x_r, q) of a reference arm; ``q`` is angular.

    The prefactor radicand ``f/(2 pi (f - z_r1))`` is negative for real images
    (z_r1 > f); its square root is taken on the principal branch.
    """
    f, z0, z1, k = arm.f_r, arm.z_r0, arm.z_r1, arm.k
    if z1 == f:
        raise DomainError("z_r1 = f_r is the pole of the reference impulse response")
    x_r = np.asarray(x_r, dtype=float)
    q = np.asarray(q, dtype=float)
    pref = np.sqrt(complex(f / (2 * math.pi * (f - z1))))
    phase = k * (z0 + z1) - q**2 / (2 * k) * (z0 + z1 * f / (f - z1)) - (2 * q * f + k * x_r) * x_r / (2 * (f - z1))
    return pref * np.exp(1j * phase)


def object_spectrum(obj: ObjectMask, freq, chunk: int = 8192):
    """int T(x) exp(-i freq x) dx as a midpoint sum, for any array of angular ``freq``."""
    freq = np.asarray(freq, dtype=float)
    flat = freq.ravel()
    out = np.empty(flat.size, dtype=complex)
    tdx = obj.t * obj.dx
    for s in range(0, flat.size, chunk):
        f = flat[s : s + chunk]
        out[s : s + chunk] = np.exp(-1j * np.outer(f, obj.x)) @ tdx
    return out.reshape(freq.shape)


def test_impulse(arm: TestArm, obj: ObjectMask, x_1, q):
    """h_1(x_1, q) of the test arm; ``q`` is angular."""
    k, fc, z1 = arm.k, arm.fc, arm.z1
    x_1 = np.asarray(x_1, dtype=float)
    q = np.asarray(q, dtype=float)
    pref = (1 / (2 * math.pi)) * np.sqrt(k / (1j * fc))
    outer = np.exp(1j * k * (z1 + 2 * fc) - 1j * z1 * q**2 / (2 * k))
    return pref * outer * object_spectrum(obj, k * x_1 / fc + q)


test_impulse.__test__ = False


def propagation_matrix(impulse, positions, grid: FrequencyGrid) -> np.ndarray:
    """Matrix ``H[n, j] = h(x_n, -2 pi nu_j) dnu`` so that ``E(x) = H @ E(nu)``."""
    positions = np.atleast_1d(np.asarray(positions, dtype=float))
    return impulse(positions[:, None], -grid.angular[None, :]) * grid.spacing


def detector_field(realization, impulse, detector: DetectorGrid) -> np.ndarray:
    """Complex field on the detector for one realization (or a stack of them).

    ``realization`` is a :class:`SpectralAmplitude` or an array whose last
    axis runs over the frequency grid; in the latter case pass the grid via
    ``detector_field((values, grid), ...)``.
    """
    if isinstance(realization, SpectralAmplitude):
        values, grid = realization.values, realization.grid
    else:
        values, grid = realization
    H = propagation_matrix(impulse, detector.positions, grid)
    return np.asarray(values) @ H.T


def bucket_grid(arm: TestArm, obj: ObjectMask) -> DetectorGrid:
    """Bucket sampling conjugate to the object grid.

    The points ``u = k x_1 / fc`` form the DFT-dual grid of the object
    samples, so summing ``|E(x_1)|^2 dx_1`` over them equals the exact
    integral over the focal plane (discrete Parseval identity).
    """
    n = obj.n
    du = 2 * math.pi / (n * obj.dx)
    u = (np.arange(n) - n // 2) * du
    return DetectorGrid(u * arm.fc / arm.k, 1)


def image_detector_grid(arm: ReferenceArm, obj: ObjectMask, n: int = 128, margin: float = 0.2) -> DetectorGrid:
    """Scanning grid covering the geometric image of the object support with a margin."""
    a, b = obj.support()
    m = arm.gain
    lo, hi = sorted((a / m, b / m))
    c, h = (lo + hi) / 2, (hi - lo) / 2 * (1 + margin)
    if h == 0:
        h = obj.dx / abs(m)
    return DetectorGrid(np.linspace(c - h, c + h, n), arm.index)


def covers_image(grid: DetectorGrid, arm: ReferenceArm, obj: ObjectMask, margin: float = 0.2) -> bool:
    a, b = obj.support()
    lo, hi = sorted((a / arm.gain, b / arm.gain))
    c, h = (lo + hi) / 2, (hi - lo) / 2 * (1 + margin)
    p = grid.positions
    return bool(p.min() <= c - h * (1 - 1e-9) and p.max() >= c + h * (1 - 1e-9))
