"""Thermal source statistics: power spectrum, speckle sampling, moment expansion.

The spectral coordinate used throughout the package is the spatial frequency
``q`` in cycles per unit length.  Optical phases are evaluated at the angular
frequency ``2*pi*q`` (see :mod:`ghostcorr.optics`).  With this measure the
first-order correlation reads

    <E*(q) E(q')> = S(q) delta(q - q')

and the integrated power is ``S0 = int S(q) dq = level * bandwidth`` for the
top-hat shape.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PowerSpectrum",
    "FrequencyGrid",
    "SpectralAmplitude",
    "eval_spectrum",
    "make_frequency_grid",
    "sample_field",
    "sample_ensemble",
    "first_order_matrix",
    "moment_expand",
    "permanent_naive",
    "permanent_ryser",
    "moment_mc_check",
    "MomentCheck",
]

SHAPES = ("top-hat", "gaussian")

# naive enumeration up to this order, inclusion-exclusion above
NAIVE_PERMANENT_MAX = 6


@dataclass(frozen=True)
class PowerSpectrum:
    """Spatial-frequency power density of the source.

    Parameters
    ----------
    shape : {'top-hat', 'gaussian'}
    level : float
        S(0), the density at the band center.
    bandwidth : float
        q0.  Full width of the top-hat, or twice the standard deviation of
        the gaussian.
    center : float
    """

    shape: str = "top-hat"
    level: float = 1.0
    bandwidth: float = 2.0e4
    center: float = 0.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown spectrum shape {self.shape!r}, expected one of {SHAPES}")
        if not self.level >= 0:
            raise ValueError(f"spectrum level must be >= 0, got {self.level}")
        if not self.bandwidth > 0:
            raise ValueError(f"spectrum bandwidth must be > 0, got {self.bandwidth}")

    @property
    def sigma(self) -> float:
        return self.bandwidth / 2

    @property
    def total_power(self) -> float:
        """S0 = int S(q) dq."""
        if self.shape == "top-hat":
            return self.level * self.bandwidth
        return self.level * self.sigma * math.sqrt(2 * math.pi)

    @property
    def effective_bandwidth(self) -> float:
        """int S dq / S(0); equals ``bandwidth`` for the top-hat."""
        if self.shape == "top-hat":
            return self.bandwidth
        return self.sigma * math.sqrt(2 * math.pi)

    @property
    def squared_bandwidth(self) -> float:
        """int S^2 dq / S(0)^2."""
        if self.shape == "top-hat":
            return self.bandwidth
        return self.sigma * math.sqrt(math.pi)

    def support_width(self) -> float:
        """Width of the frequency interval carrying the power (6 sigma for gaussian)."""
        if self.shape == "top-hat":
            return self.bandwidth
        return 6 * self.sigma

    def scaled(self, factor: float) -> "PowerSpectrum":
        return PowerSpectrum(self.shape, self.level * factor, self.bandwidth, self.center)


def eval_spectrum(spec: PowerSpectrum, q):
    """Evaluate S(q); accepts scalars or arrays."""
    q = np.asarray(q, dtype=float)
    dq = q - spec.center
    if spec.shape == "top-hat":
        out = np.where(np.abs(dq) <= spec.bandwidth / 2, spec.level, 0.0)
    else:
        out = spec.level * np.exp(-(dq**2) / (2 * spec.sigma**2))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform midpoint grid of spatial frequencies."""

    samples: np.ndarray
    spacing: float

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError(f"frequency spacing must be positive, got {self.spacing}")
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size < 32:
            raise ValueError("frequency grid needs at least 32 samples")
        if not np.allclose(np.diff(samples), self.spacing, rtol=1e-9, atol=0):
            raise ValueError("frequency grid must be uniform with the stated spacing")
        object.__setattr__(self, "samples", samples)

    @property
    def size(self) -> int:
        return self.samples.size

    @property
    def angular(self) -> np.ndarray:
        """Angular frequencies 2*pi*q used in optical phases."""
        return 2 * np.pi * self.samples

    def __eq__(self, other):
        if not isinstance(other, FrequencyGrid):
            return NotImplemented
        return self.spacing == other.spacing and np.array_equal(self.samples, other.samples)

    __hash__ = None


def make_frequency_grid(spec: PowerSpectrum, n: int = 512, guard: float = 0.25) -> FrequencyGrid:
    """Grid covering the source band plus a guard band.

    For the top-hat the band edges sit on cell boundaries, so the midpoint
    sum of S reproduces ``level * bandwidth`` exactly.
    """
    if n < 32:
        raise ValueError("frequency grid needs at least 32 samples")
    if guard < 0:
        raise ValueError("guard fraction must be >= 0")
    n_active = int(round(n / (1 + guard)))
    if (n - n_active) % 2:
        n_active -= 1
    n_active = max(n_active, 2)
    dq = spec.support_width() / n_active
    samples = spec.center + (np.arange(n) - (n - 1) / 2) * dq
    return FrequencyGrid(samples, dq)


@dataclass(frozen=True)
class SpectralAmplitude:
    """One realization of E(q) on a frequency grid."""

    grid: FrequencyGrid
    values: np.ndarray
    realization_index: int
    seed: int

    def __post_init__(self):
        if np.shape(self.values) != (self.grid.size,):
            raise ValueError("amplitude sample count does not match the grid")


def _stride(n_modes: int) -> int:
    # Philox counters per realization: 4 doubles per counter, 2 per mode
    return -(-2 * n_modes // 4)


def sample_ensemble(spec: PowerSpectrum, grid: FrequencyGrid, seed: int, start: int, count: int) -> np.ndarray:
    """Realizations ``start .. start+count-1`` as a ``(count, n_modes)`` array.

    Realization ``i`` is drawn from a Philox stream keyed by ``seed`` with its
    counter positioned at ``i * stride``, so any block of realizations is
    reproducible on its own, in any order.  Each mode is circular complex
    gaussian with ``<|E_j|^2> = S(q_j) / dq``.
    """
    if not grid.spacing > 0:
        raise ValueError("nonpositive frequency spacing")
    if seed < 0 or start < 0 or count < 0:
        raise ValueError("seed, start and count must be nonnegative")
    n = grid.size
    stride = _stride(n)
    bitgen = np.random.Philox(key=int(seed), counter=int(start) * stride)
    u = np.random.Generator(bitgen).random(count * 4 * stride).reshape(count, 4 * stride)
    u1, u2 = u[:, :n], u[:, n : 2 * n]
    # |z|^2 ~ Exp(1), uniform phase
    amp = np.sqrt(-np.log1p(-u1))
    scale = np.sqrt(eval_spectrum(spec, grid.samples) / grid.spacing)
    return scale * amp * np.exp(2j * np.pi * u2)


def sample_field(spec: PowerSpectrum, grid: FrequencyGrid, seed: int, index: int) -> SpectralAmplitude:
    values = sample_ensemble(spec, grid, seed, index, 1)[0]
    return SpectralAmplitude(grid, values, int(index), int(seed))


def first_order_matrix(spec: PowerSpectrum, grid: FrequencyGrid, rows, cols=None) -> np.ndarray:
    """Discrete <E*(q_i) E(q'_j)> for grid indices ``rows`` and ``cols``."""
    rows = np.asarray(rows, dtype=int)
    cols = rows if cols is None else np.asarray(cols, dtype=int)
    s = eval_spectrum(spec, grid.samples[rows]) / grid.spacing
    return np.where(rows[:, None] == cols[None, :], s[:, None], 0.0).astype(complex)


def permanent_naive(a: np.ndarray) -> complex:
    n = a.shape[0]
    idx = np.arange(n)
    return complex(sum(np.prod(a[idx, list(p)]) for p in itertools.permutations(range(n))))


def permanent_ryser(a: np.ndarray) -> complex:
    """Ryser inclusion-exclusion with Gray-code column updates, O(2^n n)."""
    n = a.shape[0]
    if n == 0:
        return 1.0 + 0j
    row_sums = np.zeros(n, dtype=complex)
    total = 0j
    gray_prev = 0
    for k in range(1, 2**n):
        gray = k ^ (k >> 1)
        changed = (gray ^ gray_prev).bit_length() - 1
        if gray & (1 << changed):
            row_sums += a[:, changed]
        else:
            row_sums -= a[:, changed]
        gray_prev = gray
        size = bin(gray).count("1")
        total += (-1) ** size * np.prod(row_sums)
    return complex((-1) ** n * total)


def moment_expand(gamma) -> complex:
    """Pairing sum of a Gaussian moment: the permanent of ``gamma``.

    ``gamma[i, j] = <E*_i E_j>``.  The moment ``<prod_i E*_i E_i>`` is the sum
    over all permutations of products of first-order correlations.
    """
    a = np.asarray(gamma, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"moment expansion needs a square matrix, got shape {a.shape}")
    if a.shape[0] <= NAIVE_PERMANENT_MAX:
        return permanent_naive(a)
    return permanent_ryser(a)


@dataclass(frozen=True)
class MomentCheck:
    mc_estimate: complex
    std_error: float
    analytic: complex
    M: int

    @property
    def z_score(self) -> float:
        if self.std_error == 0:
            return 0.0 if self.mc_estimate == self.analytic else math.inf
        return abs(self.mc_estimate - self.analytic) / self.std_error


def moment_mc_check(spec: PowerSpectrum, grid: FrequencyGrid, qs, M: int, seed: int) -> MomentCheck:
    """Monte Carlo estimate of <prod_i |E(q_i)|^2> next to its pairing expansion."""
    qs = [int(i) for i in qs]
    if not 1 <= len(qs) <= 4:
        raise ValueError("moment check supports 1 to 4 frequency indices")
    if M < 100:
        raise ValueError(f"M = {M} realizations is too few for meaningful error bars (need >= 100)")
    if min(qs) < 0 or max(qs) >= grid.size:
        raise IndexError("frequency index outside the grid")
    field = sample_ensemble(spec, grid, seed, 0, M)[:, qs]
    product = np.prod(np.abs(field) ** 2, axis=1)
    analytic = moment_expand(first_order_matrix(spec, grid, qs))
    return MomentCheck(
        mc_estimate=complex(product.mean()),
        std_error=float(product.std(ddof=1) / math.sqrt(M)),
        analytic=analytic,
        M=M,
    )
