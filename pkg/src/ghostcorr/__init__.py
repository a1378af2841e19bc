"""Nth-order correlated thermal-light ghost imaging: speckle synthesis, propagation,
Monte Carlo and closed-form correlation functions, imaging conditions and visibility."""

from .correlator import (
    CorrelationResult,
    SystemConfig,
    cross_C_r1_closed,
    cross_C_r1_quadrature,
    cross_C_rr_quadrature,
    g_n_analytic,
    g_n_identical,
    g_n_monte_carlo,
    intensity_I1,
    intensity_Ir,
)
from .imaging import classify_configuration, reconstruct_ghost_image, solve_image_distance
from .optics import DomainError, ObjectMask, ReferenceArm, TestArm
from .source_model import FrequencyGrid, PowerSpectrum, make_frequency_grid, moment_expand, sample_field
from .visibility import cauchy_schwarz_ratio, visibility_analytic, visibility_bound, visibility_from_correlation

__version__ = "0.1.0"

__all__ = [
    "CorrelationResult",
    "SystemConfig",
    "cross_C_r1_closed",
    "cross_C_r1_quadrature",
    "cross_C_rr_quadrature",
    "g_n_analytic",
    "g_n_identical",
    "g_n_monte_carlo",
    "intensity_I1",
    "intensity_Ir",
    "classify_configuration",
    "reconstruct_ghost_image",
    "solve_image_distance",
    "DomainError",
    "ObjectMask",
    "ReferenceArm",
    "TestArm",
    "FrequencyGrid",
    "PowerSpectrum",
    "make_frequency_grid",
    "moment_expand",
    "sample_field",
    "cauchy_schwarz_ratio",
    "visibility_analytic",
    "visibility_bound",
    "visibility_from_correlation",
]
