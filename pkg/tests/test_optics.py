import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ghostcorr.optics import (
    DetectorGrid,
    DomainError,
    ObjectMask,
    ReferenceArm,
    TestArm,
    bucket_grid,
    covers_image,
    detector_field,
    image_detector_grid,
    object_spectrum,
    reference_impulse,
    test_impulse as h_test,
    wavenumber,
)
from ghostcorr.source_model import PowerSpectrum, SpectralAmplitude, make_frequency_grid, sample_field


@pytest.fixture
def arm():
    return ReferenceArm(2, 0.3, 0.2, 0.1)


# geometry -------------------------------------------------------------------


def test_pole_is_rejected():
    with pytest.raises(DomainError, match="pole"):
        ReferenceArm(2, 0.3, 0.1, 0.1)


def test_arm_parameter_checks():
    with pytest.raises(DomainError):
        ReferenceArm(1, 0.3, 0.2, 0.1)
    with pytest.raises(DomainError):
        ReferenceArm(2, -0.3, 0.2, 0.1)
    with pytest.raises(DomainError):
        TestArm(z1=0.0)


def test_gain_and_defocus(arm):
    assert arm.gain == pytest.approx(-1.0)
    assert arm.defocus == pytest.approx(0.3 + 0.2 * -1.0)
    assert arm.with_z_r1(0.05).gain == pytest.approx(2.0)


def test_wavenumber_default():
    assert wavenumber() == pytest.approx(2 * math.pi / 632.8e-9)


# objects -------------------------------------------------------------------


def test_double_slit_preset():
    obj = ObjectMask.double_slit()
    assert obj.n == 256
    a, b = obj.support()
    # extent is four times the support
    assert obj.x[-1] - obj.x[0] + obj.dx == pytest.approx(4 * (b - a), rel=0.02)
    assert abs(obj(-0.5e-3)) == pytest.approx(1.0)
    assert abs(obj(0.0)) == 0.0
    # raised-cosine edges keep the half-transmission width
    assert obj.transmission_area() == pytest.approx(2 * (400e-6 - 150e-6 / 4), rel=0.03)


def test_point_preset_is_one_centered_cell():
    obj = ObjectMask.point(n=256)
    assert obj.n == 257
    assert np.count_nonzero(obj.t) == 1
    assert obj.x[np.flatnonzero(obj.t)[0]] == 0.0
    assert obj.transmission_area() == pytest.approx(obj.dx)


def test_grayscale_levels():
    obj = ObjectMask.grayscale(width=300e-6, levels=(1.0, 0.5), edge=50e-6)
    assert abs(obj(-150e-6)) == pytest.approx(1.0)
    assert abs(obj(150e-6)) == pytest.approx(0.5)


def test_object_validation():
    with pytest.raises(ValueError):
        ObjectMask(np.linspace(0, 1, 8), np.full(8, 1.5))
    with pytest.raises(ValueError):
        ObjectMask(np.array([0.0, 1.0, 3.0]), np.ones(3))
    with pytest.raises(ValueError):
        ObjectMask.preset("star")
    with pytest.raises(ValueError):
        ObjectMask.double_slit(width=400e-6, separation=300e-6)


def test_object_interpolation_is_zero_outside():
    obj = ObjectMask.single_slit()
    assert obj(1.0) == 0
    assert obj(-1.0) == 0


# impulse responses ------------------------------------------------------------


def test_reference_impulse_modulus_is_constant(arm):
    x = np.linspace(-1e-3, 1e-3, 11)[:, None]
    q = np.linspace(-2e5, 2e5, 13)[None, :]
    h = reference_impulse(arm, x, q)
    np.testing.assert_allclose(np.abs(h), math.sqrt(0.1 / (2 * math.pi * 0.1)), rtol=1e-12)


def test_reference_impulse_phase_at_origin():
    a = ReferenceArm(2, 0.3, 0.05, 0.1)  # positive radicand, real prefactor
    h = reference_impulse(a, 0.0, 0.0)
    expected = math.sqrt(0.1 / (2 * math.pi * 0.05)) * np.exp(1j * a.k * (a.z_r0 + a.z_r1))
    assert h == pytest.approx(expected, rel=1e-9)


@pytest.mark.parametrize("x_r,q", [(3.1e-4, 7.3e4), (-8.0e-4, -1.9e5), (1.3e-5, 2.2e3)])
@pytest.mark.parametrize("z_r1", [0.2, 0.05, -0.1])
def test_reference_impulse_against_high_precision(x_r, q, z_r1):
    a = ReferenceArm(2, 0.3, z_r1, 0.1)
    mpmath.mp.dps = 40
    f, z0, z1, k = map(mpmath.mpf, (a.f_r, a.z_r0, a.z_r1, repr(a.k)))
    X, Q = mpmath.mpf(x_r), mpmath.mpf(q)
    phi = k * (z0 + z1) - Q**2 / (2 * k) * (z0 + z1 * f / (f - z1)) - (2 * Q * f + k * X) * X / (2 * (f - z1))
    oracle = mpmath.sqrt(mpmath.mpc(f / (2 * mpmath.pi * (f - z1)))) * mpmath.expj(phi)
    got = reference_impulse(a, x_r, q)
    assert got == pytest.approx(complex(oracle), rel=1e-8)


def test_point_object_spectrum_is_flat():
    obj = ObjectMask.point()
    f = np.linspace(-1e6, 1e6, 17)
    np.testing.assert_allclose(object_spectrum(obj, f) / obj.dx, 1.0, rtol=0, atol=1e-12)


def test_two_point_object_spectrum_is_cosine():
    x = (np.arange(101) - 50) * 1e-5
    t = np.zeros(101)
    t[[30, 70]] = 1.0
    obj = ObjectMask(x, t)
    d = x[70] - x[30]
    f = np.linspace(-5e5, 5e5, 41)
    np.testing.assert_allclose(object_spectrum(obj, f), 2 * obj.dx * np.cos(f * d / 2), atol=1e-15)


def test_zero_frequency_object_spectrum_is_integral():
    obj = ObjectMask.grayscale()
    assert object_spectrum(obj, 0.0) == pytest.approx(np.sum(obj.t) * obj.dx)


def test_test_impulse_depends_on_combination_only():
    arm, obj = TestArm(), ObjectMask.double_slit()
    k, fc, z1 = arm.k, arm.fc, arm.z1
    qa = np.array([1.0e4, -3.0e4, 5.5e4])
    xa = np.array([2e-5, -1e-5, 0.0])
    xb = xa + 1e-5
    qb = qa - k * 1e-5 / fc
    strip = lambda x, q: h_test(arm, obj, x, q) / np.exp(-1j * z1 * q**2 / (2 * k))  # noqa: E731
    np.testing.assert_allclose(strip(xa, qa), strip(xb, qb), rtol=1e-7)


# detector fields ------------------------------------------------------------


@pytest.fixture(scope="module")
def field_setup():
    s = PowerSpectrum()
    g = make_frequency_grid(s, 64)
    arm = ReferenceArm(2, 0.3, 0.2, 0.1)
    det = DetectorGrid(np.linspace(-1e-3, 1e-3, 9), 2)
    return s, g, (lambda x, q: reference_impulse(arm, x, q)), det


def test_zero_field_gives_zero(field_setup):
    s, g, h, det = field_setup
    zero = SpectralAmplitude(g, np.zeros(g.size, dtype=complex), 0, 0)
    assert np.all(detector_field(zero, h, det) == 0)


def test_single_mode_sifting(field_setup):
    s, g, h, det = field_setup
    j, amp = 20, 0.7 - 0.2j
    values = np.zeros(g.size, dtype=complex)
    values[j] = amp / g.spacing  # discrete delta
    out = detector_field((values, g), h, det)
    np.testing.assert_allclose(out, amp * h(det.positions, -2 * np.pi * g.samples[j]), rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(a=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       b=st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
       i=st.integers(0, 1000), j=st.integers(0, 1000))
def test_detector_field_is_linear(field_setup, a, b, i, j):
    s, g, h, det = field_setup
    e1, e2 = sample_field(s, g, 1, i).values, sample_field(s, g, 1, j).values
    lhs = detector_field((a * e1 + b * e2, g), h, det)
    rhs = a * detector_field((e1, g), h, det) + b * detector_field((e2, g), h, det)
    scale = max(1.0, np.max(np.abs(lhs)))
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-10 * scale)


def test_bucket_grid_parseval():
    arm, obj = TestArm(), ObjectMask.double_slit()
    b = bucket_grid(arm, obj)
    u = arm.k * b.positions / arm.fc
    for shift in (0.0, 1.234e4, -7.7e4):
        F = object_spectrum(obj, u + shift)
        lhs = np.sum(np.abs(F) ** 2) * (u[1] - u[0])
        assert lhs == pytest.approx(2 * np.pi * obj.transmission_area(), rel=1e-10)


def test_image_grid_covers_image(arm):
    obj = ObjectMask.double_slit()
    g = image_detector_grid(arm, obj, 128, 0.2)
    assert g.size == 128
    assert covers_image(g, arm, obj, 0.2)
    assert not covers_image(DetectorGrid(g.positions[:64], 2), arm, obj, 0.2)


def test_detector_grid_validation():
    with pytest.raises(ValueError):
        DetectorGrid(np.array([0.0, 1.0, 3.0]), 2)
    with pytest.raises(ValueError):
        DetectorGrid(np.array([]), 2)
