import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emeflow.errors import DomainError
from emeflow.scalar_propagation import (
    GratingGeometry,
    IncidentProfile,
    WaveParameters,
    check_domain,
    finite_difference_grad_y,
    incident_wave,
    slit_wave,
    slit_wave_quadrature,
    total_wave,
)

from .conftest import FIRST_DARK, FRINGE_SPACING, SCREEN, WAVELENGTH


def test_wave_parameters(wp):
    assert wp.wavenumber * wp.wavelength == pytest.approx(2 * math.pi, rel=1e-15)
    assert wp.angular_frequency == pytest.approx(299_792_458.0 * wp.wavenumber)


@pytest.mark.parametrize("wavelength, screen", [(0.0, 0.5), (-1e-7, 0.5), (5e-7, 0.0), (math.nan, 0.5)])
def test_wave_parameters_rejects(wavelength, screen):
    with pytest.raises(ValueError):
        WaveParameters(wavelength, screen)


@pytest.mark.parametrize(
    "separation, width, slits",
    [(0.1e-3, 0.1e-3, (1, 2)), (0.1e-3, 0.2e-3, (1, 2)), (0.25e-3, 0.0, (1, 2)), (0.25e-3, 0.1e-3, ()), (0.25e-3, 0.1e-3, (3,))],
)
def test_grating_rejects(separation, width, slits):
    with pytest.raises(ValueError):
        GratingGeometry(separation, width, slits)


def test_grating_intervals(grating):
    assert grating.interval(1) == pytest.approx((-0.175e-3, -0.075e-3))
    assert grating.interval(2) == pytest.approx((0.075e-3, 0.175e-3))
    assert grating.contains([-0.1e-3, 0.0, 0.1e-3]).tolist() == [True, False, True]
    assert grating.with_open_slits(2).contains([-0.1e-3, 0.1e-3]).tolist() == [False, True]
    with pytest.raises(ValueError):
        grating.center(3)


def test_incident_wave(wp):
    assert incident_wave(0.0, 0.0, IncidentProfile.plane(), wp) == 1
    gaussian = IncidentProfile.gaussian(1.4e-3)
    assert abs(incident_wave(0.0, 0.0, gaussian, wp)) == pytest.approx(1.0)
    assert abs(incident_wave(1.4e-3, 0.0, gaussian, wp)) == pytest.approx(math.exp(-1.0))


def test_gaussian_needs_waist():
    with pytest.raises(ValueError):
        IncidentProfile.gaussian(0.0)


@pytest.mark.parametrize(
    "x, y, message",
    [
        (0.0, 0.0, "grating plane"),
        (0.0, -1e-3, "grating plane"),
        (0.0, 2.5, "paraxial domain"),
        (30e-3, 0.5, "paraxial domain"),
        (math.nan, 0.5, "non-finite"),
    ],
)
def test_domain_errors(wp, grating, x, y, message):
    with pytest.raises(DomainError, match=message):
        slit_wave(1, x, y, wp, grating)


def test_domain_error_is_value_error():
    with pytest.raises(ValueError):
        check_domain(0.0, 0.0)


def test_bad_slit_index(wp, grating):
    with pytest.raises(ValueError):
        slit_wave(0, 0.0, 0.1, wp, grating)


def test_mirror_symmetry(wp, grating, xgrid):
    left = slit_wave(1, xgrid, SCREEN, wp, grating)
    right = slit_wave(2, -xgrid, SCREEN, wp, grating)
    np.testing.assert_array_equal(left.value, right.value)
    np.testing.assert_array_equal(left.grad_x, -right.grad_x)


@settings(max_examples=50, deadline=None)
@given(
    x=st.floats(min_value=-20e-3, max_value=20e-3),
    y=st.floats(min_value=1e-6, max_value=2.0),
)
def test_mirror_symmetry_property(wp, grating, x, y):
    assert slit_wave(1, x, y, wp, grating).value == slit_wave(2, -x, y, wp, grating).value


def test_axis_value_is_twice_single_slit(wp, grating):
    y = np.linspace(1e-3, 1.0, 50)
    total = total_wave(0.0, y, wp, grating).value
    single = slit_wave(1, 0.0, y, wp, grating).value
    np.testing.assert_allclose(total, 2 * single, rtol=1e-14, atol=0)


def test_closed_slit_drops_out(wp, grating, xgrid):
    only_right = total_wave(xgrid, SCREEN, wp, grating.with_open_slits(2)).value
    np.testing.assert_array_equal(only_right, slit_wave(2, xgrid, SCREEN, wp, grating).value)


def test_screen_center_against_quadrature(wp, grating):
    closed = complex(slit_wave(1, 0.0, SCREEN, wp, grating).value)
    reference = slit_wave_quadrature(1, 0.0, SCREEN, wp, grating)
    assert abs(closed - reference) < 1e-8 * abs(reference)


def _random_points(n, seed=7):
    rng = np.random.default_rng(seed)
    return rng.uniform(-5e-3, 5e-3, n), rng.uniform(10e-3, 1.0, n)


def _check_against_quadrature(wp, grating, xs, ys):
    for x, y in zip(xs, ys):
        for i in (1, 2):
            closed = complex(slit_wave(i, x, y, wp, grating).value)
            reference = slit_wave_quadrature(i, x, y, wp, grating)
            assert abs(closed - reference) < 1e-8 * abs(reference), (i, x, y)


def test_closed_form_against_quadrature(wp, grating):
    _check_against_quadrature(wp, grating, *_random_points(20))


@pytest.mark.slow
def test_closed_form_against_quadrature_full(wp, grating):
    _check_against_quadrature(wp, grating, *_random_points(200, seed=11))


@pytest.mark.parametrize("x, y", [(0.0, SCREEN), (-1.2e-3, SCREEN), (0.4e-3, 0.05), (2e-3, 1.5)])
def test_gaussian_profile_against_quadrature(wp, grating, x, y):
    profile = IncidentProfile.gaussian(0.2e-3)
    for i in (1, 2):
        closed = complex(slit_wave(i, x, y, wp, grating, profile).value)
        reference = slit_wave_quadrature(i, x, y, wp, grating, profile)
        assert abs(closed - reference) < 1e-9 * abs(reference)


@pytest.mark.parametrize("i, x, y", [(1, -0.1e-3, 50e-6), (2, 0.16e-3, 20e-6), (2, 0.12e-3, 10 * WAVELENGTH)])
def test_gaussian_profile_near_grating(wp, grating, i, x, y):
    profile = IncidentProfile.gaussian(0.2e-3)
    closed = complex(slit_wave(i, x, y, wp, grating, profile).value)
    reference = slit_wave_quadrature(i, x, y, wp, grating, profile)
    assert abs(closed - reference) < 1e-9 * abs(reference)


def test_wide_gaussian_approaches_plane_wave(wp, grating, xgrid):
    wide = total_wave(xgrid, SCREEN, wp, grating, IncidentProfile.gaussian(1.0)).value
    plane = total_wave(xgrid, SCREEN, wp, grating).value
    assert np.max(np.abs(wide - plane)) < 1e-6 * np.max(np.abs(plane))


def test_paraxial_relations_on_screen(wp, grating):
    x = np.linspace(-4e-3, 4e-3, 101)
    psi = total_wave(x, SCREEN, wp, grating)
    k = wp.wavenumber
    lhs = np.abs(psi.grad_y - 1j * k * psi.value) / (k * np.abs(psi.value))
    assert np.median(lhs) < 1e-2
    assert np.median(np.abs(psi.grad_x) / np.abs(psi.grad_y)) < 0.05


@pytest.mark.parametrize("y, half_width", [(SCREEN, 4e-3), (10e-3, 0.5e-3)])
def test_grad_x_against_finite_difference(wp, grating, y, half_width):
    x = np.linspace(-half_width, half_width, 101)
    h = WAVELENGTH / 1000
    for i in (1, 2):
        analytic = slit_wave(i, x, y, wp, grating).grad_x
        numeric = (slit_wave(i, x + h, y, wp, grating).value - slit_wave(i, x - h, y, wp, grating).value) / (2 * h)
        np.testing.assert_allclose(numeric, analytic, rtol=1e-6, atol=1e-6 * np.max(np.abs(analytic)))


@pytest.mark.parametrize("y", [SCREEN, 10e-3])
def test_grad_y_against_finite_difference(wp, grating, y):
    x = np.linspace(-4e-3, 4e-3, 101)
    for i in (1, 2):
        analytic = slit_wave(i, x, y, wp, grating).grad_y
        numeric = finite_difference_grad_y(i, x, y, wp, grating)
        np.testing.assert_allclose(numeric, analytic, rtol=1e-6, atol=1e-6 * np.max(np.abs(analytic)))


def test_gaussian_grad_y_against_finite_difference(wp, grating):
    x = np.linspace(-2e-3, 2e-3, 21)
    profile = IncidentProfile.gaussian(1.4e-3)
    analytic = slit_wave(1, x, SCREEN, wp, grating, profile).grad_y
    numeric = finite_difference_grad_y(1, x, SCREEN, wp, grating, profile)
    np.testing.assert_allclose(numeric, analytic, rtol=1e-6, atol=1e-6 * np.max(np.abs(analytic)))


@pytest.mark.parametrize("y", [SCREEN, 1e-3])
def test_gaussian_grad_x_against_finite_difference(wp, grating, y):
    x = np.linspace(-0.5e-3, 0.5e-3, 41)
    profile = IncidentProfile.gaussian(0.2e-3)
    h = WAVELENGTH / 1000
    for i in (1, 2):
        analytic = slit_wave(i, x, y, wp, grating, profile).grad_x
        forward = slit_wave(i, x + h, y, wp, grating, profile).value
        backward = slit_wave(i, x - h, y, wp, grating, profile).value
        numeric = (forward - backward) / (2 * h)
        np.testing.assert_allclose(numeric, analytic, rtol=1e-6, atol=1e-6 * np.max(np.abs(analytic)))


def test_gaussian_profile_batch_matches_single_points(wp, grating):
    profile = IncidentProfile.gaussian(1.4e-3)
    x = np.array([-0.15e-3, 0.0, 0.1e-3])
    y = np.array([10 * WAVELENGTH, 1e-3, SCREEN])
    batch = total_wave(x, y, wp, grating, profile).value
    single = [complex(total_wave(xi, yi, wp, grating, profile).value) for xi, yi in zip(x, y)]
    np.testing.assert_array_equal(batch, single)


def test_fringe_positions_on_screen(wp, grating):
    center = abs(complex(total_wave(0.0, SCREEN, wp, grating).value)) ** 2
    quarter = 0.25 * FRINGE_SPACING
    x = np.array([FRINGE_SPACING - quarter, FRINGE_SPACING, FRINGE_SPACING + quarter])
    intensity = np.abs(total_wave(x, SCREEN, wp, grating).value) ** 2
    assert intensity[1] > intensity[0] and intensity[1] > intensity[2]
    dark = abs(complex(total_wave(FIRST_DARK, SCREEN, wp, grating).value)) ** 2
    assert dark < 1e-3 * center
