import math

import numpy as np
import pytest

from emeflow.em_assembly import PolarizationState, PolarizerConfig, screen_profile
from emeflow.flow_integrator import FlowSetup, LaunchPlan, launch_points
from emeflow.scalar_propagation import GratingGeometry, WaveParameters

WAVELENGTH = 532.5e-9
SEPARATION = 0.25e-3
SLIT_WIDTH = 0.1e-3
SCREEN = 0.558

# lambda L / d, lambda L / delta, lambda L / 2d
FRINGE_SPACING = WAVELENGTH * SCREEN / SEPARATION
ENVELOPE_ZERO = WAVELENGTH * SCREEN / SLIT_WIDTH
FIRST_DARK = 0.5 * FRINGE_SPACING


def polarization_catalogue():
    """Linear 0/45/90/135 deg, right/left circular, right/left elliptic."""
    return [
        PolarizationState.linear(0.0),
        PolarizationState.linear(math.radians(45)),
        PolarizationState.linear(math.radians(90)),
        PolarizationState.linear(math.radians(135)),
        PolarizationState.circular("right"),
        PolarizationState.circular("left"),
        PolarizationState.elliptic(0.8, 0.6, 0.5 * math.pi),
        PolarizationState.elliptic(0.8, 0.6, -0.5 * math.pi),
    ]


@pytest.fixture(scope="session")
def wp():
    return WaveParameters(WAVELENGTH, SCREEN)


@pytest.fixture(scope="session")
def grating():
    return GratingGeometry(SEPARATION, SLIT_WIDTH)


@pytest.fixture(scope="session")
def polarizations():
    return polarization_catalogue()


@pytest.fixture(scope="session")
def circular():
    return PolarizationState.circular("right")


@pytest.fixture(scope="session")
def xgrid():
    return np.linspace(-4e-3, 4e-3, 2001)


@pytest.fixture(scope="session")
def none_profile(wp, grating, circular, xgrid):
    return screen_profile(wp.screen_distance, xgrid, wp, grating, circular, PolarizerConfig.NONE)


@pytest.fixture(scope="session")
def orthogonal_profile(wp, grating, circular, xgrid):
    return screen_profile(wp.screen_distance, xgrid, wp, grating, circular, PolarizerConfig.ORTHOGONAL)


@pytest.fixture(scope="session")
def standard_launches(wp, grating):
    """15 uniformly spaced launches per slit at ten wavelengths."""
    return launch_points(LaunchPlan(15), grating, wp)


@pytest.fixture(scope="session")
def standard_setup(wp, grating, circular):
    return FlowSetup(wp=wp, g=grating, pol=circular)
