"""
Vector E and H fields, EME density and Poynting vector behind the grating.

Fields are built from the scalar solution through the E-/H-polarized
decomposition of z-independent fields,

    E_e = alpha psi_a z,        H_e = -(i / k) curl(E_e)
    H_h = beta e^{i phi} psi_b z,   E_h = (i / k) curl(H_h)

in units with eps0 = mu0 = c = 1 (so omega mu0 = k). Without polarizers
psi_a = psi_b = Psi; with orthogonal polarizers psi_a = psi_1 and
psi_b = psi_2. The curl of psi z is (d psi/dy) x - (d psi/dx) y.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .scalar_propagation import (
    PLANE_WAVE,
    GratingGeometry,
    IncidentProfile,
    ScalarSample,
    WaveParameters,
    check_domain,
    slit_wave,
    total_wave,
)

logger = logging.getLogger(__name__)

# Energy density of the unobstructed wave, eps0 (alpha^2 + beta^2) / 2
INCIDENT_DENSITY = 0.5

_EXACT_PHASES = {
    0.0: 1.0 + 0.0j,
    math.pi: -1.0 + 0.0j,
    0.5 * math.pi: 1j,
    -0.5 * math.pi: -1j,
}


def _wrap_phase(phi: float) -> float:
    """Map a phase into (-pi, pi]."""
    wrapped = math.remainder(phi, 2.0 * math.pi)
    return math.pi if wrapped == -math.pi else wrapped


@dataclass(frozen=True)
class PolarizationState:
    """
    Incident polarization (alpha, beta, phi): E_0 = -beta e^{i phi} x + alpha z.

    alpha and beta are renormalised so that alpha^2 + beta^2 = 1.
    """

    alpha: float
    beta: float
    phi: float = 0.0
    label: str = ""

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError(f"alpha and beta must be non-negative, got {self.alpha}, {self.beta}")
        scale = max(self.alpha, self.beta)
        if not (scale > 0 and math.isfinite(scale)):
            raise ValueError("polarization amplitudes cannot be normalised")
        # dividing by the larger amplitude first keeps subnormal inputs exact
        alpha, beta = self.alpha / scale, self.beta / scale
        norm = math.hypot(alpha, beta)
        if not math.isfinite(self.phi):
            raise ValueError(f"phase must be finite, got {self.phi}")
        object.__setattr__(self, "alpha", alpha / norm)
        object.__setattr__(self, "beta", beta / norm)
        object.__setattr__(self, "phi", _wrap_phase(self.phi))

    @classmethod
    def linear(cls, angle: float) -> "PolarizationState":
        """Linear polarization at ``angle`` radians: alpha = |cos|, beta = |sin|, phi in {0, pi}."""
        c, s = math.cos(angle), math.sin(angle)
        # angles that are multiples of pi/2 should give exact zeros
        if abs(c) < 1e-15:
            c = 0.0
        if abs(s) < 1e-15:
            s = 0.0
        phi = math.pi if c * s < 0 else 0.0
        return cls(abs(c), abs(s), phi, f"linear {math.degrees(angle):g} deg")

    @classmethod
    def circular(cls, handedness: str = "right") -> "PolarizationState":
        if handedness not in ("right", "left"):
            raise ValueError(f"handedness must be 'right' or 'left', got {handedness!r}")
        phi = 0.5 * math.pi if handedness == "right" else -0.5 * math.pi
        r = 1.0 / math.sqrt(2.0)
        return cls(r, r, phi, f"{handedness} circular")

    @classmethod
    def elliptic(cls, alpha: float, beta: float, phi: float) -> "PolarizationState":
        return cls(alpha, beta, phi, f"elliptic ({alpha:g}, {beta:g}, {phi:g})")

    @property
    def phase_factor(self) -> complex:
        """e^{i phi}, exact at multiples of pi/2."""
        return _EXACT_PHASES.get(self.phi, complex(math.cos(self.phi), math.sin(self.phi)))


class PolarizerConfig(Enum):
    """Polarizers behind the slits: none, or ideal orthogonal H/V polarizers."""

    NONE = "none"
    ORTHOGONAL = "orthogonal"


@dataclass(frozen=True)
class FieldSample:
    """Complex E and H (shape (3, ...)) at the given position."""

    E: np.ndarray
    H: np.ndarray
    position: tuple


@dataclass(frozen=True)
class EnergyObservables:
    U: np.ndarray
    S: np.ndarray


def _field_sources(x, y, wp, g, profile, pcfg):
    """Scalar waves feeding the E-polarized and H-polarized parts."""
    if pcfg is PolarizerConfig.NONE:
        psi = total_wave(x, y, wp, g, profile)
        return psi, psi
    zero = ScalarSample.zeros(np.shape(x))
    psi_e = slit_wave(1, x, y, wp, g, profile) if 1 in g.open_slits else zero
    psi_h = slit_wave(2, x, y, wp, g, profile) if 2 in g.open_slits else zero
    return psi_e, psi_h


def fields_from_scalars(psi_e: ScalarSample, psi_h: ScalarSample, k: float, pol: PolarizationState):
    """
    E and H arrays of shape (3, ...) from the E-polarized and H-polarized sources.

    The first H component follows the curl of E_e, i.e. it lies along x.
    """
    h_amp = pol.beta * pol.phase_factor
    e_amp = pol.alpha
    electric = np.stack(
        [
            (1j * h_amp / k) * psi_h.grad_y,
            -(1j * h_amp / k) * psi_h.grad_x,
            e_amp * psi_e.value,
        ]
    )
    magnetic = np.stack(
        [
            -(1j * e_amp / k) * psi_e.grad_y,
            (1j * e_amp / k) * psi_e.grad_x,
            h_amp * psi_h.value,
        ]
    )
    return electric, magnetic


def assemble_fields(
    x,
    y,
    wp: WaveParameters,
    g: GratingGeometry,
    pol: PolarizationState,
    pcfg: PolarizerConfig = PolarizerConfig.NONE,
    profile: IncidentProfile = PLANE_WAVE,
) -> FieldSample:
    """
    Total electromagnetic field at (x, y).

    Raises:
        DomainError: outside the evaluation domain
    """
    x, y = check_domain(x, y)
    psi_e, psi_h = _field_sources(x, y, wp, g, profile, pcfg)
    electric, magnetic = fields_from_scalars(psi_e, psi_h, wp.wavenumber, pol)
    return FieldSample(E=electric, H=magnetic, position=(x, y, np.zeros_like(x)))


def eme_density(f: FieldSample):
    """U = (|E|^2 + |H|^2) / 4."""
    return 0.25 * (np.sum(np.abs(f.E) ** 2, axis=0) + np.sum(np.abs(f.H) ** 2, axis=0))


def poynting(f: FieldSample):
    """S = Re(E x H*) / 2, shape (3, ...)."""
    return 0.5 * np.real(np.cross(f.E, np.conj(f.H), axis=0))


def energy_observables(f: FieldSample) -> EnergyObservables:
    return EnergyObservables(U=eme_density(f), S=poynting(f))


def _scalar_density(psi: ScalarSample, k: float):
    return (np.abs(psi.grad_x) ** 2 + np.abs(psi.grad_y) ** 2 + k**2 * np.abs(psi.value) ** 2) / (
        4.0 * k**2
    )


def shortcut_density(
    x,
    y,
    wp: WaveParameters,
    g: GratingGeometry,
    pol: PolarizationState,
    pcfg: PolarizerConfig = PolarizerConfig.NONE,
    profile: IncidentProfile = PLANE_WAVE,
):
    """
    EME density from the scalar formulas instead of the assembled fields.

    none:       (alpha^2 + beta^2) / 4k^2 [|dPsi/dx|^2 + |dPsi/dy|^2 + k^2 |Psi|^2]
    orthogonal: alpha^2 (same with psi_1) + beta^2 (same with psi_2)
    """
    x, y = check_domain(x, y)
    k = wp.wavenumber
    psi_e, psi_h = _field_sources(x, y, wp, g, profile, pcfg)
    if pcfg is PolarizerConfig.NONE:
        return (pol.alpha**2 + pol.beta**2) * _scalar_density(psi_e, k)
    return pol.alpha**2 * _scalar_density(psi_e, k) + pol.beta**2 * _scalar_density(psi_h, k)


def _validate_grid(xgrid):
    xgrid = np.asarray(xgrid, dtype=float)
    if xgrid.ndim != 1 or xgrid.size == 0:
        raise ValueError("x grid must be a non-empty 1-D sequence")
    if xgrid.size > 1 and not np.all(np.diff(xgrid) > 0):
        raise ValueError("x grid must be strictly increasing")
    return xgrid


def screen_profile(
    L: float,
    xgrid,
    wp: WaveParameters,
    g: GratingGeometry,
    pol: PolarizationState,
    pcfg: PolarizerConfig = PolarizerConfig.NONE,
    profile: IncidentProfile = PLANE_WAVE,
):
    """
    Normalised EME density U(x, L) / U_0 along the screen.

    Returns:
        (xgrid, U / U_0) as two 1-D arrays
    """
    xgrid = _validate_grid(xgrid)
    f = assemble_fields(xgrid, np.full_like(xgrid, L), wp, g, pol, pcfg, profile)
    density = eme_density(f) / INCIDENT_DENSITY
    logger.debug(
        f"Screen profile at L={L:g} m for {pol.label or pol} / {pcfg.value}: "
        f"{xgrid.size} points, peak {density.max():.6g}"
    )
    return xgrid, density


def natural_light_profile(
    L: float,
    xgrid,
    wp: WaveParameters,
    g: GratingGeometry,
    pcfg: PolarizerConfig = PolarizerConfig.NONE,
    profile: IncidentProfile = PLANE_WAVE,
):
    """Unpolarized light as the incoherent mean of two orthogonal linear states."""
    xgrid, horizontal = screen_profile(L, xgrid, wp, g, PolarizationState.linear(0.0), pcfg, profile)
    _, vertical = screen_profile(L, xgrid, wp, g, PolarizationState.linear(0.5 * math.pi), pcfg, profile)
    return xgrid, 0.5 * (horizontal + vertical)
