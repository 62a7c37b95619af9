"""
Scalar field behind the double-slit grating.

The diffracted wave of slit ``i`` is the paraxial (Fresnel) integral

    psi_i(x, y) = sqrt(k / 2 pi y) e^{-i pi/4} e^{iky}
                  * integral over slit i of Psi_0(x', 0) e^{ik (x - x')^2 / 2y} dx'

with the incident amplitude normalised to one on axis. For a plane incident
wave the integral has a closed form in Fresnel integrals; the Gaussian incident
profile leads to complex error functions. Every routine accepts scalars or numpy
arrays for ``x`` and ``y`` and broadcasts them.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate, special

from .constants import DEFAULT_BEAM_WAIST, MAX_ABS_X, MAX_SCREEN_DISTANCE, SPEED_OF_LIGHT
from .errors import DomainError
from .special import fresnel_cs

logger = logging.getLogger(__name__)

# e^{-i pi / 4} / sqrt(2)
_EDGE_PHASE = np.exp(-0.25j * np.pi) / math.sqrt(2.0)


@dataclass(frozen=True)
class WaveParameters:
    """Monochromatic illumination and screen placement (SI units)."""

    wavelength: float
    screen_distance: float

    def __post_init__(self):
        if not (self.wavelength > 0 and math.isfinite(self.wavelength)):
            raise ValueError(f"wavelength must be positive, got {self.wavelength}")
        if not (self.screen_distance > 0 and math.isfinite(self.screen_distance)):
            raise ValueError(f"screen distance must be positive, got {self.screen_distance}")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def angular_frequency(self) -> float:
        return SPEED_OF_LIGHT * self.wavenumber


@dataclass(frozen=True)
class GratingGeometry:
    """
    Two slits of width ``slit_width`` centred at -separation/2 and +separation/2.

    ``open_slits`` lists the slits that transmit; blocking one gives the
    single-slit pattern of the other.
    """

    separation: float
    slit_width: float
    open_slits: tuple[int, ...] = (1, 2)

    def __post_init__(self):
        if not 0 < self.slit_width < self.separation:
            raise ValueError(
                f"need 0 < slit width < separation, got width={self.slit_width}, "
                f"separation={self.separation}"
            )
        slits = tuple(sorted(set(self.open_slits)))
        if not slits or any(i not in (1, 2) for i in slits):
            raise ValueError(f"open slits must be a non-empty subset of (1, 2), got {self.open_slits}")
        object.__setattr__(self, "open_slits", slits)

    @property
    def slit_count(self) -> int:
        return 2

    def center(self, i: int) -> float:
        _check_slit_index(i)
        return -0.5 * self.separation if i == 1 else 0.5 * self.separation

    def interval(self, i: int) -> tuple[float, float]:
        c = self.center(i)
        return c - 0.5 * self.slit_width, c + 0.5 * self.slit_width

    def contains(self, x) -> np.ndarray:
        """True where ``x`` lies strictly inside an open slit."""
        x = np.asarray(x, dtype=float)
        inside = np.zeros(x.shape, dtype=bool)
        for i in self.open_slits:
            a, b = self.interval(i)
            inside |= (x > a) & (x < b)
        return inside

    def with_open_slits(self, *slits: int) -> "GratingGeometry":
        return GratingGeometry(self.separation, self.slit_width, tuple(slits))


class ProfileKind(Enum):
    PLANE = "plane"
    GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class IncidentProfile:
    """Transverse amplitude of the wave arriving at the grating."""

    kind: ProfileKind = ProfileKind.PLANE
    waist: float | None = None

    def __post_init__(self):
        if self.kind is ProfileKind.GAUSSIAN and not (self.waist is not None and self.waist > 0):
            raise ValueError(f"gaussian profile needs a positive waist, got {self.waist}")

    @classmethod
    def plane(cls) -> "IncidentProfile":
        return cls(ProfileKind.PLANE)

    @classmethod
    def gaussian(cls, waist: float = DEFAULT_BEAM_WAIST) -> "IncidentProfile":
        return cls(ProfileKind.GAUSSIAN, waist)

    def amplitude(self, x):
        """Real amplitude envelope; its square is the beam intensity e^{-2x^2/w^2}."""
        x = np.asarray(x, dtype=float)
        if self.kind is ProfileKind.PLANE:
            return np.ones_like(x)
        return np.exp(-((x / self.waist) ** 2))


PLANE_WAVE = IncidentProfile.plane()


@dataclass(frozen=True)
class ScalarSample:
    """Complex scalar field and its transverse/longitudinal derivatives."""

    value: np.ndarray
    grad_x: np.ndarray
    grad_y: np.ndarray

    def __add__(self, other: "ScalarSample") -> "ScalarSample":
        return ScalarSample(
            self.value + other.value,
            self.grad_x + other.grad_x,
            self.grad_y + other.grad_y,
        )

    @classmethod
    def zeros(cls, shape) -> "ScalarSample":
        zero = np.zeros(shape, dtype=complex)
        return cls(zero, zero.copy(), zero.copy())


def _check_slit_index(i):
    if i not in (1, 2):
        raise ValueError(f"slit index must be 1 or 2, got {i}")


def check_domain(x, y):
    """
    Validate evaluation points and return them as broadcast float arrays.

    Raises:
        DomainError: for NaN coordinates, y <= 0, y > 2 m or |x| > 25 mm
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    if np.isnan(x).any() or np.isnan(y).any():
        raise DomainError("non-finite argument")
    if (y <= 0).any():
        raise DomainError("evaluation in or before grating plane")
    if (y > MAX_SCREEN_DISTANCE).any():
        raise DomainError(f"y beyond the paraxial domain (max {MAX_SCREEN_DISTANCE} m)")
    if (np.abs(x) > MAX_ABS_X).any():
        raise DomainError(f"|x| beyond the paraxial domain (max {MAX_ABS_X} m)")
    return x, y


def incident_wave(x, y, profile: IncidentProfile, wp: WaveParameters):
    """
    Incident scalar wave Psi_0 = A(x) e^{iky}.

    A(x) is one for a plane wave and e^{-x^2/w^2} for the Gaussian beam.
    """
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    return profile.amplitude(x) * np.exp(1j * wp.wavenumber * y)


def _plane_envelope(i, x, y, k, g):
    """Carrier-free envelope phi = psi e^{-iky} of a plane-wave slit and its derivatives."""
    a, b = g.interval(i)
    scale = np.sqrt(k / (np.pi * y))
    u_plus = scale * (x - a)
    u_minus = scale * (x - b)
    edge_plus = np.exp(0.5j * np.pi * u_plus**2)
    edge_minus = np.exp(0.5j * np.pi * u_minus**2)

    envelope = _EDGE_PHASE * (fresnel_cs(u_plus) - fresnel_cs(u_minus))
    d_dx = _EDGE_PHASE * scale * (edge_plus - edge_minus)
    # du/dy = -u / 2y
    d_dy = -_EDGE_PHASE / (2.0 * y) * (u_plus * edge_plus - u_minus * edge_minus)
    return envelope, d_dx, d_dy


def _erf_difference(z_hi, z_lo):
    """erf(z_hi) - erf(z_lo), taken through erfc when both lie on one side."""
    right = (z_hi.real > 0) & (z_lo.real > 0)
    left = (z_hi.real < 0) & (z_lo.real < 0)
    return np.where(
        right,
        special.erfc(z_lo) - special.erfc(z_hi),
        np.where(left, special.erfc(-z_hi) - special.erfc(-z_lo), special.erf(z_hi) - special.erf(z_lo)),
    )


def _gaussian_envelope(i, x, y, k, g, profile):
    """
    Envelope of a Gaussian-illuminated slit in closed form.

    With tau = x - x' the integrand A(x - tau) e^{i kappa tau^2} is a complex
    Gaussian exp(-p tau^2 + q tau - x^2/w^2), p = 1/w^2 - i kappa, q = 2x/w^2,
    integrated over tau in [x - b, x - a]. Its zeroth moment is an error
    function difference; the first and second moments follow by parts.
    """
    a, b = g.interval(i)
    w2 = profile.waist**2
    kappa = k / (2.0 * y)
    p = 1.0 / w2 - 1j * kappa
    q = 2.0 * x / w2
    root = np.sqrt(p)
    shift = q / (2.0 * p)
    hi = x - a
    lo = x - b

    # q^2 / 4p - x^2 / w^2
    exponent = 1j * kappa * x**2 / (1.0 - 1j * kappa * w2)
    difference = _erf_difference(root * (hi - shift), root * (lo - shift))
    m0 = 0.5 * math.sqrt(math.pi) / root * np.exp(exponent) * difference
    edge_hi = profile.amplitude(a) * np.exp(1j * kappa * hi**2)
    edge_lo = profile.amplitude(b) * np.exp(1j * kappa * lo**2)
    m1 = (q * m0 - (edge_hi - edge_lo)) / (2.0 * p)
    m2 = (m0 + q * m1 - (hi * edge_hi - lo * edge_lo)) / (2.0 * p)

    prefactor = np.sqrt(k / (2.0 * np.pi * y)) * np.exp(-0.25j * np.pi)
    envelope = prefactor * m0
    d_dx = prefactor * 2j * kappa * m1
    d_dy = -envelope / (2.0 * y) - 1j * prefactor * kappa / y * m2
    return envelope, d_dx, d_dy


def _envelope(i, x, y, k, g, profile):
    if profile.kind is ProfileKind.PLANE:
        return _plane_envelope(i, x, y, k, g)
    return _gaussian_envelope(i, x, y, k, g, profile)


def _envelope_dy_fd(i, x, y, k, g, profile, h):
    """Central difference of the carrier-free envelope along y."""
    forward, _, _ = _envelope(i, x, y + h, k, g, profile)
    backward, _, _ = _envelope(i, x, y - h, k, g, profile)
    return (forward - backward) / (2.0 * h)


def slit_wave(
    i: int,
    x,
    y,
    wp: WaveParameters,
    g: GratingGeometry,
    profile: IncidentProfile = PLANE_WAVE,
    dy_step: float | None = None,
) -> ScalarSample:
    """
    Diffracted wave psi_i of one slit, with its gradient.

    Args:
        i: slit index, 1 (left, centre -d/2) or 2 (right, centre +d/2)
        x, y: evaluation coordinates in metres, y > 0
        wp: wave parameters
        g: grating geometry (the ``open_slits`` mask is ignored here)
        profile: incident amplitude profile
        dy_step: when given, d/dy is a central difference of the carrier-free
            envelope with this step instead of the analytic derivative

    Returns:
        ScalarSample with value, d/dx and d/dy

    Raises:
        DomainError: outside the evaluation domain
    """
    _check_slit_index(i)
    x, y = check_domain(x, y)
    k = wp.wavenumber
    envelope, d_dx, d_dy = _envelope(i, x, y, k, g, profile)
    if dy_step is not None:
        d_dy = _envelope_dy_fd(i, x, y, k, g, profile, dy_step)

    carrier = np.exp(1j * k * y)
    return ScalarSample(
        value=carrier * envelope,
        grad_x=carrier * d_dx,
        grad_y=carrier * (1j * k * envelope + d_dy),
    )


def total_wave(
    x,
    y,
    wp: WaveParameters,
    g: GratingGeometry,
    profile: IncidentProfile = PLANE_WAVE,
    dy_step: float | None = None,
) -> ScalarSample:
    """Psi = sum of psi_i over the open slits."""
    x, y = check_domain(x, y)
    total = ScalarSample.zeros(x.shape)
    for i in g.open_slits:
        total = total + slit_wave(i, x, y, wp, g, profile, dy_step)
    return total


def finite_difference_grad_y(
    i: int,
    x,
    y,
    wp: WaveParameters,
    g: GratingGeometry,
    profile: IncidentProfile = PLANE_WAVE,
    h: float | None = None,
):
    """d psi_i / dy with the envelope differentiated by a central difference (default h = lambda/100)."""
    step = wp.wavelength / 100.0 if h is None else h
    return slit_wave(i, x, y, wp, g, profile, dy_step=step).grad_y


def slit_wave_quadrature(
    i: int,
    x: float,
    y: float,
    wp: WaveParameters,
    g: GratingGeometry,
    profile: IncidentProfile = PLANE_WAVE,
    epsrel: float = 1e-12,
) -> complex:
    """
    psi_i at one point by adaptive quadrature of the diffraction integral.

    The slit is cut into panels of at most 2 pi phase change and each panel is
    integrated with ``scipy.integrate.quad`` (real and imaginary parts).
    """
    _check_slit_index(i)
    x, y = (float(v) for v in check_domain(x, y))
    k = wp.wavenumber
    kappa = k / (2.0 * y)
    a, b = g.interval(i)

    far = max((x - a) ** 2, (x - b) ** 2)
    near = 0.0 if a < x < b else min((x - a) ** 2, (x - b) ** 2)
    panels = max(1, int(math.ceil(kappa * (far - near) / (2.0 * np.pi))))
    logger.debug(f"Quadrature of slit {i} at ({x:g}, {y:g}): {panels} panels")
    edges = np.linspace(a, b, panels + 1)

    def real_part(t):
        return float(profile.amplitude(t)) * math.cos(kappa * (x - t) ** 2)

    def imag_part(t):
        return float(profile.amplitude(t)) * math.sin(kappa * (x - t) ** 2)

    total = 0j
    for lo, hi in zip(edges[:-1], edges[1:]):
        re, _ = integrate.quad(real_part, lo, hi, epsabs=1e-13 * (hi - lo), epsrel=epsrel, limit=200)
        im, _ = integrate.quad(imag_part, lo, hi, epsabs=1e-13 * (hi - lo), epsrel=epsrel, limit=200)
        total += re + 1j * im

    prefactor = math.sqrt(k / (2.0 * np.pi * y)) * np.exp(-0.25j * np.pi)
    return complex(np.exp(1j * k * y) * prefactor * total)
