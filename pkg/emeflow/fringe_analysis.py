"""
Fringe geometry: analytic predictions from the transverse-momentum amplitude
and an analyser for sampled screen profiles.
"""

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate, optimize
from scipy.signal import get_window

from .constants import COINCIDENCE_RTOL, MIN_FRINGES_COVERED, MIN_POINTS_PER_FRINGE, VISIBILITY_HALF_WINDOW
from .errors import ProfileError
from .scalar_propagation import PLANE_WAVE, GratingGeometry, IncidentProfile, WaveParameters

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MomentumAmplitude:
    kx: float
    c_value: complex


@dataclass
class FringeReport:
    """
    Bright/dark fringe centres and contrast of a screen pattern (lengths in m).

    ``order_heights`` are the pattern values at the nominal bright positions
    n * spacing, n = 0, 1, 2, ..., relative to the central value.
    """

    bright_centers: list[float]
    dark_centers: list[float]
    envelope_zero: float | None
    visibility: float
    coincidence_order: int | None = None
    spacing: float | None = None
    center: float = 0.0
    order_heights: list[float] = field(default_factory=list)
    spectral_component: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def momentum_amplitude(kx, g: GratingGeometry):
    """
    c(kx) = (2 / sqrt(pi delta)) sin(kx delta / 2) / kx * cos(kx d / 2).

    Evaluates sqrt(delta / pi) at kx = 0.
    """
    kx = np.asarray(kx, dtype=float)
    delta = g.slit_width
    # sin(kx delta/2) / kx = (delta/2) sinc(kx delta / 2 pi)
    value = math.sqrt(delta / math.pi) * np.sinc(kx * delta / (2.0 * math.pi)) * np.cos(0.5 * kx * g.separation)
    return value.astype(complex)


def momentum_sample(kx: float, g: GratingGeometry) -> MomentumAmplitude:
    return MomentumAmplitude(kx=float(kx), c_value=complex(momentum_amplitude(kx, g)))


def fringe_spacing(g: GratingGeometry, wp: WaveParameters) -> float:
    return wp.wavelength * wp.screen_distance / g.separation


def coincidence_condition(g: GratingGeometry) -> int | None:
    """n such that the envelope zero falls on a dark fringe, 2d/delta = 2n + 1, else None."""
    ratio = 2.0 * g.separation / g.slit_width
    n = round((ratio - 1.0) / 2.0)
    if n >= 0 and abs(2 * n + 1 - ratio) <= COINCIDENCE_RTOL * ratio:
        return int(n)
    return None


def fringe_centers(g: GratingGeometry, wp: WaveParameters, n_max: int) -> FringeReport:
    """
    Paraxial fringe positions: bright at n lambda L / d, dark halfway between,
    envelope zero at lambda L / delta.
    """
    if n_max < 1:
        raise ValueError(f"n_max must be at least 1, got {n_max}")
    spacing = fringe_spacing(g, wp)
    orders = np.arange(-n_max, n_max + 1)
    bright = orders * spacing
    dark = (orders[:-1] + 0.5) * spacing
    envelope = wp.wavelength * wp.screen_distance / g.slit_width
    heights = [float(np.sinc(n * g.slit_width / g.separation) ** 2) for n in range(n_max + 1)]
    return FringeReport(
        bright_centers=bright.tolist(),
        dark_centers=dark.tolist(),
        envelope_zero=envelope,
        visibility=1.0,
        coincidence_order=coincidence_condition(g),
        spacing=spacing,
        center=0.0,
        order_heights=heights,
    )


def _vertex(x, u, i):
    """Vertex of the parabola through samples i-1, i, i+1."""
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    u0, u1, u2 = u[i - 1], u[i], u[i + 1]
    num = (x1 - x0) ** 2 * (u1 - u2) - (x1 - x2) ** 2 * (u1 - u0)
    den = (x1 - x0) * (u1 - u2) - (x1 - x2) * (u1 - u0)
    if den == 0:
        return x1, u1
    xv = x1 - 0.5 * num / den
    if not x0 <= xv <= x2:
        return x1, u1
    # Lagrange form of the same parabola
    uv = (
        u0 * (xv - x1) * (xv - x2) / ((x0 - x1) * (x0 - x2))
        + u1 * (xv - x0) * (xv - x2) / ((x1 - x0) * (x1 - x2))
        + u2 * (xv - x0) * (xv - x1) / ((x2 - x0) * (x2 - x1))
    )
    return xv, uv


def find_extrema(x, u):
    """
    Local maxima and minima by three-point comparison with quadratic refinement.

    On a plateau the leftmost sample wins.

    Returns:
        (maxima, minima), each a list of (x, value) sorted by x
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    left, mid, right = u[:-2], u[1:-1], u[2:]
    max_idx = np.flatnonzero((mid > left) & (mid >= right)) + 1
    min_idx = np.flatnonzero((mid < left) & (mid <= right)) + 1
    maxima = [_vertex(x, u, i) for i in max_idx]
    minima = [_vertex(x, u, i) for i in min_idx]
    return maxima, minima


def fringe_visibility(x, u, spacing: float, center: float = 0.0) -> float:
    """
    Largest contrast (U_max - U_min) / (U_max + U_min) between neighbouring
    maxima and minima within 1.5 fringe spacings of ``center``; 0 without a
    minimum there.
    """
    maxima, minima = find_extrema(x, u)
    half = VISIBILITY_HALF_WINDOW * spacing
    extrema = sorted(
        [(xe, ue, True) for xe, ue in maxima if abs(xe - center) <= half]
        + [(xe, ue, False) for xe, ue in minima if abs(xe - center) <= half]
    )
    if not any(not is_max for _, _, is_max in extrema):
        return 0.0
    best = 0.0
    for (_, ua, a_max), (_, ub, b_max) in zip(extrema, extrema[1:]):
        if a_max == b_max:
            continue
        hi, lo = (ua, ub) if a_max else (ub, ua)
        if hi + lo > 0:
            best = max(best, (hi - lo) / (hi + lo))
    return float(min(max(best, 0.0), 1.0))


def spectral_component(x, u, frequency: float, window="gaussian") -> float:
    """
    |U(frequency)| / |U(0)| of a uniformly sampled profile.

    The profile is tapered by ``window`` before the discrete Fourier sum is
    evaluated at the requested spatial frequency (cycles per metre). The
    default is a Gaussian with a standard deviation of one eighth of the
    record, whose spectral leakage is negligible a few tenths of a cycle
    per millimetre away from the pattern's own band.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    n = x.size
    if n < 2 or u.shape != x.shape:
        raise ProfileError("profile needs at least two samples with matching x")
    steps = np.diff(x)
    if not np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
        raise ProfileError("spectral component needs uniform sampling")
    if window == "gaussian":
        window = ("gaussian", n / 8.0)
    taper = get_window(window, n, fftbins=False)
    weighted = taper * u
    zero = weighted.sum()
    if zero == 0:
        raise ProfileError("degenerate profile")
    component = np.sum(weighted * np.exp(-2j * np.pi * frequency * (x - x[0])))
    return float(abs(component) / abs(zero))


def _envelope_zero_from_height(ratio: float, spacing: float) -> float | None:
    """Solve sinc^2(t) = ratio on (0, pi) for the order-one height; zero at pi spacing / t."""
    if not 0 < ratio < 1:
        return None

    def residual(t):
        return (math.sin(t) / t) ** 2 - ratio

    t = optimize.brentq(residual, 1e-9, math.pi - 1e-12, xtol=1e-14)
    return math.pi * spacing / t


def analyze_profile(x, u, expected_spacing: float | None = None) -> FringeReport:
    """
    Measure fringe centres, spacing, order heights and visibility of a profile.

    Args:
        x: strictly increasing sample positions (m)
        u: profile values (non-negative)
        expected_spacing: fringe spacing used for the resolution check,
            the visibility window and the order heights; estimated from
            the dark fringes when omitted

    Returns:
        FringeReport with the measured quantities

    Raises:
        ProfileError: "insufficient resolution" when the grid is too coarse or
            too narrow for the spacing, "degenerate profile" for an all-zero one
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.ndim != 1 or x.shape != u.shape or x.size < 3:
        raise ProfileError("insufficient resolution: need at least three samples")
    if not np.all(np.diff(x) > 0):
        raise ValueError("profile x must be strictly increasing")
    if not np.all(np.isfinite(u)) or (u < 0).any():
        raise ProfileError("profile values must be finite and non-negative")
    if not u.max() > 0:
        raise ProfileError("degenerate profile")

    maxima, minima = find_extrema(x, u)
    peak = int(np.argmax(u))
    center = x[peak]
    for xm, _ in maxima:
        if abs(xm - x[peak]) <= (x[min(peak + 1, x.size - 1)] - x[max(peak - 1, 0)]):
            center = xm
            break

    spacing = expected_spacing
    if spacing is None and len(minima) >= 2:
        spacing = float(np.median(np.diff([xm for xm, _ in minima])))
    if spacing is not None:
        dx = float(np.median(np.diff(x)))
        if spacing / dx < MIN_POINTS_PER_FRINGE or x[-1] - x[0] < 2 * MIN_FRINGES_COVERED * spacing * (1 - 1e-9):
            raise ProfileError(
                f"insufficient resolution: spacing {spacing:.6g} m, step {dx:.3g} m, "
                f"span {x[-1] - x[0]:.6g} m"
            )

    central = float(np.interp(center, x, u))
    heights = []
    envelope_zero = None
    visibility = 0.0
    spectrum = None
    if spacing is not None:
        n = 0
        while center + n * spacing <= x[-1] and center - n * spacing >= x[0]:
            sides = np.interp([center - n * spacing, center + n * spacing], x, u)
            heights.append(float(sides.mean() / central))
            n += 1
        if len(heights) > 1:
            envelope_zero = _envelope_zero_from_height(heights[1], spacing)
        visibility = fringe_visibility(x, u, spacing, center)
        steps = np.diff(x)
        if np.allclose(steps, steps[0], rtol=1e-6, atol=0.0):
            spectrum = spectral_component(x, u, 1.0 / spacing)
    if envelope_zero is None:
        beyond = [xm for xm, _ in minima if xm > center]
        envelope_zero = beyond[0] - center if beyond else None

    report = FringeReport(
        bright_centers=[float(xm) for xm, _ in maxima],
        dark_centers=[float(xm) for xm, _ in minima],
        envelope_zero=envelope_zero,
        visibility=visibility,
        spacing=spacing,
        center=float(center),
        order_heights=heights,
        spectral_component=spectrum,
    )
    logger.debug(
        f"Profile analysis: {len(maxima)} bright, {len(minima)} dark, "
        f"spacing {spacing}, visibility {visibility:.4g}"
    )
    return report


def momentum_profile(xgrid, L: float, wp: WaveParameters, g: GratingGeometry):
    """
    |c(kx)|^2 mapped onto the screen with x = kx L / k, normalised to its peak.

    Returns:
        (xgrid, profile)
    """
    xgrid = np.asarray(xgrid, dtype=float)
    kx = wp.wavenumber * xgrid / L
    power = np.abs(momentum_amplitude(kx, g)) ** 2
    return xgrid, power / power.max()


def parseval_check(
    g: GratingGeometry,
    kx_max: float | None = None,
    n: int = 400_001,
    profile: IncidentProfile = PLANE_WAVE,
):
    """
    Compare the momentum-space norm with the aperture norm.

    Returns:
        (integral of |c|^2 over [-kx_max, kx_max], integral of |Psi(x, 0+)|^2
        over the open slits)
    """
    if kx_max is None:
        kx_max = 2000.0 / g.slit_width
    kx = np.linspace(-kx_max, kx_max, n)
    momentum = integrate.simpson(np.abs(momentum_amplitude(kx, g)) ** 2, x=kx)
    aperture = 0.0
    for i in g.open_slits:
        a, b = g.interval(i)
        value, _ = integrate.quad(lambda t: float(profile.amplitude(t)) ** 2, a, b, epsabs=0.0, epsrel=1e-12)
        aperture += value
    logger.debug(f"Parseval check: momentum norm {momentum:.10g}, aperture norm {aperture:.10g}")
    return float(momentum), float(aperture)
