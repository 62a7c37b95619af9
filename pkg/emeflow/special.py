"""Fresnel integrals C(u) + iS(u) with the pi*t**2/2 normalisation."""

import logging

import numpy as np
from scipy import special

from .errors import DomainError

logger = logging.getLogger(__name__)

SERIES_RADIUS = 2.5
SERIES_TOLERANCE = 1e-14
SERIES_MAX_TERMS = 200


def fresnel_cs(u):
    """
    Evaluate F(u) = C(u) + i S(u), the integral of exp(i pi t^2 / 2) from 0 to u.

    Args:
        u: real scalar or array

    Returns:
        complex scalar or array with the shape of ``u``

    Raises:
        DomainError: if any argument is NaN
    """
    u = np.asarray(u, dtype=float)
    if np.isnan(u).any():
        raise DomainError("non-finite argument")
    # scipy returns (S, C)
    s, c = special.fresnel(u)
    return c + 1j * s


def fresnel_series(u, tolerance=SERIES_TOLERANCE):
    """
    Power series of F(u), summed term by term.

    The sum of (i pi / 2)^m u^(2m+1) / (m! (2m+1)) loses about
    log10(exp(pi u^2 / 2)) digits to cancellation, so it is only trusted for
    ``|u| <= SERIES_RADIUS``; it is kept as an independent reference for the
    library kernel.
    """
    u = np.asarray(u, dtype=float)
    if np.isnan(u).any():
        raise DomainError("non-finite argument")

    ratio = 0.5j * np.pi * u * u
    power = u.astype(complex)
    total = np.zeros_like(power)
    for m in range(SERIES_MAX_TERMS):
        term = power / (2 * m + 1)
        total = total + term
        if np.all(np.abs(term) <= tolerance * np.maximum(np.abs(total), 1e-300)):
            break
        power = power * ratio / (m + 1)
    else:
        logger.debug(f"Fresnel series hit {SERIES_MAX_TERMS} terms without converging")
    return total
