import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from emeflow.errors import DomainError
from emeflow.special import SERIES_RADIUS, fresnel_cs, fresnel_series


def test_origin_is_zero():
    assert fresnel_cs(0.0) == 0


def test_large_argument_tends_to_half():
    assert abs(fresnel_cs(50.0) - (0.5 + 0.5j)) < 1e-2


def test_matches_series_inside_radius():
    u = np.linspace(-SERIES_RADIUS, SERIES_RADIUS, 101)
    assert np.max(np.abs(fresnel_cs(u) - fresnel_series(u))) < 1e-10


def test_matches_mpmath():
    mpmath.mp.dps = 30
    u = np.linspace(-50.0, 50.0, 401)
    reference = np.array([complex(mpmath.fresnelc(v), mpmath.fresnels(v)) for v in u])
    assert np.max(np.abs(fresnel_cs(u) - reference)) < 1e-10


def test_shape_is_preserved():
    u = np.zeros((3, 4))
    assert fresnel_cs(u).shape == (3, 4)


@pytest.mark.parametrize("func", [fresnel_cs, fresnel_series])
def test_nan_raises(func):
    with pytest.raises(DomainError, match="non-finite argument"):
        func(np.array([0.0, np.nan]))


@given(st.floats(min_value=-100.0, max_value=100.0, allow_nan=False))
def test_odd_symmetry(u):
    assert fresnel_cs(-u) == -fresnel_cs(u)
