import math

import pytest

from src.config import get_settings
from src.models.law import (
    ConstB, InnovationLaw, LogNormalA, TwoPointA, UniformA, UniformB,
)

SQRT2 = math.sqrt(2.0)


@pytest.fixture(autouse=True)
def _fresh_settings():
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def lognormal_a():
    return LogNormalA(mu=-1.0, sigma=SQRT2)


@pytest.fixture
def lognormal_law(lognormal_a):
    """log A ~ N(−1, 2)，B ≡ 1；Λ(s) = −s + s²"""
    return InnovationLaw(a=lognormal_a, b=ConstB(value=1.0))


@pytest.fixture
def thm2_law():
    """log A ~ N(−2, 1)，B ~ U(1, 2)"""
    return InnovationLaw(a=LogNormalA(mu=-2.0, sigma=1.0), b=UniformB(lo=1.0, hi=2.0))


@pytest.fixture
def twopoint_a():
    return TwoPointA(a1=0.5, p1=0.75, a2=2.0)


@pytest.fixture
def twopoint_law(twopoint_a):
    return InnovationLaw(a=twopoint_a, b=ConstB(value=1.0))


@pytest.fixture
def uniform_a():
    return UniformA(lo=0.2, hi=1.4)


ALL_A_LAWS = [
    LogNormalA(mu=-1.0, sigma=SQRT2),
    LogNormalA(mu=-2.0, sigma=1.0),
    UniformA(lo=0.2, hi=1.4),
    TwoPointA(a1=0.5, p1=0.75, a2=2.0),
]
