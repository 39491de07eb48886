"""Shared pytest fixtures for the Hartogs engine suites"""

from fractions import Fraction

import pytest
from hypothesis import strategies as st

from exponent_core import Exponent, exponent_vec
from hartogs_core import HartogsDomain


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale sweeps (still part of the default run)")


def domain(p, q) -> HartogsDomain:
    return HartogsDomain(exponent_vec(p), exponent_vec(q))


@pytest.fixture
def f23():
    return domain(["2"], ["3"])


@pytest.fixture
def f25():
    return domain(["2"], ["5"])


@pytest.fixture
def f11():
    return domain(["1"], ["1"])


@pytest.fixture
def nm_pair():
    return domain(["2", "4"], ["3", "3"]), domain(["1", "2"], ["3", "1"])


exponents = st.builds(
    lambda num, den, lam: Exponent(Fraction(num, den), lam),
    st.integers(min_value=1, max_value=6),
    st.integers(min_value=1, max_value=6),
    st.sampled_from([0, 0, 0, 1]),
)

rational_exponents = st.builds(
    lambda num, den: Exponent(Fraction(num, den)),
    st.integers(min_value=1, max_value=4),
    st.integers(min_value=1, max_value=4),
)

# λ-graded entries whose ratio quotients keep numerator and denominator within 16
graded_exponents = st.builds(
    lambda value, lam: Exponent(value, lam),
    st.sampled_from([Fraction(1), Fraction(2), Fraction(1, 2), Fraction(3, 2)]),
    st.sampled_from([0, 1]),
)
