import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from binomial_di.bounds import (
    bound_report,
    limit_tolerance,
    lower_terms,
    ordering_threshold,
    rate_lower,
    rate_upper,
    scaling_diagnostic,
    scaling_fit,
    upper_terms,
)
from binomial_di.exceptions import DomainError, PreconditionError
from binomial_di.packing import PackingConfig, construct_saturated


def test_lower_reference_value():
    # closed form at n = 1e6, b = 1e-3, A = a = 1, evaluated by hand:
    n, b = 1e6, 1e-3
    L = math.log2(n)
    ref = ((1 - b) / 4 * n * L - n * math.log2(math.e) - 2 * n - L - n / 2 * math.log2(math.e)) / (n * L)
    assert rate_lower(10**6, 1.0, 1.0, 1e-3) == pytest.approx(ref, rel=1e-14)
    assert abs(ref - 0.25) <= 5 / L


def test_upper_reference_value():
    n, b = 1e6, 1e-3
    L = math.log2(n)
    ref = ((1.5 + b) * n * L - n * (math.log2(math.sqrt(math.pi * math.e)) + 1.099)) / (n * L)
    assert rate_upper(10**6, 1.0, 1e-3) == pytest.approx(ref, rel=1e-14)
    assert abs(ref - 1.5) <= 5 / L


def test_lower_domain():
    with pytest.raises(DomainError):
        rate_lower(3, 1.0, 1.0, 0.1)
    with pytest.raises(DomainError):
        rate_upper(1, 1.0, 0.1)


def test_leading_coefficient_vanishes_as_b_to_one():
    n = 10**12
    lead = dict(lower_terms(n, 1.0, 1.0, 1 - 1e-9))["leading (1-b)/4 n log n"]
    assert lead / (n * math.log2(n)) < 1e-9


def test_upper_leading_coefficient():
    n, b = 10**5, 0.3
    lead = dict(upper_terms(n, 1.0, b))["leading (3/2+b) n log n"]
    assert lead / (n * math.log2(n)) == pytest.approx(1.5 + b, rel=1e-15)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(4, 10**9), A=st.floats(0.1, 10), a=st.floats(0.01, 10), b=st.floats(0.001, 0.9))
def test_monotone_in_A(n, A, a, b):
    assert rate_lower(n, 2 * A, a, b) > rate_lower(n, A, a, b)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 10**9), P=st.floats(0.1, 10), b=st.floats(0.001, 0.9))
def test_larger_P_max_lowers_upper(n, P, b):
    assert rate_upper(n, 2 * P, b) < rate_upper(n, P, b)


def test_rederived_chains():
    n = 1024
    lt = dict(lower_terms(n, 1.0, 1.0, 0.1))
    assert lt["rederived minus closed form"] == pytest.approx(n * math.log2(math.e) + 2, rel=1e-12)
    ut = dict(upper_terms(n, 4.0, 0.1))
    assert ut["rederived minus closed form"] == pytest.approx(n * 2.0, rel=1e-12)


def test_limits_approach():
    b = 1e-3
    for f, lim in ((lambda n: rate_lower(n, 1.0, 1.0, b), 0.25), (lambda n: rate_upper(n, 1.0, b), 1.5)):
        gaps = [abs(f(10**k) - lim) for k in range(3, 9)]
        assert all(x > y for x, y in zip(gaps, gaps[1:]))


def test_ordering_and_no_overflow():
    for k in range(3, 10):
        assert rate_lower(10**k, 1.0, 1.0, 1e-3) < rate_upper(10**k, 1.0, 1e-3)
    assert ordering_threshold(1.0, 1.0, 1e-3, 1.0) == 4
    rep = bound_report(10**9, 1.0, 1.0, 1e-3, 1.0)
    assert math.isfinite(rep.log2_M_lower) and math.isfinite(rep.log2_M_upper)
    assert rep.rate_lower == pytest.approx(rep.log2_M_lower / (1e9 * math.log2(1e9)))


def test_tolerance():
    assert limit_tolerance(10**6) == pytest.approx(5 / math.log2(10**6))


class TestScaling:
    def test_synthetic(self):
        ns = [6, 8, 10, 12]
        fit = scaling_fit(ns, [0.25 * n * math.log2(n) for n in ns], b=0.001)
        assert fit.slope == pytest.approx(0.25, abs=1e-6)

    def test_constant(self):
        fit = scaling_fit([6, 8, 10], [3.0, 3.0, 3.0], b=0.1)
        assert fit.slope == 0.0

    def test_too_few(self):
        with pytest.raises(PreconditionError):
            scaling_fit([6, 6, 8], [1, 2, 3], b=0.1)

    def test_constructed(self):
        cbs = [construct_saturated(PackingConfig(n=n, a=0.02, b=0.25, A=1.0, seed=1, c_min=0.0,
                                                 repair_trials=2000))
               for n in (2, 3, 4, 5)]
        fit = scaling_diagnostic(cbs)
        assert fit.slope > 0 and fit.ci_low <= fit.slope <= fit.ci_high
