"""Finite-n rate bounds for DI over the Binomial channel.

Rates are normalised by ``n log2 n``: a codebook of size ``M`` has rate
``log2(M) / (n log2 n)``.  All logarithms are base 2.  The ``o(n)`` residuals
of the asymptotic chains are set to zero and listed in the term breakdown.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .exceptions import DomainError, PreconditionError

LOG2E = math.log2(math.e)
LOWER_LIMIT = 0.25
UPPER_LIMIT = 1.5
# 0.5 from the (n/2) log(n/2) term plus the 0.599 n density exponent
UPPER_CONSTANT = 1.099


def _nlogn(n: float) -> float:
    return n * math.log2(n)


def lower_terms(n: int, A: float, a: float, b: float) -> list[tuple[str, float]]:
    """Terms of the achievability count ``log2 M >= ...``.

    The closed-form chain and an independent re-derivation are both listed; they
    share the ``n log n`` coefficient and differ by ``-n log2 e + 2``.
    """
    if n < 4:
        raise DomainError("the lower bound needs n >= 4")
    if A <= 0 or a <= 0:
        raise DomainError("A and a must be positive")
    lead = 0.25 * (1.0 - b) * _nlogn(n)
    lin = n * math.log2(A / (math.e * math.sqrt(a)))
    lin_rederived = n * math.log2(A / math.sqrt(a))
    half_e = -0.5 * n * LOG2E
    chain = lead + lin - 2.0 * n - math.log2(n) + half_e
    rederived = lead + lin_rederived - 2.0 * n - math.log2(n) + 2.0 + half_e
    return [
        ("leading (1-b)/4 n log n", lead),
        ("n log(A/(e sqrt a))", lin),
        ("-2n", -2.0 * n),
        ("-log n", -math.log2(n)),
        ("-(n/2) log e", half_e),
        ("o(n/2 - 1) residual (dropped)", 0.0),
        ("log2_M_lower", chain),
        ("rederived: n log(A/sqrt a)", lin_rederived),
        ("rederived: +2", 2.0),
        ("rederived log2_M_lower", rederived),
        ("rederived minus closed form", rederived - chain),
    ]


def upper_terms(n: int, P_max: float, b: float) -> list[tuple[str, float]]:
    """Terms of the converse count ``log2 M <= ...`` at radius ``P_max / n^(1+b)``.

    The closed form carries ``-n log2 P_max``; re-deriving from the
    volume bound, ``P_max`` cancels, which the re-derived row reflects.
    """
    if n < 2:
        raise DomainError("the upper bound needs n >= 2")
    if P_max <= 0:
        raise DomainError("P_max must be positive")
    lead = (1.5 + b) * _nlogn(n)
    const = -n * (math.log2(P_max * math.sqrt(math.pi * math.e)) + UPPER_CONSTANT)
    const_rederived = -n * (math.log2(math.sqrt(math.pi * math.e)) + UPPER_CONSTANT)
    return [
        ("leading (3/2+b) n log n", lead),
        ("-n (log(P_max sqrt(pi e)) + 1.099)", const),
        ("o(n) residual (dropped)", 0.0),
        ("log2_M_upper", lead + const),
        ("rederived: -n (log sqrt(pi e) + 1.099)", const_rederived),
        ("rederived log2_M_upper", lead + const_rederived),
        ("rederived minus closed form", const_rederived - const),
    ]


def _term(terms, name):
    return dict(terms)[name]


def log2_M_lower(n: int, A: float, a: float, b: float) -> float:
    return _term(lower_terms(n, A, a, b), "log2_M_lower")


def log2_M_upper(n: int, P_max: float, b: float) -> float:
    return _term(upper_terms(n, P_max, b), "log2_M_upper")


def rate_lower(n: int, A: float, a: float, b: float) -> float:
    """Achievable rate at blocklength ``n``; tends to ``(1-b)/4``."""
    return log2_M_lower(n, A, a, b) / _nlogn(n)


def rate_upper(n: int, P_max: float, b: float) -> float:
    """Converse rate at blocklength ``n``; tends to ``3/2 + b``."""
    return log2_M_upper(n, P_max, b) / _nlogn(n)


@dataclass
class BoundReport:
    n: int
    b: float
    A: float
    a: float
    P_max: float
    log2_M_lower: float
    log2_M_upper: float
    rate_lower: float
    rate_upper: float
    terms: list = field(default_factory=list)

    def row(self) -> dict:
        d = asdict(self)
        d.pop("terms")
        return d


def bound_report(n: int, A: float, a: float, b: float, P_max: float) -> BoundReport:
    lt = lower_terms(n, A, a, b)
    ut = upper_terms(n, P_max, b)
    lo, hi = _term(lt, "log2_M_lower"), _term(ut, "log2_M_upper")
    nl = _nlogn(n)
    return BoundReport(n=n, b=b, A=A, a=a, P_max=P_max, log2_M_lower=lo, log2_M_upper=hi,
                       rate_lower=lo / nl, rate_upper=hi / nl,
                       terms=[("lower/" + k, v) for k, v in lt] + [("upper/" + k, v) for k, v in ut])


def ordering_threshold(A: float, a: float, b: float, P_max: float,
                       grid: Optional[Sequence[int]] = None) -> Optional[int]:
    """Smallest grid point from which ``rate_lower < rate_upper`` holds on the rest of the grid."""
    if grid is None:
        grid = [2**k for k in range(2, 41)]
    ok = [rate_lower(n, A, a, b) < rate_upper(n, P_max, b) for n in grid]
    n0 = None
    for n, good in zip(reversed(grid), reversed(ok)):
        if not good:
            break
        n0 = n
    return n0


def limit_tolerance(n: int) -> float:
    """``5 / log2 n``: size of the ``O(1/log n)`` remainder allowed around a limit."""
    return 5.0 / math.log2(n)


@dataclass
class ScalingFit:
    slope: float
    intercept: float
    stderr: float
    ci_low: float
    ci_high: float
    band: tuple
    in_band: bool
    points: list


def scaling_fit(ns: Sequence[int], log2_Ms: Sequence[float], b: float, slack: float = 0.0,
                confidence: float = 0.95) -> ScalingFit:
    """Least-squares fit of ``log2 M`` against ``n log2 n``.

    The slope is compared with the band ``[(1-b)/4 - slack, 3/2 + b]``.  At
    desk-scale ``n`` this is a diagnostic only.
    """
    ns = [int(n) for n in ns]
    if len(set(ns)) < 3 or len(ns) != len(log2_Ms):
        raise PreconditionError("need at least three points at distinct n")
    x = np.array([_nlogn(n) for n in ns])
    yv = np.asarray(log2_Ms, dtype=float)
    if np.ptp(yv) == 0:
        slope, intercept, se = 0.0, float(yv[0]), 0.0
    else:
        fit = stats.linregress(x, yv)
        slope, intercept, se = float(fit.slope), float(fit.intercept), float(fit.stderr)
    tq = stats.t.ppf(0.5 + confidence / 2.0, len(ns) - 2) if len(ns) > 2 else math.inf
    band = ((1.0 - b) / 4.0 - slack, 1.5 + b)
    return ScalingFit(slope=slope, intercept=intercept, stderr=se, ci_low=slope - tq * se,
                      ci_high=slope + tq * se, band=band, in_band=band[0] <= slope <= band[1],
                      points=list(zip(ns, yv.tolist())))


def scaling_diagnostic(codebooks, slack: float = 0.0, require_certificate: bool = True) -> ScalingFit:
    """:func:`scaling_fit` over constructed codebooks sharing ``(A, a, b)``."""
    cbs = list(codebooks)
    if len(cbs) < 3:
        raise PreconditionError("need at least three codebooks")
    keys = {(cb.A, cb.a, cb.b) for cb in cbs}
    if len(keys) != 1:
        raise PreconditionError("codebooks must share A, a and b")
    if require_certificate and not all(cb.certificate for cb in cbs):
        raise PreconditionError("every codebook needs a saturation certificate")
    return scaling_fit([cb.n for cb in cbs], [math.log2(cb.M) for cb in cbs], b=cbs[0].b, slack=slack)
