"""Numerical checks for the converse side.

Covers the minimum-distance property of good codebooks, the Gamma-ratio double
inequality, and the factorial-product form of the likelihood ratio
``W^n(y|c2) / W^n(y|c1)`` for nearby codewords together with its bounds.
Non-integer ``T_s c`` arguments are read as ``Gamma(T_s c + 1)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import rng as rngmod
from .channel import ChannelParams, n_use_log_likelihood, sample_batch
from .codec import DecoderConfig, decoding_metric
from .exceptions import DomainError, PreconditionError, ShapeError, SupportError
from .packing import Codebook, log2_sphere_volume

logger = logging.getLogger(__name__)

# below this gap the log-gamma difference quotient is taken from a series
_SERIES_GAP = 1e-4
LOG_SLACK = 1e-10


def eps_prime(P_max: float, n: int, b: float) -> float:
    """``P_max / n^(1+b)``."""
    return P_max / n ** (1.0 + b)


def kappa(params: ChannelParams, n: int, b: float) -> float:
    """``2 A T_s * T_s P_max / n^b``."""
    return 2.0 * params.A * params.T_s * params.T_s * params.P_max / n**b


@dataclass(frozen=True)
class ConverseConfig:
    """Converse-side constants.

    ``kappa`` is only meaningful as a slack below 1 for very large ``n``; at
    desk scale it is far above 1 and a warning is logged.
    """

    b: float
    eps_prime: float
    kappa: float

    def __post_init__(self):
        if not self.b > 0:
            raise DomainError("b must be positive")
        if not self.eps_prime > 0:
            raise DomainError("eps_prime must be positive")
        if not self.kappa > 0:
            raise DomainError("kappa must be positive")
        if self.kappa >= 1:
            logger.warning("kappa = %.4g >= 1: the likelihood-ratio bracket is vacuous on the low side",
                           self.kappa)

    @classmethod
    def auto(cls, params: ChannelParams, n: int, b: float) -> "ConverseConfig":
        return cls(b=b, eps_prime=eps_prime(params.P_max, n, b), kappa=kappa(params, n, b))


def _linf_matrix(X: np.ndarray) -> np.ndarray:
    out = np.zeros((len(X), len(X)))
    for i in range(len(X)):
        out[i] = np.max(np.abs(X - X[i]), axis=1)
    return out


def min_distance_check(cb: Codebook, eps_prime: float) -> dict:
    """Every pair must differ by more than ``eps_prime`` in some coordinate.

    Returns ``{"passed", "min_linf", "offending"}`` where ``offending`` lists
    the 1-based pairs whose l-infinity distance is at most ``eps_prime``.
    """
    if cb.M < 2:
        raise PreconditionError("need at least two codewords")
    d = _linf_matrix(cb.codewords)
    iu = np.triu_indices(cb.M, k=1)
    gaps = d[iu]
    bad = np.flatnonzero(gaps <= eps_prime)
    offending = [(int(iu[0][k]) + 1, int(iu[1][k]) + 1) for k in bad]
    return {"passed": not offending, "min_linf": float(gaps.min()), "eps_prime": eps_prime,
            "offending": offending}


def _log_gamma_quotient(a: float, b: float) -> float:
    """``(lnGamma(b) - lnGamma(a)) / (b - a)`` for ``0 < a < b``."""
    h = b - a
    if h < _SERIES_GAP * max(1.0, a):
        m = 0.5 * (a + b)
        return float(special.digamma(m) + special.polygamma(2, m) * h * h / 24.0
                     + special.polygamma(4, m) * h**4 / 1920.0)
    return float((special.gammaln(b) - special.gammaln(a)) / h)


def gamma_ratio_bounds(a: float, b: float) -> tuple[float, float, float]:
    """``(lower, upper, exact)`` for ``exact = (Gamma(a)/Gamma(b))^(1/(a-b))``.

    ``lower = min{a, (a+b-1)/2}`` and ``upper = max{a, (a+b-1)/2}``.
    """
    if not (0 < a < b):
        raise DomainError(f"need 0 < a < b, got a={a}, b={b}")
    q = _log_gamma_quotient(a, b)
    if not math.isfinite(q):
        raise DomainError(f"log-gamma not finite at a={a}, b={b}")
    mid = 0.5 * (a + b - 1.0)
    return min(a, mid), max(a, mid), math.exp(q)


def log_le(x: float, y: float, slack: float = LOG_SLACK) -> bool:
    """``log x <= log y`` up to a relative slack; ``x <= 0`` counts as below."""
    if x <= 0:
        return True
    if y <= 0:
        return False
    lx, ly = math.log(x), math.log(y)
    return lx <= ly + slack * max(1.0, abs(ly))


def _log_ratio_bracket(u: float, v: float) -> tuple[float, float]:
    """Bounds on ``ln(Gamma(v)/Gamma(u))`` for ``0 < u < v``."""
    lo, hi, _ = gamma_ratio_bounds(u, v)
    g = v - u
    low = g * math.log(lo) if lo > 0 else -math.inf
    return low, g * math.log(hi)


def classify_case(c1, c2) -> str:
    up = np.any(c1 < c2)
    down = np.any(c1 > c2)
    if up and down:
        return "case3"
    if up:
        return "case1"
    if down:
        return "case2"
    return "equal"


@dataclass
class LikelihoodRatioReport:
    case: str
    exact: float
    log_exact: float
    lower: float
    upper: float
    kappa: float
    kappa_holds: bool
    sandwich_holds: bool
    closed_form_lower: float
    closed_form_upper: float
    direct_log_ratio: float = math.nan
    terms: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "case", "exact", "log_exact", "lower", "upper", "kappa", "kappa_holds",
            "sandwich_holds", "closed_form_lower", "closed_form_upper", "direct_log_ratio")}


def likelihood_ratio_product_bounds(c1, c2, y, params: ChannelParams, eps_prime: float,
                                    kappa_value: float = None) -> LikelihoodRatioReport:
    """Exact ``prod_t W(y_t|c2_t) / W(y_t|c1_t)`` in factorial form, with bounds.

    ``lower``/``upper`` bracket each Gamma ratio with the double inequality
    applied in the direction that is valid (``Gamma(v)/Gamma(u)`` lies in
    ``[lo^(v-u), hi^(v-u)]``).  ``closed_form_lower``/``closed_form_upper`` are
    the per-case closed forms ``(2(AT_s+1)(1-p))^(-S)`` and
    ``(2(AT_s+1))^(-S)`` with ``S = sum T_s (c2 - c1)`` restricted to the
    coordinates of each direction; they are reported, not relied on.
    When every ``T_s c`` is an integer, ``direct_log_ratio`` is the same
    quantity from the Binomial pmf.
    """
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (c1.shape == c2.shape == y.shape) or c1.ndim != 1:
        raise ShapeError("c1, c2 and y must be 1-D arrays of equal length")
    n = c1.size
    if np.max(np.abs(c1 - c2)) > eps_prime:
        raise PreconditionError("codewords differ by more than eps_prime in some coordinate")
    Ts, p = params.T_s, params.p
    x1, x2 = Ts * c1, Ts * c2
    if np.any(y < 0) or np.any(y > x1) or np.any(y > x2):
        raise SupportError("observation outside the support of one of the codewords")
    k = kappa(params, n, eps_prime_to_b(params.P_max, n, eps_prime)) if kappa_value is None else kappa_value

    log_q = math.log1p(-p)
    per = (special.gammaln(x2 + 1) - special.gammaln(x1 + 1)
           + special.gammaln(x1 - y + 1) - special.gammaln(x2 - y + 1) + (x2 - x1) * log_q)
    log_exact = math.fsum(per)

    lo_total, hi_total = 0.0, 0.0
    for t in range(n):
        if x1[t] == x2[t]:
            continue
        shift = (x2[t] - x1[t]) * log_q
        if x2[t] > x1[t]:
            a_lo, a_hi = _log_ratio_bracket(x1[t] + 1, x2[t] + 1)
            b_lo, b_hi = _log_ratio_bracket(x1[t] - y[t] + 1, x2[t] - y[t] + 1)
            lo_total += a_lo - b_hi + shift
            hi_total += a_hi - b_lo + shift
        else:
            a_lo, a_hi = _log_ratio_bracket(x2[t] + 1, x1[t] + 1)
            b_lo, b_hi = _log_ratio_bracket(x2[t] - y[t] + 1, x1[t] - y[t] + 1)
            lo_total += b_lo - a_hi + shift
            hi_total += b_hi - a_lo + shift

    S_up = float(np.sum(np.clip(x2 - x1, 0, None)))
    S_down = float(np.sum(np.clip(x1 - x2, 0, None)))
    base = 2.0 * (params.A * Ts + 1.0)
    # each direction contributes its own factor; in the downward direction
    # the roles of c1 and c2 swap and the ratio is inverted
    cf_lower = math.exp(S_up * (math.log(base) + log_q) - S_down * (math.log(base) + log_q))
    cf_upper = math.exp(-S_up * math.log(base) + S_down * math.log(base))

    direct = math.nan
    if np.all(x1 == np.round(x1)) and np.all(x2 == np.round(x2)):
        direct = n_use_log_likelihood(c2, y, params) - n_use_log_likelihood(c1, y, params)

    exact = math.exp(log_exact) if log_exact < 709 else math.inf
    lower = math.exp(lo_total) if lo_total < 709 else math.inf
    upper = math.exp(hi_total) if hi_total < 709 else math.inf
    sandwich = (lo_total <= log_exact + LOG_SLACK * max(1.0, abs(log_exact))
                and log_exact <= hi_total + LOG_SLACK * max(1.0, abs(log_exact)))
    return LikelihoodRatioReport(
        case=classify_case(c1, c2), exact=exact, log_exact=log_exact, lower=lower, upper=upper,
        kappa=k, kappa_holds=(1.0 - k) <= exact <= (1.0 + k), sandwich_holds=sandwich,
        closed_form_lower=cf_lower, closed_form_upper=cf_upper, direct_log_ratio=direct,
        terms=per.tolist())


def eps_prime_to_b(P_max: float, n: int, eps: float) -> float:
    """Invert ``eps = P_max / n^(1+b)`` for ``b``."""
    return math.log(P_max / eps) / math.log(n) - 1.0


def bernoulli_steps(params: ChannelParams, n: int, b: float) -> list[dict]:
    """Evaluate the three power-to-linear steps used by the likelihood-ratio bounds.

    With ``r = T_s n eps' = T_s P_max / n^b`` and ``x = (2AT_s+1)/(2(AT_s+1))``:

    * ``lower_first``  ``(1 - x)^r <= 1 - r x``
    * ``lower_second`` ``(1 - p)^r >= 1 - r p``
    * ``upper``        ``(1 + 2AT_s)^r <= 1 + 2AT_s r``

    The first and last need ``0 <= r <= 1``; each row reports the exact
    values and whether the inequality holds there.
    """
    AT = params.A * params.T_s
    r = params.T_s * params.P_max / n**b
    x = (2 * AT + 1) / (2 * (AT + 1))
    rows = [
        ("lower_first", (1 - x) ** r, 1 - r * x, "le"),
        ("lower_second", (1 - params.p) ** r, 1 - r * params.p, "ge"),
        ("upper", (1 + 2 * AT) ** r, 1 + 2 * AT * r, "le"),
    ]
    out = []
    for name, lhs, rhs, sense in rows:
        holds = lhs <= rhs if sense == "le" else lhs >= rhs
        out.append({"step": name, "r": r, "lhs": lhs, "rhs": rhs, "relation": sense,
                    "holds": bool(holds), "r_in_unit_interval": 0.0 <= r <= 1.0})
    return out


def converse_contradiction_demo(c1, c2, params: ChannelParams, cfg: DecoderConfig,
                                ccfg: ConverseConfig, trials: int, seed, threads: int = 1) -> dict:
    """Estimate ``P(Y(c1) rejected by D_1) + P(Y(c2) accepted by D_1)``.

    Both outputs are drawn from the same uniforms, so identical codewords give
    exactly 1.  The standard error is that of the per-trial sum.
    """
    c1 = np.asarray(c1, dtype=float)
    c2 = np.asarray(c2, dtype=float)
    if c1.shape != c2.shape:
        raise ShapeError("codewords differ in length")
    gap = float(np.max(np.abs(c1 - c2)))
    if gap > ccfg.eps_prime:
        raise PreconditionError(f"l-inf gap {gap:.3g} exceeds eps_prime {ccfg.eps_prime:.3g}")
    if trials < 1:
        raise PreconditionError("trials must be positive")

    def block(gen, size):
        state = gen.bit_generator.state
        y1 = sample_batch(c1, params, gen, size)
        gen.bit_generator.state = state
        y2 = sample_batch(c2, params, gen, size)
        miss = np.abs(decoding_metric(y1, c1, params, cfg.metric_mode)) > cfg.delta_n
        false = np.abs(decoding_metric(y2, c1, params, cfg.metric_mode)) <= cfg.delta_n
        s = miss.astype(np.int64) + false.astype(np.int64)
        return np.array([miss.sum(), false.sum(), (s * s).sum()])

    e1, e2, sq = (int(v) for v in rngmod.run_blocks(block, seed, trials, threads))
    mean = (e1 + e2) / trials
    var = max(sq / trials - mean * mean, 0.0)
    stderr = math.sqrt(var / trials)
    return {"p_e1": e1 / trials, "p_e2": e2 / trials, "sum": mean, "stderr": stderr,
            "kappa": ccfg.kappa, "linf_gap": gap, "eps_prime": ccfg.eps_prime, "trials": trials,
            "holds": mean >= 1.0 - ccfg.kappa - 3.0 * stderr}


def converse_log2_count_upper(n: int, P_max: float, eps: float) -> float:
    """``log2( 2^(-0.599 n) P_max^n / Vol(S(n, eps)) )``."""
    return -0.599 * n + n * math.log2(P_max) - log2_sphere_volume(n, eps)


def random_instance(gen: np.random.Generator, n: int, params: ChannelParams, b: float,
                    case: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Codewords with integer ``T_s c`` on the grid ``k / T_s`` and a feasible ``y``.

    Coordinate gaps are whole molecules, at least one and at most
    ``floor(T_s eps')``; ``case`` fixes the direction pattern.  ``y`` is drawn
    from ``W(.|c1)`` conditioned on lying in the support of both codewords.
    """
    Ts = params.T_s
    top = int(math.floor(params.A * Ts))
    G = int(math.floor(Ts * eps_prime(params.P_max, n, b)))
    if G < 1 or top < 1:
        raise PreconditionError("no whole-molecule gap fits below eps'; lower n or raise T_s")
    if case == "case1":
        sign = np.ones(n, dtype=np.int64)
    elif case == "case2":
        sign = -np.ones(n, dtype=np.int64)
    elif case == "case3":
        if n < 2:
            raise PreconditionError("a mixed instance needs n >= 2")
        sign = gen.choice(np.array([-1, 1]), n)
        sign[0], sign[1] = 1, -1
    else:
        raise DomainError(f"unknown case {case!r}")
    gap = gen.integers(1, min(G, top) + 1, n)
    k1 = np.where(sign > 0, gen.integers(0, top - gap + 1), gen.integers(gap, top + 1))
    k2 = k1 + sign * gap
    c1, c2 = k1 / Ts, k2 / Ts
    N1 = np.floor(Ts * c1).astype(np.int64)
    N2 = np.floor(Ts * c2).astype(np.int64)
    if not (np.array_equal(N1, k1) and np.array_equal(N2, k2)):
        raise PreconditionError("T_s does not map the grid k/T_s back to integers exactly")
    cap = np.minimum(N1, N2)
    y = np.empty(n, dtype=np.int64)
    for t in range(n):
        support = np.arange(cap[t] + 1)
        w = np.exp(special.gammaln(N1[t] + 1) - special.gammaln(support + 1)
                   - special.gammaln(N1[t] - support + 1)
                   + support * math.log(params.p) + (N1[t] - support) * math.log1p(-params.p))
        y[t] = gen.choice(support, p=w / w.sum())
    return c1, c2, y


def sandwich_sweep(instances: int, seed, params: ChannelParams, b: float,
                   n_range: tuple[int, int] = (2, 8)) -> list[dict]:
    """Randomised Case 1/2/3 instances, cycling through the three cases."""
    gen = rngmod.generator(seed)
    rows = []
    for k in range(instances):
        n = int(gen.integers(n_range[0], n_range[1] + 1))
        case = ("case1", "case2", "case3")[k % 3]
        c1, c2, y = random_instance(gen, n, params, b, case)
        rep = likelihood_ratio_product_bounds(c1, c2, y, params, eps_prime(params.P_max, n, b),
                                              kappa_value=kappa(params, n, b))
        row = {"instance": k, "n": n, **rep.to_dict()}
        row["direct_match"] = abs(rep.log_exact - rep.direct_log_ratio) <= 1e-9 * max(
            1.0, abs(rep.direct_log_ratio))
        rows.append(row)
    return rows
