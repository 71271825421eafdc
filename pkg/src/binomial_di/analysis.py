"""Type I / type II error probabilities: simulation and Chebyshev bounds."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import rng as rngmod
from .channel import ChannelParams, molecule_counts, sample_batch
from .codec import DecoderConfig, decoding_metric, symbol_means
from .exceptions import DomainError, PreconditionError
from .packing import Codebook

MIN_TRIALS = 100


@dataclass(frozen=True)
class ErrorEstimate:
    kind: str
    i: int
    j: int
    estimate: float
    stderr: float
    trials: int
    count: int
    seed: tuple

    @classmethod
    def from_count(cls, kind, i, j, count, trials, seed):
        est = count / trials
        return cls(kind=kind, i=i, j=j, estimate=est,
                   stderr=math.sqrt(est * (1.0 - est) / trials), trials=trials,
                   count=int(count), seed=tuple(rngmod.describe(seed)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seed"] = list(self.seed)
        return d


@dataclass(frozen=True)
class AnalyticBounds:
    type1_bound: float
    zeta0: float
    zeta1: float
    type2_bound: float
    c_ref: float


def _check_trials(trials):
    if trials < MIN_TRIALS:
        raise PreconditionError(f"need at least {MIN_TRIALS} trials, got {trials}")


def mc_type1(i: int, cb: Codebook, cfg: DecoderConfig, params: ChannelParams, trials: int,
             seed, threads: int = 1) -> ErrorEstimate:
    """Fraction of outputs ``Y(i)`` rejected by the decoder for ``i``."""
    _check_trials(trials)
    c = cb.codeword(i)

    def block(gen, size):
        y = sample_batch(c, params, gen, size)
        return np.count_nonzero(np.abs(decoding_metric(y, c, params, cfg.metric_mode)) > cfg.delta_n)

    count = int(rngmod.run_blocks(block, seed, trials, threads))
    return ErrorEstimate.from_count("type1", i, i, count, trials, seed)


def mc_type2(i: int, j: int, cb: Codebook, cfg: DecoderConfig, params: ChannelParams,
             trials: int, seed, threads: int = 1) -> ErrorEstimate:
    """Fraction of outputs ``Y(i)`` accepted by the decoder for ``j != i``.

    Outputs are drawn from the same stream as :func:`mc_type1` with the same
    seed, so for a duplicated codeword the two estimates add up to exactly 1.
    """
    if i == j:
        raise PreconditionError("type II error needs distinct messages i != j")
    _check_trials(trials)
    ci, cj = cb.codeword(i), cb.codeword(j)

    def block(gen, size):
        y = sample_batch(ci, params, gen, size)
        return np.count_nonzero(np.abs(decoding_metric(y, cj, params, cfg.metric_mode)) <= cfg.delta_n)

    count = int(rngmod.run_blocks(block, seed, trials, threads))
    return ErrorEstimate.from_count("type2", i, j, count, trials, seed)


def _binomial_central_moments(N, p):
    q = 1.0 - p
    m = N * p
    mu2 = m * q
    mu3 = mu2 * (q - p)
    mu4 = 3.0 * mu2 * mu2 + mu2 * (1.0 - 6.0 * p * q)
    return m, mu2, mu3, mu4


def metric_moments(c, params: ChannelParams, mode: str = "exact-floor") -> tuple[float, float]:
    """Exact mean and variance of ``T(Y, c)`` for ``Y`` drawn from codeword ``c``.

    Per symbol write ``D = Y - Np`` and ``delta = Np - mu``; then
    ``Z = D^2 + (2 delta - q) D + delta^2 - q Np`` and its variance follows
    from the Binomial central moments.
    """
    c = np.asarray(c, dtype=float)
    N = molecule_counts(c, params.T_s).astype(float)
    q = 1.0 - params.p
    m, mu2, mu3, mu4 = _binomial_central_moments(N, params.p)
    delta = m - symbol_means(c, params, mode)
    gamma = 2.0 * delta - q
    mean_z = mu2 + delta * delta - q * m
    var_z = mu4 - mu2 * mu2 + gamma * gamma * mu2 + 2.0 * gamma * mu3
    n = c.size
    return float(mean_z.sum() / n), float(var_z.sum() / n**2)


def chebyshev_type1(c, params: ChannelParams, cfg: DecoderConfig) -> float:
    """``P(|T - E T| > delta_n) <= Var[T] / delta_n^2`` with the exact variance."""
    _, var = metric_moments(c, params, cfg.metric_mode)
    return var / cfg.delta_n**2


def _exp_term(params: ChannelParams, c_ref: float) -> float:
    if not c_ref > 0:
        raise DomainError("c_ref must be positive; the bound diverges as c_ref -> 0")
    try:
        return math.exp(8.0 / (params.p * params.T_s * c_ref))
    except OverflowError:
        return math.inf


def _variance_numerator(params: ChannelParams, c_ref: float) -> float:
    A, Ts = params.A, params.T_s
    e = _exp_term(params, c_ref)
    AT = A * Ts
    return AT**4 * e + (2 * AT + 1) ** 2 * AT + (2 * AT + 1) * AT**2 * math.sqrt(e * AT)


def analytic_type1_bound(params: ChannelParams, n: int, b: float, c_ref: float) -> float:
    """Closed-form type I bound, decaying like ``n^-b``."""
    return _variance_numerator(params, c_ref) / n**b


def zeta0(params: ChannelParams, n: int, b: float) -> float:
    """Chebyshev bound on the cross-term event: ``4 A^3 T_s^3 p^3 (1-p) / n^b``."""
    A, Ts, p = params.A, params.T_s, params.p
    return 4.0 * A**3 * Ts**3 * p**3 * (1.0 - p) / n**b


def zeta1(params: ChannelParams, n: int, b: float, c_ref: float) -> float:
    return analytic_type1_bound(params, n, b, c_ref)


def analytic_bounds(params: ChannelParams, n: int, b: float, c_ref: float) -> AnalyticBounds:
    z0 = zeta0(params, n, b)
    z1 = zeta1(params, n, b, c_ref)
    return AnalyticBounds(type1_bound=analytic_type1_bound(params, n, b, c_ref), zeta0=z0,
                          zeta1=z1, type2_bound=z0 + z1, c_ref=c_ref)


def default_c_ref(cb: Codebook) -> float:
    """Smallest positive coordinate in the codebook."""
    positive = cb.codewords[cb.codewords > 0]
    if positive.size == 0:
        raise DomainError("codebook has no positive coordinate")
    return float(positive.min())


EVENT_NAMES = ("accept", "E_prime", "E0", "E1", "E1_full_cross", "E_prime_outside_two_delta",
               "E_prime_outside_full_cross")


def type2_event_counts(i: int, j: int, cb: Codebook, cfg: DecoderConfig, params: ChannelParams,
                       trials: int, seed, threads: int = 1) -> dict:
    """Monte Carlo counts of the events used to bound the type II error.

    With ``U_t = Y_t(i) - mu_{i,t}`` and ``Delta_t = mu_{i,t} - mu_{j,t}``:

    * ``accept``  ``|sum (U+Delta)^2 - (1-p)Y| <= n delta``   (the type II event)
    * ``E_prime`` ``sum (U+Delta)^2 - (1-p)Y <= n delta``
    * ``E0``      ``|sum U Delta| > n delta``
    * ``E1``      ``sum U^2 + Delta^2 - (1-p)Y <= 2 n delta``
    * ``E1_full_cross`` the same with ``3 n delta``; this is what the
      complement of ``E0`` actually yields once the factor 2 of the cross
      term is kept, so ``E_prime`` lies inside ``E0 | E1_full_cross`` pointwise.

    ``E_prime_outside_*`` count samples in ``E_prime`` but in neither ``E0``
    nor the respective ``E1`` variant.

    The reverse-triangle step ``|S| - |L| <= |S - L|`` is checked on every
    sample and a violation raises ``AssertionError``.
    """
    if i == j:
        raise PreconditionError("events are defined for i != j")
    _check_trials(trials)
    ci, cj = cb.codeword(i), cb.codeword(j)
    mu_i = symbol_means(ci, params, cfg.metric_mode)
    mu_j = symbol_means(cj, params, cfg.metric_mode)
    delta = mu_i - mu_j
    n = ci.size
    nd = n * cfg.delta_n
    q = 1.0 - params.p

    def block(gen, size):
        y = sample_batch(ci, params, gen, size).astype(float)
        u = y - mu_i
        full = ((y - mu_j) ** 2).sum(axis=1)
        lin = (q * y).sum(axis=1)
        cross = (u * delta).sum(axis=1)
        base = (u * u).sum(axis=1) + float((delta * delta).sum()) - lin
        lhs = np.abs(full) - np.abs(lin)
        rhs = np.abs(full - lin)
        assert np.all(lhs <= rhs), "reverse triangle inequality failed"
        accept = np.abs(decoding_metric(y, cj, params, cfg.metric_mode)) <= cfg.delta_n
        e_prime = full - lin <= nd
        e0 = np.abs(cross) > nd
        e1, e1_full = base <= 2 * nd, base <= 3 * nd
        return np.array([accept.sum(), e_prime.sum(), e0.sum(), e1.sum(), e1_full.sum(),
                         (e_prime & ~(e0 | e1)).sum(), (e_prime & ~(e0 | e1_full)).sum()])

    counts = rngmod.run_blocks(block, seed, trials, threads)
    out = {name: int(v) for name, v in zip(EVENT_NAMES, counts)}
    out["trials"] = trials
    return out
