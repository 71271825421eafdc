"""Discrete-time Binomial channel.

A release rate ``x`` over a symbol of duration ``T_s`` releases
``N = floor(T_s * x)`` molecules; each one independently reaches the receiver
with capture probability ``p``, so the observed count is ``Binomial(N, p)``.
Channel uses are independent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import special, stats

from .exceptions import DomainError, GeometryError, PreconditionError, ShapeError

#: Largest N sampled through the cached inverse-CDF table.
TABLE_MAX_N = 64


@dataclass(frozen=True)
class ChannelParams:
    """Physical channel parameters.

    ``A`` is derived from the two rate constraints and cannot be set.
    """

    p: float
    T_s: float
    P_max: float
    P_ave: float
    A: float = field(init=False)

    def __post_init__(self):
        if not 0.0 < self.p < 1.0:
            raise DomainError(f"capture probability must lie in (0, 1), got {self.p}")
        for name in ("T_s", "P_max", "P_ave"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise DomainError(f"{name} must be positive and finite, got {value}")
        object.__setattr__(self, "A", min(self.P_max, self.P_ave))

    @classmethod
    def with_amplitude(cls, A: float, p: float, T_s: float) -> "ChannelParams":
        """Channel whose peak and average constraints both equal ``A``."""
        return cls(p=p, T_s=T_s, P_max=A, P_ave=A)

    def to_dict(self) -> dict:
        return {"p": self.p, "T_s": self.T_s, "P_max": self.P_max, "P_ave": self.P_ave}


def capture_probability(V_rx: float, D: float, d: float, tau: float) -> float:
    """Capture probability of a transparent receiver after free 3-D diffusion.

    ``V_rx / (4 pi D tau)^(3/2) * exp(-d^2 / (4 D tau))``.  Raises
    :class:`GeometryError` when the result is not a valid probability.
    """
    for name, value in (("V_rx", V_rx), ("D", D), ("d", d), ("tau", tau)):
        if not value > 0:
            raise DomainError(f"{name} must be strictly positive, got {value}")
    spread = 4.0 * math.pi * D * tau
    prob = V_rx / spread**1.5 * math.exp(-(d * d) / (4.0 * D * tau))
    if prob >= 1.0:
        raise GeometryError(
            f"capture probability {prob!r} >= 1; receiver volume too large for this geometry"
        )
    return prob


def molecule_counts(x, T_s: float) -> np.ndarray:
    """Integer molecule counts ``floor(T_s * x)``."""
    return np.floor(T_s * np.asarray(x, dtype=float)).astype(np.int64)


def _check_p(p):
    if not 0.0 < p < 1.0:
        raise DomainError(f"p must lie in (0, 1), got {p}")


def log_pmf(N, p: float, y):
    """Natural log of ``C(N, y) p^y (1-p)^(N-y)``; ``-inf`` outside the support.

    Vectorised over ``N`` and ``y``.  Scalar inputs return a Python float.
    """
    _check_p(p)
    N_arr = np.asarray(N)
    y_arr = np.asarray(y)
    if np.any(N_arr < 0) or np.any(y_arr < 0):
        raise DomainError("N and y must be non-negative")
    N_f, y_f = np.broadcast_arrays(N_arr.astype(float), y_arr.astype(float))
    inside = y_f <= N_f
    # evaluate on a clipped y so gammaln never sees a negative argument
    yc = np.where(inside, y_f, 0.0)
    log_p = math.log(p)
    log_q = math.log1p(-p)
    out = (
        special.gammaln(N_f + 1.0)
        - special.gammaln(yc + 1.0)
        - special.gammaln(N_f - yc + 1.0)
        + yc * log_p
        + (N_f - yc) * log_q
    )
    out = np.where(inside, out, -np.inf)
    if out.ndim == 0:
        return float(out)
    return out


def n_use_log_likelihood(x, y, params: ChannelParams) -> float:
    """``log W^n(y | x)``: per-symbol log-pmfs summed left to right."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    if x.shape != y.shape or x.ndim != 1:
        raise ShapeError(f"codeword shape {x.shape} and observation shape {y.shape} differ")
    counts = molecule_counts(x, params.T_s)
    terms = log_pmf(counts, params.p, y)
    total = 0.0
    for term in terms:
        total += float(term)
    return total


@lru_cache(maxsize=4096)
def _cdf_table(N: int, p: float) -> np.ndarray:
    cdf = np.cumsum(np.exp(log_pmf(np.full(N + 1, N), p, np.arange(N + 1))))
    cdf[-1] = 1.0
    cdf.flags.writeable = False
    return cdf


def _inverse_cdf(u: np.ndarray, N: int, p: float) -> np.ndarray:
    if N == 0:
        return np.zeros(u.shape, dtype=np.int64)
    if N <= TABLE_MAX_N:
        return np.searchsorted(_cdf_table(N, p), u, side="right").astype(np.int64)
    y = stats.binom.ppf(u, N, p)
    return np.clip(y, 0, N).astype(np.int64)


def _validate_codeword(x, params: ChannelParams) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ShapeError("a release vector is a non-empty 1-D array")
    if np.any(x < 0) or not np.all(np.isfinite(x)):
        raise PreconditionError("release rates must be finite and non-negative")
    return x


def sample_batch(x, params: ChannelParams, rng: np.random.Generator, size: int) -> np.ndarray:
    """Draw ``size`` independent channel outputs for codeword ``x``.

    Returns an int64 array of shape ``(size, n)``.  Each symbol is generated by
    inverting its Binomial CDF at one uniform variate, and the uniforms are
    consumed row by row, so ``sample_batch(..., size=k)`` equals ``k``
    consecutive :func:`sample` calls on the same generator.  Two codewords fed
    the same generator state are coupled through common uniforms.
    """
    x = _validate_codeword(x, params)
    counts = molecule_counts(x, params.T_s)
    u = rng.random((int(size), x.size))
    out = np.empty(u.shape, dtype=np.int64)
    for N in np.unique(counts):
        cols = np.flatnonzero(counts == N)
        out[:, cols] = _inverse_cdf(u[:, cols], int(N), params.p)
    return out


def sample(x, params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """One observation vector for codeword ``x``."""
    return sample_batch(x, params, rng, 1)[0]


def binomial_raw_moments(N: int, p: float, kmax: int = 4) -> list[float]:
    """Exact ``E[Y^k]`` for ``k = 0..kmax`` by summation over the support."""
    y = np.arange(N + 1, dtype=float)
    w = np.exp(log_pmf(np.full(N + 1, N), p, np.arange(N + 1)))
    return [math.fsum(w * y**k) for k in range(kmax + 1)]


def moment_bound_sweep(N_max: int = 60, ps=None, ks=(1, 2, 3, 4)) -> list[dict]:
    """Check ``E[Y^k] <= (Np)^k exp(k^2 / (2Np))`` wherever ``Np >= 1``.

    Returns one row per (N, p, k) with the exact moment, the bound and a
    ``holds`` flag.
    """
    if ps is None:
        ps = [round(0.1 * i, 1) for i in range(1, 10)]
    rows = []
    for p in ps:
        for N in range(1, N_max + 1):
            mean = N * p
            if mean < 1.0:
                continue
            moments = binomial_raw_moments(N, p, max(ks))
            for k in ks:
                bound = mean**k * math.exp(k * k / (2.0 * mean))
                rows.append(
                    {"N": N, "p": p, "k": k, "moment": moments[k], "bound": bound,
                     "holds": moments[k] <= bound}
                )
    return rows
