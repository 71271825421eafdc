"""Deterministic encoder and threshold identification decoder.

The decoder for target ``j`` accepts an observation ``y`` when the metric

    T(y, c_j) = (1/n) * sum_t [ (y_t - mu_t)^2 - (1 - p) y_t ]

satisfies ``|T| <= delta_n``, where ``mu_t`` is the mean count of symbol
``t``.  In ``exact-floor`` mode ``mu_t = p * floor(T_s c_t)`` so that
``E[T(Y(j), c_j)] = 0`` exactly; ``unfloored`` mode uses
``mu_t = p * T_s * c_t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import ChannelParams
from .exceptions import DomainError, ShapeError
from .packing import Codebook

EXACT_FLOOR = "exact-floor"
UNFLOORED = "unfloored"
MODES = (EXACT_FLOOR, UNFLOORED)
# older spelling of the unfloored mode, still accepted on input
_MODE_ALIASES = {"paper-approx": UNFLOORED}


def normalize_mode(mode: str) -> str:
    return _MODE_ALIASES.get(mode, mode)


def threshold(n: int, A: float, b: float) -> float:
    """``delta_n = A / n^((1-b)/2)``."""
    return A / n ** (0.5 * (1.0 - b))


@dataclass(frozen=True)
class DecoderConfig:
    delta_n: float
    metric_mode: str = EXACT_FLOOR
    b: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "metric_mode", normalize_mode(self.metric_mode))
        if not self.delta_n > 0:
            raise DomainError("delta_n must be positive")
        if self.metric_mode not in MODES:
            raise DomainError(f"metric_mode must be one of {MODES}")

    @classmethod
    def auto(cls, n: int, A: float, b: float, metric_mode: str = EXACT_FLOOR) -> "DecoderConfig":
        return cls(delta_n=threshold(n, A, b), metric_mode=metric_mode, b=b)


@dataclass(frozen=True)
class IdentificationOutcome:
    target: int
    accepted: bool
    metric_value: float


def encode(i: int, cb: Codebook) -> np.ndarray:
    """Codeword sent for message ``i`` (``1 <= i <= M``)."""
    return cb.codeword(i)


def symbol_means(c, params: ChannelParams, mode: str = EXACT_FLOOR) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    mode = normalize_mode(mode)
    if mode == EXACT_FLOOR:
        return params.p * np.floor(params.T_s * c)
    if mode == UNFLOORED:
        return params.p * params.T_s * c
    raise DomainError(f"unknown metric mode {mode!r}")


def decoding_metric(y, c, params: ChannelParams, mode: str = EXACT_FLOOR):
    """Metric ``T(y, c)``.

    ``y`` may be a single observation of shape ``(n,)`` (returns a float) or a
    batch of shape ``(trials, n)`` (returns an array of ``trials`` values).
    """
    c = np.asarray(c, dtype=float)
    y = np.asarray(y, dtype=float)
    if c.ndim != 1 or y.shape[-1:] != c.shape:
        raise ShapeError(f"observation shape {y.shape} does not match codeword length {c.size}")
    mu = symbol_means(c, params, mode)
    dev = y - mu
    z = dev * dev - (1.0 - params.p) * y
    out = z.sum(axis=-1) / c.size
    return float(out) if np.ndim(out) == 0 else out


def identify(y, j: int, cb: Codebook, cfg: DecoderConfig, params: ChannelParams) -> IdentificationOutcome:
    """Answer "was message ``j`` sent?" for observation ``y``."""
    value = decoding_metric(y, cb.codeword(j), params, cfg.metric_mode)
    return IdentificationOutcome(target=j, accepted=abs(value) <= cfg.delta_n, metric_value=value)


def scan(y, cb: Codebook, cfg: DecoderConfig, params: ChannelParams) -> list[int]:
    """All targets whose decoding set contains ``y`` (there may be several, or none)."""
    y = np.asarray(y, dtype=float)
    return [j for j in range(1, cb.M + 1) if identify(y, j, cb, cfg, params).accepted]


def mode_gap_bound(y, params: ChannelParams, A: float) -> float:
    """Upper bound on ``|T_unfloored - T_exact-floor|`` for observation ``y``.

    With ``d_t = p (T_s c_t - floor(T_s c_t))`` in ``[0, p)`` the per-symbol
    difference is ``d_t |2 y_t - mu_t - mu'_t|``, and both means lie in
    ``[0, p T_s A]``.
    """
    y = np.asarray(y, dtype=float)
    return params.p * max(2.0 * float(np.max(y)), 2.0 * params.p * params.T_s * A)


def accept_all() -> DecoderConfig:
    """Degenerate decoder with an infinite threshold."""
    return DecoderConfig(delta_n=math.inf)
