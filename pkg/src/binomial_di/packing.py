"""Sphere-packing codebooks in the hypercube ``[0, A]^n``.

Codewords are centres of radius-``r0`` balls placed by random sequential
insertion: candidates are drawn uniformly from the admissible box and kept when
they are at Euclidean distance at least ``2 r0`` from every centre accepted so
far.  Insertion stops after ``stop_K`` consecutive rejections; a Monte Carlo
coverage check then looks for points still farther than ``2 r0`` from all
centres and inserts them, which is what makes the packing (approximately)
saturated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy import special

from . import rng as rngmod
from .channel import ChannelParams
from .exceptions import CodebookFormatError, DomainError, PreconditionError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
_MAGIC = "binomial-di-codebook"
_LOG2E = math.log2(math.e)

# candidates examined per vectorised insertion batch
_BATCH = 1024
# upper bound on batch * centres held in memory at once
_CHUNK_CELLS = 4_000_000


def log_sphere_volume(n: int, r: float) -> float:
    """Natural log of the volume of an ``n``-ball of radius ``r``."""
    if n < 1 or r <= 0:
        raise DomainError(f"need n >= 1 and r > 0, got n={n}, r={r}")
    return 0.5 * n * math.log(math.pi) + n * math.log(r) - special.gammaln(0.5 * n + 1.0)


def log2_sphere_volume(n: int, r: float) -> float:
    return log_sphere_volume(n, r) * _LOG2E


def sphere_volume(n: int, r: float, log: bool = False) -> float:
    """``pi^(n/2) r^n / Gamma(n/2 + 1)``.

    Computed in log space.  With ``log=True``, or when the value would
    overflow a double, the natural log of the volume is returned instead.
    """
    lv = log_sphere_volume(n, r)
    if log or lv > 709.0:
        return lv
    return math.exp(lv)


def count_lower_bound(n: int, A: float, r0: float) -> float:
    """``log2( 2^-n A^n / Vol(S(n, r0)) )``, the saturated-packing count floor."""
    if r0 <= 0 or A <= 0:
        raise DomainError("A and r0 must be positive")
    return -n + n * math.log2(A) - log2_sphere_volume(n, r0)


def packing_radius(n: int, a: float, b: float) -> float:
    """``r0 = sqrt(n * eps_n)`` with ``eps_n = a / n^((1-b)/2)``."""
    return math.sqrt(n * a / n ** (0.5 * (1.0 - b)))


def coupled_a(params: ChannelParams) -> float:
    """Packing constant that makes ``T_s^2 p^2 eps_n = 3 delta_n`` hold."""
    return 3.0 * params.A / (params.p**2 * params.T_s**2)


@dataclass(frozen=True)
class PackingConfig:
    n: int
    a: float
    b: float
    A: float
    seed: int = 0
    stop_K: Optional[int] = None
    c_min: Optional[float] = None
    repair_trials: int = 0
    max_codewords: Optional[int] = None

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("blocklength n must be at least 2")
        if not self.a > 0:
            raise DomainError("packing constant a must be positive")
        if not 0.0 < self.b < 1.0:
            raise DomainError("exponent b must lie in (0, 1)")
        if not self.A > 0:
            raise DomainError("cube edge A must be positive")
        if self.stop_K is None:
            object.__setattr__(self, "stop_K", 1000 * self.n)
        if self.stop_K < 1:
            raise DomainError("stop_K must be at least 1")
        if self.c_min is None:
            object.__setattr__(self, "c_min", 0.05 * self.A)
        if not 0.0 <= self.c_min < self.A:
            raise DomainError("c_min must lie in [0, A)")
        if self.max_codewords is not None and self.max_codewords < 1:
            raise DomainError("max_codewords must be positive")

    @classmethod
    def from_channel(cls, n: int, b: float, params: ChannelParams, a: Optional[float] = None,
                     **kwargs) -> "PackingConfig":
        """Config on the cube ``[0, A]^n`` of ``params``, coupling ``a`` by default."""
        auto = coupled_a(params)
        if a is None:
            a = auto
        elif not math.isclose(a, auto, rel_tol=1e-12):
            logger.warning("packing constant a=%g overrides the coupled value %g; "
                           "the type II distance argument no longer applies", a, auto)
        return cls(n=n, a=a, b=b, A=params.A, **kwargs)

    @property
    def eps_n(self) -> float:
        return self.a / self.n ** (0.5 * (1.0 - self.b))

    @property
    def r0(self) -> float:
        return packing_radius(self.n, self.a, self.b)


@dataclass
class Codebook:
    """Codewords (rows of ``codewords``) plus the construction record."""

    codewords: np.ndarray
    r0: float
    A: float
    a: float = float("nan")
    b: float = float("nan")
    seed: int = 0
    stop_K: int = 0
    c_min: float = 0.0
    method: str = "rsa"
    certificate: dict = field(default_factory=dict)

    def __post_init__(self):
        cw = np.array(self.codewords, dtype=float)
        if cw.ndim != 2 or cw.shape[0] < 1:
            raise PreconditionError("codewords must form a non-empty 2-D array")
        cw.flags.writeable = False
        self.codewords = cw

    @property
    def n(self) -> int:
        return self.codewords.shape[1]

    @property
    def M(self) -> int:
        return self.codewords.shape[0]

    def __len__(self):
        return self.M

    def codeword(self, i: int) -> np.ndarray:
        """Codeword of message ``i`` (messages are numbered ``1..M``)."""
        if not (isinstance(i, (int, np.integer)) and 1 <= i <= self.M):
            raise IndexError(f"message index {i} outside 1..{self.M}")
        return self.codewords[i - 1]

    def header(self) -> dict:
        return {"version": FORMAT_VERSION, "n": self.n, "M": self.M, "A": self.A,
                "a": self.a, "b": self.b, "r0": self.r0, "seed": self.seed,
                "stop_K": self.stop_K, "c_min": self.c_min, "method": self.method}


def sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared distances, shape ``(len(points), len(centers))``.

    Coordinates are accumulated in a fixed order so that a distance does not
    depend on the shapes it was computed with; the insertion test and the
    validator therefore agree bit for bit.
    """
    points = np.atleast_2d(points)
    centers = np.atleast_2d(centers)
    acc = np.zeros((points.shape[0], centers.shape[0]))
    for t in range(points.shape[1]):
        diff = points[:, t, None] - centers[None, :, t]
        acc += diff * diff
    return acc


def _min_sq_dist(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    if centers.shape[0] == 0:
        return np.full(points.shape[0], np.inf)
    step = max(1, _CHUNK_CELLS // max(1, points.shape[0]))
    out = np.full(points.shape[0], np.inf)
    for start in range(0, centers.shape[0], step):
        np.minimum(out, sq_dists(points, centers[start:start + step]).min(axis=1), out=out)
    return out


class _Centers:
    """Growable centre array."""

    def __init__(self, n):
        self._buf = np.empty((64, n))
        self.size = 0

    def append(self, x):
        if self.size == self._buf.shape[0]:
            self._buf = np.concatenate([self._buf, np.empty_like(self._buf)])
        self._buf[self.size] = x
        self.size += 1

    @property
    def array(self):
        return self._buf[: self.size]


def _rsa(cfg: PackingConfig, r0: float, gen: np.random.Generator):
    thr = 4.0 * r0 * r0
    lo, hi = cfg.c_min, cfg.A
    centers = _Centers(cfg.n)
    run = 0          # current streak of rejections
    examined = 0     # candidates looked at, in stream order
    longest = 0      # longest streak that ended in an acceptance
    while True:
        cand = lo + (hi - lo) * gen.random((_BATCH, cfg.n))
        ok = _min_sq_dist(cand, centers.array) >= thr
        k = 0
        while k < _BATCH:
            hits = np.flatnonzero(ok[k:])
            gap = int(hits[0]) if hits.size else _BATCH - k
            if run + gap >= cfg.stop_K:
                examined += cfg.stop_K - run
                return centers.array.copy(), {"examined": examined, "longest_run": longest,
                                              "capped": False}
            run += gap
            examined += gap
            if not hits.size:
                break
            j = k + gap
            centers.append(cand[j])
            examined += 1
            longest = max(longest, run)
            run = 0
            if cfg.max_codewords is not None and centers.size >= cfg.max_codewords:
                return centers.array.copy(), {"examined": examined, "longest_run": longest,
                                              "capped": True}
            if j + 1 < _BATCH:
                ok[j + 1:] &= sq_dists(cand[j + 1:], cand[j:j + 1])[:, 0] >= thr
            k = j + 1


def construct_saturated(cfg: PackingConfig) -> Codebook:
    """Random sequential insertion of ``2 r0``-separated centres.

    Deterministic in ``cfg.seed``.  When ``cfg.repair_trials > 0`` the
    coverage check/repair loop runs afterwards until a check finds no
    uncovered point.
    """
    r0 = cfg.r0
    if not r0 < cfg.A * math.sqrt(cfg.n):
        raise PreconditionError(f"r0={r0:g} does not fit in a cube of edge {cfg.A:g}")
    gen = rngmod.generator(rngmod.child(cfg.seed, 0))
    centers, stats = _rsa(cfg, r0, gen)
    cb = Codebook(centers, r0=r0, A=cfg.A, a=cfg.a, b=cfg.b, seed=cfg.seed,
                  stop_K=cfg.stop_K, c_min=cfg.c_min, method="rsa",
                  certificate={"M_rsa": centers.shape[0], **stats})
    if cfg.repair_trials > 0 and not stats["capped"]:
        cb = repair_saturation(cb, cfg.repair_trials, rngmod.child(cfg.seed, 1))
    assert_min_distance(cb)
    return cb


def _sample_box(gen, n, lo, hi, size):
    return lo + (hi - lo) * gen.random((size, n))


def saturation_check(cb: Codebook, trials: int, rng, region: str = "admissible") -> dict:
    """Monte Carlo coverage certificate.

    Samples ``trials`` uniform points and counts those within ``2 r0`` of some
    centre.  ``region`` selects the admissible centre box ``[c_min, A]^n``
    (default) or the full cube.  Uncovered points are returned as witnesses.
    """
    if trials < 1:
        raise PreconditionError("trials must be at least 1")
    gen = rng if isinstance(rng, np.random.Generator) else rngmod.generator(rng)
    lo = cb.c_min if region == "admissible" else 0.0
    thr = 4.0 * cb.r0 * cb.r0
    covered = 0
    witnesses = []
    step = 8192
    for start in range(0, trials, step):
        pts = _sample_box(gen, cb.n, lo, cb.A, min(step, trials - start))
        d = _min_sq_dist(pts, cb.codewords)
        mask = d <= thr
        covered += int(mask.sum())
        witnesses.extend(pts[~mask])
    return {"trials": trials, "covered": covered, "uncovered": trials - covered,
            "covered_fraction": covered / trials, "region": region,
            "witnesses": np.array(witnesses).reshape(-1, cb.n)}


def repair_saturation(cb: Codebook, trials: int, seed, max_rounds: int = 1000) -> Codebook:
    """Insert uncovered witnesses until a coverage check comes back clean."""
    thr = 4.0 * cb.r0 * cb.r0
    centers = cb.codewords.copy()
    inserted = 0
    rounds = 0
    for rounds in range(1, max_rounds + 1):
        probe = Codebook(centers, r0=cb.r0, A=cb.A, c_min=cb.c_min)
        cert = saturation_check(probe, trials, rngmod.child(seed, rounds))
        if cert["uncovered"] == 0:
            break
        for w in cert["witnesses"]:
            if _min_sq_dist(w[None, :], centers)[0] >= thr:
                centers = np.vstack([centers, w])
                inserted += 1
    else:
        logger.warning("saturation repair stopped after %d rounds", max_rounds)
    certificate = dict(cb.certificate)
    certificate.update({"repair_trials": trials, "repair_rounds": rounds,
                        "repair_inserted": inserted, "final_uncovered": cert["uncovered"]})
    return Codebook(centers, r0=cb.r0, A=cb.A, a=cb.a, b=cb.b, seed=cb.seed,
                    stop_K=cb.stop_K, c_min=cb.c_min, method=cb.method + "+repair",
                    certificate=certificate)


def density_estimate(cb: Codebook, trials: int, rng) -> dict:
    """Monte Carlo estimate of ``Vol(union of r0-balls within the cube) / A^n``."""
    if trials < 1:
        raise PreconditionError("trials must be at least 1")
    gen = rng if isinstance(rng, np.random.Generator) else rngmod.generator(rng)
    thr = cb.r0 * cb.r0
    hits = 0
    step = 8192
    for start in range(0, trials, step):
        pts = _sample_box(gen, cb.n, 0.0, cb.A, min(step, trials - start))
        hits += int((_min_sq_dist(pts, cb.codewords) <= thr).sum())
    est = hits / trials
    return {"density": est, "stderr": math.sqrt(est * (1.0 - est) / trials), "trials": trials,
            "lower": 2.0 ** (-cb.n), "upper": 2.0 ** (-0.599 * cb.n)}


def min_pairwise_sq_distance(codewords: np.ndarray) -> float:
    cw = np.asarray(codewords, dtype=float)
    best = np.inf
    for i in range(cw.shape[0] - 1):
        best = min(best, float(sq_dists(cw[i + 1:], cw[i:i + 1]).min()))
    return best


def assert_min_distance(cb: Codebook) -> None:
    if cb.M >= 2 and not min_pairwise_sq_distance(cb.codewords) >= 4.0 * cb.r0 * cb.r0:
        raise CodebookFormatError("codewords closer than 2*r0", invariant="min_distance")


def validate_codebook(cb: Codebook, params: Optional[ChannelParams] = None) -> None:
    """Raise :class:`CodebookFormatError` naming the first violated invariant."""
    cw = cb.codewords
    if not np.all(np.isfinite(cw)):
        raise CodebookFormatError("non-finite coordinate", invariant="finite")
    if np.any(cw < 0) or np.any(cw > cb.A):
        raise CodebookFormatError("coordinate outside [0, A]", invariant="cube")
    if params is not None:
        if cb.A > params.A:
            raise CodebookFormatError("codebook cube exceeds min(P_max, P_ave)",
                                      invariant="amplitude")
        if np.any(cw > params.P_max):
            raise CodebookFormatError("peak constraint violated", invariant="peak")
        if np.any(cw.mean(axis=1) > params.P_ave):
            raise CodebookFormatError("average constraint violated", invariant="average")
    assert_min_distance(cb)


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def save_codebook(cb: Codebook, path) -> None:
    """Write the versioned text format (17 significant digits, round-trip exact)."""
    head = " ".join(f"{k}={_fmt(v) if isinstance(v, float) else v}" for k, v in cb.header().items())
    lines = [f"# {_MAGIC} {head}"]
    lines.extend(" ".join(_fmt(v) for v in row) for row in cb.codewords)
    Path(path).write_text("\n".join(lines) + "\n")


def load_codebook(path, validate: bool = True) -> Codebook:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith(f"# {_MAGIC} "):
        raise CodebookFormatError(f"{path}: line 1: missing codebook header", invariant="header")
    fields = {}
    for item in text[0][len(f"# {_MAGIC} "):].split():
        key, _, value = item.partition("=")
        fields[key] = value
    try:
        version = int(fields["version"])
        n, M = int(fields["n"]), int(fields["M"])
        A, r0 = float(fields["A"]), float(fields["r0"])
    except (KeyError, ValueError) as exc:
        raise CodebookFormatError(f"{path}: line 1: bad header ({exc})", invariant="header") from exc
    if version != FORMAT_VERSION:
        raise CodebookFormatError(f"{path}: unsupported format version {version}",
                                  invariant="version")
    rows = [line for line in text[1:] if line.strip()]
    if len(rows) != M:
        raise CodebookFormatError(f"{path}: header says M={M} but {len(rows)} rows follow",
                                  invariant="row_count")
    data = np.empty((M, n))
    for k, line in enumerate(rows):
        parts = line.split()
        if len(parts) != n:
            raise CodebookFormatError(f"{path}: line {k + 2}: expected {n} values, got {len(parts)}",
                                      invariant="row_length")
        try:
            data[k] = [float(v) for v in parts]
        except ValueError as exc:
            raise CodebookFormatError(f"{path}: line {k + 2}: {exc}", invariant="number") from exc
    cb = Codebook(data, r0=r0, A=A, a=float(fields.get("a", "nan")), b=float(fields.get("b", "nan")),
                  seed=int(fields.get("seed", 0)), stop_K=int(fields.get("stop_K", 0)),
                  c_min=float(fields.get("c_min", 0.0)), method=fields.get("method", "rsa"))
    if validate:
        validate_codebook(cb)
    return cb
