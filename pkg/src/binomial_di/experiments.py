"""Experiment configuration, orchestration and persistence.

Every result table is a pure function of the configuration (including its
seed); the thread count only changes how Monte Carlo blocks are scheduled.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from . import analysis, bounds, converse, packing
from . import rng as rngmod
from .channel import ChannelParams, moment_bound_sweep
from .codec import EXACT_FLOOR, DecoderConfig
from .exceptions import BinomialDIError, CodebookFormatError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class ConfigError(BinomialDIError, ValueError):
    """Invalid configuration; the message names the offending line when known."""


@dataclass
class ChannelSection:
    p: float = 0.3
    T_s: float = 10.0
    P_max: float = 1.0
    P_ave: float = 1.0


@dataclass
class PackingSection:
    n: int = 8
    b: float = 0.25
    a: Optional[float] = None  # None couples a to the channel
    stop_K: Optional[int] = None
    c_min: Optional[float] = None
    repair_trials: int = 0
    max_codewords: Optional[int] = None


@dataclass
class DecoderSection:
    metric_mode: str = EXACT_FLOOR
    delta_n: Optional[float] = None  # None derives A / n^((1-b)/2)


@dataclass
class SimulateSection:
    codebook: Optional[str] = None
    type1_messages: Optional[int] = None  # None means every message
    type2_pairs: int = 20


@dataclass
class VerifySection:
    codebook: Optional[str] = None
    gamma_pairs: int = 10_000
    moment_N_max: int = 60
    saturation_trials: int = 10_000
    saturation_tolerance: float = 0.01
    sandwich_instances: int = 300
    demo_trials: int = 4096


_SECTIONS = {"channel": ChannelSection, "packing": PackingSection, "decoder": DecoderSection,
             "simulate": SimulateSection, "verify": VerifySection}


@dataclass
class ExperimentConfig:
    channel: ChannelSection = field(default_factory=ChannelSection)
    packing: PackingSection = field(default_factory=PackingSection)
    decoder: DecoderSection = field(default_factory=DecoderSection)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    verify: VerifySection = field(default_factory=VerifySection)
    trials: int = 1000
    seed: int = 0
    threads: int = 1
    out: str = "out"
    n_grid: list = field(default_factory=lambda: [1000, 10_000, 100_000, 1_000_000])
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: dict, text: Optional[str] = None) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        kwargs: dict[str, Any] = {}
        top = {f.name for f in dataclasses.fields(cls)}
        for key, value in data.items():
            if key not in top:
                raise ConfigError(_locate(text, key, f"unknown config key {key!r}"))
            if key in _SECTIONS:
                if not isinstance(value, dict):
                    raise ConfigError(_locate(text, key, f"section {key!r} must be an object"))
                names = {f.name for f in dataclasses.fields(_SECTIONS[key])}
                for sub in value:
                    if sub not in names:
                        raise ConfigError(_locate(text, sub, f"unknown key {key}.{sub}"))
                kwargs[key] = _SECTIONS[key](**value)
            else:
                kwargs[key] = value
        cfg = cls(**kwargs)
        if cfg.schema_version != SCHEMA_VERSION:
            raise ConfigError(_locate(text, "schema_version",
                                      f"unsupported schema_version {cfg.schema_version}"))
        try:
            cfg.validate()
        except ConfigError as exc:
            field_name = getattr(exc, "field", None)
            raise ConfigError(_locate(text, field_name, str(exc)) if field_name else str(exc)) from None
        return cfg

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}: {exc.msg}") from exc
        return cls.from_dict(data, text)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(Path(path).read_text())

    def validate(self) -> None:
        def bad(name, msg):
            err = ConfigError(msg)
            err.field = name
            raise err

        if not isinstance(self.trials, int) or self.trials < 1:
            bad("trials", "trials must be a positive integer")
        if not isinstance(self.threads, int) or self.threads < 1:
            bad("threads", "threads must be a positive integer")
        if not isinstance(self.seed, int) or self.seed < 0 or self.seed >= 2**64:
            bad("seed", "seed must be an unsigned 64-bit integer")
        if not isinstance(self.n_grid, list):
            bad("n_grid", "n_grid must be a list")
        if self.packing.n < 2:
            bad("n", "packing.n must be at least 2")
        if not 0 < self.packing.b < 1:
            bad("b", "packing.b must lie in (0, 1)")
        if self.simulate.type2_pairs < 0:
            bad("type2_pairs", "type2_pairs must be non-negative")

    def channel_params(self) -> ChannelParams:
        c = self.channel
        return ChannelParams(p=c.p, T_s=c.T_s, P_max=c.P_max, P_ave=c.P_ave)

    def packing_config(self) -> packing.PackingConfig:
        pk = self.packing
        return packing.PackingConfig.from_channel(
            pk.n, pk.b, self.channel_params(), a=pk.a, seed=self.seed, stop_K=pk.stop_K,
            c_min=pk.c_min, repair_trials=pk.repair_trials, max_codewords=pk.max_codewords)

    def decoder_config(self, n: int) -> DecoderConfig:
        A = self.channel_params().A
        if self.decoder.delta_n is None:
            return DecoderConfig.auto(n, A, self.packing.b, self.decoder.metric_mode)
        return DecoderConfig(self.decoder.delta_n, self.decoder.metric_mode, self.packing.b)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON, ignoring fields that cannot change results."""
        d = self.to_dict()
        d.pop("threads")
        d.pop("out")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _locate(text: Optional[str], key: Optional[str], msg: str) -> str:
    if text and key:
        for lineno, line in enumerate(text.splitlines(), 1):
            if f'"{key}"' in line:
                return f"line {lineno}: {msg}"
    return msg


# ---------------------------------------------------------------- persistence

def _fmt(v):
    if isinstance(v, bool) or v is None:
        return str(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def write_csv(path: Path, rows: list[dict]) -> None:
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(v) for k, v in row.items()})
    path.write_text(buf.getvalue())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_hash: str
    version: str
    started: str
    finished: str = ""
    outputs: list = field(default_factory=list)

    def add(self, path: Path) -> None:
        self.outputs.append({"file": path.name, "sha256": _sha256(path), "bytes": path.stat().st_size})

    def write(self, out: Path) -> Path:
        self.finished = _now()
        target = out / "manifest.json"
        write_json(target, dataclasses.asdict(self))
        return target


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class Run:
    """Output directory plus manifest for one command invocation."""

    def __init__(self, command: str, cfg: ExperimentConfig):
        self.out = Path(cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(command=command, config_hash=cfg.digest(), version=__version__,
                                    started=_now())
        self.emit_text("config.json", cfg.to_json())

    def path(self, name: str) -> Path:
        return self.out / name

    def emit_text(self, name: str, text: str) -> Path:
        p = self.path(name)
        p.write_text(text)
        self.manifest.add(p)
        return p

    def emit_csv(self, name: str, rows: list[dict]) -> Path:
        p = self.path(name)
        write_csv(p, rows)
        self.manifest.add(p)
        return p

    def emit_json(self, name: str, obj) -> Path:
        p = self.path(name)
        write_json(p, obj)
        self.manifest.add(p)
        return p

    def finish(self) -> Path:
        return self.manifest.write(self.out)


# ------------------------------------------------------------------ commands

def run_construct(cfg: ExperimentConfig) -> dict:
    cb = packing.construct_saturated(cfg.packing_config())
    run = Run("construct", cfg)
    p = run.path("codebook.txt")
    packing.save_codebook(cb, p)
    run.manifest.add(p)
    cert = {"header": cb.header(), "certificate": cb.certificate,
            "log2_count_lower_bound": packing.count_lower_bound(cb.n, cb.A, cb.r0)}
    run.emit_json("certificate.json", cert)
    run.finish()
    return {"codebook": str(p), "M": cb.M, "n": cb.n}


def _load_or_build(cfg: ExperimentConfig, path: Optional[str]) -> packing.Codebook:
    if path is None:
        return packing.construct_saturated(cfg.packing_config())
    return packing.load_codebook(path)


def _type2_pairs(M: int, count: int, seed) -> list[tuple[int, int]]:
    total = M * (M - 1)
    if count > total:
        raise ConfigError(f"requested {count} type II pairs but only {total} ordered pairs exist")
    if count == 0:
        return []
    gen = rngmod.generator(rngmod.child(seed, 2))
    flat = gen.choice(total, size=count, replace=False)
    pairs = []
    for f in flat.tolist():
        i, r = divmod(f, M - 1)
        j = r if r < i else r + 1
        pairs.append((i + 1, j + 1))
    return pairs


def simulate_rows(cfg: ExperimentConfig, cb: packing.Codebook) -> list[dict]:
    """Type I rows for the first messages and type II rows for sampled pairs."""
    params = cfg.channel_params()
    if cb.n != cfg.packing.n:
        raise ConfigError(f"codebook has n={cb.n} but config says n={cfg.packing.n}")
    try:
        packing.validate_codebook(cb, params)
    except CodebookFormatError as exc:
        raise ConfigError(f"codebook does not fit the channel: {exc}") from exc
    dec = cfg.decoder_config(cb.n)
    c_ref = analysis.default_c_ref(cb)
    ab = analysis.analytic_bounds(params, cb.n, cfg.packing.b, c_ref)
    rows = []
    k1 = cb.M if cfg.simulate.type1_messages is None else min(cb.M, cfg.simulate.type1_messages)
    for k, i in enumerate(range(1, k1 + 1)):
        est = analysis.mc_type1(i, cb, dec, params, cfg.trials, rngmod.child(cfg.seed, 3, k),
                                cfg.threads)
        cheb = analysis.chebyshev_type1(cb.codeword(i), params, dec)
        bound = min(ab.type1_bound, cheb)
        rows.append(_row(est, bound, ab.type1_bound, cheb))
    for k, (i, j) in enumerate(_type2_pairs(cb.M, cfg.simulate.type2_pairs, cfg.seed)):
        est = analysis.mc_type2(i, j, cb, dec, params, cfg.trials, rngmod.child(cfg.seed, 4, k),
                                cfg.threads)
        rows.append(_row(est, ab.type2_bound, ab.type2_bound, math.nan))
    return rows


def _row(est: analysis.ErrorEstimate, bound, analytic, cheb) -> dict:
    return {"kind": est.kind, "i": est.i, "j": est.j, "estimate": est.estimate,
            "stderr": est.stderr, "trials": est.trials, "count": est.count,
            "analytic_bound": analytic, "chebyshev_bound": cheb, "bound": bound,
            "flagged": est.estimate > bound + 3.0 * est.stderr}


def run_simulate(cfg: ExperimentConfig) -> dict:
    cb = _load_or_build(cfg, cfg.simulate.codebook)
    rows = simulate_rows(cfg, cb)
    run = Run("simulate", cfg)
    run.emit_csv("results.csv", rows)
    run.emit_json("results.json", {"rows": rows, "M": cb.M, "n": cb.n})
    run.finish()
    return {"rows": len(rows), "flagged": sum(r["flagged"] for r in rows)}


def bounds_rows(cfg: ExperimentConfig) -> tuple[list[dict], list[dict]]:
    if not cfg.n_grid:
        raise ConfigError("n_grid is empty")
    params = cfg.channel_params()
    a = cfg.packing.a if cfg.packing.a is not None else packing.coupled_a(params)
    rows, terms = [], []
    for n in cfg.n_grid:
        rep = bounds.bound_report(int(n), params.A, a, cfg.packing.b, params.P_max)
        rows.append(rep.row())
        terms.append({"n": int(n), "terms": rep.terms})
    return rows, terms


def run_bounds(cfg: ExperimentConfig) -> dict:
    rows, terms = bounds_rows(cfg)
    run = Run("bounds", cfg)
    run.emit_csv("bounds.csv", rows)
    run.emit_json("bounds.json", {"rows": rows, "breakdown": terms})
    run.finish()
    return {"rows": rows}


def verify_rows(cfg: ExperimentConfig) -> list[dict]:
    """Property suite; each row has ``property``, ``passed`` and a detail string."""
    params = cfg.channel_params()
    rows = []

    def add(name, passed, detail, informational=False):
        rows.append({"property": name, "passed": bool(passed), "informational": informational,
                     "detail": detail})

    gen = rngmod.generator(rngmod.child(cfg.seed, 5))
    worst = 0
    fails = 0
    for _ in range(cfg.verify.gamma_pairs):
        a, b = np.sort(gen.uniform(0.0, 100.0, 2))
        if not 0 < a < b:
            continue
        lo, hi, ex = converse.gamma_ratio_bounds(float(a), float(b))
        fails += not (converse.log_le(lo, ex) and converse.log_le(ex, hi))
    add("gamma_ratio_double_inequality", fails == 0, f"{fails} of {cfg.verify.gamma_pairs} pairs fail")

    sweep = moment_bound_sweep(cfg.verify.moment_N_max)
    bad = sum(not r["holds"] for r in sweep)
    add("binomial_moment_bound", bad == 0, f"{bad} of {len(sweep)} (N, p, k) cells fail")

    cb = None
    try:
        cb = _load_or_build(cfg, cfg.verify.codebook)
        packing.validate_codebook(cb)
        add("codebook_invariants", True, f"M={cb.M} n={cb.n}")
    except CodebookFormatError as exc:
        add("codebook_invariants", False, f"invariant={exc.invariant}: {exc}")

    n, b = cfg.packing.n, cfg.packing.b
    ccfg = converse.ConverseConfig.auto(params, n, b)
    if cb is not None:
        cert = packing.saturation_check(cb, cfg.verify.saturation_trials,
                                        rngmod.child(cfg.seed, 6))
        frac = cert["uncovered"] / cert["trials"]
        add("saturation", frac <= cfg.verify.saturation_tolerance,
            f"uncovered fraction {frac:.4g} over {cert['trials']} points")
        if cb.M >= 2:
            md = converse.min_distance_check(cb, ccfg.eps_prime)
            add("min_distance_linf", md["passed"],
                f"min l-inf {md['min_linf']:.6g} vs eps' {ccfg.eps_prime:.6g}")
        upper = converse.converse_log2_count_upper(cb.n, params.P_max, ccfg.eps_prime)
        add("count_upper_consistency", math.log2(cb.M) <= upper,
            f"log2 M {math.log2(cb.M):.4g} <= {upper:.4g}")

    sweep_rows = converse.sandwich_sweep(cfg.verify.sandwich_instances, rngmod.child(cfg.seed, 7),
                                         ChannelParams.with_amplitude(1.0, params.p, 10.0), 0.1)
    bad = sum(not (r["sandwich_holds"] and r["direct_match"]) for r in sweep_rows)
    add("likelihood_ratio_sandwich", bad == 0, f"{bad} of {len(sweep_rows)} instances fail")

    dec = cfg.decoder_config(n)
    c = np.full(n, 0.5 * params.A)
    same = converse.converse_contradiction_demo(c, c, params, dec, ccfg, cfg.verify.demo_trials,
                                                rngmod.child(cfg.seed, 8), cfg.threads)
    add("contradiction_identical", same["sum"] == 1.0, f"sum {same['sum']!r}")
    near = c + 0.5 * ccfg.eps_prime
    demo = converse.converse_contradiction_demo(c, near, params, dec, ccfg, cfg.verify.demo_trials,
                                                rngmod.child(cfg.seed, 9), cfg.threads)
    add("contradiction_near", demo["holds"],
        f"sum {demo['sum']:.6g} stderr {demo['stderr']:.3g} kappa {demo['kappa']:.4g}")

    for step in converse.bernoulli_steps(params, n, b):
        add(f"bernoulli_{step['step']}", step["holds"],
            f"r={step['r']:.4g} lhs={step['lhs']:.6g} rhs={step['rhs']:.6g}", informational=True)
    return rows


def run_verify(cfg: ExperimentConfig) -> dict:
    rows = verify_rows(cfg)
    run = Run("verify", cfg)
    run.emit_csv("verify.csv", rows)
    run.emit_json("verify.json", {"rows": rows})
    run.finish()
    failed = [r["property"] for r in rows if not r["passed"] and not r["informational"]]
    return {"failed": failed, "rows": rows}
