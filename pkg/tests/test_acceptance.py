"""Acceptance suite: one test, and one printed PASS/FAIL line, per criterion.

Run alone with ``pytest tests/test_acceptance.py -v`` or as a script.
"""

import math
import time

import mpmath
import numpy as np
import pytest
from scipy import stats

from binomial_di import rng as rngmod
from binomial_di.analysis import (
    analytic_bounds,
    default_c_ref,
    mc_type1,
    mc_type2,
    metric_moments,
)
from binomial_di.bounds import limit_tolerance, rate_lower, rate_upper
from binomial_di.channel import ChannelParams, log_pmf, sample_batch
from binomial_di.codec import EXACT_FLOOR, DecoderConfig, decoding_metric
from binomial_di.converse import (
    ConverseConfig,
    converse_contradiction_demo,
    gamma_ratio_bounds,
    log_le,
    sandwich_sweep,
)
from binomial_di.experiments import ExperimentConfig, run_bounds, run_simulate, run_verify
from binomial_di.packing import (
    PackingConfig,
    construct_saturated,
    count_lower_bound,
    density_estimate,
    sq_dists,
)

_lines = []


def report(number, passed, detail, capsys=None):
    line = f"ACCEPTANCE {number:2d} {'PASS' if passed else 'FAIL'}: {detail}"
    _lines.append(line)
    if capsys is not None:
        with capsys.disabled():
            print("\n" + line)
    else:
        print(line)
    return passed


# 1 ---------------------------------------------------------------- rate limits

def check_rate_limits():
    n, b = 10**6, 1e-3
    tol = limit_tolerance(n)
    lo = rate_lower(n, 1.0, 1.0, b)
    hi = rate_upper(n, 1.0, b)
    gaps_lo = [abs(rate_lower(10**k, 1.0, 1.0, b) - 0.25) for k in range(3, 9)]
    gaps_hi = [abs(rate_upper(10**k, 1.0, b) - 1.5) for k in range(3, 9)]
    decreasing = all(x > y for x, y in zip(gaps_lo, gaps_lo[1:])) and all(
        x > y for x, y in zip(gaps_hi, gaps_hi[1:]))
    ok = abs(lo - 0.25) <= tol and abs(hi - 1.5) <= tol and decreasing
    return ok, (f"rate_lower(1e6)={lo:.4f} rate_upper(1e6)={hi:.4f} tol={tol:.4f} "
                f"gaps strictly decreasing over 1e3..1e8: {decreasing}")


# 2 ------------------------------------------------------------ zero-mean metric

def check_zero_mean():
    params = ChannelParams.with_amplitude(1.0, 0.3, 10.0)
    n, trials = 64, 10**5
    gen = rngmod.generator(rngmod.child(2, 0))
    c = gen.uniform(0.05, 1.0, n)
    y = sample_batch(c, params, rngmod.generator(rngmod.child(2, 1)), trials)
    t = decoding_metric(y, c, params, EXACT_FLOOR)
    mean, se = float(t.mean()), float(t.std(ddof=1) / math.sqrt(trials))
    exact_mean, _ = metric_moments(c, params, EXACT_FLOOR)
    ok = abs(mean) <= 4 * se and exact_mean == 0.0
    return ok, f"sample mean {mean:.5f} stderr {se:.5f} (|mean|/se={abs(mean) / se:.2f}); exact mean {exact_mean!r}"


# 3, 4 ---------------------------------------------------- type I / II bounds
#
# p = 0.5 and T_s = 20 keep the coupled radius small enough that many
# codewords fit in [c_min, A]^n; insertion is capped at 20 codewords.

ERR_PARAMS = ChannelParams.with_amplitude(1.0, 0.5, 20.0)
B_ERR = 0.25


def _error_codebook(n):
    cfg = PackingConfig.from_channel(n, B_ERR, ERR_PARAMS, seed=31, max_codewords=20)
    return construct_saturated(cfg)


def check_type1():
    worst = []
    for n in (64, 256):
        cb = _error_codebook(n)
        assert cb.M >= 20
        dec = DecoderConfig.auto(n, ERR_PARAMS.A, B_ERR)
        ab = analytic_bounds(ERR_PARAMS, n, B_ERR, default_c_ref(cb))
        for i in range(1, cb.M + 1):
            est = mc_type1(i, cb, dec, ERR_PARAMS, 10**4, rngmod.child(3, n, i))
            _, var = metric_moments(cb.codeword(i), ERR_PARAMS, EXACT_FLOOR)
            bound = min(ab.type1_bound, var / dec.delta_n**2)
            worst.append((est.estimate - bound - 3 * est.stderr, n, i, est.estimate, bound))
    w = max(worst)
    return w[0] <= 0, (f"{len(worst)} codewords over n in (64, 256); worst margin at n={w[1]} i={w[2]}: "
                       f"estimate {w[3]:.4f} vs bound {w[4]:.4g}")


def check_type2():
    rows = []
    gen = rngmod.generator(rngmod.child(4, 0))
    cb = _error_codebook(64)
    dec = DecoderConfig.auto(64, ERR_PARAMS.A, B_ERR)
    ab = analytic_bounds(ERR_PARAMS, 64, B_ERR, default_c_ref(cb))
    pairs = set()
    while len(pairs) < 50:
        i, j = (int(v) + 1 for v in gen.choice(cb.M, 2, replace=False))
        pairs.add((i, j))
    for k, (i, j) in enumerate(sorted(pairs)):
        d = math.sqrt(float(sq_dists(cb.codeword(i), cb.codeword(j))[0, 0]))
        assert d >= 2 * cb.r0
        est = mc_type2(i, j, cb, dec, ERR_PARAMS, 10**4, rngmod.child(4, 1, k))
        rows.append((est.estimate - ab.type2_bound - 3 * est.stderr, i, j, est.estimate))
    w = max(rows)
    return w[0] <= 0, (f"{len(rows)} pairs at distance >= 2r0={2 * cb.r0:.3f}; max estimate "
                       f"{max(r[3] for r in rows):.4f} vs zeta0+zeta1={ab.type2_bound:.4g}")


# 5 ------------------------------------------------------------ packing density
#
# One parameterisation for every n: radius 0.3 in the unit cube, centres over
# the whole cube, coverage repair with 10^4 points per round.

DENSITY_R0 = 0.3


def check_density():
    parts, ok = [], True
    for n in range(2, 9):
        b = 0.25
        a = DENSITY_R0**2 / n ** ((1 + b) / 2)
        cb = construct_saturated(PackingConfig(n=n, a=a, b=b, A=1.0, seed=5, c_min=0.0,
                                               repair_trials=10**4))
        d = density_estimate(cb, 10**6, rngmod.child(5, n))
        lower = 2.0**-n * (1 - 3 * d["stderr"])
        upper = 2.0 ** (-0.599 * n) * (1 + 3 * d["stderr"])
        count_ok = math.log2(cb.M) >= count_lower_bound(n, 1.0, cb.r0)
        good = lower <= d["density"] <= upper and count_ok
        ok &= good
        parts.append(f"n={n} M={cb.M} (floor {2 ** count_lower_bound(n, 1.0, cb.r0):.1f}) "
                     f"dens={d['density']:.4f} in [{lower:.4f},{upper:.4f}]{'' if good else ' X'}")
    return ok, "; ".join(parts)


# 6 ---------------------------------------------------------------- Gamma ratio

def check_gamma_ratio():
    gen = rngmod.generator(rngmod.child(6, 0))
    mpmath.mp.dps = 30
    bad = 0
    disagree = 0
    count = 10**5
    for _ in range(count):
        a, b = sorted(gen.uniform(0.0, 100.0, 2))
        lo, hi, ex = gamma_ratio_bounds(float(a), float(b))
        A, B = mpmath.mpf(float(a)), mpmath.mpf(float(b))
        ref = float(mpmath.exp((mpmath.loggamma(B) - mpmath.loggamma(A)) / (B - A)))
        bad += not (log_le(lo, ref) and log_le(ref, hi) and log_le(lo, ex) and log_le(ex, hi))
        disagree += abs(math.log(ex) - math.log(ref)) > 1e-8
    return bad == 0 and disagree == 0, (f"{count} pairs: {bad} outside [lower, upper], "
                                        f"{disagree} where double precision and mpmath differ by >1e-8")


# 7 ---------------------------------------------------------- converse sandwich

def check_sandwich():
    params = ChannelParams.with_amplitude(1.0, 0.3, 10.0)
    rows = sandwich_sweep(1000, rngmod.child(7, 0), params, 0.1)
    direct = sum(r["direct_match"] for r in rows)
    kap = sum(r["kappa_holds"] for r in rows)
    sand = sum(r["sandwich_holds"] for r in rows)
    cases = {c: sum(r["case"] == c for r in rows) for c in ("case1", "case2", "case3")}
    ok = direct == kap == sand == len(rows)
    return ok, (f"{len(rows)} instances {cases}: pmf match {direct}, in [1-kappa,1+kappa] {kap}, "
                f"Gamma bracket {sand}; kappa range "
                f"{min(r['kappa'] for r in rows):.1f}..{max(r['kappa'] for r in rows):.1f}")


# 8 --------------------------------------------------------- contradiction demo

def check_contradiction():
    params = ChannelParams.with_amplitude(1.0, 0.3, 10.0)
    n, b = 64, 0.1
    ccfg = ConverseConfig.auto(params, n, b)
    dec = DecoderConfig.auto(n, params.A, b)
    gen = rngmod.generator(rngmod.child(8, 0))
    results = []
    for k in range(5):
        c1 = gen.uniform(0.05, 0.95, n)
        c2 = c1 + gen.choice([-1.0, 1.0], n) * ccfg.eps_prime / 2
        rep = converse_contradiction_demo(c1, c2, params, dec, ccfg, 10**4, rngmod.child(8, 1, k))
        results.append(rep)
    ok = all(r["holds"] for r in results)
    low = min(r["sum"] for r in results)
    return ok, (f"{len(results)} pairs at l-inf gap eps'/2={ccfg.eps_prime / 2:.4g}: min P_e1+P_e2 "
                f"{low:.4f} vs 1-kappa={1 - ccfg.kappa:.2f}")


# 9 --------------------------------------------------------- channel correctness

def check_channel():
    worst = 0.0
    for N in range(0, 61):
        for p in np.linspace(0.01, 0.99, 25):
            total = math.fsum(np.exp(log_pmf(np.full(N + 1, N), float(p), np.arange(N + 1))))
            worst = max(worst, abs(total - 1.0))
    params = ChannelParams.with_amplitude(2.0, 0.3, 10.0)
    y = sample_batch(np.array([2.0]), params, rngmod.generator(rngmod.child(9, 0)), 10**6)[:, 0]
    obs = np.bincount(y, minlength=21)
    exp = 10**6 * np.exp(log_pmf(np.full(21, 20), 0.3, np.arange(21)))
    cut = int(np.max(np.flatnonzero(exp >= 5)))
    pval = stats.chisquare(np.append(obs[:cut], obs[cut:].sum()),
                           np.append(exp[:cut], exp[cut:].sum())).pvalue
    return worst <= 1e-10 and pval >= 1e-3, f"max |sum pmf - 1| {worst:.2e}; chi-square p-value {pval:.4f}"


# 10 ----------------------------------------------------------- reproducibility

def check_reproducibility(tmp):
    base = dict(channel={"p": 0.5, "T_s": 20.0, "P_max": 1.0, "P_ave": 1.0},
                packing={"n": 16, "b": 0.25, "max_codewords": 12},
                simulate={"type1_messages": 6, "type2_pairs": 10},
                verify={"gamma_pairs": 2000, "sandwich_instances": 60},
                trials=6000, seed=1234)
    files = {}
    for tag, threads in (("a", 1), ("b", 1), ("c", 4)):
        d = dict(base, threads=threads, out=str(tmp / tag))
        cfg = ExperimentConfig.from_dict(d)
        run_simulate(cfg)
        run_bounds(cfg)
        run_verify(cfg)
        files[tag] = {name: (tmp / tag / name).read_bytes()
                      for name in ("results.csv", "bounds.csv", "verify.csv")}
    same = files["a"] == files["b"] == files["c"]
    return same, f"results/bounds/verify CSVs byte-identical across reruns and threads 1 vs 4: {same}"


CHECKS = [
    (1, check_rate_limits),
    (2, check_zero_mean),
    (3, check_type1),
    (4, check_type2),
    (5, check_density),
    (6, check_gamma_ratio),
    (7, check_sandwich),
    (8, check_contradiction),
    (9, check_channel),
]


@pytest.mark.parametrize("number,check", CHECKS, ids=[f"criterion_{k}" for k, _ in CHECKS])
def test_criterion(number, check, capsys):
    start = time.perf_counter()
    ok, detail = check()
    report(number, ok, f"{detail} [{time.perf_counter() - start:.1f}s]", capsys)
    assert ok, detail


def test_criterion_10(tmp_path, capsys):
    start = time.perf_counter()
    ok, detail = check_reproducibility(tmp_path)
    report(10, ok, f"{detail} [{time.perf_counter() - start:.1f}s]", capsys)
    assert ok, detail


if __name__ == "__main__":
    import tempfile
    from pathlib import Path

    for number, check in CHECKS:
        report(number, *check())
    with tempfile.TemporaryDirectory() as tmp:
        report(10, *check_reproducibility(Path(tmp)))
