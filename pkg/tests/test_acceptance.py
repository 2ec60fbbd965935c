"""Acceptance criteria, one test each.

Every test records PASS/FAIL with a short detail line in
``conftest.ACCEPTANCE_RESULTS``; the lines are printed in the terminal
summary. Thresholds are the stated ones and are never relaxed here.
"""

import itertools
import math
import statistics
import time

import mpmath as mp
import numpy as np
import pytest

from conftest import ACCEPTANCE_RESULTS, random_dist
from latecount.analysis import RunConfig, load_inputs, report_json, run_analysis, run_sweep
from latecount.fairwin import fair_win_probability, fair_win_probability_quadrature
from latecount.geodata import DistanceDistribution
from latecount.inference import ResamplePlan, probability_all_geo
from latecount.model import ModelSpec, gip_lower_bound, moment_fair_win, moment_halftime_lead
from latecount.synthetic import SPARSE_REGIONS

# Calibration of the absolute half-time count (criterion 3). About 2.77M valid
# presidential ballots, 57% of them counted at half-time.
VALID_VOTES = 2_771_330
HALFTIME_FRACTION = 0.57
SHARE_H, SHARE_N = 0.41, 0.46
TARGET_LOG10 = -1770.0


def record(n: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_RESULTS[n] = (bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
    assert ok, detail


def _median_runtime(fn, repeats=7):
    fn()  # warm-up
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def eq3_oracle(v_H: int, v_N: int, dps: int = 40):
    """P(Y > Z) for Y ~ N(p, p(1-p)/v), Z ~ N(q, q(1-q)/v) by mpmath quadrature over Z."""
    with mp.workdps(dps):
        v = mp.mpf(v_H + v_N)
        p, q = v_H / v, v_N / v
        sp, sq = mp.sqrt(p * (1 - p) / v), mp.sqrt(q * (1 - q) / v)

        def integrand(z):
            y = (q + sq * z - p) / sp
            return mp.erfc(y / mp.sqrt(2)) / 2 * mp.npdf(z)

        # the product peaks where both factors balance; split the range there
        total = sp**2 + sq**2
        mode = -sq * (q - p) / total
        width = sp / mp.sqrt(total)
        pts = [-mp.inf] + [mode + k * width for k in (-30, -8, -2, 0, 2, 8, 30)] + [mp.inf]
        pts = sorted(set(pts + [mp.mpf(-10), mp.mpf(0), mp.mpf(10)]))
        return mp.quad(integrand, pts)


def test_criterion_1_symmetry():
    worst_err, worst_time = 0.0, 0.0
    for v in (2, 100, 10**6):
        half = v // 2
        p = fair_win_probability(half, half).probability
        worst_err = max(worst_err, abs(p - 0.5))
        worst_time = max(worst_time, _median_runtime(lambda: fair_win_probability(half, half)))
    ok = worst_err <= 1e-12 and worst_time < 1e-3
    record(1, ok, f"max |P - 0.5| = {worst_err:.1e}, slowest call {worst_time * 1e3:.3f} ms")


def test_criterion_2_oracle_equivalence():
    gen = np.random.default_rng(2)
    worst_rel = 0.0
    for _ in range(100):
        v_H, v_N = (int(k) for k in gen.integers(1, 501, 2))  # v = v_H + v_N <= 1000
        closed = fair_win_probability(v_H, v_N)
        with mp.workdps(40):
            oracle = eq3_oracle(v_H, v_N)
            rel = abs(mp.power(10, mp.mpf(closed.log10_value) - mp.log10(oracle)) - 1)
        worst_rel = max(worst_rel, float(rel))

    worst_log = 0.0
    for _ in range(100):
        v = int(round(10 ** gen.uniform(3.0, 7.0)))
        v_H = int(round(v * gen.uniform(0.05, 0.95)))
        v_N = v - v_H
        a = fair_win_probability(v_H, v_N).log10_value
        b = fair_win_probability_quadrature(v_H, v_N).log10_value
        # relative in log10; the 1e-9 floor means 1e-12 absolute when log10 rounds to 0
        worst_log = max(worst_log, abs(a - b) / max(abs(b), 1e-9))
    ok = worst_rel <= 0.01 and worst_log <= 1e-3
    record(2, ok, f"v<=1e3 worst relative error {worst_rel:.2e}; v<=1e7 worst log10 relative error {worst_log:.2e}")


def test_criterion_3_paper_scale():
    counted = HALFTIME_FRACTION * VALID_VOTES
    # two-candidate count whose z-score equals that of the raw-share test on `counted` ballots
    p, q = SHARE_H / (SHARE_H + SHARE_N), SHARE_N / (SHARE_H + SHARE_N)
    raw_var = SHARE_H * (1 - SHARE_H) + SHARE_N * (1 - SHARE_N)
    v_eff = counted * (SHARE_H + SHARE_N) ** 2 * (2 * p * q) / raw_var
    v_H, v_N = round(v_eff * p), round(v_eff * q)
    t0 = time.perf_counter()
    result = fair_win_probability(v_H, v_N)
    elapsed = time.perf_counter() - t0
    rel = abs(result.log10_value - TARGET_LOG10) / abs(TARGET_LOG10)
    ok = rel <= 0.20 and elapsed < 1.0
    record(3, ok, f"v_H={v_H}, v_N={v_N} -> P = {result} ({rel:.1%} from -1770), {elapsed * 1e3:.2f} ms")


def test_criterion_4_jensen_identity():
    gen = np.random.default_rng(4)
    dists = [random_dist(gen) for _ in range(1000)]
    t0 = time.perf_counter()
    bounds = [gip_lower_bound(d) for d in dists]
    elapsed = time.perf_counter() - t0
    worst, all_nonpositive = 0.0, True
    for d, lb in zip(dists, bounds):
        x = d.x.astype(float)
        w = d.weights / math.fsum(d.weights)
        mean = math.fsum(w * x)
        var = math.fsum(w * (x - mean) ** 2)
        expected = var / (mean - d.x_max)
        worst = max(worst, abs(lb - expected) / abs(expected))
        all_nonpositive &= lb <= 0.0
    ok = worst <= 1e-9 and all_nonpositive and elapsed < 5.0
    record(4, ok, f"worst relative error {worst:.1e}, all <= 0: {all_nonpositive}, {elapsed:.2f} s")


def _brute_force_fraction(dist: DistanceDistribution, size: int) -> float:
    hits = total = 0
    for combo in itertools.combinations(range(len(dist)), size):
        xs = [float(dist.x[i]) for i in combo]
        ws = [float(dist.weights[i]) for i in combo]
        x_max = max(xs)
        fair = math.fsum(w * (x - x_max / 2) for x, w in zip(xs, ws))
        lead = math.fsum(w * (x - x_max / 2) * (x - x_max) for x, w in zip(xs, ws))
        hits += fair > 0 and lead > 0
        total += 1
    return hits / total


def test_criterion_5_exhaustive_subsample():
    gen = np.random.default_rng(5)
    plan = ResamplePlan("subsample", 5, 10_000, 42)
    mismatches, cases = 0, 0
    t0 = time.perf_counter()
    for _ in range(200):
        n = int(gen.integers(5, 11))
        dist = random_dist(gen, n)
        est = probability_all_geo(dist, plan)
        expected = _brute_force_fraction(dist, 5)
        cases += 1
        mismatches += not (est.exhaustive and est.replicates == math.comb(n, 5) and est.fraction == expected)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10.0
    record(5, ok, f"{cases - mismatches}/{cases} distributions match enumeration exactly, {elapsed:.2f} s")


def test_criterion_6_closed_vs_general_form():
    gen = np.random.default_rng(6)
    agree = 0
    for _ in range(1000):
        dist = random_dist(gen)
        spec = ModelSpec("linear", {"m": float(gen.uniform(0.01, 0.9))}, c=0.5)
        closed = moment_fair_win(dist) > 0 and moment_halftime_lead(dist) > 0
        h = spec.h(dist.x, dist.x_max)
        g = spec.g(dist.x, dist.x_max)
        general = dist.expect(h) > 0 and dist.expect(g * h) < 0
        agree += closed == general
    record(6, agree == 1000, f"{agree}/1000 random distributions agree")


@pytest.fixture(scope="module")
def fixture_reports(fixture_paths):
    """Serial reports for N in {20, 50, 100}, nvc in {1, 3, 5}, B = 10^4, seed 42."""
    reports, t0 = {}, time.perf_counter()
    for size in (20, 50, 100):
        cfg = RunConfig(*fixture_paths, nvc=(1, 3, 5), plan=ResamplePlan("subsample", size, 10_000, 42))
        reports[size] = run_analysis(cfg)
    return reports, time.perf_counter() - t0


def test_criterion_7_fixture_pattern(fixture_reports):
    reports, elapsed = fixture_reports
    country = [c["prong3"]["fraction"] for r in reports.values() for c in r["cells"] if c["scope"] == "country"]
    sparse = {
        (c["unit"], c["nvc"]): c["prong3"]["fraction"]
        for c in reports[20]["cells"]
        if c["unit"] in SPARSE_REGIONS and c["prong3"] is not None
    }
    best = max(sparse, key=sparse.get)
    ok = max(country) < 1e-4 and sparse[best] > 0.01 and elapsed < 60.0
    record(7, ok, f"country prong-3 max {max(country):.2e}; sparse max {sparse[best]:.3f} at {best[0]} "
                  f"nvc={best[1]}; 3 sample sizes x nvc {{1,3,5}} in {elapsed:.1f} s")


def test_criterion_8_determinism(fixture_paths, fixture_reports):
    reports, _ = fixture_reports
    cfg = RunConfig(*fixture_paths)  # default plan: subsample N=20, B=10^4, seed 42
    first = report_json(reports[20])
    second = report_json(run_analysis(cfg))
    parallel = report_json(run_analysis(cfg, workers=4))
    ok = first == second == parallel
    record(8, ok, f"serial/serial/parallel byte-identical: {ok} ({len(first)} bytes)")


def test_criterion_9_sweeps(fixture_paths):
    inputs = load_inputs(RunConfig(*fixture_paths))
    units = ["country"] + [r.id for r in inputs.regions]
    flagged = total = 0
    for nvc in (1, 3, 5):
        for unit in units:
            rows = run_sweep(inputs, ["linear", "exp1", "exp2"], nvc, unit=unit)
            flagged += sum(r.flag for r in rows)
            total += len(rows)
    record(9, flagged == 0, f"{flagged} of {total} grid points flagged across {len(units)} units x nvc {{1,3,5}}")
