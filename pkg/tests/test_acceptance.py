"""The fifteen acceptance criteria, each checked through the public API.

Every tolerance and budget is pinned below.  Each test records one
``criterion N: PASS|FAIL`` line, printed in the terminal summary.
"""
import itertools
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from restsens import (
    BernoulliShift,
    ProbabilityVector,
    RankOneSpec,
    RankOneSystem,
    SensitivityParams,
    Stage,
    chacon,
    check_restricted_pairwise,
    check_restricted_sensitive,
    estimate_min_asymptotic_rate,
    min_separating_time_exact,
    witness_rank_one_failure,
    witness_two_sided_failure,
)
from restsens.entropy import SymbolPartition, bernoulli_entropy, brin_katok_estimate, partition_entropy
from restsens.experiments import brute_force_separating_time
from restsens.rank_one import build_columns
from restsens.shifts import disagreement_index
from restsens.suite import run_suite, suite_payload
from restsens.systems import child_seeds, log_measure, product_system, time_bound

F = Fraction
LOG2 = math.log(2)

BUDGET_1_S = 10.0
BUDGET_3_S = 60.0
BUDGET_5_S = 60.0
BUDGET_8_S = 5.0
RATE_MARGIN_2 = 1e-6
RATE_REL_TOL_5 = 0.05
RATE_HORIZON_5 = 10**6
ENTROPY_SLACK_6 = 0.02
RATE_MARGIN_11 = 1e-6
BK_N_12 = 10**4
BK_TARGET_12 = 0.6365
BK_REL_TOL_12 = 0.02
ORACLE_MAX_LENGTH_13 = 12
SAMPLES_14 = 1000
SUITE_SEED_15 = 2024

UNIFORM = ProbabilityVector.uniform(2)
THIRDS = ProbabilityVector((F(1, 3), F(2, 3)))


def record(n: int, ok: bool, detail: str):
    ACCEPTANCE_LINES.append(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    print(ACCEPTANCE_LINES[-1])
    assert ok, detail


def dyadic(lo, hi):
    return [F(1, 2**k) for k in range(lo, hi + 1)]


def test_criterion_01_uniform_pairwise_time_is_disagreement_index():
    shift = BernoulliShift(UNIFORM)
    t0 = time.perf_counter()
    v = check_restricted_pairwise(shift, SensitivityParams(F(1, 2), 1 / LOG2), 10**4, seed=1)
    dt = time.perf_counter() - t0
    equal = sum(t.time == disagreement_index(t.point, t.other) for t in v.trials)
    within = sum(t.time is not None and t.time <= t.bound for t in v.trials)
    n = len(v.trials)
    ok = n > 0 and equal == within == n and dt <= BUDGET_1_S
    record(1, ok, f"{equal}/{n} times equal I, {within}/{n} within bound, {v.excluded} excluded, {dt:.2f}s")


def test_criterion_02_nonuniform_pairwise():
    shift = BernoulliShift(THIRDS)
    a = -1 / math.log(2 / 3) + RATE_MARGIN_2
    v = check_restricted_pairwise(shift, SensitivityParams(F(1, 2), a), 10**4, seed=2)
    ok = v.pass_fraction == 1.0 and len(v.trials) > 0 and not v.approximate
    record(2, ok, f"pass fraction {v.pass_fraction} over {len(v.trials)} pairs")


def test_criterion_03_two_sided_witnesses():
    shift = BernoulliShift(UNIFORM, two_sided=True)
    sigma = shift.sample_point(3)
    t0 = time.perf_counter()
    good = 0
    cases = list(itertools.product([F(1, 2), F(3, 4), F(9, 10)], [1.0, 5.0, 20.0]))
    for delta, a in cases:
        w = witness_two_sided_failure(shift, sigma, delta, a)
        rows_ok = [r["n"] for r in w.rows] == list(range(w.bound + 1))
        good += w.verified and rows_ok and all(r["max_distance"] < delta for r in w.rows)
    dt = time.perf_counter() - t0
    record(3, good == len(cases) and dt <= BUDGET_3_S, f"{good}/{len(cases)} witnesses verified, {dt:.2f}s")


def test_criterion_04_two_sided_restricted_sensitive():
    shift = BernoulliShift(UNIFORM, two_sided=True)
    params = SensitivityParams(F(1, 4), 1 / (2 * LOG2))
    grid = dyadic(2, 11)
    passed = approx = 0
    for s in child_seeds(4, 100):
        v = check_restricted_sensitive(shift, shift.sample_point(s), params, grid)
        passed += v.passed
        approx += v.approximate
    record(4, passed == 100 and approx == 0, f"{passed}/100 points pass over {len(grid)} radii")


def test_criterion_05_rate_matches_entropy():
    t0 = time.perf_counter()
    worst = 0.0
    for pv in (UNIFORM, THIRDS, ProbabilityVector((F(1, 4), F(1, 4), F(1, 2)))):
        shift = BernoulliShift(pv, horizon=RATE_HORIZON_5)
        h = bernoulli_entropy(pv)
        for s in child_seeds(5, 5):
            r = estimate_min_asymptotic_rate(shift, shift.sample_point(s), RATE_HORIZON_5)
            worst = max(worst, abs(1 / r.estimate - h) / h)
    dt = time.perf_counter() - t0
    record(5, worst <= RATE_REL_TOL_5 and dt <= BUDGET_5_S, f"worst relative error {worst:.4f}, {dt:.2f}s")


def test_criterion_06_passing_rates_bound_partition_entropy():
    shift = BernoulliShift(UNIFORM)
    rates = [k / LOG2 for k in (0.5, 0.75, 1.0, 1.5, 2.0)]
    passing = [a for a in rates
               if check_restricted_pairwise(shift, SensitivityParams(F(1, 2), a), 1000, seed=6).pass_fraction == 1.0]
    est = partition_entropy(shift, SymbolPartition(2), 200, samples=200, seed=6).value
    ok = bool(passing) and all(est >= 1 / a - ENTROPY_SLACK_6 for a in passing)
    record(6, ok, f"{len(passing)}/{len(rates)} rates pass; estimate {est:.4f} vs max 1/a "
                  f"{max(1 / a for a in passing) if passing else math.nan:.4f}")


def test_criterion_07_rate_above_inverse_entropy():
    shift = BernoulliShift(UNIFORM)
    params = SensitivityParams(F(1, 2), 2 / LOG2)
    passed = sum(check_restricted_sensitive(shift, shift.sample_point(s), params, dyadic(1, 10)).passed
                 for s in child_seeds(7, 100))
    record(7, passed == 100, f"{passed}/100 points pass")


def test_criterion_08_chacon_construction():
    t0 = time.perf_counter()
    system = RankOneSystem(chacon())
    cols = build_columns(chacon(), 4)
    heights = [c.height for c in cols]
    disjoint = all(
        a.right <= b.left
        for c in cols
        for a, b in zip(sorted(c.levels, key=lambda iv: iv.left), sorted(c.levels, key=lambda iv: iv.left)[1:])
    )
    rng = np.random.default_rng(8)
    exact = 0
    for _ in range(100):
        n = int(rng.integers(1, 5))
        idx = sorted(set(int(i) for i in rng.integers(1, cols[n].height, size=int(rng.integers(1, 20)))))
        E = [cols[n].levels[i] for i in idx]
        pre = [iv for lv in E for iv in system.transform_interval(lv, -1)[0]]
        # T maps level i-1 onto level i, so the preimage is known in closed form
        expected = sorted((cols[n].levels[i - 1] for i in idx), key=lambda iv: iv.left)
        exact += (sum(iv.length for iv in pre) == sum(iv.length for iv in E)
                  and sorted(pre, key=lambda iv: iv.left) == expected)
    dt = time.perf_counter() - t0
    ok = heights == [1, 4, 13, 40, 121] and disjoint and exact == 100 and dt <= BUDGET_8_S
    record(8, ok, f"heights {heights}, disjoint {disjoint}, {exact}/100 unions invariant, {dt:.2f}s")


def test_criterion_09_chacon_witness():
    system = RankOneSystem(chacon())
    details, ok = [], True
    for delta, a in ((0.01, 1.0), (0.05, 3.0)):
        w = witness_rank_one_failure(system, delta, a)
        bound = time_bound(a, log_measure(2 * w.radius))
        case_ok = (w.verified and w.bound == bound and w.max_diameter < delta
                   and [r["n"] for r in w.rows] == list(range(bound + 1)))
        ok &= case_ok
        details.append(f"(delta {delta}, a {a:g}): stage {w.stage}, bound {bound}, max diam {float(w.max_diameter):.2e}")
    record(9, ok, "; ".join(details))


def test_criterion_10_measure_preserving_witness():
    system = RankOneSystem(RankOneSpec(F(1, 2), (), (Stage.uniform(2, (0, 1)),)))
    w = witness_rank_one_failure(system, 0.01, 1.0, variant="measure-preserving")
    record(10, w.verified and w.max_diameter < 0.01, f"stage {w.stage}, bound {w.bound}, verified {w.verified}")


def test_criterion_11_product_transfer():
    left = BernoulliShift(UNIFORM)
    prod = product_system(left, BernoulliShift(UNIFORM, two_sided=True))
    params = SensitivityParams(F(1, 2), 1 / LOG2 + RATE_MARGIN_11)
    passed = dominated = trials = 0
    for s in child_seeds(11, 50):
        x = prod.sample_point(s)
        v = check_restricted_sensitive(prod, x, params, dyadic(1, 10))
        passed += v.passed
        for t in v.trials:
            trials += 1
            dominated += t.ball_measure <= left.ball_measure(x[0], t.radius)
    record(11, passed == 50 and dominated == trials, f"{passed}/50 points pass, product <= left in {dominated}/{trials}")


def test_criterion_12_brin_katok():
    uni = BernoulliShift(UNIFORM)
    v = brin_katok_estimate(uni, uni.sample_point(12), F(1, 2), BK_N_12).value
    thirds = BernoulliShift(THIRDS)
    rel = max(abs(brin_katok_estimate(thirds, thirds.sample_point(s), F(1, 2), BK_N_12).value - BK_TARGET_12)
              / BK_TARGET_12 for s in child_seeds(12, 5))
    record(12, v == LOG2 and rel <= BK_REL_TOL_12, f"uniform {v!r}; (1/3,2/3) worst relative error {rel:.4f}")


def test_criterion_13_separating_time_oracle():
    mismatches = cylinders = 0
    for c in range(4):
        # both ends of the class 2^-(c+1) <= delta < 2^-c
        for delta in (F(1, 2 ** (c + 1)), F(1, 2**c) - F(1, 2 ** (c + 8))):
            for length in range(1, ORACLE_MAX_LENGTH_13 + 1):
                formula = min_separating_time_exact(length, delta)
                for word in itertools.product((1, 2), repeat=length):
                    cylinders += 1
                    mismatches += brute_force_separating_time(word, delta) != formula
    record(13, mismatches == 0, f"{cylinders} cylinders, {mismatches} mismatches")


def _perturbed(system, x, k, seed):
    """A point agreeing with ``x`` exactly on the indices fixed by the ball of radius ``2**-(k-1)``."""
    other = system.sample_point(seed)
    lo, hi = (-(k - 1), k) if system.two_sided else (0, k)
    return other.with_symbols(lo, x.symbols(lo, hi).tolist())


def test_criterion_14_ball_inclusion():
    rng = np.random.default_rng(14)
    systems = (BernoulliShift(THIRDS), BernoulliShift(UNIFORM, two_sided=True))
    violations = checked = 0
    seeds = child_seeds(14, 2 * SAMPLES_14)
    for k in range(SAMPLES_14):
        system = systems[k % 2]
        x = system.sample_point(seeds[2 * k])
        y = _perturbed(system, x, int(rng.integers(1, 9)), seeds[2 * k + 1])
        d = system.distance(x, y)
        r = F(int(rng.integers(1, 1001)), 1000)
        if not d < r:
            r = (1 + d) / 2
        eta = d + (r - d) * F(int(rng.integers(1, 1000)), 1000)
        assert d < eta < r
        checked += 1
        violations += system.ball_measure(y, r) < system.ball_measure(x, r - eta)
    record(14, checked == SAMPLES_14 and violations == 0, f"{checked} samples, {violations} violations")


def test_criterion_15_suite_determinism():
    a = suite_payload(run_suite(SUITE_SEED_15)).encode()
    b = suite_payload(run_suite(SUITE_SEED_15)).encode()
    record(15, a == b, f"payloads of {len(a)} bytes {'identical' if a == b else 'differ'}")
