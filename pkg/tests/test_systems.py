import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from restsens import (
    BernoulliShift,
    CircleRotation,
    MonteCarloSystem,
    ProbabilityVector,
    ProductSystem,
    RankOneSystem,
    SensitivityParams,
    chacon,
    check_restricted_sensitive,
    first_sensitive_time,
    product_ball_measure,
)
from restsens.systems import (
    BallEstimate,
    child_seeds,
    estimate_ball_measure,
    log_measure,
    max_metric_distance,
    product_system,
    time_bound,
    wilson_half_width,
)

UNIFORM = ProbabilityVector.uniform(2)


def test_params_reject_nonpositive():
    with pytest.raises(ValueError):
        SensitivityParams(0, 1.0)
    with pytest.raises(ValueError):
        SensitivityParams(0.5, -1.0)
    assert SensitivityParams(Fraction(1, 2), 2.0).rate_a == 2.0


def test_time_bound_exact_integer_not_floored_low():
    # a = 1/log 2 against 2^-5 is exactly 5 but lands a few ulps below in floats
    a = 1 / math.log(2)
    assert time_bound(a, log_measure(Fraction(1, 32))) == 5
    assert time_bound(a, log_measure(Fraction(1, 2**40))) == 40
    assert time_bound(1.0, 0.0) == 0


def test_log_measure_of_tiny_fraction_is_finite():
    v = log_measure(Fraction(1, 2**5000))
    assert v == pytest.approx(-5000 * math.log(2))


def test_child_seeds_deterministic_and_distinct():
    a, b = child_seeds(7, 100), child_seeds(7, 100)
    assert a == b
    assert len(set(a)) == 100
    assert child_seeds(8, 100) != a
    assert child_seeds(7, 5) == a[:5]


def test_max_metric_examples(uniform_shift):
    rot = CircleRotation(math.sqrt(2) - 1)
    s = uniform_shift.point([1, 1, 1])
    t = uniform_shift.point([1, 1, 2])
    assert max_metric_distance(uniform_shift, rot, (s, 0.1), (s, 0.1)) == 0
    # I(s, t) = 2 gives 1/4; arc distance 0.1 on the circle
    assert max_metric_distance(uniform_shift, rot, (s, 0.05), (t, 0.15)) == Fraction(1, 4)
    assert max_metric_distance(uniform_shift, rot, (s, 0.0), (s, 0.3)) == pytest.approx(0.3)


def _enumerate_ball_measure(shift, x, eps, length=6):
    """Sum the measures of all length-``length`` cylinders whose points lie in the ball."""
    total = Fraction(0)
    for word in np.ndindex(*(2,) * length):
        sym = [w + 1 for w in word]
        y = shift.point(sym, seed=99)
        # every extension of the word shares the verdict when the window is shorter
        if shift.distance(x, y) < eps:
            m = Fraction(1)
            for s in sym:
                m *= shift.pv[s]
            total += m
    return total


def test_product_ball_measure_examples(uniform_shift):
    x = uniform_shift.sample_point(1)
    y = uniform_shift.sample_point(2)
    p = (x, y)
    assert product_ball_measure(uniform_shift, uniform_shift, p, Fraction(3, 10)) == Fraction(1, 16)
    assert product_ball_measure(uniform_shift, uniform_shift, p, Fraction(3, 2)) == 1
    # oracle: enumerate length-6 cylinders in each factor
    oracle = (_enumerate_ball_measure(uniform_shift, x, Fraction(3, 10))
              * _enumerate_ball_measure(uniform_shift, y, Fraction(3, 10)))
    assert oracle == Fraction(1, 16)
    rot = CircleRotation(0.1)
    # shift ball 1/4 at eps = 0.3, rotation arc of length 0.6
    assert product_ball_measure(uniform_shift, rot, (x, 0.2), 0.3) == pytest.approx(0.15)


def test_product_ball_with_estimate_is_flagged():
    mc = MonteCarloSystem(lambda x: (x + 0.3) % 1, lambda a, b: min(abs(a - b), 1 - abs(a - b)),
                          lambda s: float(np.random.default_rng(s).random()), ball_samples=500)
    prod = ProductSystem(CircleRotation(0.3), mc)
    assert not prod.exact_balls
    m = prod.ball_measure((0.1, 0.2), 0.1)
    assert isinstance(m, BallEstimate)
    assert m.half_width > 0
    assert abs(m.value - 0.04) <= m.half_width + 0.02


def test_product_transform_and_seed_split(uniform_shift):
    rot = CircleRotation(0.25)
    prod = product_system(uniform_shift, rot)
    p = prod.sample_point(5)
    assert prod.sample_point(5)[1] == p[1]
    tx, ty = prod.transform(p)
    assert tx[0] == p[0][1]
    assert ty == pytest.approx((p[1] + 0.25) % 1)
    a, b = child_seeds(5, 2)
    assert p[1] == rot.sample_point(b)


def test_product_first_sensitive_time_is_min_of_components(uniform_shift):
    prod = ProductSystem(uniform_shift, uniform_shift)
    for k in range(50):
        s = child_seeds(1000 + k, 4)
        x = (uniform_shift.sample_point(s[0]), uniform_shift.sample_point(s[1]))
        y = (uniform_shift.sample_point(s[2]), uniform_shift.sample_point(s[3]))
        got = first_sensitive_time(prod, x, y, Fraction(1, 2), 200)
        parts = [first_sensitive_time(uniform_shift, x[i], y[i], Fraction(1, 2), 200) for i in (0, 1)]
        assert got == min(t for t in parts if t is not None)


def test_product_passes_with_same_params(uniform_shift, two_sided_shift):
    prod = ProductSystem(uniform_shift, two_sided_shift)
    params = SensitivityParams(Fraction(1, 2), 1 / math.log(2) + 1e-6)
    grid = [Fraction(1, 2**k) for k in range(1, 9)] + [Fraction(3, 10)]
    for s in child_seeds(3, 10):
        v = check_restricted_sensitive(prod, prod.sample_point(s), params, grid)
        assert v.passed and not v.approximate


def test_rotation_ball_and_separation():
    rot = CircleRotation(0.1)
    assert rot.ball_measure(0.3, 0.1) == pytest.approx(0.2)
    assert rot.ball_measure(0.3, 0.7) == 1.0
    assert rot.separation_time(0.0, 0.2, 0.1, 10) == 0
    assert rot.separation_time(0.0, 0.05, 0.1, 10) is None


def test_estimate_ball_measure_covers_truth():
    rot = CircleRotation(0.1)
    est = estimate_ball_measure(rot, 0.5, 0.1, 4000, seed=3)
    assert abs(est.value - 0.2) <= est.half_width
    c, hw = wilson_half_width(0, 100)
    assert c - hw <= 1e-12 and hw > 0


def test_monte_carlo_verdict_is_approximate():
    mc = MonteCarloSystem(lambda x: (2 * x) % 1.0, lambda a, b: abs(a - b),
                          lambda s: float(np.random.default_rng(s).random()), ball_samples=400)
    v = check_restricted_sensitive(mc, 0.3, SensitivityParams(0.25, 5.0), [0.1, 0.05], samples=50)
    assert v.approximate
    assert v.passed


SYSTEMS = {
    "one-sided": BernoulliShift(UNIFORM),
    "thirds": BernoulliShift(ProbabilityVector((Fraction(1, 3), Fraction(2, 3)))),
    "two-sided": BernoulliShift(UNIFORM, two_sided=True),
    "rotation": CircleRotation(math.sqrt(2) - 1),
}


@pytest.mark.parametrize("name", sorted(SYSTEMS))
def test_ball_measure_monotone_on_grid(name):
    sys_ = SYSTEMS[name]
    radii = [Fraction(k, 40) for k in range(1, 41)]
    for s in child_seeds(11, 100):
        x = sys_.sample_point(s)
        vals = [sys_.ball_measure(x, r) for r in radii]
        assert all(0 < v <= 1 for v in vals)
        assert all(a <= b for a, b in zip(vals, vals[1:]))


def test_rank_one_ball_monotone():
    sys_ = RankOneSystem(chacon())
    radii = [Fraction(k, 40) for k in range(1, 41)]
    for s in child_seeds(12, 100):
        x = sys_.sample_point(s)
        vals = [sys_.ball_measure(x, r) for r in radii]
        assert all(a <= b for a, b in zip(vals, vals[1:]))
        assert vals[0] > 0


@pytest.mark.parametrize("name", sorted(SYSTEMS))
@given(seed=st.integers(0, 2**32), r_num=st.integers(2, 64), frac=st.integers(1, 63))
def test_ball_inclusion_inequality(name, seed, r_num, frac):
    sys_ = SYSTEMS[name]
    r = Fraction(r_num, 64)
    eta = r * Fraction(frac, 64)
    x = sys_.sample_point(seed)
    y = sys_.sample_in_ball(x, eta, seed + 1, 1)[0]
    assert sys_.distance(x, y) < eta
    assert sys_.ball_measure(y, r) >= sys_.ball_measure(x, r - eta)


@given(seeds=st.lists(st.integers(0, 2**32), min_size=6, max_size=6))
def test_product_metric_triangle_and_ball_bound(seeds):
    prod = ProductSystem(SYSTEMS["thirds"], SYSTEMS["two-sided"])
    a, b, c = (prod.sample_point(s) for s in seeds[:3])
    assert prod.distance(a, c) <= prod.distance(a, b) + prod.distance(b, c)
    assert prod.distance(a, b) == prod.distance(b, a)
    for eps in (Fraction(1, 3), Fraction(1, 16), Fraction(9, 10)):
        m = prod.ball_measure(a, eps)
        assert m <= min(prod.left.ball_measure(a[0], eps), prod.right.ball_measure(a[1], eps))


@given(seeds=st.lists(st.integers(0, 2**32), min_size=3, max_size=3))
def test_shift_metric_axioms(seeds):
    sys_ = SYSTEMS["two-sided"]
    a, b, c = (sys_.sample_point(s) for s in seeds)
    assert sys_.distance(a, a) == 0
    assert sys_.distance(a, c) <= sys_.distance(a, b) + sys_.distance(b, c)
