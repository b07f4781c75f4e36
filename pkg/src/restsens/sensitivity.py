"""Decision procedures for time-restricted sensitivity, failure witnesses and rates.

Two notions are checked, both with a sensitivity constant ``delta`` and an
asymptotic rate ``a``:

* restricted sensitivity at ``x``: for every radius ``eps`` some
  ``n <= -a log mu(B_eps(x))`` makes ``{y in B_eps(x) : d(T^n x, T^n y) > delta}``
  a set of positive measure;
* restricted pairwise sensitivity: for almost every pair ``(x, y)`` some
  ``n <= -a log mu(B_{d(x,y)}(x))`` has ``d(T^n x, T^n y) > delta``.

The real-valued time bound is discretised as ``floor(-a log mu)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np

from .rank_one import RankOneSystem, RationalInterval
from .shifts import (
    BernoulliShift,
    CylinderSet,
    SymbolicPoint,
    ball_as_cylinder,
    cylinder_log_measure,
    cylinder_measure,
    min_separating_time,
)
from .systems import (
    BallEstimate,
    MetricSystem,
    SensitivityParams,
    child_seeds,
    log_measure,
    time_bound,
)


@dataclass
class TrialRecord:
    """One checked inequality: a radius (or pair distance), its bound and the time found."""

    radius: Any
    ball_measure: Any
    bound: int
    time: int | None
    passed: bool
    point: Any = None
    other: Any = None
    extra: dict = field(default_factory=dict)


@dataclass
class SensitivityVerdict:
    kind: str  # "restricted" or "restricted-pairwise"
    params: SensitivityParams
    trials: list[TrialRecord]
    approximate: bool = False
    excluded: int = 0

    @property
    def pass_fraction(self) -> float:
        if not self.trials:
            return 1.0
        return sum(t.passed for t in self.trials) / len(self.trials)

    @property
    def passed(self) -> bool:
        return all(t.passed for t in self.trials)

    @property
    def failures(self) -> list[TrialRecord]:
        return [t for t in self.trials if not t.passed]


def first_sensitive_time(system: MetricSystem, x, y, delta, horizon: int) -> int | None:
    """Least ``n <= horizon`` with ``d(T^n x, T^n y) > delta`` (strict), by orbit comparison."""
    if delta <= 0 or horizon < 0:
        raise ValueError("need delta > 0 and horizon >= 0")
    for n in range(horizon + 1):
        if n:
            x, y = system.transform(x), system.transform(y)
        if system.distance(x, y) > delta:
            return n
    return None


def _sampled_separation_time(system, x, eps, delta, horizon, samples, seed) -> int | None:
    ys = system.sample_in_ball(x, eps, seed, samples)
    best = None
    for y in ys:
        t = first_sensitive_time(system, x, y, delta, horizon if best is None else best)
        if t is not None and (best is None or t < best):
            best = t
    return best


def check_restricted_sensitive(
    system: MetricSystem,
    x,
    params: SensitivityParams,
    eps_grid: Sequence,
    samples: int = 200,
    seed: int = 0,
) -> SensitivityVerdict:
    """Check the restricted-sensitivity inequality at ``x`` on every radius of ``eps_grid``.

    Shifts, rank-one maps and their products decide the positive-measure
    condition exactly.  Other systems sample ``samples`` points of the ball;
    a failure there only means no separation was detected within the budget.
    """
    if not eps_grid:
        raise ValueError("eps grid is empty")
    trials, approx = [], not system.exact_balls
    for eps in eps_grid:
        if eps > params.delta:
            raise ValueError(f"radius {eps} exceeds delta {params.delta}; larger radii pass trivially")
        mu = system.ball_measure(x, eps)
        bound = time_bound(params.rate_a, system.log_ball_measure(x, eps))
        try:
            n = system.separation_time(x, eps, params.delta, bound)
        except NotImplementedError:
            approx = True
            n = _sampled_separation_time(system, x, eps, params.delta, bound, samples, seed)
        trials.append(TrialRecord(eps, mu, bound, n, n is not None and n <= bound, point=x))
    return SensitivityVerdict("restricted", params, trials, approximate=approx)


def check_restricted_pairwise(
    system: MetricSystem,
    params: SensitivityParams,
    pair_count: int,
    seed: int,
    pairs: Iterable[tuple[Any, Any]] | None = None,
) -> SensitivityVerdict:
    """Sample ``pair_count`` independent pairs from ``mu x mu`` and test each one.

    Pairs at distance 0 or whose distance is not resolved within the system's
    horizon are excluded from the pass fraction and counted in ``excluded``.
    """
    if pairs is None:
        if pair_count < 1:
            raise ValueError("pair_count must be >= 1")
        seeds = child_seeds(seed, 2 * pair_count)
        pairs = ((system.sample_point(seeds[2 * k]), system.sample_point(seeds[2 * k + 1]))
                 for k in range(pair_count))
    trials, excluded, approx = [], 0, not system.exact_balls
    for x, y in pairs:
        d, exact = system.resolve_distance(x, y)
        if not exact or d == 0:
            excluded += 1
            continue
        mu = system.ball_measure(x, d)
        bound = time_bound(params.rate_a, system.log_ball_measure(x, d))
        n = first_sensitive_time(system, x, y, params.delta, bound)
        trials.append(TrialRecord(d, mu, bound, n, n is not None, point=x, other=y))
    return SensitivityVerdict("restricted-pairwise", params, trials, approximate=approx, excluded=excluded)


def rs_rate_from_rps(rate_a: float, regularity_c: float, log_ball_delta: float) -> float:
    """Rate that restricted sensitivity inherits from a pairwise rate.

    With ``c mu(closed ball) <= mu(open ball)`` the pairwise time bound
    ``-a log mu(B_eps) - a log c`` is dominated by ``-a' log mu(B_eps)`` for all
    ``eps <= delta`` once ``a' >= a + a log(1/c) / (-log mu(B_delta))``.
    """
    return rate_a + rate_a * math.log(1 / regularity_c) / (-log_ball_delta)


# -- shift-specific constructions ---------------------------------------------


@dataclass
class RpsFailureWitness:
    """A cylinder of partners ``tau`` that never leave ``delta`` before the allowed time."""

    base: SymbolicPoint
    cylinder: CylinderSet
    k1: int
    k2: int
    delta: Any
    rate_a: float
    ball_measure: Fraction
    bound: int
    rows: list[dict]

    @property
    def verified(self) -> bool:
        return len(self.rows) == self.bound + 1 and all(r["max_distance"] < self.delta for r in self.rows)

    @property
    def verified_horizon(self) -> int:
        return self.bound


def _window_sup_distance(forced: dict[int, bool], n: int, limit: int) -> Fraction:
    """Largest ``d(T^n s, T^n t)`` over all ``t`` in a cylinder (two-sided shift).

    ``forced[i]`` is True where the cylinder forces ``t_i != s_i`` and False
    where it forces equality; every other index is free.  Scans relative
    indices by increasing ``|j|``: the first index that can disagree fixes
    the supremum ``2**-|j|``.
    """
    for r in range(limit + 1):
        for j in ((0,) if r == 0 else (r, -r)):
            if forced.get(n + j, True):
                return Fraction(1, 2**r)
    return Fraction(1, 2 ** (limit + 1))


def witness_two_sided_failure(shift: BernoulliShift, sigma: SymbolicPoint, delta, rate_a: float
                              ) -> RpsFailureWitness:
    """Build the cylinder showing the two-sided shift is not pairwise sensitive at ``delta``.

    Partners ``tau`` differ from ``sigma`` at ``-k1`` and agree on
    ``-k1 < i <= k2``.  ``k1`` is the least positive integer with
    ``2**-k1 < delta``.  The allowed time comes from the exact open ball
    ``B_{2**-k1}(sigma)``, the cylinder on ``|i| <= k1``; ``k2`` is the least
    integer above ``k1`` with ``2**-(k2 + a log m) < delta``.  Every time up
    to the bound is then checked position by position.
    """
    if not shift.two_sided:
        raise ValueError("the failure construction needs the two-sided shift")
    d = Fraction(delta)
    if not 0 < d < 1:
        raise ValueError("delta must lie in (0, 1)")
    k1 = 1
    while Fraction(1, 2**k1) >= d:
        k1 += 1
    ball = CylinderSet(-k1, tuple(int(v) for v in sigma.symbols(-k1, k1 + 1)))
    m = cylinder_measure(ball, shift.pv)
    log_m = cylinder_log_measure(ball, shift.pv)
    bound = time_bound(rate_a, log_m)
    k2 = k1 + 1
    while 2.0 ** -(k2 + rate_a * log_m) >= float(d):
        k2 += 1
    s_bar = 1 if sigma[-k1] != 1 else 2
    fixed = [s_bar] + [int(v) for v in sigma.symbols(-k1 + 1, k2 + 1)]
    cyl = CylinderSet(-k1, tuple(fixed))
    forced = {i: False for i in range(-k1 + 1, k2 + 1)}
    forced[-k1] = True
    limit = k2 + bound + k1 + 2
    rows = []
    for n in range(bound + 1):
        sup = _window_sup_distance(forced, n, limit)
        rows.append({
            "n": n,
            "bound": bound,
            "max_distance": sup,
            "envelope": max(Fraction(1, 2**k1), Fraction(1, 2 ** (k2 - n)) if k2 >= n else Fraction(1)),
        })
    return RpsFailureWitness(sigma, cyl, k1, k2, delta, rate_a, m, bound, rows)


# -- rank-one non-sensitivity witness ------------------------------------------


@dataclass
class RankOneFailureWitness:
    point: Fraction
    radius: Fraction
    stage: int
    height: int
    bound: int
    delta: Any
    rate_a: float
    variant: str
    inequality: str
    max_diameter: Fraction
    rows: list[dict]

    @property
    def verified(self) -> bool:
        return (self.max_diameter < self.delta and 2 * self.bound < self.height
                and len(self.rows) == self.bound + 1)


def witness_rank_one_failure(system: RankOneSystem, delta, rate_a: float,
                             variant: str = "nonsingular", max_stage: int | None = None
                             ) -> RankOneFailureWitness:
    """Find a point and radius at which no time within the bound separates anything.

    ``variant="nonsingular"`` selects the stage through
    ``a (n log(1/c) + log(3 / (2 w0))) < 2**(n-1)`` (proportions bounded below
    by ``c``); ``variant="measure-preserving"`` uses
    ``a log(3 h_n / (2 w0 h0)) < h_n / 2`` and needs uniform proportions.
    Either way the stage must also have every level narrower than ``delta``.

    The point is the centre of the leftmost subcolumn's sublevel of the
    bottom level of ``C_n`` (inside its middle third) and the radius is its
    distance to the nearer end of that level.  The ball is then pushed
    through ``T^0 .. T^B`` exactly; up to the top of ``C_n`` each image is an
    affine copy inside a single level.
    """
    spec = system.spec
    d = Fraction(delta)
    if variant == "nonsingular":
        c = spec.min_proportion
    elif variant == "measure-preserving":
        if not spec.measure_preserving:
            raise ValueError("measure-preserving variant needs uniform proportions")
        c = None
    else:
        raise ValueError(f"unknown variant {variant!r}")
    w0, h0 = spec.w0, system.heights[0]
    top = system.depth_cap if max_stage is None else min(max_stage, system.depth_cap)
    tried = []
    for n in range(1, top + 1):
        h = system.heights[n]
        if system.max_widths[n] >= d:
            continue
        if c is not None:
            lhs = rate_a * (n * math.log(1 / c) + math.log(3 / (2 * w0)))
            ok, text = lhs < 2 ** (n - 1), f"a(n log(1/c) + log(3/(2w0))) = {lhs:.6g} < 2^(n-1) = {2 ** (n - 1)}"
        else:
            lhs = rate_a * math.log(3 * h / (2 * w0 * h0))
            ok, text = lhs < h / 2, f"a log(3h/(2 w0 h0)) = {lhs:.6g} < h/2 = {h / 2}"
        tried.append((n, ok))
        if not ok:
            continue
        bottom = system.level(n, 0)
        p0 = spec.stage(n).proportions[0]
        x = bottom.left + p0 * bottom.length / 2
        w = p0 * bottom.length / 2
        mu = system.lebesgue_ball_measure(x, w)
        bound = time_bound(rate_a, log_measure(mu))
        if not 2 * bound < h:
            tried[-1] = (n, False)
            continue
        rows, worst = [], Fraction(0)
        ball = RationalInterval(x - w, x + w)
        for k, ivs in enumerate(system.interval_orbit(ball, bound)):
            diam = max(iv.right for iv in ivs) - min(iv.left for iv in ivs)
            worst = max(worst, diam)
            rows.append({"n": k, "bound": bound, "diameter": diam, "pieces": len(ivs)})
        return RankOneFailureWitness(x, w, n, h, bound, delta, rate_a, variant, text, worst, rows)
    raise RuntimeError(
        f"no stage up to {top} has max level width < {delta} and the {variant} inequality; "
        f"checked {tried[-5:]}; raise depth_cap"
    )


# -- minimal asymptotic rate ---------------------------------------------------


@dataclass
class RateEstimate:
    point: SymbolicPoint
    horizon: int
    c_grid: tuple[int, ...]
    estimate: float
    reciprocal: float
    per_c: dict[int, float]


def default_c_grid(horizon: int) -> tuple[int, ...]:
    """``0, 1, 2, 4, ...`` up to ``horizon // 64``.

    For a fixed ``c`` the finite-horizon infimum over ``n`` carries an upward
    bias of ``N / (N - c)``; capping ``c`` at ``N/64`` keeps it under 1.6%.
    """
    grid, c = [0], 1
    while c <= horizon // 64:
        grid.append(c)
        c *= 2
    return tuple(grid)


def estimate_min_asymptotic_rate(shift: BernoulliShift, sigma: SymbolicPoint, horizon: int,
                                 c_grid: Sequence[int] | None = None) -> RateEstimate:
    """Finite-horizon estimate of the least rate ``a*`` at ``sigma``.

    With ``S_n = sum_{i < n} -log p(sigma_i)`` this returns
    ``1 / max_c min_{c < n <= N} S_n / (n - c)``; the inner quantity is
    ``(n / (n - c)) * (1/n) sum_i -k_i^(n) log p_i``.
    """
    if shift.two_sided:
        raise ValueError("the rate formula is for the one-sided shift")
    grid = tuple(sorted(set(c_grid if c_grid is not None else default_c_grid(horizon))))
    if horizon <= max(grid):
        raise ValueError("horizon must exceed every c in the grid")
    syms = sigma.symbols(0, horizon).astype(np.int64)
    s = np.cumsum(shift.pv.neg_log[syms])
    n = np.arange(1, horizon + 1, dtype=np.float64)
    per_c = {}
    for c in grid:
        per_c[c] = float(np.min(s[c:] / (n[c:] - c)))
    recip = max(per_c.values())
    return RateEstimate(sigma, horizon, grid, 1.0 / recip, recip, per_c)
