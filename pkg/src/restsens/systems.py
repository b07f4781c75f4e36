"""Metric measure-preserving (or nonsingular) systems and their products.

Every concrete system bundles a point space, a transformation, a metric, the
measure of open balls ``B_eps(x) = {y : d(x, y) < eps}`` and a seeded point
sampler.  Balls are open throughout.  Logarithms are natural, so every rate
and entropy in this package is in nats.
"""
from __future__ import annotations

import abc
import math
from dataclasses import dataclass
from fractions import Fraction
from statistics import NormalDist
from typing import Any, Callable

import numpy as np

#: Relative slack used when flooring ``-a log mu(B)``.  The product is often a
#: mathematically exact integer (e.g. ``a = 1/log 2`` against a dyadic ball)
#: that floating point lands a few ulps below.
BOUND_RTOL = 1e-9

#: Two-sided 99% normal quantile for Monte Carlo confidence half-widths.
Z99 = NormalDist().inv_cdf(0.995)


class UndefinedAtDepth(RuntimeError):
    """The map could not be resolved within the configured construction depth."""


@dataclass(frozen=True)
class BallEstimate:
    """Monte Carlo estimate of a ball measure with a 99% Wilson half-width."""

    value: float
    samples: int
    half_width: float

    def __float__(self) -> float:
        return float(self.value)

    @property
    def upper(self) -> float:
        return min(1.0, self.value + self.half_width)


@dataclass(frozen=True)
class SensitivityParams:
    """Sensitivity constant ``delta`` and asymptotic rate ``rate_a``."""

    delta: float | Fraction
    rate_a: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not self.rate_a > 0:
            raise ValueError(f"rate_a must be positive, got {self.rate_a}")


def log_measure(m) -> float:
    """Natural log of a measure given as Fraction, float or BallEstimate.

    Fractions are handled through their integer parts so that cylinders of
    length well beyond float range (``2**-5000``) still have finite logs.
    """
    if isinstance(m, BallEstimate):
        return math.log(m.value) if m.value > 0 else -math.inf
    if isinstance(m, Fraction):
        if m <= 0:
            return -math.inf
        return math.log(m.numerator) - math.log(m.denominator)
    return math.log(m) if m > 0 else -math.inf


def time_bound(rate_a: float, log_mu: float) -> int:
    """``floor(-a log mu)``, the largest admissible sensitive time."""
    v = -rate_a * log_mu
    if v <= 0:
        return 0
    return int(math.floor(v * (1 + BOUND_RTOL)))


def child_seeds(seed: int, count: int) -> list[int]:
    """Derive ``count`` independent 63-bit seeds from ``seed``.

    Uses numpy's ``SeedSequence.spawn``: child ``k`` is the sequence with spawn
    key ``(k,)``, so the mapping depends only on ``(seed, k)``.
    """
    kids = np.random.SeedSequence(int(seed)).spawn(count)
    return [int(k.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1)) for k in kids]


def wilson_half_width(hits: int, n: int, z: float = Z99) -> tuple[float, float]:
    """Centre and half-width of the Wilson score interval."""
    if n <= 0:
        return 0.5, 0.5
    p = hits / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    hw = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return centre, hw


class MetricSystem(abc.ABC):
    """A transformation on a metric probability space.

    Subclasses must be immutable after construction: every method is a pure
    function of its arguments, so instances can be shared across workers.
    """

    #: ``False`` when ``ball_measure`` only returns Monte Carlo estimates.
    exact_balls: bool = True
    name: str = "system"

    @abc.abstractmethod
    def transform(self, x):
        ...

    @abc.abstractmethod
    def distance(self, x, y):
        ...

    @abc.abstractmethod
    def ball_measure(self, x, eps):
        ...

    @abc.abstractmethod
    def sample_point(self, seed: int):
        ...

    def iterate(self, x, n: int):
        for _ in range(n):
            x = self.transform(x)
        return x

    def resolve_distance(self, x, y):
        """Return ``(distance, exact)``; inexact means only an upper bound is known."""
        return self.distance(x, y), True

    def log_ball_measure(self, x, eps) -> float:
        m = self.ball_measure(x, eps)
        if isinstance(m, BallEstimate):
            # conservative: a larger measure gives a smaller time bound
            return math.log(max(m.upper, 1e-300))
        return log_measure(m)

    def separation_time(self, x, eps, delta, horizon: int) -> int | None:
        """Least ``n <= horizon`` with ``mu{y in B_eps(x) : d(T^n x, T^n y) > delta} > 0``.

        Only systems that can decide this exactly override it; the default
        signals that callers must fall back to sampling.
        """
        raise NotImplementedError

    def sample_in_ball(self, x, eps, seed: int, count: int) -> list:
        """Draw ``count`` points from ``mu`` conditioned on ``B_eps(x)`` by rejection."""
        out = []
        for s in child_seeds(seed, 50 * count):
            y = self.sample_point(s)
            if self.distance(x, y) < eps:
                out.append(y)
                if len(out) == count:
                    break
        return out

    def describe(self) -> dict:
        return {"name": self.name}


def estimate_ball_measure(system: MetricSystem, x, eps, samples: int, seed: int) -> BallEstimate:
    """Fraction of ``samples`` points drawn from ``mu`` that land in ``B_eps(x)``."""
    hits = sum(
        1 for s in child_seeds(seed, samples) if system.distance(x, system.sample_point(s)) < eps
    )
    p = hits / samples
    _, hw = wilson_half_width(hits, samples)
    return BallEstimate(p, samples, hw)


class CircleRotation(MetricSystem):
    """Rotation ``x -> x + alpha mod 1`` with arc-length metric and Lebesgue measure."""

    name = "rotation"

    def __init__(self, alpha: float):
        self.alpha = float(alpha) % 1.0

    def transform(self, x):
        return (x + self.alpha) % 1.0

    def distance(self, x, y):
        t = abs(x - y) % 1.0
        return min(t, 1.0 - t)

    def ball_measure(self, x, eps):
        return min(2.0 * float(eps), 1.0)

    def sample_point(self, seed):
        return float(np.random.default_rng(seed).random())

    def separation_time(self, x, eps, delta, horizon):
        # an isometry: separation happens at time 0 or never
        return 0 if eps > delta and delta < 0.5 else None

    def sample_in_ball(self, x, eps, seed, count):
        e = min(float(eps), 0.5)
        u = np.random.default_rng(seed).uniform(-e, e, size=count)
        return [float((x + v) % 1.0) for v in u]

    def describe(self):
        return {"name": self.name, "alpha": self.alpha}


class MonteCarloSystem(MetricSystem):
    """Black-box system: callables for the map, metric and sampler.

    Ball measures are estimated by sampling, so every verdict that touches
    this system is flagged approximate.
    """

    exact_balls = False
    name = "monte-carlo"

    def __init__(
        self,
        transform: Callable[[Any], Any],
        distance: Callable[[Any, Any], float],
        sampler: Callable[[int], Any],
        ball_samples: int = 2000,
    ):
        self._transform = transform
        self._distance = distance
        self._sampler = sampler
        self.ball_samples = ball_samples

    def transform(self, x):
        return self._transform(x)

    def distance(self, x, y):
        return self._distance(x, y)

    def sample_point(self, seed):
        return self._sampler(seed)

    def ball_measure(self, x, eps, seed: int = 0):
        return estimate_ball_measure(self, x, eps, self.ball_samples, seed)


def max_metric_distance(left: MetricSystem, right: MetricSystem, p1, p2):
    """``max(d_X(x1, x2), d_Y(y1, y2))`` for product points ``(x, y)``."""
    return max(left.distance(p1[0], p2[0]), right.distance(p1[1], p2[1]))


def product_ball_measure(left: MetricSystem, right: MetricSystem, p, eps):
    """Measure of the max-metric ball, which is the product of the factor balls.

    Exact when both factors are exact; otherwise a :class:`BallEstimate` with
    a propagated (conservative) half-width.
    """
    a = left.ball_measure(p[0], eps)
    b = right.ball_measure(p[1], eps)
    if not isinstance(a, BallEstimate) and not isinstance(b, BallEstimate):
        return a * b
    va, ha, na = _as_estimate(a)
    vb, hb, nb = _as_estimate(b)
    value = va * vb
    hw = va * hb + vb * ha + ha * hb
    return BallEstimate(value, min(na, nb), hw)


def _as_estimate(m):
    if isinstance(m, BallEstimate):
        return m.value, m.half_width, m.samples
    return float(m), 0.0, 2**62


class ProductSystem(MetricSystem):
    """``T x S`` on ``X x Y`` with the max metric and the product measure."""

    name = "product"

    def __init__(self, left: MetricSystem, right: MetricSystem):
        self.left = left
        self.right = right
        self.exact_balls = left.exact_balls and right.exact_balls

    def transform(self, p):
        return (self.left.transform(p[0]), self.right.transform(p[1]))

    def distance(self, p1, p2):
        return max_metric_distance(self.left, self.right, p1, p2)

    def resolve_distance(self, p1, p2):
        dx, ex = self.left.resolve_distance(p1[0], p2[0])
        dy, ey = self.right.resolve_distance(p1[1], p2[1])
        return max(dx, dy), ex and ey

    def ball_measure(self, p, eps):
        return product_ball_measure(self.left, self.right, p, eps)

    def log_ball_measure(self, p, eps):
        return self.left.log_ball_measure(p[0], eps) + self.right.log_ball_measure(p[1], eps)

    def sample_point(self, seed):
        sx, sy = child_seeds(seed, 2)
        return (self.left.sample_point(sx), self.right.sample_point(sy))

    def separation_time(self, p, eps, delta, horizon):
        # The separating set is {d_X > delta} x B_Y  union  B_X x {d_Y > delta}
        # (max metric), which has positive measure iff one factor's does.
        times = []
        for sys_, q in ((self.left, p[0]), (self.right, p[1])):
            t = sys_.separation_time(q, eps, delta, horizon)
            if t is not None:
                times.append(t)
        return min(times) if times else None

    def sample_in_ball(self, p, eps, seed, count):
        sx, sy = child_seeds(seed, 2)
        xs = self.left.sample_in_ball(p[0], eps, sx, count)
        ys = self.right.sample_in_ball(p[1], eps, sy, count)
        return list(zip(xs, ys))

    def describe(self):
        return {"name": self.name, "left": self.left.describe(), "right": self.right.describe()}


def product_system(left: MetricSystem, right: MetricSystem) -> ProductSystem:
    return ProductSystem(left, right)
