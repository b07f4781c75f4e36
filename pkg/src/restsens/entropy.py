"""Analytic and empirical entropy for the systems in this package (nats)."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Hashable

import numpy as np

from .shifts import BernoulliShift, ProbabilityVector, SymbolicPoint, separation_class
from .systems import Z99, MetricSystem, child_seeds, log_measure


@dataclass
class EntropyEstimate:
    method: str  # analytic | birkhoff-frequency | brin-katok | partition
    value: float
    params: dict = field(default_factory=dict)
    half_width: float | None = None
    approximate: bool = False
    inconclusive: bool = False
    notes: list[str] = field(default_factory=list)


def bernoulli_entropy(pv: ProbabilityVector) -> float:
    """``-sum p_i log p_i``; logs of the rationals are taken through their integer parts."""
    return math.fsum(-float(p) * log_measure(p) for p in pv.probabilities)


def _counts(shift: BernoulliShift, sigma: SymbolicPoint, lo: int, hi: int) -> np.ndarray:
    syms = sigma.symbols(lo, hi).astype(np.int64)
    return np.bincount(syms, minlength=len(shift.pv) + 1)


def _neg_log_cylinder(shift: BernoulliShift, counts: np.ndarray, scale: int) -> float:
    """``-(1/scale) log mu`` of a cylinder with the given symbol counts.

    Counts of equiprobable symbols are pooled first, so a uniform shift gives
    ``(K/scale) * log N`` with a single rounding.
    """
    pooled: dict[Fraction, int] = {}
    for sym, k in enumerate(counts[1:], start=1):
        if k:
            p = shift.pv[sym]
            pooled[p] = pooled.get(p, 0) + int(k)
    return math.fsum(
        (k / scale) * -log_measure(p) if k != scale else -log_measure(p)
        for p, k in pooled.items()
    )


def birkhoff_frequency_entropy(shift: BernoulliShift, sigma: SymbolicPoint, n: int) -> EntropyEstimate:
    """``(1/n) sum_i -k_i log p_i`` with ``k_i`` the count of symbol ``i`` in ``sigma_0 .. sigma_{n-1}``.

    Converges to the entropy for almost every ``sigma``; constant or otherwise
    atypical sequences converge to something else.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    value = _neg_log_cylinder(shift, _counts(shift, sigma, 0, n), n)
    return EntropyEstimate("birkhoff-frequency", value, {"n": n})


def bowen_window(shift: BernoulliShift, n: int, delta) -> tuple[int, int] | None:
    """Index range fixed by ``C(x, n, delta) = {y : d(T^i x, T^i y) <= delta, 0 <= i < n}``.

    ``d <= delta`` means agreement on the first ``c'`` relative indices
    (``c' = c + 1``); ``None`` when that is no constraint at all.
    """
    cp = separation_class(delta) + 1
    if cp <= 0:
        return None
    if shift.two_sided:
        return -cp + 1, n + cp - 1
    return 0, n + cp - 1


def brin_katok_estimate(system: MetricSystem, x, delta, n: int, samples: int = 10_000,
                        seed: int = 0) -> EntropyEstimate:
    """``-(1/n) log mu C(x, n, delta)``, with the closed ``<= delta`` condition.

    Exact for Bernoulli shifts (the Bowen ball is a cylinder).  Other systems
    count sampled points whose orbit stays within ``delta`` for ``n`` steps;
    with no hits the returned value is a lower bound from the 99% upper
    confidence limit of the measure and is flagged inconclusive.
    """
    if delta <= 0 or n < 1:
        raise ValueError("need delta > 0 and n >= 1")
    params = {"delta": delta, "n": n}
    if isinstance(system, BernoulliShift):
        win = bowen_window(system, n, delta)
        if win is None:
            return EntropyEstimate("brin-katok", 0.0, params)
        counts = _counts(system, x, *win)
        return EntropyEstimate("brin-katok", _neg_log_cylinder(system, counts, n), params)
    orbit = [x]
    for _ in range(n - 1):
        orbit.append(system.transform(orbit[-1]))
    hits = 0
    for s in child_seeds(seed, samples):
        y = system.sample_point(s)
        ok = True
        for i, xi in enumerate(orbit):
            if i:
                y = system.transform(y)
            if system.distance(xi, y) > delta:
                ok = False
                break
        hits += ok
    params["samples"] = samples
    if hits == 0:
        upper = 1 - (0.01) ** (1 / samples)
        return EntropyEstimate("brin-katok", -math.log(upper) / n, params, approximate=True,
                               inconclusive=True, notes=["no sampled point stayed in the Bowen ball"])
    p = hits / samples
    hw = Z99 * math.sqrt(p * (1 - p) / samples) / p / n
    return EntropyEstimate("brin-katok", -math.log(p) / n, params, half_width=hw, approximate=True)


@dataclass(frozen=True)
class SymbolPartition:
    """Partition of a shift by the symbols on the first ``window`` indices.

    One-sided cells have diameter ``2**-window``.  For two-sided shifts the
    cells fix ``|i| < window``.
    """

    window: int = 1

    def diameter(self) -> float:
        return 2.0 ** -self.window


def partition_entropy(system: MetricSystem, partition, n: int, samples: int = 1000,
                      seed: int = 0, min_cell_count: int = 5) -> EntropyEstimate:
    """Estimate ``(1/(n+1)) E[-log mu C_n(x)]`` where ``C_n(x)`` is the itinerary cell of
    ``x`` in the refinement ``A v T^-1 A v ... v T^-n A``.

    ``x`` is sampled from ``mu``.  For shifts with a :class:`SymbolPartition`
    each itinerary cell is a cylinder whose measure is exact.  Otherwise
    ``partition`` is a callable ``point -> label`` and cell measures are the
    empirical frequencies of the sampled itineraries; cells seen fewer than
    ``min_cell_count`` times are reported as sample-starved.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    seeds = child_seeds(seed, samples)
    params = {"n": n, "samples": samples}
    if isinstance(system, BernoulliShift) and isinstance(partition, SymbolPartition):
        w = partition.window
        lo, hi = (-(w - 1), n + w) if system.two_sided else (0, n + w)
        vals = np.array([
            _neg_log_cylinder(system, _counts(system, system.sample_point(s), lo, hi), 1)
            for s in seeds
        ]) / (n + 1)
        params["window"] = w
        hw = Z99 * float(vals.std(ddof=1)) / math.sqrt(samples) if samples > 1 else None
        return EntropyEstimate("partition", float(vals.mean()), params, half_width=hw)
    cell: Callable[[Any], Hashable] = partition
    itineraries = []
    for s in seeds:
        x = system.sample_point(s)
        it = []
        for i in range(n + 1):
            if i:
                x = system.transform(x)
            it.append(cell(x))
        itineraries.append(tuple(it))
    freq = Counter(itineraries)
    vals = np.array([-math.log(freq[it] / samples) for it in itineraries]) / (n + 1)
    starved = sum(1 for c in freq.values() if c < min_cell_count)
    notes = [f"{starved} of {len(freq)} itinerary cells have fewer than {min_cell_count} samples"] if starved else []
    params["cells"] = len(freq)
    params["starved_cells"] = starved
    return EntropyEstimate("partition", float(vals.mean()), params, approximate=True, notes=notes)
