"""Full Bernoulli shifts on ``N`` symbols with the metric ``d = 2**-I``.

Points are infinite sequences, so a :class:`SymbolicPoint` is a lazy view: a
seeded i.i.d. symbol stream, an index offset (the number of shifts applied)
and an optional explicit window that overrides the stream.  Symbols are the
integers ``1..N``.

For one-sided points ``I(s, t) = min{i >= 0 : s_i != t_i}``; for two-sided
points ``I(s, t) = min{|i| : s_i != t_i}``.  The open ball ``B_eps(s)`` is the
cylinder fixing ``s_i`` on ``0 <= i < m`` (one-sided) or ``|i| < m``
(two-sided), where ``m = min{k : 2**-k < eps}``.
"""
from __future__ import annotations

import math
import threading
from collections import Counter
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import numpy as np

from .systems import MetricSystem, child_seeds, log_measure

BLOCK = 1024
DEFAULT_HORIZON = 10**6


def _rational(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        return Fraction(v.strip())
    return Fraction(v)


@dataclass(frozen=True)
class ProbabilityVector:
    """Full-support probability vector with exact rational entries."""

    probabilities: tuple[Fraction, ...]

    def __post_init__(self):
        probs = tuple(_rational(p) for p in self.probabilities)
        object.__setattr__(self, "probabilities", probs)
        if len(probs) < 2:
            raise ValueError("need at least two symbols")
        if any(p <= 0 for p in probs):
            raise ValueError(f"probabilities must be positive (full support): {probs}")
        if sum(probs) != 1:
            raise ValueError(f"probabilities sum to {sum(probs)}, not 1")

    @classmethod
    def parse(cls, text: str) -> "ProbabilityVector":
        return cls(tuple(Fraction(t.strip()) for t in text.split(",") if t.strip()))

    @classmethod
    def uniform(cls, n: int) -> "ProbabilityVector":
        return cls((Fraction(1, n),) * n)

    def __len__(self):
        return len(self.probabilities)

    def __getitem__(self, symbol: int) -> Fraction:
        """Probability of ``symbol`` (1-based)."""
        return self.probabilities[symbol - 1]

    def __str__(self):
        return ",".join(str(p) for p in self.probabilities)

    @property
    def max(self) -> Fraction:
        return max(self.probabilities)

    @property
    def min(self) -> Fraction:
        return min(self.probabilities)

    @property
    def neg_log(self) -> np.ndarray:
        """``-log p_k`` indexed by symbol (entry 0 unused)."""
        return np.array([0.0] + [-log_measure(p) for p in self.probabilities])

    @property
    def cdf(self) -> np.ndarray:
        return np.cumsum([float(p) for p in self.probabilities])[:-1]


class _SymbolStream:
    """i.i.d. symbols indexed by integers, generated in fixed-size blocks.

    Block ``b`` is drawn from a generator seeded by ``(seed, sign(b), |b|)``,
    so the symbol at any index depends only on the seed and the index.
    """

    def __init__(self, seed: int, pv: ProbabilityVector):
        self.seed = int(seed)
        self.pv = pv
        self._cdf = pv.cdf
        self._blocks: dict[int, np.ndarray] = {}
        self._lock = threading.Lock()

    def _block(self, b: int) -> np.ndarray:
        blk = self._blocks.get(b)
        if blk is None:
            with self._lock:
                blk = self._blocks.get(b)
                if blk is None:
                    rng = np.random.default_rng([self.seed, 0 if b >= 0 else 1, abs(b)])
                    u = rng.random(BLOCK)
                    blk = (np.searchsorted(self._cdf, u, side="right") + 1).astype(np.int8)
                    self._blocks[b] = blk
        return blk

    def window(self, lo: int, hi: int) -> np.ndarray:
        if hi <= lo:
            return np.zeros(0, dtype=np.int8)
        b0, b1 = lo // BLOCK, (hi - 1) // BLOCK
        parts = [self._block(b) for b in range(b0, b1 + 1)]
        arr = parts[0] if len(parts) == 1 else np.concatenate(parts)
        start = lo - b0 * BLOCK
        return arr[start : start + (hi - lo)]


@dataclass(frozen=True, eq=False)
class SymbolicPoint:
    """Lazy sequence ``i -> symbol``; ``T^k`` is the same stream viewed at ``offset + k``.

    ``patch`` overrides the stream on stream indices ``patch_lo ..
    patch_lo + len(patch) - 1``.
    """

    stream: _SymbolStream
    two_sided: bool = False
    offset: int = 0
    patch_lo: int = 0
    patch: tuple[int, ...] = ()

    def symbols(self, lo: int, hi: int) -> np.ndarray:
        """Symbols at point indices ``lo .. hi-1`` as an int8 array."""
        if not self.two_sided and lo < 0:
            raise IndexError("one-sided points have no negative indices")
        s_lo, s_hi = lo + self.offset, hi + self.offset
        arr = self.stream.window(s_lo, s_hi)
        if self.patch:
            p_lo, p_hi = self.patch_lo, self.patch_lo + len(self.patch)
            a, b = max(s_lo, p_lo), min(s_hi, p_hi)
            if a < b:
                arr = arr.copy()
                arr[a - s_lo : b - s_lo] = self.patch[a - p_lo : b - p_lo]
        return arr

    def __getitem__(self, i: int) -> int:
        return int(self.symbols(i, i + 1)[0])

    def shift(self, k: int = 1) -> "SymbolicPoint":
        """``T^k`` of this point; O(1), shares the underlying stream."""
        if k < 0 and not self.two_sided:
            raise ValueError("the one-sided shift is not invertible")
        return replace(self, offset=self.offset + k)

    def with_symbols(self, lo: int, symbols: Sequence[int]) -> "SymbolicPoint":
        """Copy of this point with ``symbols`` written at point indices ``lo ..``."""
        if not symbols:
            return self
        s_lo = lo + self.offset
        s_hi = s_lo + len(symbols)
        if self.patch:
            h_lo = min(s_lo, self.patch_lo)
            h_hi = max(s_hi, self.patch_lo + len(self.patch))
        else:
            h_lo, h_hi = s_lo, s_hi
        base = self.symbols(h_lo - self.offset, h_hi - self.offset).astype(int).tolist()
        base[s_lo - h_lo : s_hi - h_lo] = [int(s) for s in symbols]
        return replace(self, patch_lo=h_lo, patch=tuple(base))

    def __repr__(self):
        lo = -3 if self.two_sided else 0
        head = " ".join(str(s) for s in self.symbols(lo, lo + 8))
        return f"SymbolicPoint(seed={self.stream.seed}, offset={self.offset}, [{lo}:]={head} ...)"


@dataclass(frozen=True)
class CylinderSet:
    """Sequences with prescribed symbols on indices ``lo .. lo + len(symbols) - 1``.

    An empty symbol tuple is the whole space.
    """

    lo: int
    symbols: tuple[int, ...] = ()

    @property
    def hi(self) -> int:
        return self.lo + len(self.symbols) - 1

    def __len__(self):
        return len(self.symbols)

    def contains(self, point: SymbolicPoint) -> bool:
        if not self.symbols:
            return True
        got = point.symbols(self.lo, self.hi + 1)
        return bool(np.array_equal(got, np.asarray(self.symbols, dtype=np.int8)))


def cylinder_measure(c: CylinderSet, pv: ProbabilityVector) -> Fraction:
    """Exact product of ``p_s`` over the fixed symbols of ``c``."""
    out = Fraction(1)
    for s, k in Counter(c.symbols).items():
        out *= pv[s] ** k
    return out


def cylinder_log_measure(c: CylinderSet, pv: ProbabilityVector) -> float:
    counts = np.bincount(np.asarray(c.symbols, dtype=np.int64), minlength=len(pv) + 1)
    return -float(np.dot(counts, pv.neg_log))


def radius_window(eps) -> int:
    """``m = min{k >= 0 : 2**-k < eps}``: how many indices the open ball fixes."""
    e = _rational(eps)
    if e <= 0:
        raise ValueError("radius must be positive")
    if e > 1:
        return 0
    q = 1 / e
    return (q.numerator // q.denominator).bit_length()


def separation_class(delta) -> int:
    """The integer ``c`` with ``2**-c > delta >= 2**-(c+1)``, so ``2**-I > delta  iff  I <= c``.

    Returns ``-1`` when ``delta >= 1``: no pair is ever more than ``delta`` apart.
    """
    e = _rational(delta)
    if e <= 0:
        raise ValueError("delta must be positive")
    if e >= 1:
        return -1
    q = 1 / e
    ceil_q = -((-q.numerator) // q.denominator)
    return (ceil_q - 1).bit_length() - 1


def _check_pair(s: SymbolicPoint, t: SymbolicPoint):
    if s.two_sided != t.two_sided:
        raise ValueError("points have different sidedness")


def disagreement_index(s: SymbolicPoint, t: SymbolicPoint, horizon: int = DEFAULT_HORIZON) -> int | None:
    """``I(s, t)`` if it is at most ``horizon``, else ``None`` (beyond horizon)."""
    _check_pair(s, t)
    if not s.two_sided:
        lo, size = 0, 64
        while lo <= horizon:
            hi = min(lo + size, horizon + 1)
            diff = np.flatnonzero(s.symbols(lo, hi) != t.symbols(lo, hi))
            if diff.size:
                return lo + int(diff[0])
            lo, size = hi, min(size * 2, 1 << 16)
        return None
    if s[0] != t[0]:
        return 0
    r0, size = 1, 32
    while r0 <= horizon:
        r1 = min(r0 + size, horizon + 1)
        pos = s.symbols(r0, r1) != t.symbols(r0, r1)
        neg = (s.symbols(-r1 + 1, -r0 + 1) != t.symbols(-r1 + 1, -r0 + 1))[::-1]
        diff = np.flatnonzero(pos | neg)
        if diff.size:
            return r0 + int(diff[0])
        r0, size = r1, min(size * 2, 1 << 16)
    return None


def _same_point(s: SymbolicPoint, t: SymbolicPoint) -> bool:
    return (s.stream is t.stream and s.offset == t.offset and s.patch_lo == t.patch_lo
            and s.patch == t.patch and s.two_sided == t.two_sided)


def shift_distance(s: SymbolicPoint, t: SymbolicPoint, horizon: int = DEFAULT_HORIZON) -> tuple[Fraction, bool]:
    """``(2**-I, True)``, or ``(2**-horizon, False)`` as an upper bound past the horizon.

    Two views of the same stream at the same offset and patch are the same
    point, so their distance is exactly 0.
    """
    if _same_point(s, t):
        return Fraction(0), True
    i = disagreement_index(s, t, horizon)
    if i is None:
        return Fraction(1, 2**horizon), False
    return Fraction(1, 2**i), True


def ball_as_cylinder(s: SymbolicPoint, eps) -> CylinderSet:
    m = radius_window(eps)
    if m == 0:
        return CylinderSet(0, ())
    if s.two_sided:
        return CylinderSet(-(m - 1), tuple(int(v) for v in s.symbols(-(m - 1), m)))
    return CylinderSet(0, tuple(int(v) for v in s.symbols(0, m)))


def apply_shift(s: SymbolicPoint) -> SymbolicPoint:
    return s.shift(1)


def min_separating_time(window: int, delta) -> int | None:
    """Least ``k`` at which a positive-measure part of a cylinder leaves ``delta``.

    ``window`` is the number of fixed forward indices (the cylinder length for
    one-sided shifts, ``m`` for the two-sided ball fixing ``|i| < m``).  At
    time ``k`` the shifted points can differ at relative indices ``<= c`` only
    where an index ``k + j`` (``0 <= j <= c``) falls outside the fixed window,
    which first happens at ``k = window - c``.  For ``window <= c`` this is
    time 0.  ``None`` means never (``delta >= 1``).
    """
    c = separation_class(delta)
    if c < 0:
        return None
    return max(0, window - c)


def min_separating_time_exact(window: int, delta) -> int:
    """One-sided cylinder of length ``window``: the least separating time ``n - c``."""
    if _rational(delta) >= 1:
        raise ValueError("delta must be < 1")
    return min_separating_time(window, delta)


class BernoulliShift(MetricSystem):
    """One- or two-sided Bernoulli shift with the product measure of ``pv``."""

    def __init__(self, pv: ProbabilityVector | Sequence, two_sided: bool = False,
                 horizon: int = DEFAULT_HORIZON):
        self.pv = pv if isinstance(pv, ProbabilityVector) else ProbabilityVector(tuple(pv))
        self.two_sided = two_sided
        self.horizon = horizon
        self.name = "two-sided-shift" if two_sided else "one-sided-shift"

    def point(self, symbols: Sequence[int] = (), lo: int = 0, seed: int = 0) -> SymbolicPoint:
        """A point with explicit ``symbols`` from index ``lo`` and a seeded i.i.d. tail."""
        if not self.two_sided and lo < 0:
            raise ValueError("one-sided points start at index 0")
        if any(not 1 <= s <= len(self.pv) for s in symbols):
            raise ValueError(f"symbols must lie in 1..{len(self.pv)}")
        p = SymbolicPoint(_SymbolStream(seed, self.pv), self.two_sided)
        return p.with_symbols(lo, symbols)

    def sample_point(self, seed: int) -> SymbolicPoint:
        return SymbolicPoint(_SymbolStream(seed, self.pv), self.two_sided)

    def transform(self, x):
        return x.shift(1)

    def distance(self, x, y):
        return shift_distance(x, y, self.horizon)[0]

    def resolve_distance(self, x, y):
        return shift_distance(x, y, self.horizon)

    def ball(self, x, eps) -> CylinderSet:
        return ball_as_cylinder(x, eps)

    def ball_measure(self, x, eps) -> Fraction:
        return cylinder_measure(ball_as_cylinder(x, eps), self.pv)

    def log_ball_measure(self, x, eps) -> float:
        return cylinder_log_measure(ball_as_cylinder(x, eps), self.pv)

    def separation_time(self, x, eps, delta, horizon):
        t = min_separating_time(radius_window(eps), delta)
        if t is None or t > horizon:
            return None
        return t

    def sample_in_ball(self, x, eps, seed, count):
        cyl = ball_as_cylinder(x, eps)
        return [self.sample_point(s).with_symbols(cyl.lo, cyl.symbols) for s in child_seeds(seed, count)]

    def describe(self):
        return {"name": self.name, "p": str(self.pv), "horizon": self.horizon}
