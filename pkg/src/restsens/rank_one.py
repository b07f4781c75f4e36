"""Rank-one cutting-and-stacking transformations with exact rational endpoints.

A spec gives, for every stage ``n``, the number of cuts ``r_n``, the spacer
counts ``s_n(j)`` and the cut proportions ``p_n(j)``.  Column ``C_0`` is the
interval ``[0, w0)``.  ``C_{n+1}`` cuts every level of ``C_n`` into ``r_n``
sublevels in proportions ``p_n``, puts ``s_n(j)`` spacers (each as wide as
the top sublevel of subcolumn ``j``) over subcolumn ``j`` and stacks the
subcolumns left to right, bottom to top.

Spacers are taken from a single fresh region to the right of all used space,
in construction order, so the spacers of stage ``n`` fill ``[F_n, F_{n+1})``
contiguously.  That makes every level addressable without materialising the
column: :meth:`RankOneSystem.level` and :meth:`RankOneSystem.locate` walk the
stage recursion in ``O(n r)`` steps, which is what lets queries reach depth 64
even though ``h_64`` of Chacon's map is about ``3**64``.

:func:`build_columns` materialises columns level by level and is used as an
independent check of the implicit addressing.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np

from .systems import MetricSystem, UndefinedAtDepth, child_seeds, time_bound

DEFAULT_DEPTH_CAP = 64


class DomainError(ValueError):
    """A point lies outside the constructed space."""


class SpaceCapExceeded(ValueError):
    """Cumulative spacer measure pushed the space past the configured cap."""


@dataclass(frozen=True)
class Stage:
    cuts: int
    spacers: tuple[int, ...]
    proportions: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "spacers", tuple(int(s) for s in self.spacers))
        object.__setattr__(self, "proportions", tuple(Fraction(p) for p in self.proportions))
        if len(self.spacers) != self.cuts or len(self.proportions) != self.cuts:
            raise ValueError(
                f"stage with r={self.cuts} needs {self.cuts} spacer counts and proportions, "
                f"got {len(self.spacers)} and {len(self.proportions)}"
            )

    @classmethod
    def uniform(cls, cuts: int, spacers: Sequence[int]) -> "Stage":
        return cls(cuts, tuple(spacers), (Fraction(1, cuts),) * cuts)

    @property
    def is_uniform(self) -> bool:
        return all(p == Fraction(1, self.cuts) for p in self.proportions)


@dataclass(frozen=True)
class RankOneSpec:
    """Initial width plus a stage list ``prefix`` followed by ``period`` repeated forever.

    An empty ``period`` makes the spec finite: only ``len(prefix)`` stages exist.
    """

    w0: Fraction
    prefix: tuple[Stage, ...] = ()
    period: tuple[Stage, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "w0", Fraction(self.w0))
        object.__setattr__(self, "prefix", tuple(self.prefix))
        object.__setattr__(self, "period", tuple(self.period))

    @property
    def stage_count(self) -> float:
        return math.inf if self.period else len(self.prefix)

    def stage(self, n: int) -> Stage:
        if n < len(self.prefix):
            return self.prefix[n]
        if not self.period:
            raise IndexError(f"finite spec has only {len(self.prefix)} stages")
        return self.period[(n - len(self.prefix)) % len(self.period)]

    def _distinct_stages(self):
        return self.prefix + self.period

    @property
    def measure_preserving(self) -> bool:
        return all(st.is_uniform for st in self._distinct_stages())

    @property
    def min_proportion(self) -> Fraction:
        """Uniform lower bound ``c`` on every ``p_n(j)``."""
        return min(min(st.proportions) for st in self._distinct_stages())

    @property
    def max_cuts(self) -> int:
        return max(st.cuts for st in self._distinct_stages())


def chacon(w0=Fraction(2, 3)) -> RankOneSpec:
    """Chacon's map: three cuts, one spacer over the middle, forever."""
    return RankOneSpec(Fraction(w0), (), (Stage.uniform(3, (0, 1, 0)),))


@dataclass(frozen=True)
class RationalInterval:
    """Half-open interval ``[left, right)`` with rational endpoints."""

    left: Fraction
    right: Fraction

    def __post_init__(self):
        object.__setattr__(self, "left", Fraction(self.left))
        object.__setattr__(self, "right", Fraction(self.right))
        if not self.left < self.right:
            raise ValueError(f"empty interval [{self.left}, {self.right})")

    @property
    def length(self) -> Fraction:
        return self.right - self.left

    def __contains__(self, x) -> bool:
        return self.left <= x < self.right

    def contains_interval(self, other: "RationalInterval") -> bool:
        return self.left <= other.left and other.right <= self.right


@dataclass(frozen=True)
class Column:
    stage: int
    levels: tuple[RationalInterval, ...]

    @property
    def height(self) -> int:
        return len(self.levels)


@dataclass
class ValidationReport:
    valid: bool
    depth: int
    heights: list[int]
    min_widths: list[Fraction]
    max_widths: list[Fraction]
    total_measure: Fraction
    space_cap: Fraction | None
    within_cap: bool
    widths_to_zero: bool
    problems: list[str] = field(default_factory=list)


def validate_spec(spec: RankOneSpec, depth: int, space_cap=Fraction(1)) -> ValidationReport:
    """Check stage data and run the measure/width recursions through ``depth`` stages.

    Raises ``ValueError`` for ``r_n < 2``, non-positive or non-normalised
    proportions.  ``widths_to_zero`` holds for periodic specs because every
    stage shrinks the widest level by ``max_j p_n(j) < 1``.
    """
    if spec.w0 <= 0:
        raise ValueError("w0 must be positive")
    for k, st in enumerate(spec._distinct_stages()):
        if st.cuts < 2:
            raise ValueError(f"stage {k}: r = {st.cuts} < 2")
        if any(p <= 0 for p in st.proportions):
            raise ValueError(f"stage {k}: proportions must be positive")
        if sum(st.proportions) != 1:
            raise ValueError(f"stage {k}: proportions sum to {sum(st.proportions)}, not 1")
        if any(s < 0 for s in st.spacers):
            raise ValueError(f"stage {k}: negative spacer count")
    depth = int(min(depth, spec.stage_count))
    h, lo, hi, top, total = 1, spec.w0, spec.w0, spec.w0, spec.w0
    heights, mins, maxs = [h], [lo], [hi]
    for n in range(depth):
        st = spec.stage(n)
        total += sum(s * p * top for s, p in zip(st.spacers, st.proportions))
        top = _next_top_width(st, top)
        h = st.cuts * h + sum(st.spacers)
        lo, hi = lo * min(st.proportions), hi * max(st.proportions)
        heights.append(h)
        mins.append(lo)
        maxs.append(hi)
    cap = None if space_cap is None else Fraction(space_cap)
    within = cap is None or total <= cap
    return ValidationReport(
        valid=within,
        depth=depth,
        heights=heights,
        min_widths=mins,
        max_widths=maxs,
        total_measure=total,
        space_cap=cap,
        within_cap=within,
        widths_to_zero=bool(spec.period),
        problems=[] if within else [f"total measure {total} exceeds cap {cap}"],
    )


def _next_top_width(st: Stage, top: Fraction) -> Fraction:
    # top of C_{n+1}: last spacer over subcolumn r-1, or its top sublevel
    return st.proportions[-1] * top


def build_columns(spec: RankOneSpec, stages: int, space_cap=Fraction(1)) -> list[Column]:
    """Materialise ``C_0 .. C_stages`` level by level."""
    validate_spec(spec, stages, None)
    levels = [RationalInterval(0, spec.w0)]
    frontier = spec.w0
    cols = [Column(0, tuple(levels))]
    for n in range(stages):
        st = spec.stage(n)
        top = levels[-1].length
        new: list[RationalInterval] = []
        lo = Fraction(0)
        for j in range(st.cuts):
            hi = lo + st.proportions[j]
            for lv in levels:
                new.append(RationalInterval(lv.left + lo * lv.length, lv.left + hi * lv.length))
            width = st.proportions[j] * top
            for _ in range(st.spacers[j]):
                new.append(RationalInterval(frontier, frontier + width))
                frontier += width
            lo = hi
        if space_cap is not None and frontier > space_cap:
            raise SpaceCapExceeded(f"stage {n + 1}: total measure {frontier} exceeds cap {space_cap}")
        levels = new
        cols.append(Column(n + 1, tuple(levels)))
    return cols


@dataclass
class _Piece:
    """A subinterval riding inside level ``index`` of column ``stage``."""

    interval: RationalInterval
    stage: int
    index: int
    level: RationalInterval


def _affine(x: Fraction, src: RationalInterval, dst: RationalInterval) -> Fraction:
    return dst.left + (x - src.left) * dst.length / src.length


def _affine_interval(j: RationalInterval, src: RationalInterval, dst: RationalInterval) -> RationalInterval:
    return RationalInterval(_affine(j.left, src, dst), _affine(j.right, src, dst))


class RankOneSystem(MetricSystem):
    """The limit map ``T = lim T_n`` on ``X = [0, total)`` with Lebesgue measure and ``|x - y|``.

    Stage tables (heights, fresh-space frontiers, top widths, spacer
    positions) are computed once up to ``depth_cap`` at construction, so the
    instance is immutable and safe to share.  A map that cannot be resolved by
    stage ``depth_cap`` raises :class:`UndefinedAtDepth`.
    """

    name = "rank-one"

    def __init__(self, spec: RankOneSpec, depth_cap: int = DEFAULT_DEPTH_CAP,
                 space_cap=Fraction(1)):
        report = validate_spec(spec, depth_cap, space_cap)
        if not report.within_cap:
            raise SpaceCapExceeded(report.problems[0])
        self.spec = spec
        self.depth_cap = report.depth
        self.space_cap = report.space_cap
        self.heights = report.heights
        self.min_widths = report.min_widths
        self.max_widths = report.max_widths
        self.frontier = [spec.w0]
        self.top_width = [spec.w0]
        self.bottom_width = [spec.w0]
        self._cum_p: list[list[Fraction]] = []
        self._sub_offset: list[list[int]] = []
        self._spacer_start: list[list[Fraction]] = []
        for n in range(self.depth_cap):
            st = spec.stage(n)
            h, top, f = self.heights[n], self.top_width[n], self.frontier[n]
            cum, off, start = [Fraction(0)], [0], [f]
            for j in range(st.cuts):
                cum.append(cum[-1] + st.proportions[j])
                off.append(off[-1] + h + st.spacers[j])
                start.append(start[-1] + st.spacers[j] * st.proportions[j] * top)
            self._cum_p.append(cum)
            self._sub_offset.append(off)
            self._spacer_start.append(start)
            self.frontier.append(start[-1])
            self.top_width.append(_next_top_width(st, top))
            self.bottom_width.append(self.bottom_width[n] * st.proportions[0])

    # -- addressing ---------------------------------------------------------

    @property
    def total_measure(self) -> Fraction:
        """Measure of the space built through ``depth_cap`` stages."""
        return self.frontier[-1]

    def _spacer(self, n: int, j: int, t: int) -> RationalInterval:
        """Spacer ``t`` over subcolumn ``j`` added when building ``C_{n+1}``."""
        st = self.spec.stage(n)
        width = st.proportions[j] * self.top_width[n]
        a = self._spacer_start[n][j] + t * width
        return RationalInterval(a, a + width)

    def _sublevel(self, n: int, lv: RationalInterval, j: int) -> RationalInterval:
        cum = self._cum_p[n]
        L = lv.length
        return RationalInterval(lv.left + cum[j] * L, lv.left + cum[j + 1] * L)

    def level(self, n: int, i: int) -> RationalInterval:
        """Level ``I_{n,i}`` as an exact interval."""
        if not 0 <= n <= self.depth_cap:
            raise IndexError(f"stage {n} outside 0..{self.depth_cap}")
        if not 0 <= i < self.heights[n]:
            raise IndexError(f"level {i} outside column {n} of height {self.heights[n]}")
        cuts: list[tuple[int, int]] = []
        while n > 0:
            off = self._sub_offset[n - 1]
            j = bisect.bisect_right(off, i) - 1
            k = i - off[j]
            h = self.heights[n - 1]
            if k >= h:
                base = self._spacer(n - 1, j, k - h)
                break
            cuts.append((n - 1, j))
            i, n = k, n - 1
        else:
            base = RationalInterval(0, self.spec.w0)
        for m, j in reversed(cuts):
            base = self._sublevel(m, base, j)
        return base

    def _birth(self, x: Fraction) -> tuple[int, int, RationalInterval]:
        """First column containing ``x`` and its level there."""
        if x < 0 or x >= self.frontier[-1]:
            raise DomainError(f"{x} lies outside [0, {self.frontier[-1]})")
        if x < self.spec.w0:
            return 0, 0, RationalInterval(0, self.spec.w0)
        b = bisect.bisect_right(self.frontier, x) - 1
        starts = self._spacer_start[b]
        j = bisect.bisect_right(starts, x) - 1
        st = self.spec.stage(b)
        width = st.proportions[j] * self.top_width[b]
        t = int((x - starts[j]) // width)
        idx = self._sub_offset[b][j] + self.heights[b] + t
        return b + 1, idx, self._spacer(b, j, t)

    def _descend(self, x: Fraction, n: int, i: int, lv: RationalInterval) -> tuple[int, RationalInterval]:
        """Level of ``C_{n+1}`` holding ``x``, given that ``x`` is in level ``i`` of ``C_n``."""
        cum = self._cum_p[n]
        frac = (x - lv.left) / lv.length
        j = bisect.bisect_right(cum, frac) - 1
        return self._sub_offset[n][j] + i, self._sublevel(n, lv, j)

    def locate(self, x, n: int) -> tuple[int, RationalInterval] | None:
        """``(i, I_{n,i})`` with ``x`` in ``I_{n,i}``, or ``None`` if ``x`` is not yet in ``C_n``."""
        x = Fraction(x)
        b, i, lv = self._birth(x)
        if b > n:
            return None
        for m in range(b, n):
            i, lv = self._descend(x, m, i, lv)
        return i, lv

    def _branch(self, x, direction: int, depth_cap: int | None):
        """Stage, source level and destination level of the affine branch through ``x``."""
        cap = self.depth_cap if depth_cap is None else min(depth_cap, self.depth_cap)
        x = Fraction(x)
        n, i, lv = self._birth(x)
        while n <= cap:
            j = i + direction
            if 0 <= j < self.heights[n]:
                return n, lv, self.level(n, j)
            if n == cap:
                break
            i, lv = self._descend(x, n, i, lv)
            n += 1
        raise UndefinedAtDepth(
            f"{x} sits in the {'top' if direction > 0 else 'bottom'} level of every column up to stage {cap}"
        )

    # -- the map ------------------------------------------------------------

    def apply_T(self, x, depth_cap: int | None = None) -> Fraction:
        _, src, dst = self._branch(x, +1, depth_cap)
        return _affine(Fraction(x), src, dst)

    def apply_T_inverse(self, x, depth_cap: int | None = None) -> Fraction:
        _, src, dst = self._branch(x, -1, depth_cap)
        return _affine(Fraction(x), src, dst)

    def column_map(self, x, n: int) -> Fraction | None:
        """``T_n(x)``; ``None`` on the top level of ``C_n``."""
        loc = self.locate(x, n)
        if loc is None:
            raise DomainError(f"{x} is not in column {n}")
        i, lv = loc
        if i == self.heights[n] - 1:
            return None
        return _affine(Fraction(x), lv, self.level(n, i + 1))

    def radon_nikodym(self, x, depth_cap: int | None = None) -> Fraction:
        """Slope of the affine branch of ``T`` through ``x``."""
        _, src, dst = self._branch(x, +1, depth_cap)
        return dst.length / src.length

    # -- intervals ----------------------------------------------------------

    def _piece(self, j: RationalInterval) -> _Piece:
        b, i, lv = self._birth(j.left)
        if not lv.contains_interval(j):
            raise DomainError(f"[{j.left}, {j.right}) is not inside a single level")
        return _Piece(j, b, i, lv)

    def _refine(self, p: _Piece, cap: int) -> list[_Piece]:
        """Split ``p`` along the sublevels of its level in the next column."""
        n = p.stage
        if n >= cap:
            raise UndefinedAtDepth(f"interval reached the edge of column {n} at the depth cap")
        out = []
        for j in range(self.spec.stage(n).cuts):
            sub = self._sublevel(n, p.level, j)
            a, b = max(sub.left, p.interval.left), min(sub.right, p.interval.right)
            if a < b:
                out.append(_Piece(RationalInterval(a, b), n + 1, self._sub_offset[n][j] + p.index, sub))
        return out

    def _advance(self, pieces: list[_Piece], steps: int, cap: int, direction: int = 1) -> list[_Piece]:
        """Push every piece ``steps`` iterations forward (or backward).

        Inside one column the composed branch from level ``i`` to ``i + t`` is
        the affine map between those two levels, so whole runs are jumped at
        once; a piece is only split when it sits on the top (bottom) level.
        """
        done: list[_Piece] = []
        work = [(p, steps) for p in pieces]
        while work:
            p, left = work.pop()
            if left == 0:
                done.append(p)
                continue
            h = self.heights[p.stage]
            room = (h - 1 - p.index) if direction > 0 else p.index
            if room == 0:
                work.extend((q, left) for q in self._refine(p, cap))
                continue
            t = min(room, left)
            k = p.index + direction * t
            dst = self.level(p.stage, k)
            work.append((_Piece(_affine_interval(p.interval, p.level, dst), p.stage, k, dst), left - t))
        done.sort(key=lambda q: q.interval.left)
        return done

    def transform_interval(self, j: RationalInterval, n: int, depth_cap: int | None = None
                           ) -> tuple[list[RationalInterval], Fraction]:
        """Exact image of ``j`` under ``T^n`` and its diameter ``sup - inf``."""
        cap = self.depth_cap if depth_cap is None else min(depth_cap, self.depth_cap)
        direction = 1 if n >= 0 else -1
        pieces = self._advance([self._piece(j)], abs(n), cap, direction)
        ivs = [p.interval for p in pieces]
        return ivs, _diameter(ivs)

    def interval_orbit(self, j: RationalInterval, steps: int, depth_cap: int | None = None
                       ) -> Iterator[list[RationalInterval]]:
        """Images of ``j`` under ``T^0, T^1, ..., T^steps``."""
        cap = self.depth_cap if depth_cap is None else min(depth_cap, self.depth_cap)
        pieces = [self._piece(j)]
        yield [p.interval for p in pieces]
        for _ in range(steps):
            pieces = self._advance(pieces, 1, cap)
            yield [p.interval for p in pieces]

    def split_into_levels(self, j: RationalInterval, depth: int | None = None) -> list[RationalInterval]:
        """Cut ``j`` (clipped to the space) into pieces that each lie inside one level.

        Material born after stage ``depth`` is dropped; it lives in ever
        thinner spacer regions near the right end of the space.
        """
        cap = self.depth_cap if depth is None else min(depth, self.depth_cap)
        lo, hi = max(j.left, Fraction(0)), min(j.right, self.frontier[cap])
        out: list[RationalInterval] = []
        if lo >= hi:
            return out
        w0 = self.spec.w0
        if lo < w0:
            out.append(RationalInterval(lo, min(hi, w0)))
        b_first = max(0, bisect.bisect_right(self.frontier, lo) - 1)
        for b in range(b_first, cap):
            f0, f1 = self.frontier[b], self.frontier[b + 1]
            if f0 >= hi:
                break
            if f1 <= lo or f0 == f1:
                continue
            st = self.spec.stage(b)
            starts = self._spacer_start[b]
            for jj in range(st.cuts):
                s0, s1 = starts[jj], starts[jj + 1]
                if s1 <= lo or s0 >= hi or s0 == s1:
                    continue
                width = st.proportions[jj] * self.top_width[b]
                t0 = int((max(lo, s0) - s0) // width)
                t1 = int(-((-(min(hi, s1) - s0)) // width))
                for t in range(t0, t1):
                    a, c = s0 + t * width, s0 + (t + 1) * width
                    a, c = max(a, lo), min(c, hi)
                    if a < c:
                        out.append(RationalInterval(a, c))
        return out

    # -- MetricSystem -------------------------------------------------------

    def transform(self, x):
        return self.apply_T(x)

    def distance(self, x, y):
        return abs(Fraction(x) - Fraction(y))

    def lebesgue_ball_measure(self, x, eps) -> Fraction:
        """``lambda((x - eps, x + eps) & [0, total))``, exact."""
        x, eps = Fraction(x), Fraction(eps)
        lo, hi = max(x - eps, Fraction(0)), min(x + eps, self.total_measure)
        return max(hi - lo, Fraction(0))

    def ball_measure(self, x, eps):
        return self.lebesgue_ball_measure(x, eps)

    def sample_point(self, seed: int) -> Fraction:
        k = int(np.random.default_rng(seed).integers(0, 2**53))
        return Fraction(k, 2**53) * self.total_measure

    def separation_time(self, x, eps, delta, horizon):
        """Exact least separating time via interval propagation of the ball."""
        x, eps, delta = Fraction(x), Fraction(eps), Fraction(delta)
        ball = RationalInterval(x - eps, x + eps) if eps > 0 else None
        pieces = [self._piece(p) for p in self.split_into_levels(ball)]
        xn = x
        for n in range(horizon + 1):
            if n > 0:
                pieces = self._advance(pieces, 1, self.depth_cap)
                xn = self.apply_T(xn)
            if pieces:
                lo = min(p.interval.left for p in pieces)
                hi = max(p.interval.right for p in pieces)
                if hi > xn + delta or lo < xn - delta:
                    return n
        return None

    def describe(self):
        return {"name": self.name, "w0": self.spec.w0, "depth_cap": self.depth_cap,
                "measure_preserving": self.spec.measure_preserving}


def _diameter(ivs: Sequence[RationalInterval]) -> Fraction:
    if not ivs:
        return Fraction(0)
    return max(iv.right for iv in ivs) - min(iv.left for iv in ivs)


def lebesgue_ball_measure(system: RankOneSystem, x, eps) -> Fraction:
    return system.lebesgue_ball_measure(x, eps)
