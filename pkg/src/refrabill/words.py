"""Alphabet of boundary intervals, admissible words and the word metric.

Symbols are 1-based integers, ``1..m``, following the order of the central
configurations along the boundary parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Sequence

import numpy as np

from .geometry import (
    BoundaryCurve,
    CentralConfiguration,
    find_central_configurations,
    intervals_not_antipodal,
    are_antipodal,
    is_lsc,
)


class InadmissibleDomainError(ValueError):
    """The domain does not carry an admissible interval system."""


@dataclass(frozen=True)
class IntervalSystem:
    """Alphabet of disjoint boundary intervals around central configurations.

    Attributes:
        curve: the boundary.
        intervals: ``(alpha_i, beta_i)`` per symbol; ``beta_i`` may exceed
            ``L`` when the interval straddles the parameter origin.
        ccs: central configuration of each interval.
        na: ``na[i]`` is the set of symbols whose interval is not antipodal
            to interval ``i``.
        half_width: common half-width of the intervals.
    """

    curve: BoundaryCurve
    intervals: tuple[tuple[float, float], ...]
    ccs: tuple[CentralConfiguration, ...]
    na: dict
    half_width: float

    @property
    def m(self) -> int:
        return len(self.intervals)

    @property
    def symbols(self) -> tuple[int, ...]:
        return tuple(range(1, self.m + 1))

    def interval(self, symbol: int) -> tuple[float, float]:
        return self.intervals[symbol - 1]

    def center(self, symbol: int) -> float:
        return self.ccs[symbol - 1].xi_bar

    def kind(self, symbol: int) -> str:
        return self.ccs[symbol - 1].kind

    def locate(self, xi: float) -> int | None:
        """Symbol whose interval contains ``xi`` (wrapped), else ``None``."""
        L = self.curve.length
        for k, (a, b) in enumerate(self.intervals, start=1):
            c = 0.5 * (a + b)
            if abs(self.curve.signed_gap(c, xi)) <= 0.5 * (b - a) + 1e-13:
                return k
        return None

    def lift(self, symbol: int, xi: float) -> float:
        """Representative of ``xi`` modulo ``L`` closest to the interval centre."""
        a, b = self.interval(symbol)
        c = 0.5 * (a + b)
        return c + self.curve.signed_gap(c, xi)

    def to_dict(self) -> dict:
        return {
            "intervals": [list(iv) for iv in self.intervals],
            "centers": [c.xi_bar for c in self.ccs],
            "kinds": [c.kind for c in self.ccs],
            "second_derivatives": [c.second_derivative for c in self.ccs],
            "NA": {str(k): sorted(v) for k, v in self.na.items()},
            "half_width": self.half_width,
        }


def _disjoint(curve: BoundaryCurve, ivs) -> bool:
    m = len(ivs)
    for i in range(m):
        for j in range(i + 1, m):
            ci, cj = 0.5 * sum(ivs[i]), 0.5 * sum(ivs[j])
            wi, wj = 0.5 * (ivs[i][1] - ivs[i][0]), 0.5 * (ivs[j][1] - ivs[j][0])
            if abs(curve.signed_gap(ci, cj)) <= wi + wj:
                return False
    return True


def _system_problems(curve: BoundaryCurve, ccs, w: float) -> tuple[list[str], dict]:
    ivs = [(c.xi_bar - w, c.xi_bar + w) for c in ccs]
    problems: list[str] = []
    if not _disjoint(curve, ivs):
        problems.append("intervals overlap")
    for k, (c, (a, b)) in enumerate(zip(ccs, ivs), start=1):
        r1a = curve.radius(a)[1]
        r1b = curve.radius(b)[1]
        if not r1a * r1b < 0.0:
            problems.append(f"interval {k}: radius derivative does not change sign")
        for s in np.linspace(c.xi_bar - 1.5 * w, c.xi_bar + 1.5 * w, 7):
            if not is_lsc(curve, float(s)):
                problems.append(f"interval {k}: not locally star-convex near xi={s:.6g}")
                break
    na: dict[int, set[int]] = {}
    m = len(ccs)
    for i in range(1, m + 1):
        na[i] = {j for j in range(1, m + 1) if intervals_not_antipodal(curve, ivs[i - 1], ivs[j - 1])}
    for i in range(1, m + 1):
        if i not in na[i]:
            problems.append(f"interval {i} is self-antipodal")
        elif not (na[i] - {i}):
            problems.append(f"NA({i}) has no symbol besides {i}")
    return problems, na


def build_interval_system(
    curve: BoundaryCurve,
    ccs: Sequence[CentralConfiguration] | None = None,
    half_width: float | None = None,
    max_halvings: int = 10,
) -> IntervalSystem:
    """Intervals around strict central configurations and their NA relation.

    Args:
        curve: the boundary.
        ccs: central configurations to use; defaults to all strict ones.
        half_width: initial half-width; defaults to ``0.05 L``. It is halved
            until the intervals are disjoint, locally star-convex on a
            dilation, not self-antipodal, and every ``NA(i)`` contains ``i``
            and at least one other symbol.

    Raises:
        InadmissibleDomainError: fewer than two strict configurations, two
            antipodal ones, or no width satisfying the checks.
    """
    if ccs is None:
        ccs = find_central_configurations(curve)
    ccs = sorted((c for c in ccs if c.kind in ("strict_min", "strict_max")), key=lambda c: c.xi_bar)
    if len(ccs) < 2:
        raise InadmissibleDomainError(f"need at least two strict central configurations, found {len(ccs)}")
    if not all(c.lsc_ok for c in ccs):
        raise InadmissibleDomainError("a central configuration is not locally star-convex")
    if len(ccs) == 2 and are_antipodal(curve, ccs[0].xi_bar, ccs[1].xi_bar):
        raise InadmissibleDomainError("only two central configurations and they are antipodal")
    w = 0.05 * curve.length if half_width is None else float(half_width)
    problems: list[str] = []
    for _ in range(max_halvings + 1):
        problems, na = _system_problems(curve, ccs, w)
        if not problems:
            ivs = tuple((c.xi_bar - w, c.xi_bar + w) for c in ccs)
            return IntervalSystem(curve, ivs, tuple(ccs), {k: frozenset(v) for k, v in na.items()}, w)
        w *= 0.5
    raise InadmissibleDomainError("no admissible interval width: " + "; ".join(problems))


# ---------------------------------------------------------------------------
# words


def parse_word(text: str) -> tuple[int, ...]:
    """Parse a comma-separated word literal such as ``"1,2,2,1"``."""
    try:
        out = tuple(int(s) for s in str(text).replace(" ", "").split(",") if s)
    except ValueError as exc:
        raise ValueError(f"invalid word literal {text!r}") from exc
    if not out:
        raise ValueError("empty word")
    return out


def is_admissible(word: Sequence[int], system: IntervalSystem, periodic: bool = True) -> bool:
    """Every consecutive pair (wrapping if periodic) satisfies the NA relation."""
    word = tuple(word)
    if not word or any(s not in system.na for s in word):
        return False
    pairs = list(zip(word, word[1:]))
    if periodic:
        pairs.append((word[-1], word[0]))
    return all(b in system.na[a] for a, b in pairs)


def admissible_words(system: IntervalSystem, n: int, periodic: bool = True) -> list[tuple[int, ...]]:
    return [w for w in product(system.symbols, repeat=n) if is_admissible(w, system, periodic)]


def canonical_rotation(word: Sequence[int]) -> tuple[int, ...]:
    word = tuple(word)
    return min(word[k:] + word[:k] for k in range(len(word)))


def primitive_root(word: Sequence[int]) -> tuple[int, ...]:
    """Shortest word whose periodic repetition equals ``word``."""
    word = tuple(word)
    n = len(word)
    for p in range(1, n + 1):
        if n % p == 0 and word[:p] * (n // p) == word:
            return word[:p]
    return word


def necklaces(system: IntervalSystem, n: int) -> list[tuple[int, ...]]:
    """One representative per rotation class of admissible periodic words."""
    return sorted({canonical_rotation(w) for w in admissible_words(system, n, True)})


@dataclass(frozen=True)
class WordWindow:
    """Finite window of a bi-infinite word.

    Attributes:
        symbols: the visible symbols.
        center: index in ``symbols`` of position ``k = 0``.
        periodic: the window is one period of a periodic word, so every
            position is known.
    """

    symbols: tuple[int, ...]
    center: int = 0
    periodic: bool = False

    def at(self, k: int) -> int | None:
        if self.periodic:
            return self.symbols[(self.center + k) % len(self.symbols)]
        i = self.center + k
        return self.symbols[i] if 0 <= i < len(self.symbols) else None

    @property
    def known_range(self) -> tuple[float, float]:
        if self.periodic:
            return -math.inf, math.inf
        return -self.center, len(self.symbols) - 1 - self.center


def word_distance(w1: WordWindow, w2: WordWindow, horizon: int = 60) -> tuple[float, float]:
    """Bounds on ``sum_k rho(l_k, m_k) / 4^|k|`` between two windows.

    Positions outside either window are unseen; their total weight is added
    to the upper bound only. Periodic windows are summed up to ``horizon``
    and the remaining weight is likewise added to the upper bound.

    Returns:
        ``(lower, upper)``.
    """
    lo = 0.0
    unseen = 0.0
    for k in range(-horizon, horizon + 1):
        a, b = w1.at(k), w2.at(k)
        weight = 4.0 ** (-abs(k))
        if a is None or b is None:
            unseen += weight
        elif a != b:
            lo += weight
    tail = 2.0 * 4.0 ** (-horizon) / 3.0
    return lo, lo + unseen + tail


@dataclass(frozen=True)
class SymmetryInfo:
    """Reflection symmetries of a periodic word.

    A reflection ``k -> c - k`` (indices mod ``n``) with ``c`` odd fixes
    gaps between symbols ("gap axis"); with ``c`` even it fixes symbols
    ("element axis").

    Attributes:
        symmetric: a gap axis exists, or the word has length one.
        gap_axes: for each gap reflection, the pairs of positions it
            separates, e.g. ``((1, 2), (3, 0))``.
        element_axes: for each element reflection, the positions it fixes
            or the gaps it crosses.
    """

    symmetric: bool
    gap_axes: tuple
    element_axes: tuple

    def describe(self) -> str:
        if not self.symmetric:
            return "no gap-type symmetry axis"
        if not self.gap_axes:
            return "single symbol (homothetic)"
        parts = [" and ".join(f"between positions {a} and {b}" for a, b in ax) for ax in self.gap_axes]
        return "; ".join(parts)


def _reflection_fixed(c: int, n: int) -> tuple:
    """Points fixed by ``k -> c - k`` on ``Z_n``: ints are symbols, pairs are gaps."""
    out = []
    for twice in (c, c + n):
        if twice % 2 == 0:
            x = (twice // 2) % n
        else:
            a = ((twice - 1) // 2) % n
            x = (a, (a + 1) % n)
        if x not in out:
            out.append(x)
    return tuple(out)


def is_symmetric(word: Sequence[int]) -> SymmetryInfo:
    """Detect reflection symmetries of a periodic word.

    The word is symmetric when some reflection fixes a gap between two
    (necessarily equal) consecutive symbols. For odd length every
    reflection fixes one gap and one symbol; for even length a reflection
    fixes either two gaps or two symbols.
    """
    word = tuple(word)
    n = len(word)
    gap, elem = [], []
    for c in range(n):
        if not all(word[k] == word[(c - k) % n] for k in range(n)):
            continue
        fixed = _reflection_fixed(c, n)
        gaps = tuple(x for x in fixed if isinstance(x, tuple))
        if gaps:
            gap.append(gaps)
        else:
            elem.append(fixed)
    return SymmetryInfo(bool(gap), tuple(gap), tuple(elem))
