"""Realization of symbolic words as refraction trajectories.

A word ``(l_0, ..., l_{n-1})`` fixes two boundary crossings per symbol in the
interval of that symbol. The crossings are the critical points of the total
Jacobi length, and the Snell law at each crossing is the vanishing of one
gradient component. Existence is certified by opposite signs of each
gradient component on opposite faces of the parameter box; the critical
point itself is found by damped Newton on the gradient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .arcs import ArcError, InnerArc, OuterArc
from .jacobi import (
    JacobiValue,
    WordArcError,
    arc_pairs,
    arc_value,
    assemble_gradient,
    evaluate_arcs,
    n_params,
    snell_residual,
)
from .model import BilliardParams
from .words import IntervalSystem, is_admissible

RADIAL_TOL = 1e-7


class RealizationError(RuntimeError):
    """Newton refinement did not reach a critical point.

    Attributes:
        best_residual: smallest sup-norm of the gradient seen.
        best_xi: parameters at which it was attained.
    """

    def __init__(self, message: str, best_residual: float = math.inf, best_xi=None, iterations: int = 0):
        super().__init__(message)
        self.best_residual = best_residual
        self.best_xi = None if best_xi is None else np.asarray(best_xi)
        self.iterations = iterations


class InadmissibleWordError(ValueError):
    """The word violates the NA grammar of the interval system."""


class UniquenessPreconditionError(ValueError):
    """Central configurations or radius convexity do not permit the check."""


# ---------------------------------------------------------------------------
# parameter boxes


@dataclass(frozen=True)
class WordProblem:
    """Parameter box and index bookkeeping for one word.

    Attributes:
        word: the symbols.
        mode: ``"periodic"`` or ``"fixed_ends"``.
        lower, upper: bounds of the free variables (lifted, not wrapped).
        free: indices of the free variables within the full parameter vector.
        pinned: values of the pinned entries (fixed-ends only).
    """

    system: IntervalSystem
    params: BilliardParams
    word: tuple[int, ...]
    mode: str
    lower: np.ndarray
    upper: np.ndarray
    free: np.ndarray
    pinned: dict

    @property
    def n(self) -> int:
        return len(self.word)

    @property
    def dim(self) -> int:
        return len(self.free)

    @property
    def size(self) -> int:
        return n_params(self.n, self.mode)

    @property
    def curve(self):
        return self.system.curve

    def symbol_of(self, index: int) -> int:
        return self.word[index // 2]

    def full(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(self.size)
        for k, v in self.pinned.items():
            out[k] = v
        out[self.free] = x
        return out

    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def arcs(self):
        return arc_pairs(self.n, self.mode)

    def neighbours(self, index: int) -> tuple[int, int]:
        if self.mode == "periodic":
            m = self.size
            return (index - 1) % m, (index + 1) % m
        return index - 1, index + 1

    def arc_ending_at(self, index: int) -> tuple[str, int, int]:
        prev, _ = self.neighbours(index)
        kind = "outer" if index % 2 == 1 else "inner"
        return kind, prev, index

    def arc_starting_at(self, index: int) -> tuple[str, int, int]:
        _, nxt = self.neighbours(index)
        kind = "outer" if index % 2 == 0 else "inner"
        return kind, index, nxt


def word_problem(
    system: IntervalSystem,
    params: BilliardParams,
    word: Sequence[int],
    mode: str = "periodic",
    xi_a: float | None = None,
    xi_b: float | None = None,
) -> WordProblem:
    """Build the parameter box of a word.

    Raises:
        InadmissibleWordError: the word breaks the NA grammar, or a pinned
            endpoint lies outside its interval.
    """
    word = tuple(int(s) for s in word)
    periodic = mode == "periodic"
    if not is_admissible(word, system, periodic=periodic):
        raise InadmissibleWordError(f"word {word} is not admissible ({mode})")
    n = len(word)
    size = n_params(n, mode)
    lo = np.empty(size)
    hi = np.empty(size)
    for k in range(size):
        a, b = system.interval(word[k // 2])
        lo[k], hi[k] = a, b
    pinned: dict[int, float] = {}
    if periodic:
        free = np.arange(size)
    else:
        if xi_a is None or xi_b is None:
            raise ValueError("fixed-ends words need both endpoints")
        if system.locate(xi_a) != word[0] or system.locate(xi_b) != word[-1]:
            raise InadmissibleWordError("pinned endpoints must lie in the first and last intervals of the word")
        pinned = {0: system.lift(word[0], xi_a), size - 1: system.lift(word[-1], xi_b)}
        free = np.arange(1, size - 1)
    return WordProblem(system, params, word, mode, lo[free], hi[free], free, pinned)


# ---------------------------------------------------------------------------
# gradient and Hessian


def gradient(prob: WordProblem, x: np.ndarray) -> tuple[np.ndarray, list[JacobiValue]]:
    """Gradient of the total length with respect to the free variables."""
    full = prob.full(x)
    values = evaluate_arcs(prob.curve, prob.params, full, prob.mode)
    g = assemble_gradient(values, prob.n, prob.mode)
    return g[prob.free], values


def hessian(prob: WordProblem, x: np.ndarray, step: float | None = None) -> np.ndarray:
    """Hessian of the total length by central differences of arc derivatives.

    Each arc contributes a 2x2 block obtained by perturbing its own two
    endpoints, so the cost is linear in the word length.
    """
    curve, params = prob.curve, prob.params
    h = 1e-6 * curve.length if step is None else step
    full = prob.full(x)
    H = np.zeros((prob.size, prob.size))
    for kind, i, j in prob.arcs():
        a, b = full[i], full[j]
        pa = arc_value(curve, params, kind, a + h, b)
        ma = arc_value(curve, params, kind, a - h, b)
        pb = arc_value(curve, params, kind, a, b + h)
        mb = arc_value(curve, params, kind, a, b - h)
        H[i, i] += (pa.d_a - ma.d_a) / (2 * h)
        H[j, i] += (pa.d_b - ma.d_b) / (2 * h)
        H[i, j] += (pb.d_a - mb.d_a) / (2 * h)
        H[j, j] += (pb.d_b - mb.d_b) / (2 * h)
    H = H[np.ix_(prob.free, prob.free)]
    return 0.5 * (H + H.T)


def _safe_norm(prob: WordProblem, x: np.ndarray) -> tuple[float, np.ndarray | None]:
    try:
        g, _ = gradient(prob, x)
    except ArcError:
        return math.inf, None
    return float(np.max(np.abs(g))), g


def _bisection_sweep(prob: WordProblem, x: np.ndarray) -> np.ndarray:
    """One Gauss-Seidel pass solving each gradient component in its own coordinate."""
    x = x.copy()
    for k in range(prob.dim):
        idx = prob.free[k]

        def fk(s: float) -> float:
            y = x.copy()
            y[k] = s
            full = prob.full(y)
            k1, i1, j1 = prob.arc_ending_at(idx)
            k2, i2, j2 = prob.arc_starting_at(idx)
            if prob.mode == "fixed_ends" and (i1 < 0 or j2 >= prob.size):
                raise ValueError
            return (
                arc_value(prob.curve, prob.params, k1, full[i1], full[j1]).d_b
                + arc_value(prob.curve, prob.params, k2, full[i2], full[j2]).d_a
            )

        try:
            flo, fhi = fk(prob.lower[k]), fk(prob.upper[k])
            if flo * fhi < 0.0:
                x[k] = brentq(fk, prob.lower[k], prob.upper[k], xtol=1e-14)
        except (ArcError, ValueError):
            continue
    return x


@dataclass
class NewtonResult:
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def newton_solve(
    prob: WordProblem,
    x0: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> NewtonResult:
    """Damped, box-projected Newton iteration on the gradient."""
    x = prob.center() if x0 is None else np.clip(np.asarray(x0, dtype=float), prob.lower, prob.upper)
    res, g = _safe_norm(prob, x)
    if g is None:
        x = _bisection_sweep(prob, prob.center())
        res, g = _safe_norm(prob, x)
        if g is None:
            raise RealizationError("arc solver fails at the starting point", math.inf, x, 0)
    best = (res, x.copy())
    history = [res]
    stalls = 0
    for it in range(1, max_iter + 1):
        if res < tol:
            return NewtonResult(x, res, it - 1, True, history)
        try:
            H = hessian(prob, x)
            dx = np.linalg.solve(H, -g)
        except (ArcError, np.linalg.LinAlgError):
            dx = None
        accepted = False
        if dx is not None and np.all(np.isfinite(dx)):
            t = 1.0
            for _ in range(30):
                y = np.clip(x + t * dx, prob.lower, prob.upper)
                r_new, g_new = _safe_norm(prob, y)
                if r_new < (1.0 - 1e-4 * t) * res or (r_new < tol):
                    accepted = True
                    break
                t *= 0.5
        if not accepted:
            stalls += 1
            y = _bisection_sweep(prob, x)
            r_new, g_new = _safe_norm(prob, y)
            if g_new is None or r_new >= res:
                if stalls > 2:
                    break
                continue
        x, res, g = y, r_new, g_new
        history.append(res)
        if res < best[0]:
            best = (res, x.copy())
    if best[0] < tol:
        return NewtonResult(best[1], best[0], len(history), True, history)
    raise RealizationError(
        f"Newton stalled with gradient sup-norm {best[0]:.3e}", best[0], prob.full(best[1]), len(history)
    )


# ---------------------------------------------------------------------------
# realized trajectories


@dataclass
class Concatenation:
    """Chain of alternating outer and inner arcs realizing a word.

    Attributes:
        word: the symbols.
        mode: ``"periodic"`` or ``"fixed_ends"``.
        xi: transition parameters (wrapped to ``[0, L)``).
        arcs: outer, inner, outer, ... in order of traversal.
        snell: Snell residual at each interior junction, keyed by index.
        total_length: total Jacobi length.
        gradient_norm: sup-norm of the gradient at ``xi``.
        collision: per inner arc, whether it is an ejection-collision arc.
        radial_outer: per outer arc, whether it is a radial excursion.
        on_face: the critical point touches a face of the box.
    """

    word: tuple[int, ...]
    mode: str
    xi: np.ndarray
    xi_lifted: np.ndarray
    arcs: list
    snell: dict
    total_length: float
    gradient_norm: float
    collision: list
    radial_outer: list
    on_face: bool
    iterations: int = 0
    miranda: object = None

    @property
    def outer_durations(self) -> list[float]:
        return [a.T for a in self.arcs if isinstance(a, OuterArc)]

    @property
    def inner_durations(self) -> list[float]:
        return [a.T for a in self.arcs if isinstance(a, InnerArc)]

    @property
    def partial_times(self) -> list[float]:
        """Cumulative time after each symbol (one outer plus one inner arc)."""
        out, t = [], 0.0
        for k in range(0, len(self.arcs), 2):
            t += sum(a.T for a in self.arcs[k : k + 2])
            out.append(t)
        return out

    @property
    def period(self) -> float:
        return float(sum(a.T for a in self.arcs))

    @property
    def max_snell(self) -> float:
        return max((abs(v) for v in self.snell.values()), default=0.0)

    @property
    def radial_count(self) -> int:
        return int(sum(self.collision) + sum(self.radial_outer))

    @property
    def realized(self) -> bool:
        return self.max_snell < 1e-8

    def radial_positions(self) -> list[tuple[str, int]]:
        """Radial arcs as ``("inner", j)`` (symbol ``j`` to ``j+1``) or ``("outer", j)``."""
        out = [("outer", j) for j, f in enumerate(self.radial_outer) if f]
        out += [("inner", j) for j, f in enumerate(self.collision) if f]
        return sorted(out, key=lambda t: (t[1], t[0] == "inner"))

    def initial_state(self):
        """Boundary parameter and outward velocity at the first crossing."""
        a = self.arcs[0]
        return float(self.xi[0]), np.array(a.v0)

    def trajectory_rows(self, samples_per_arc: int = 100) -> list[tuple]:
        """CSV rows ``(s, x, y, vx, vy, regime, crossing)`` along the chain."""
        from .arcs import arc_rows

        rows, t = [], 0.0
        for a in self.arcs:
            part = arc_rows(a, samples_per_arc, t)
            for k, r in enumerate(part):
                rows.append(r + (1 if k == 0 else 0,))
            t += a.T
        return rows

    def to_dict(self) -> dict:
        return {
            "word": list(self.word),
            "mode": self.mode,
            "xi": [float(v) for v in self.xi],
            "snell_residuals": {str(k): float(v) for k, v in sorted(self.snell.items())},
            "max_snell_residual": self.max_snell,
            "gradient_norm": self.gradient_norm,
            "total_length": self.total_length,
            "outer_durations": self.outer_durations,
            "inner_durations": self.inner_durations,
            "partial_times": self.partial_times,
            "collision_flags": [bool(c) for c in self.collision],
            "radial_outer_flags": [bool(c) for c in self.radial_outer],
            "on_face": bool(self.on_face),
            "iterations": int(self.iterations),
            "realized": bool(self.realized),
            "miranda": None if self.miranda is None else self.miranda.to_dict(),
        }


def build_concatenation(prob: WordProblem, x: np.ndarray, iterations: int = 0, radial_tol: float = RADIAL_TOL):
    curve = prob.curve
    full = prob.full(x)
    values = evaluate_arcs(curve, prob.params, full, prob.mode)
    g = assemble_gradient(values, prob.n, prob.mode)[prob.free]
    arcs = [v.arc for v in values]
    snell = {}
    for idx in prob.free:
        k_in = idx - 1 if idx > 0 else len(arcs) - 1
        snell[int(idx)] = snell_residual(curve, prob.params, arcs[k_in], arcs[idx % len(arcs)], float(full[idx]))
    L = curve.length
    collision, radial = [], []
    for (kind, i, j), arc in zip(prob.arcs(), arcs):
        close = abs(curve.signed_gap(full[i], full[j])) < radial_tol * L
        if kind == "inner":
            collision.append(bool(close or arc.collision))
        else:
            radial.append(bool(close))
    margin = np.minimum(x - prob.lower, prob.upper - x)
    on_face = bool(np.any(margin < 1e-10 * L))
    return Concatenation(
        word=prob.word,
        mode=prob.mode,
        xi=np.mod(full, L),
        xi_lifted=full,
        arcs=arcs,
        snell=snell,
        total_length=float(sum(v.value for v in values)),
        gradient_norm=float(np.max(np.abs(g))) if len(g) else 0.0,
        collision=collision,
        radial_outer=radial,
        on_face=on_face,
        iterations=iterations,
    )


def realize_problem(prob: WordProblem, x0=None, tol: float = 1e-10, max_iter: int = 50) -> Concatenation:
    res = newton_solve(prob, x0, tol, max_iter)
    conc = build_concatenation(prob, res.x, res.iterations)
    if not conc.realized:
        raise RealizationError(
            f"Snell residual {conc.max_snell:.3e} after convergence", res.residual, prob.full(res.x), res.iterations
        )
    return conc


def realize_periodic(
    system: IntervalSystem,
    params: BilliardParams,
    word: Sequence[int],
    x0=None,
    check: bool = False,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> Concatenation:
    """Periodic trajectory realizing ``word``.

    Args:
        x0: optional start for the ``2n`` parameters (lifted); default is the
            box centre.
        check: run :func:`miranda_check` first and attach its report.

    Raises:
        InadmissibleWordError, RealizationError.
    """
    prob = word_problem(system, params, word, "periodic")
    report = miranda_check_problem(prob) if check else None
    conc = realize_problem(prob, x0, tol, max_iter)
    conc.miranda = report
    return conc


def realize_fixed_ends(
    system: IntervalSystem,
    params: BilliardParams,
    word: Sequence[int],
    xi_a: float,
    xi_b: float,
    x0=None,
    check: bool = False,
    tol: float = 1e-10,
    max_iter: int = 50,
) -> Concatenation:
    """Trajectory realizing ``word`` from ``gamma(xi_a)`` to ``gamma(xi_b)``.

    The ``2n - 3`` interior crossings are free; the Snell law is not imposed
    at the two pinned ends.
    """
    prob = word_problem(system, params, word, "fixed_ends", xi_a, xi_b)
    report = miranda_check_problem(prob) if check else None
    conc = realize_problem(prob, x0, tol, max_iter)
    conc.miranda = report
    return conc


def multi_start(
    system: IntervalSystem,
    params: BilliardParams,
    word: Sequence[int],
    seeds: int = 10,
    rng_seed: int = 0,
    mode: str = "periodic",
    xi_a: float | None = None,
    xi_b: float | None = None,
) -> list[Concatenation | RealizationError]:
    """Realize ``word`` from random interior starting points."""
    prob = word_problem(system, params, word, mode, xi_a, xi_b)
    rng = np.random.default_rng(rng_seed)
    out: list = []
    for _ in range(seeds):
        x0 = prob.lower + (prob.upper - prob.lower) * rng.uniform(0.05, 0.95, prob.dim)
        try:
            out.append(realize_problem(prob, x0))
        except RealizationError as exc:
            out.append(exc)
    return out


# ---------------------------------------------------------------------------
# Poincare-Miranda face certificate


@dataclass
class FaceReport:
    index: int
    lower_min: float
    lower_max: float
    upper_min: float
    upper_max: float
    samples: int
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        if self.failures:
            return False
        return (self.lower_max < 0.0 < self.upper_min) or (self.lower_min > 0.0 > self.upper_max)

    @property
    def mixed(self) -> bool:
        return (self.lower_min < 0.0 < self.lower_max) or (self.upper_min < 0.0 < self.upper_max)

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "lower_face": [self.lower_min, self.lower_max],
            "upper_face": [self.upper_min, self.upper_max],
            "samples": self.samples,
            "passed": self.passed,
            "failures": self.failures,
        }


@dataclass
class MirandaReport:
    word: tuple[int, ...]
    mode: str
    h: float
    faces: list

    @property
    def passed(self) -> bool:
        return all(f.passed for f in self.faces)

    @property
    def inconclusive(self) -> bool:
        return not self.passed and any(f.mixed for f in self.faces)

    @property
    def failures(self) -> list:
        return [x for f in self.faces for x in f.failures]

    def to_dict(self) -> dict:
        return {
            "word": list(self.word),
            "mode": self.mode,
            "h": self.h,
            "passed": self.passed,
            "inconclusive": self.inconclusive,
            "faces": [f.to_dict() for f in self.faces],
        }


def _face_samples(prob: WordProblem, idx: int, value: float, grids: dict, full0: np.ndarray):
    """Gradient component ``idx`` with that coordinate set to ``value``.

    The component only depends on the coordinate and its two neighbours, so
    the face is sampled over the neighbours' intervals alone.
    """
    curve, params = prob.curve, prob.params
    k1, i1, j1 = prob.arc_ending_at(idx)
    k2, i2, j2 = prob.arc_starting_at(idx)
    keys = sorted(grids)
    mesh = np.meshgrid(*[grids[k] for k in keys], indexing="ij") if keys else []
    pts = np.stack([m.ravel() for m in mesh], axis=-1) if keys else np.zeros((1, 0))
    vals, fails = [], []
    shape = tuple(len(grids[k]) for k in keys)
    for row in pts:
        full = full0.copy()
        full[idx] = value
        for k, v in zip(keys, row):
            full[k] = v
        try:
            f = arc_value(curve, params, k1, full[i1], full[j1]).d_b + arc_value(curve, params, k2, full[i2], full[j2]).d_a
        except ArcError as exc:
            fails.append({"coordinate": int(idx), "face_value": float(value), "point": [float(full[i1]), float(full[j2])], "error": str(exc)})
            f = math.nan
        vals.append(f)
    return np.array(vals).reshape(shape if shape else (1,)), fails


def _local_variation(arr: np.ndarray) -> float:
    var = 0.0
    for ax in range(arr.ndim):
        if arr.shape[ax] > 1:
            var = max(var, float(np.nanmax(np.abs(np.diff(arr, axis=ax)))))
    return var


def miranda_check_problem(prob: WordProblem, density: int = 5, max_doublings: int = 4) -> MirandaReport:
    full0 = prob.full(prob.center())
    free_set = {int(i) for i in prob.free}
    pos = {int(i): k for k, i in enumerate(prob.free)}
    faces = []
    for idx in prob.free:
        idx = int(idx)
        nb = {k for k in prob.neighbours(idx) if k in free_set and k != idx}
        dens = density
        for _ in range(max_doublings + 1):
            grids = {k: np.linspace(prob.lower[pos[k]], prob.upper[pos[k]], dens) for k in nb}
            lo_vals, f1 = _face_samples(prob, idx, prob.lower[pos[idx]], grids, full0)
            hi_vals, f2 = _face_samples(prob, idx, prob.upper[pos[idx]], grids, full0)
            fails = f1 + f2
            if fails:
                break
            signs_ok = (lo_vals.max() < 0.0 < hi_vals.min()) or (lo_vals.min() > 0.0 > hi_vals.max())
            margin = min(np.min(np.abs(lo_vals)), np.min(np.abs(hi_vals)))
            variation = max(_local_variation(lo_vals), _local_variation(hi_vals))
            # refining cannot repair a face that already fails
            if not signs_ok or margin >= 10.0 * variation or not nb:
                break
            dens = 2 * dens - 1
        rep = FaceReport(
            idx,
            float(np.nanmin(lo_vals)),
            float(np.nanmax(lo_vals)),
            float(np.nanmin(hi_vals)),
            float(np.nanmax(hi_vals)),
            int(lo_vals.size + hi_vals.size),
            fails,
        )
        faces.append(rep)
    return MirandaReport(prob.word, prob.mode, prob.params.h, faces)


def miranda_check(
    system: IntervalSystem,
    params: BilliardParams,
    word: Sequence[int],
    mode: str = "periodic",
    xi_a: float | None = None,
    xi_b: float | None = None,
    density: int = 5,
    max_doublings: int = 4,
) -> MirandaReport:
    """Sign report of each gradient component on the opposite faces of the box.

    Passes when every component has strict, opposite, uniform signs on its
    two faces over the sampled grid. Face grids are refined (up to
    ``max_doublings`` times) while the smallest sampled magnitude is below
    ten times the largest change between adjacent samples.
    """
    prob = word_problem(system, params, word, mode, xi_a, xi_b)
    return miranda_check_problem(prob, density, max_doublings)


# ---------------------------------------------------------------------------
# uniqueness


@dataclass
class UniquenessReport:
    word: tuple[int, ...]
    h: float
    coordinates: list

    @property
    def passed(self) -> bool:
        return all(c["constant_sign"] for c in self.coordinates)

    def to_dict(self) -> dict:
        return {"word": list(self.word), "h": self.h, "passed": self.passed, "coordinates": self.coordinates}


def _check_convexity(system: IntervalSystem) -> None:
    curve = system.curve
    for s in system.symbols:
        cc = system.ccs[s - 1]
        if cc.kind not in ("strict_min", "strict_max"):
            raise UniquenessPreconditionError(f"central configuration {s} is degenerate")
        a, b = system.interval(s)
        r2 = curve.radius_v(np.linspace(a, b, 9) % curve.length)[2]
        sign = 1.0 if cc.kind == "strict_min" else -1.0
        if not np.all(sign * r2 > 0.0):
            raise UniquenessPreconditionError(f"radius is not strictly convex/concave on interval {s}")


def uniqueness_check(
    system: IntervalSystem,
    params: BilliardParams,
    word: Sequence[int],
    mode: str = "periodic",
    xi_a: float | None = None,
    xi_b: float | None = None,
    samples: int = 4,
) -> UniquenessReport:
    """Check that each gradient component is strictly monotone in its own coordinate.

    The diagonal second derivative ``d2_b S(prev) + d2_a S(next)`` is
    finite-differenced (step ``1e-5 L``) on a grid over the coordinate and
    its two neighbours; constant sign on every grid means each Miranda
    component is monotone, which makes the critical point in the box unique.

    Raises:
        UniquenessPreconditionError: degenerate configuration or radius not
            strictly convex/concave on an interval.
    """
    _check_convexity(system)
    prob = word_problem(system, params, word, mode, xi_a, xi_b)
    curve = system.curve
    hstep = 1e-5 * curve.length
    full0 = prob.full(prob.center())
    free_set = {int(i) for i in prob.free}
    pos = {int(i): k for k, i in enumerate(prob.free)}
    coords = []
    for idx in prob.free:
        idx = int(idx)
        k1, i1, j1 = prob.arc_ending_at(idx)
        k2, i2, j2 = prob.arc_starting_at(idx)
        axes = sorted({idx} | {k for k in (i1, j2) if k in free_set})
        grids = [np.linspace(prob.lower[pos[k]], prob.upper[pos[k]], samples) for k in axes]
        mesh = np.stack([m.ravel() for m in np.meshgrid(*grids, indexing="ij")], axis=-1)
        vals = []
        for row in mesh:
            full = full0.copy()
            for k, v in zip(axes, row):
                full[k] = v

            def f(s: float) -> float:
                y = full.copy()
                y[idx] = s
                return (
                    arc_value(curve, params, k1, y[i1], y[j1]).d_b
                    + arc_value(curve, params, k2, y[i2], y[j2]).d_a
                )

            try:
                vals.append((f(full[idx] + hstep) - f(full[idx] - hstep)) / (2 * hstep))
            except ArcError:
                vals.append(math.nan)
        vals = np.array(vals)
        ok = bool(np.all(np.isfinite(vals)) and (np.all(vals > 0) or np.all(vals < 0)))
        coords.append(
            {"index": idx, "min": float(np.nanmin(vals)), "max": float(np.nanmax(vals)), "constant_sign": ok}
        )
    return UniquenessReport(prob.word, params.h, coords)
