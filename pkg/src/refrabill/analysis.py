"""Experiments built on the engine: saddle spectra, heteroclinic chains,
threshold scans and sensitivity probes."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .arcs import ArcError, solve_inner_arc
from .dynamics import DynamicsError, return_map, state_from_tangential
from .geometry import DEGENERACY_TOL, BoundaryCurve, find_central_configurations
from .jacobi import s_inner, s_outer
from .model import BilliardParams
from .shooting import (
    Concatenation,
    RealizationError,
    miranda_check,
    realize_fixed_ends,
    realize_periodic,
)
from .words import IntervalSystem, WordWindow, build_interval_system, is_admissible, word_distance

FD_STEPS = (1e-6, 1e-7)
DRIFT_TOL = 1e-6
UNIT_TOL = 1e-6


class AnalysisError(RuntimeError):
    """Base class for analysis failures."""


class DegenerateConfigurationError(AnalysisError):
    """The central configuration is not a strict extremum of the radius."""


class FixedPointDriftError(AnalysisError):
    """The homothetic state is not returned to itself by the return map."""


class GeometryWarning(UserWarning):
    """A scan criterion holds at some grid value but fails at a larger one."""


# ---------------------------------------------------------------------------
# saddle spectrum


@dataclass(frozen=True)
class SaddleReport:
    """Linearisation of the return map at a homothetic fixed point.

    Attributes:
        cc_index: 1-based index of the central configuration.
        h: energy jump.
        xi_bar: boundary parameter of the configuration.
        jacobian: 2x2 Jacobian in ``(xi, a)`` coordinates, ``a`` the
            tangential velocity component.
        eigenvalues: raw eigenvalues of the Jacobian.
        determinant: product of the raw eigenvalues.
        classification: ``"saddle"``, ``"elliptic"`` or ``"parabolic"``.
        drift: distance of the image of the fixed point from itself.
    """

    cc_index: int
    h: float
    xi_bar: float
    jacobian: np.ndarray
    eigenvalues: np.ndarray
    determinant: float
    classification: str
    drift: float

    @property
    def expansion(self) -> float:
        """Magnitude of the unstable eigenvalue after normalising the determinant to one."""
        ev = np.abs(self.normalized_eigenvalues)
        return float(ev.max())

    @property
    def normalized_eigenvalues(self) -> np.ndarray:
        """Eigenvalues divided by ``sqrt(|det|)`` so that their product has modulus one."""
        return self.eigenvalues / math.sqrt(abs(self.determinant))

    @property
    def area_preserving(self) -> bool:
        return abs(self.determinant - 1.0) < 5e-3

    def to_dict(self) -> dict:
        ev = [complex(e) for e in self.eigenvalues]
        return {
            "cc_index": self.cc_index,
            "h": self.h,
            "xi_bar": self.xi_bar,
            "jacobian": [[float(v) for v in row] for row in self.jacobian],
            "eigenvalues": [[e.real, e.imag] for e in ev],
            "determinant": self.determinant,
            "classification": self.classification,
            "expansion": self.expansion,
            "drift": self.drift,
            "area_preserving": self.area_preserving,
        }


def _ccs_of(curve: BoundaryCurve, system: IntervalSystem | None):
    if system is not None:
        return list(system.ccs)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return find_central_configurations(curve)


def return_map_chart(curve: BoundaryCurve, params: BilliardParams, system: IntervalSystem | None) -> Callable:
    """Return map in ``(xi, a)`` coordinates, with ``xi`` lifted next to its input."""

    def f(x: np.ndarray) -> np.ndarray:
        st = state_from_tangential(curve, params, float(x[0]), float(x[1]))
        out, _ = return_map(curve, params, system, st, permissive=True)
        _, t, _ = curve.frame_tuple(out.xi)
        return np.array([x[0] + curve.signed_gap(x[0], out.xi), out.v[0] * t[0] + out.v[1] * t[1]])

    return f


def _classify(ev: np.ndarray, tol: float = UNIT_TOL) -> str:
    if np.max(np.abs(np.imag(ev))) > tol * max(1.0, float(np.max(np.abs(ev)))):
        return "elliptic"
    mags = np.sort(np.abs(np.real(ev)))
    if mags[1] > 1.0 + tol and mags[0] < 1.0 - tol:
        return "saddle"
    return "parabolic"


def saddle_spectrum(
    curve: BoundaryCurve,
    params: BilliardParams,
    system: IntervalSystem | None,
    cc_index: int,
    steps: Sequence[float] = FD_STEPS,
) -> SaddleReport:
    """Finite-difference Jacobian of the return map at a homothetic fixed point.

    Central differences with the two ``steps`` are combined by Richardson
    extrapolation, which cancels the leading second-order error.

    Args:
        system: interval system; when ``None`` the configurations are
            searched on ``curve`` directly (useful to report degeneracy).
        cc_index: 1-based configuration index.

    Raises:
        DegenerateConfigurationError: the configuration is a plateau or not
            a strict extremum.
        FixedPointDriftError: the return map moves the homothetic state by
            more than ``1e-6``.
    """
    ccs = _ccs_of(curve, system)
    if not 1 <= cc_index <= len(ccs):
        raise ValueError(f"configuration index {cc_index} out of range 1..{len(ccs)}")
    cc = ccs[cc_index - 1]
    if cc.kind not in ("strict_min", "strict_max") or abs(cc.second_derivative) < DEGENERACY_TOL:
        raise DegenerateConfigurationError(f"configuration {cc_index} is degenerate ({cc.kind})")
    if system is None:
        system = build_interval_system(curve)
    f = return_map_chart(curve, params, system)
    x0 = np.array([cc.xi_bar, 0.0])
    try:
        drift = float(np.max(np.abs(f(x0) - x0)))
    except (DynamicsError, ArcError) as exc:
        raise FixedPointDriftError(f"return map fails at the homothetic state: {exc}") from exc
    if drift > DRIFT_TOL:
        raise FixedPointDriftError(f"homothetic state drifts by {drift:.3e}")

    def jac(d: float) -> np.ndarray:
        cols = []
        for e in (np.array([d, 0.0]), np.array([0.0, d])):
            cols.append((f(x0 + e) - f(x0 - e)) / (2.0 * d))
        return np.array(cols).T

    h1, h2 = steps
    j1, j2 = jac(h1), jac(h2)
    q = (h1 / h2) ** 2
    J = (q * j2 - j1) / (q - 1.0)
    ev = np.linalg.eigvals(J)
    return SaddleReport(
        cc_index=cc_index,
        h=params.h,
        xi_bar=cc.xi_bar,
        jacobian=J,
        eigenvalues=ev,
        determinant=float(np.real(np.prod(ev))),
        classification=_classify(ev),
        drift=drift,
    )


# ---------------------------------------------------------------------------
# heteroclinic chains


@dataclass
class HeteroclinicReport:
    """Padded fixed-ends realization between two configurations.

    Attributes:
        concatenation: the realized chain.
        word: the padded word.
        leading: distances of the departure parameters of the first ``pad``
            transits to the start configuration.
        trailing: distances of the departure parameters of the last ``pad``
            transits to the end configuration, ordered toward the end.
        trailing_ratios: successive ratios of ``trailing`` above the noise
            floor.
        decay_rate: geometric mean of ``trailing_ratios`` (``nan`` if none).
        tail_distance: distance of the last free departure parameter to the
            end configuration; it shrinks geometrically with ``pad``.
    """

    concatenation: Concatenation
    word: tuple[int, ...]
    i: int
    j: int
    pad: int
    bridge: tuple[int, ...]
    leading: list
    trailing: list
    trailing_ratios: list
    decay_rate: float

    @property
    def tail_distance(self) -> float:
        return float(self.trailing[-2]) if len(self.trailing) > 1 else math.nan

    def to_dict(self) -> dict:
        return {
            "word": list(self.word),
            "i": self.i,
            "j": self.j,
            "pad": self.pad,
            "bridge": list(self.bridge),
            "leading_distances": self.leading,
            "trailing_distances": self.trailing,
            "trailing_ratios": self.trailing_ratios,
            "decay_rate": self.decay_rate,
            "tail_distance": self.tail_distance,
            "realization": self.concatenation.to_dict(),
        }


def geometric_ratios(dist: Sequence[float], floor: float = 1e-11) -> list[float]:
    """Ratios ``d[k+1]/d[k]`` for consecutive entries both above ``floor``."""
    return [float(b / a) for a, b in zip(dist, dist[1:]) if a > floor and b > floor]


def heteroclinic_realize(
    curve: BoundaryCurve,
    params: BilliardParams,
    system: IntervalSystem,
    i: int,
    j: int,
    pad: int,
    bridge: Sequence[int] = (),
    floor: float = 1e-11,
) -> HeteroclinicReport:
    """Realize ``i^pad + bridge + j^pad`` pinned at the two configurations.

    The departure parameter of every transit in the trailing block should
    approach the end configuration geometrically at the contraction rate of
    its saddle.

    Raises:
        ValueError: ``i == j``, ``pad < 1`` or an inadmissible word.
        RealizationError: propagated from the solver.
    """
    if i == j:
        raise ValueError("the two configurations must differ")
    if pad < 1:
        raise ValueError("pad must be positive")
    bridge = tuple(int(s) for s in bridge)
    word = (i,) * pad + bridge + (j,) * pad
    if not is_admissible(word, system, periodic=False):
        raise ValueError(f"padded word {word} is not admissible")
    xa, xb = system.center(i), system.center(j)
    conc = realize_fixed_ends(system, params, word, xa, xb)
    n = len(word)
    dep = [conc.xi_lifted[2 * k] for k in range(n)]
    leading = [abs(curve.signed_gap(xa, x)) for x in dep[:pad]]
    trailing = [abs(curve.signed_gap(xb, x)) for x in dep[n - pad :]]
    ratios = geometric_ratios(trailing, floor)
    rate = float(np.exp(np.mean(np.log(ratios)))) if ratios else math.nan
    return HeteroclinicReport(conc, word, i, j, pad, bridge, leading, trailing, ratios, rate)


def half_heteroclinic(
    system: IntervalSystem,
    params: BilliardParams,
    start: int,
    target: int,
    xi_start: float,
    pad: int,
) -> tuple[Concatenation, list[float]]:
    """Realize ``(start, target^pad)`` from ``xi_start`` to the target configuration.

    Returns:
        The realization and the distances of each departure parameter in the
        target block to the target configuration.
    """
    word = (start,) + (target,) * pad
    xb = system.center(target)
    conc = realize_fixed_ends(system, params, word, xi_start, xb)
    curve = system.curve
    dist = [abs(curve.signed_gap(xb, conc.xi_lifted[2 * k])) for k in range(1, len(word))]
    return conc, dist


# ---------------------------------------------------------------------------
# threshold scan


def euclidean_change_sign(system: IntervalSystem) -> list[bool]:
    """Whether ``r'`` has opposite signs at the two ends of each interval."""
    curve = system.curve
    out = []
    for s in system.symbols:
        a, b = system.interval(s)
        out.append(bool(curve.radius(a)[1] * curve.radius(b)[1] < 0.0))
    return out


def containment_check(system: IntervalSystem, params: BilliardParams, grid: int = 5, samples: int = 64) -> dict:
    """Check that inner arcs between reachable intervals stay inside the domain.

    For each ``i`` and ``j`` in ``NA(i)``, the TnT arcs joining ``grid``
    points of interval ``i`` to ``grid`` points of interval ``j`` are sampled
    and the largest value of the implicit function at interior samples is
    recorded (negative means inside).
    """
    curve = system.curve
    worst = -math.inf
    failures = []
    for i in system.symbols:
        ai, bi = system.interval(i)
        for j in sorted(system.na[i]):
            aj, bj = system.interval(j)
            for x1 in np.linspace(ai, bi, grid):
                for x2 in np.linspace(aj, bj, grid):
                    try:
                        arc = solve_inner_arc(params, curve.point(x1), curve.point(x2), "TnT", xi1=x1, xi2=x2)
                    except ArcError as exc:
                        failures.append({"i": i, "j": j, "xi1": float(x1), "xi2": float(x2), "error": str(exc)})
                        continue
                    tau = np.linspace(0.0, arc.Ttilde, samples + 2)[1:-1]
                    pts = np.asarray(arc.position(tau)).reshape(-1, 2)
                    val = float(np.max(curve.implicit_v(pts)))
                    if val >= 0.0:
                        failures.append({"i": i, "j": j, "xi1": float(x1), "xi2": float(x2), "max_implicit": val})
                    worst = max(worst, val)
    return {"passed": not failures, "max_implicit": worst, "failures": failures[:20], "failure_count": len(failures)}


def change_sign_check(system: IntervalSystem, params: BilliardParams, grid: int = 9) -> dict:
    """Sign condition on the one-sided momenta at the ends of every interval.

    For each interval ``[alpha, beta]``, outer start ``xi_E`` in it and inner
    end ``xi_I`` in any reachable interval, the quantity
    ``d_b S_E(xi_E, c) + d_a S_I(c, xi_I)`` must have opposite signs at
    ``c = alpha`` and ``c = beta``. All parameters range over ``grid``
    points per interval.
    """
    curve = system.curve
    worst = math.inf
    failures = []
    for i in system.symbols:
        a, b = system.interval(i)
        e_pts = np.linspace(a, b, grid)
        i_pts = np.concatenate([np.linspace(*system.interval(j), grid) for j in sorted(system.na[i])])
        try:
            oa = np.array([s_outer(curve, params, x, a).d_b for x in e_pts])
            ob = np.array([s_outer(curve, params, x, b).d_b for x in e_pts])
            ia = np.array([s_inner(curve, params, a, x).d_a for x in i_pts])
            ib = np.array([s_inner(curve, params, b, x).d_a for x in i_pts])
        except ArcError as exc:
            failures.append({"interval": i, "error": str(exc)})
            continue
        prod = (oa[:, None] + ia[None, :]) * (ob[:, None] + ib[None, :])
        worst = min(worst, float(prod.max()) * -1.0)
        if np.any(prod >= 0.0):
            failures.append({"interval": i, "violations": int(np.count_nonzero(prod >= 0.0))})
    return {"passed": not failures, "min_margin": worst, "failures": failures}


def smallest_monotone_threshold(hs: Sequence[float], passes: Sequence[bool]) -> float | None:
    """Smallest grid value from which the criterion holds at every larger grid value."""
    out = None
    for h, ok in zip(reversed(list(hs)), reversed(list(passes))):
        if not ok:
            break
        out = h
    return out


def monotonicity_violations(hs: Sequence[float], passes: Sequence[bool]) -> list[float]:
    """Grid values where the criterion fails although it held at a smaller value."""
    out, seen = [], False
    for h, ok in zip(hs, passes):
        if ok:
            seen = True
        elif seen:
            out.append(h)
    return out


@dataclass
class ThresholdReport:
    """Per-criterion pass pattern over an ``h`` grid.

    Attributes:
        h_grid: the scanned values (ascending).
        rows: ``(h, criterion, passed)`` triples.
        thresholds: smallest monotone threshold per criterion (``None`` if
            it never holds at the top of the grid).
        violations: per criterion, grid values breaking monotonicity.
        details: per ``h``, the raw sub-reports.
        euclidean: Euclidean change-sign per interval (``h``-independent).
    """

    h_grid: list
    rows: list
    thresholds: dict
    violations: dict
    details: dict
    euclidean: list

    @property
    def h0(self) -> float | None:
        return self.thresholds.get("containment")

    @property
    def h1(self) -> float | None:
        return self.thresholds.get("change_sign")

    def passes(self, criterion: str) -> list[bool]:
        return [ok for h, c, ok in self.rows if c == criterion]

    def csv_rows(self) -> list[tuple]:
        return [("h", "criterion", "pass")] + [(h, c, int(ok)) for h, c, ok in self.rows]

    def to_dict(self) -> dict:
        return {
            "h_grid": self.h_grid,
            "thresholds": self.thresholds,
            "violations": self.violations,
            "euclidean_change_sign": self.euclidean,
            "rows": [{"h": h, "criterion": c, "pass": ok} for h, c, ok in self.rows],
            "details": {repr(h): d for h, d in self.details.items()},
        }


def threshold_scan(
    curve: BoundaryCurve,
    params_base: BilliardParams,
    system: IntervalSystem,
    word_set: Iterable[Sequence[int]],
    h_grid: Sequence[float],
    miranda_density: int = 5,
    miranda_doublings: int = 1,
    saddles: bool = True,
    grid: int = 9,
) -> ThresholdReport:
    """Scan the energy jump and record where each criterion starts to hold.

    Criteria: ``containment`` (inner arcs inside the domain),
    ``change_sign`` (sign condition on face grids), ``miranda`` (face
    report of every word) and ``saddle`` (every homothetic fixed point is a
    saddle). A criterion holding at some grid value but failing at a larger
    one triggers a :class:`GeometryWarning`.
    """
    hs = sorted(float(h) for h in h_grid)
    words = [tuple(w) for w in word_set]
    rows, details = [], {}
    for h in hs:
        p = params_base.with_h(h)
        d: dict = {}
        d["containment"] = containment_check(system, p)
        d["change_sign"] = change_sign_check(system, p, grid)
        mir = {}
        for w in words:
            mir[",".join(map(str, w))] = miranda_check(system, p, w, density=miranda_density, max_doublings=miranda_doublings).to_dict()
        d["miranda"] = {"passed": all(m["passed"] for m in mir.values()), "words": mir}
        if saddles:
            reps = []
            for k in system.symbols:
                try:
                    reps.append(saddle_spectrum(curve, p, system, k).to_dict())
                except AnalysisError as exc:
                    reps.append({"cc_index": k, "error": str(exc), "classification": None})
            d["saddle"] = {"passed": all(r["classification"] == "saddle" for r in reps), "reports": reps}
        for crit, rep in d.items():
            rows.append((h, crit, bool(rep["passed"])))
        details[h] = d
    crits = list(dict.fromkeys(c for _, c, _ in rows))
    thresholds, violations = {}, {}
    for c in crits:
        pat = [ok for _, cc, ok in rows if cc == c]
        thresholds[c] = smallest_monotone_threshold(hs, pat)
        violations[c] = monotonicity_violations(hs, pat)
        if violations[c]:
            warnings.warn(f"criterion {c!r} is not monotone in h: fails again at {violations[c]}", GeometryWarning)
    return ThresholdReport(hs, rows, thresholds, violations, details, euclidean_change_sign(system))


# ---------------------------------------------------------------------------
# sensitivity


def agreeing_pair(core: Sequence[int], m: int, left: Sequence[int], right: Sequence[int]) -> tuple:
    """Two fixed-ends words sharing ``core[|k| <= m]`` and differing outside.

    ``core`` has odd length ``2M + 1`` and is centred on position 0.
    ``left``/``right`` give the replacement symbols used by the second word
    at positions ``|k| > m`` (indexed by distance from the centre).
    """
    core = tuple(core)
    M = len(core) // 2
    other = list(core)
    for k in range(-M, M + 1):
        if abs(k) > m:
            other[k + M] = (left if k < 0 else right)[abs(k) - 1]
    return core, tuple(other)


@dataclass
class SensitivityReport:
    word1: tuple
    word2: tuple
    center: int
    separation: float
    state_separation: float
    distance_bounds: tuple
    realized: tuple

    def to_dict(self) -> dict:
        return {
            "word1": list(self.word1),
            "word2": list(self.word2),
            "center": self.center,
            "xi_separation": self.separation,
            "state_separation": self.state_separation,
            "word_distance": list(self.distance_bounds),
            "realizations": [c.to_dict() for c in self.realized],
        }


def sensitivity_probe(
    curve: BoundaryCurve,
    params: BilliardParams,
    system: IntervalSystem,
    word1: Sequence[int],
    word2: Sequence[int],
    depth: int | None = None,
    periodic: bool = False,
) -> SensitivityReport:
    """Compare the realized states of two words at their central symbol.

    Fixed-ends words are pinned at the configurations of their first and
    last symbols and centred at index ``depth`` (default: the middle).
    Periodic words are compared at their first symbol.

    Returns:
        Separation of the departure parameter and of the full state
        ``(xi, v)`` at the centre, and bounds on the word distance.
    """
    word1, word2 = tuple(word1), tuple(word2)
    if periodic:
        c1 = realize_periodic(system, params, word1)
        c2 = realize_periodic(system, params, word2)
        k = 0
        w1 = WordWindow(word1, 0, True)
        w2 = WordWindow(word2, 0, True)
    else:
        if len(word1) != len(word2):
            raise ValueError("fixed-ends words must have equal length")
        k = len(word1) // 2 if depth is None else int(depth)
        c1 = realize_fixed_ends(system, params, word1, system.center(word1[0]), system.center(word1[-1]))
        c2 = realize_fixed_ends(system, params, word2, system.center(word2[0]), system.center(word2[-1]))
        w1 = WordWindow(word1, k)
        w2 = WordWindow(word2, k)
    x1, x2 = c1.xi_lifted[2 * k], c2.xi_lifted[2 * k]
    sep = abs(curve.signed_gap(x1, x2))
    v1, v2 = c1.arcs[2 * k].v0, c2.arcs[2 * k].v0
    state_sep = float(math.hypot(sep, float(np.linalg.norm(v1 - v2))))
    return SensitivityReport(word1, word2, k, sep, state_sep, word_distance(w1, w2), (c1, c2))
