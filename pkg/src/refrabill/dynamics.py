"""Pointwise dynamics: refraction, first-return map, iteration and coding.

A state is a boundary point ``gamma(xi)`` with an outward velocity on the
outer energy shell. One application of the return map follows the outer
harmonic arc back to the boundary, refracts inward, follows the inner Kepler
arc until it leaves the domain, and refracts outward again.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .arcs import LeviCivitaPath, OuterPath, propagate_inner, propagate_outer
from .model import BilliardParams, v_inner, v_outer
from .words import IntervalSystem, WordWindow

GRAZING_TOL = 1e-10


class DynamicsError(RuntimeError):
    """A step of the return map is undefined.

    Attributes:
        record: partial transit data collected before the failure.
        step: iteration index, set by :func:`trace`.
    """

    def __init__(self, message: str, record: dict | None = None):
        super().__init__(message)
        self.record = record or {}
        self.step: int | None = None


class EscapeError(DynamicsError):
    """No boundary crossing was found along the arc."""


class WrongWindowError(DynamicsError):
    """A crossing falls outside the admissible intervals."""


class CriticalAngleTrapError(DynamicsError):
    """The inner arc reaches the boundary beyond the critical angle."""


class GrazingError(DynamicsError):
    """The trajectory meets the boundary tangentially."""


class TotalInternalReflectionError(DynamicsError):
    """Refraction from inside to outside is impossible at this incidence."""


class EnergyShellError(ValueError):
    """Velocity not on the required energy shell."""


@dataclass(frozen=True)
class SurfaceState:
    """Boundary parameter and velocity on the outer energy shell."""

    xi: float
    v: np.ndarray
    orientation: str = "outward"

    def reversed(self) -> "SurfaceState":
        return SurfaceState(self.xi, -np.asarray(self.v), "inward" if self.orientation == "outward" else "outward")

    def to_dict(self) -> dict:
        return {"xi": float(self.xi), "v": [float(self.v[0]), float(self.v[1])], "orientation": self.orientation}


def validate_state(curve, params: BilliardParams, state: SurfaceState, tol: float = 1e-9) -> None:
    p, _, n = curve.frame_tuple(state.xi)
    v = np.asarray(state.v, dtype=float)
    res = 0.5 * float(v @ v) - v_outer(params, p)
    if abs(res) > tol * max(1.0, params.calE):
        raise EnergyShellError(f"state off the outer energy shell by {res:.3e}")
    vn = v[0] * n[0] + v[1] * n[1]
    if (vn > 0) != (state.orientation == "outward"):
        raise EnergyShellError("velocity direction contradicts the stated orientation")


def state_from_tangential(curve, params: BilliardParams, xi: float, a: float, orientation: str = "outward") -> SurfaceState:
    """State with tangential velocity component ``a`` on the outer shell."""
    p, t, n = curve.frame_tuple(xi)
    b2 = 2.0 * v_outer(params, p) - a * a
    if b2 < 0.0:
        raise EnergyShellError("tangential component exceeds the available speed")
    b = math.sqrt(b2) * (1.0 if orientation == "outward" else -1.0)
    return SurfaceState(float(xi), np.array([a * t[0] + b * n[0], a * t[1] + b * n[1]]), orientation)


def state_from_angle(curve, params: BilliardParams, xi: float, alpha: float) -> SurfaceState:
    """Outward state making angle ``alpha`` with the outward normal (positive toward the tangent)."""
    p, _, _ = curve.frame_tuple(xi)
    return state_from_tangential(curve, params, xi, math.sqrt(2.0 * v_outer(params, p)) * math.sin(alpha))


_DIRECTIONS = {
    "outer_to_inner": "in",
    "outward_to_inner": "in",
    "inner_to_outer": "out",
    "inner_to_outward": "out",
}


def refract(params: BilliardParams, curve, v, xi: float, direction: str, tol: float = 1e-9) -> np.ndarray:
    """Snell refraction of ``v`` at ``gamma(xi)``.

    The tangential component and the sign of the normal component are kept;
    the normal component is rescaled onto the other energy shell.

    Args:
        direction: ``"outer_to_inner"`` or ``"inner_to_outer"``.

    Raises:
        TotalInternalReflectionError: inner-to-outer with a tangential
            component above ``sqrt(2 V_E)``.
        EnergyShellError: ``v`` is not on the starting shell.
    """
    if direction not in _DIRECTIONS:
        raise ValueError(f"unknown refraction direction {direction!r}")
    p, t, n = curve.frame_tuple(xi)
    v = np.asarray(v, dtype=float)
    ve, vi = v_outer(params, p), v_inner(params, p)
    src, dst = (ve, vi) if _DIRECTIONS[direction] == "in" else (vi, ve)
    if abs(0.5 * float(v @ v) - src) > tol * max(1.0, src):
        raise EnergyShellError("velocity not on the source energy shell")
    a = v[0] * t[0] + v[1] * t[1]
    b = v[0] * n[0] + v[1] * n[1]
    rad = 2.0 * dst - a * a
    if rad < 0.0:
        raise TotalInternalReflectionError(
            f"tangential speed {abs(a):.6g} exceeds sqrt(2 V_E) = {math.sqrt(2 * dst):.6g}"
        )
    bn = math.copysign(math.sqrt(rad), b)
    return np.array([a * t[0] + bn * n[0], a * t[1] + bn * n[1]])


# ---------------------------------------------------------------------------
# legs


def _outer_leg(curve, params: BilliardParams, xi: float, v):
    """Follow the outer flow from ``gamma(xi)`` until it re-enters the domain."""
    z0 = curve.point(xi)
    path = propagate_outer(params, z0, v)
    P = params.period
    s = np.concatenate([np.geomspace(1e-9 * P, 0.01 * P, 25), np.linspace(0.01 * P, P, 100)[1:]])
    vals = curve.implicit_v(path.position(s))
    inside = np.nonzero(vals < 0.0)[0]
    if len(inside) == 0:
        raise EscapeError("outer arc does not return to the domain within one period")
    k = int(inside[0])
    if k == 0:
        raise GrazingError("outer arc re-enters immediately (grazing launch)")

    def f(x: float) -> float:
        return curve.implicit(path.position(x))

    s1 = brentq(f, s[k - 1], s[k], xtol=1e-15, rtol=4 * np.finfo(float).eps)
    z1 = path.position(s1)
    v1 = path.velocity(s1)
    xi1 = curve.param_of_point(z1)
    _, _, n1 = curve.frame_tuple(xi1)
    vn = (v1[0] * n1[0] + v1[1] * n1[1]) / math.hypot(*v1)
    if abs(vn) < GRAZING_TOL:
        raise GrazingError(f"outer arc grazes the boundary at xi={xi1:.12g}")
    return xi1, v1, float(s1), path


def _inner_leg(curve, params: BilliardParams, xi: float, u, rmax: float):
    """Follow the inner flow from ``gamma(xi)`` until it leaves the domain."""
    z0 = curve.point(xi)
    path = propagate_inner(params, z0, u)
    a2 = abs(path.A) ** 2
    tau_max = max(0.5 * math.log(8.0 * rmax / a2), 0.0) + 1.0
    while float(np.abs(path.w(tau_max)) ** 2) < 2.0 * rmax:
        tau_max *= 1.5
    taus = np.concatenate([np.geomspace(1e-10 * tau_max, 0.01 * tau_max, 25), np.linspace(0.01 * tau_max, tau_max, 100)[1:]])
    vals = curve.implicit_v(path.position(taus))
    outside = np.nonzero(vals > 0.0)[0]
    if len(outside) == 0:
        raise EscapeError("inner arc does not leave the domain")
    k = int(outside[0])
    if k == 0:
        raise GrazingError("inner arc leaves immediately (grazing entry)")

    def f(x: float) -> float:
        return curve.implicit(path.position(x))

    tau2 = brentq(f, taus[k - 1], taus[k], xtol=1e-15, rtol=4 * np.finfo(float).eps)
    z2 = path.position(tau2)
    u2 = path.velocity(tau2)
    xi2 = curve.param_of_point(z2)
    _, _, n2 = curve.frame_tuple(xi2)
    vn = (u2[0] * n2[0] + u2[1] * n2[1]) / math.hypot(*u2)
    if abs(vn) < GRAZING_TOL:
        raise GrazingError(f"inner arc grazes the boundary at xi={xi2:.12g}")
    tc, wmin = path.min_w(0.0, tau2)
    collision = 0.0 < tc < tau2 and wmin < 1e-12 * max(1.0, abs(path.w(0.0)))
    return xi2, u2, float(path.time(tau2)), path, float(tau2), bool(collision)


@dataclass
class TransitRecord:
    """One application of the return map.

    Attributes:
        entry, exit: outward states before and after.
        s1, s2: outer and inner durations.
        xi1: re-entry parameter.
        v1, v1p: velocity before and after refraction at re-entry.
        v2p, v2: velocity before and after refraction at exit.
        intervals: symbols of the departure, re-entry and exit intervals.
        collision: the inner arc passes through the centre.
    """

    entry: SurfaceState
    exit: SurfaceState
    s1: float
    s2: float
    xi1: float
    v1: np.ndarray
    v1p: np.ndarray
    v2p: np.ndarray
    v2: np.ndarray
    intervals: tuple
    collision: bool
    outer_path: OuterPath = field(repr=False, default=None)
    inner_path: LeviCivitaPath = field(repr=False, default=None)
    tau2: float = 0.0

    def to_dict(self) -> dict:
        return {
            "entry": self.entry.to_dict(),
            "exit": self.exit.to_dict(),
            "outer_duration": self.s1,
            "inner_duration": self.s2,
            "xi_reentry": self.xi1,
            "intervals": list(self.intervals),
            "collision": self.collision,
        }

    def rows(self, t0: float = 0.0, n: int = 100) -> list[tuple]:
        """CSV rows ``(s, x, y, vx, vy, regime, crossing)`` of the transit."""
        out = []
        s = np.linspace(0.0, self.s1, n)
        for k, (z, v) in enumerate(zip(self.outer_path.position(s), self.outer_path.velocity(s))):
            out.append((t0 + float(s[k]), float(z[0]), float(z[1]), float(v[0]), float(v[1]), "outer", int(k == 0)))
        taus = np.linspace(0.0, self.tau2, n + (n % 2))
        times = self.inner_path.time(taus)
        for k, (z, v) in enumerate(zip(self.inner_path.position(taus), self.inner_path.velocity(taus))):
            out.append((t0 + self.s1 + float(times[k]), float(z[0]), float(z[1]), float(v[0]), float(v[1]), "inner", int(k == 0)))
        return out


def _symbol(system: IntervalSystem, xi: float) -> int | None:
    return system.locate(xi)


def return_map(
    curve,
    params: BilliardParams,
    system: IntervalSystem,
    state: SurfaceState,
    permissive: bool = False,
) -> tuple[SurfaceState, TransitRecord]:
    """First-return map on outward boundary states.

    The re-entry must lie in the departure interval and the exit in an
    interval of ``NA`` of it, unless ``permissive`` is set.

    Raises:
        EscapeError, WrongWindowError, GrazingError, CriticalAngleTrapError.
    """
    validate_state(curve, params, state)
    r = _symbol(system, state.xi)
    if r is None and not permissive:
        raise WrongWindowError(f"initial parameter {state.xi:.12g} is outside the interval system", {"xi0": state.xi})
    partial: dict = {"entry": state.to_dict(), "start_interval": r}
    xi1, v1, s1, opath = _outer_leg(curve, params, state.xi, state.v)
    partial.update(xi_reentry=xi1, outer_duration=s1)
    r1 = _symbol(system, xi1)
    if not permissive and r1 != r:
        raise WrongWindowError(f"re-entry at xi={xi1:.12g} outside interval {r}", partial)
    v1p = refract(params, curve, v1, xi1, "outer_to_inner")
    xi2, u2, s2, ipath, tau2, coll = _inner_leg(curve, params, xi1, v1p, curve.max_radius())
    partial.update(xi_exit=xi2, inner_duration=s2, collision=coll)
    r2 = _symbol(system, xi2)
    if not permissive and (r2 is None or r2 not in system.na[r]):
        raise WrongWindowError(f"exit at xi={xi2:.12g} outside the intervals reachable from {r}", partial)
    _, t2, _ = curve.frame_tuple(xi2)
    a = u2[0] * t2[0] + u2[1] * t2[1]
    if abs(a) > math.sqrt(2.0 * v_outer(params, curve.point(xi2))):
        raise CriticalAngleTrapError(f"exit at xi={xi2:.12g} beyond the critical angle", partial)
    v2 = refract(params, curve, u2, xi2, "inner_to_outer")
    out = SurfaceState(float(xi2), v2, "outward")
    rec = TransitRecord(state, out, s1, s2, float(xi1), v1, v1p, u2, v2, (r, r1, r2), coll, opath, ipath, tau2)
    return out, rec


def inverse_return_map(
    curve,
    params: BilliardParams,
    system: IntervalSystem,
    state: SurfaceState,
    permissive: bool = False,
) -> SurfaceState:
    """Preimage of an outward state under the return map, by time reversal."""
    validate_state(curve, params, state)
    r = _symbol(system, state.xi)
    if r is None and not permissive:
        raise WrongWindowError(f"parameter {state.xi:.12g} is outside the interval system", {"xi0": state.xi})
    partial: dict = {"exit": state.to_dict()}
    u = refract(params, curve, state.v, state.xi, "outer_to_inner")
    xi1, u1, s2, _, _, coll = _inner_leg(curve, params, state.xi, -u, curve.max_radius())
    partial.update(xi_entry=xi1, inner_duration=s2, collision=coll)
    r1 = _symbol(system, xi1)
    if not permissive and (r1 is None or r not in system.na[r1]):
        raise WrongWindowError(f"backward inner arc reaches xi={xi1:.12g} outside the reachable intervals", partial)
    _, t1, _ = curve.frame_tuple(xi1)
    a = u1[0] * t1[0] + u1[1] * t1[1]
    if abs(a) > math.sqrt(2.0 * v_outer(params, curve.point(xi1))):
        raise CriticalAngleTrapError(f"backward exit at xi={xi1:.12g} beyond the critical angle", partial)
    w = refract(params, curve, u1, xi1, "inner_to_outer")
    xi0, w0, s1, _ = _outer_leg(curve, params, xi1, w)
    r0 = _symbol(system, xi0)
    if not permissive and r0 != r1:
        raise WrongWindowError(f"backward outer arc lands at xi={xi0:.12g} outside interval {r1}", partial)
    return SurfaceState(float(xi0), -w0, "outward")


# ---------------------------------------------------------------------------
# iteration


@dataclass
class TraceResult:
    """Orbit segment and its symbolic coding.

    Attributes:
        states: outward states ordered in time, ``states[center]`` is the
            initial one.
        center: index of the initial state.
        records: forward transits, ``records[k]`` maps ``states[center+k]``.
        window: coding of the states (0 marks a crossing outside every
            interval in permissive mode).
        forward_error, backward_error: termination causes, if any.
    """

    states: list
    center: int
    records: list
    window: WordWindow
    forward_error: DynamicsError | None = None
    backward_error: DynamicsError | None = None
    permissive: bool = False

    @property
    def crossings(self) -> list[float]:
        """Forward crossing parameters ``xi_0, xi_1, xi_2, ...``."""
        out = [self.states[self.center].xi]
        for rec in self.records:
            out += [rec.xi1, rec.exit.xi]
        return out

    def rows(self, n: int = 100) -> list[tuple]:
        out, t = [], 0.0
        for rec in self.records:
            out += rec.rows(t, n)
            t += rec.s1 + rec.s2
        return out

    def to_dict(self) -> dict:
        def err(e):
            return None if e is None else {"type": type(e).__name__, "message": str(e), "step": e.step, "record": e.record}

        return {
            "window": list(self.window.symbols),
            "center": self.center,
            "states": [s.to_dict() for s in self.states],
            "transits": [r.to_dict() for r in self.records],
            "forward_error": err(self.forward_error),
            "backward_error": err(self.backward_error),
            "permissive": self.permissive,
        }


def trace(
    curve,
    params: BilliardParams,
    system: IntervalSystem,
    state: SurfaceState,
    n_forward: int,
    n_backward: int = 0,
    permissive: bool = False,
) -> TraceResult:
    """Iterate the return map forward and its inverse backward.

    Each direction stops at its first failure; the failure is stored with the
    step index at which it happened.
    """
    fwd, recs, back = [], [], []
    ferr = berr = None
    s = state
    for k in range(n_forward):
        try:
            s, rec = return_map(curve, params, system, s, permissive)
        except DynamicsError as exc:
            exc.step = k
            ferr = exc
            break
        fwd.append(s)
        recs.append(rec)
    s = state
    for k in range(n_backward):
        try:
            s = inverse_return_map(curve, params, system, s, permissive)
        except DynamicsError as exc:
            exc.step = -k - 1
            berr = exc
            break
        back.append(s)
    states = back[::-1] + [state] + fwd
    symbols = tuple(_symbol(system, st.xi) or 0 for st in states)
    window = WordWindow(symbols, len(back))
    return TraceResult(states, len(back), recs, window, ferr, berr, permissive)


# ---------------------------------------------------------------------------
# replay of realized chains


@dataclass
class ReplayReport:
    """Comparison of a realized chain with the pointwise dynamics.

    Attributes:
        transit: per transit ``j``, the largest deviation of the simulated
            re-entry and exit parameters from the realized ones when the
            simulation restarts at the realized departure state of ``j``.
        free_run: per crossing, the deviation of an uninterrupted simulation
            started at the first realized state. Saddle-type orbits amplify
            round-off along it, so it is diagnostic.
        free_run_error: failure that ended the uninterrupted run, if any.
    """

    transit: list
    free_run: list
    free_run_error: str | None = None

    @property
    def max_transit_deviation(self) -> float:
        return max(self.transit, default=0.0)

    @property
    def max_free_run_deviation(self) -> float:
        return max(self.free_run, default=0.0)

    def to_dict(self) -> dict:
        return {
            "transit_deviations": self.transit,
            "free_run_deviations": self.free_run,
            "free_run_error": self.free_run_error,
        }


def _simulate_transit(curve, params: BilliardParams, xi: float, v):
    xi1, v1, _, _ = _outer_leg(curve, params, xi, v)
    u1 = refract(params, curve, v1, xi1, "outer_to_inner")
    xi2, u2, _, _, _, _ = _inner_leg(curve, params, xi1, u1, curve.max_radius())
    return xi1, xi2, u2


def replay(curve, params: BilliardParams, conc, free_run: bool = True) -> ReplayReport:
    """Simulate the transits of a realized chain and measure the deviations.

    Args:
        conc: a realized chain from the shooting module (``xi_lifted`` and
            ``arcs`` are used; ``arcs[2j]`` is the outer arc of transit ``j``).
        free_run: also run the uninterrupted simulation from the first state.
    """
    xs = conc.xi_lifted
    n_tr = len(conc.arcs) // 2

    def gap(a: float, b: float) -> float:
        return abs(curve.signed_gap(a, b))

    transit = []
    for j in range(n_tr):
        xi1, xi2, _ = _simulate_transit(curve, params, float(xs[2 * j]), conc.arcs[2 * j].v0)
        transit.append(max(gap(xi1, xs[2 * j + 1]), gap(xi2, xs[(2 * j + 2) % len(xs)])))
    free, err = [], None
    if free_run:
        xi, v = float(xs[0]), np.array(conc.arcs[0].v0)
        for j in range(n_tr):
            try:
                xi1, xi2, u2 = _simulate_transit(curve, params, xi, v)
                free += [gap(xi1, xs[2 * j + 1]), gap(xi2, xs[(2 * j + 2) % len(xs)])]
                if j + 1 < n_tr:
                    v = refract(params, curve, u2, xi2, "inner_to_outer")
                    xi = xi2
            except (DynamicsError, ValueError) as exc:
                err = f"transit {j}: {exc}"
                break
    return ReplayReport([float(t) for t in transit], [float(f) for f in free], err)
