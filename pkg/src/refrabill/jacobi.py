"""Jacobi lengths of arcs, their endpoint derivatives and word functionals.

Along a zero-energy trajectory ``|z'| = sqrt(2 V)``, so the Jacobi length
``int sqrt(V) |dz|`` equals ``sqrt(2) int V ds``. The derivative of the
length with respect to a boundary endpoint is the tangential component of
``sqrt(V) v/|v|`` at that endpoint (negated at the departure point).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .arcs import ArcError, InnerArc, OuterArc, solve_inner_arc, solve_outer_arc
from .model import BilliardParams, v_inner, v_outer

SQRT2 = math.sqrt(2.0)
RADIAL_SWITCH = 1e-9


class EndpointMismatchError(ValueError):
    """Arcs handed to a junction check do not meet at the stated point."""


class WordArcError(ArcError):
    """An arc of a word concatenation failed; carries the arc index."""

    def __init__(self, index: int, kind: str, cause: Exception):
        super().__init__(f"{kind} arc #{index} failed: {cause}")
        self.index = index
        self.kind = kind
        self.cause = cause


@dataclass(frozen=True)
class JacobiValue:
    """Jacobi length of one arc with its endpoint partial derivatives."""

    value: float
    d_a: float
    d_b: float
    arc: object = None


def _tangential(curve, xi: float, v, pot: float, sign: float) -> float:
    _, t, _ = curve.frame_tuple(xi)
    sp = math.hypot(v[0], v[1])
    return sign * math.sqrt(pot) * (v[0] * t[0] + v[1] * t[1]) / sp


def outer_length_closed_form(params: BilliardParams, arc: OuterArc) -> float:
    """Exact ``sqrt(2) int_0^T V_E(z(s)) ds`` for a harmonic arc."""
    om, T = params.omega, arc.T
    z0, v0 = arc.z0, arc.v0
    s2 = math.sin(2 * om * T)
    i_cc = 0.5 * T + s2 / (4 * om)
    i_ss = 0.5 * T - s2 / (4 * om)
    i_sc = math.sin(om * T) ** 2 / (2 * om)
    mean_r2 = float(z0 @ z0) * i_cc + 2 * float(z0 @ v0) / om * i_sc + float(v0 @ v0) / om**2 * i_ss
    return SQRT2 * (params.calE * T - 0.5 * params.omega2 * mean_r2)


def s_outer(curve, params: BilliardParams, xi1: float, xi2: float, arc: OuterArc | None = None) -> JacobiValue:
    """Outer Jacobi length between ``gamma(xi1)`` and ``gamma(xi2)``."""
    if arc is None:
        arc = solve_outer_arc(curve, params, xi1, xi2)
    val = outer_length_closed_form(params, arc)
    d_a = _tangential(curve, xi1, arc.v0, v_outer(params, arc.z0), -1.0)
    d_b = _tangential(curve, xi2, arc.v1, v_outer(params, arc.z1), 1.0)
    return JacobiValue(val, d_a, d_b, arc)


def inner_length_closed_form(arc: InnerArc) -> float:
    """Jacobi length of a Levi-Civita arc from its boundary data."""
    E, ep, tt = arc.energy, arc.eprime, arc.Ttilde
    ssum = abs(arc.w0) ** 2 + abs(arc.w1) ** 2
    d = arc.w0.real * arc.w1.real + arc.w0.imag * arc.w1.imag
    return 2.0 * math.sqrt(E) * (0.5 * ssum / math.tanh(tt) - d / math.sinh(tt) + tt * ep)


def radial_length(params: BilliardParams, r0: float) -> float:
    """Jacobi length of the ejection-collision arc ``2 int_0^r0 sqrt(E + mu/r) dr``."""
    E, mu = params.inner_energy, params.mu
    er = E * r0
    return 2.0 * (math.sqrt(r0 * (er + mu)) + mu / math.sqrt(E) * math.log((math.sqrt(er) + math.sqrt(er + mu)) / math.sqrt(mu)))


def s_inner(curve, params: BilliardParams, xi1: float, xi2: float, arc: InnerArc | None = None) -> JacobiValue:
    """Inner (TnT) Jacobi length between ``gamma(xi1)`` and ``gamma(xi2)``."""
    if arc is None:
        arc = solve_inner_arc(params, curve.point(xi1), curve.point(xi2), "TnT", xi1=xi1, xi2=xi2)
    if abs(curve.signed_gap(xi1, xi2)) < RADIAL_SWITCH * curve.length:
        val = radial_length(params, 0.5 * (math.hypot(*arc.p0) + math.hypot(*arc.p1)))
    else:
        val = inner_length_closed_form(arc)
    d_a = _tangential(curve, xi1, arc.u0, v_inner(params, arc.p0), -1.0)
    d_b = _tangential(curve, xi2, arc.u1, v_inner(params, arc.p1), 1.0)
    return JacobiValue(val, d_a, d_b, arc)


def inner_remainder(params: BilliardParams, value: float, p0, p1) -> float:
    """Rescaled remainder of the inner length after its large-``h`` asymptotics.

    ``(sqrt(E)/mu) (S_I - sqrt(E)(|p0| + |p1|)) + log(mu/(2E))`` with
    ``E = calE + h``; it stays bounded as ``h`` grows.
    """
    E, mu = params.inner_energy, params.mu
    lead = math.sqrt(E) * (math.hypot(*p0) + math.hypot(*p1))
    return math.sqrt(E) / mu * (value - lead) + math.log(mu / (2.0 * E))


def snell_residual(curve, params: BilliardParams, arriving, departing, xi: float, tol: float = 1e-9) -> float:
    """Jump of the tangential Jacobi momentum at a boundary crossing.

    ``sqrt(V_in) (v_in/|v_in|).t - sqrt(V_out) (v_out/|v_out|).t`` where
    ``arriving`` ends at ``gamma(xi)`` and ``departing`` starts there. The
    potential on each side follows the arc regime.
    """
    p = curve.point(xi)
    z_end = arriving.z1 if isinstance(arriving, OuterArc) else arriving.p1
    z_start = departing.z0 if isinstance(departing, OuterArc) else departing.p0
    if np.linalg.norm(z_end - p) > tol or np.linalg.norm(z_start - p) > tol:
        raise EndpointMismatchError("arcs do not meet at the junction point")
    v_in = arriving.v1 if isinstance(arriving, OuterArc) else arriving.u1
    v_out = departing.v0 if isinstance(departing, OuterArc) else departing.u0
    pot_in = v_outer(params, p) if isinstance(arriving, OuterArc) else v_inner(params, p)
    pot_out = v_outer(params, p) if isinstance(departing, OuterArc) else v_inner(params, p)
    return _tangential(curve, xi, v_in, pot_in, 1.0) - _tangential(curve, xi, v_out, pot_out, 1.0)


# ---------------------------------------------------------------------------
# word functionals


def arc_pairs(n: int, mode: str) -> list[tuple[str, int, int]]:
    """Arcs of a word of length ``n`` as ``(kind, first index, second index)``.

    Periodic words use ``2n`` parameters with index ``2n`` wrapped to 0;
    fixed-ends words use ``2n - 1`` parameters ``xi_0 .. xi_{2n-2}``.
    """
    if mode == "periodic":
        out = []
        for j in range(n):
            out.append(("outer", 2 * j, 2 * j + 1))
            out.append(("inner", 2 * j + 1, (2 * j + 2) % (2 * n)))
        return out
    if mode == "fixed_ends":
        if n < 2:
            raise ValueError("fixed-ends words need at least two symbols")
        out = []
        for j in range(n - 1):
            out.append(("outer", 2 * j, 2 * j + 1))
            out.append(("inner", 2 * j + 1, 2 * j + 2))
        return out
    raise ValueError(f"unknown mode {mode!r}")


def n_params(n: int, mode: str) -> int:
    return 2 * n if mode == "periodic" else 2 * n - 1


def arc_value(curve, params: BilliardParams, kind: str, xi1: float, xi2: float) -> JacobiValue:
    return s_outer(curve, params, xi1, xi2) if kind == "outer" else s_inner(curve, params, xi1, xi2)


def evaluate_arcs(curve, params: BilliardParams, xi: Sequence[float], mode: str) -> list[JacobiValue]:
    """Jacobi values of every arc of the concatenation, in order."""
    xi = np.asarray(xi, dtype=float)
    n = len(xi) // 2 if mode == "periodic" else (len(xi) + 1) // 2
    if len(xi) != n_params(n, mode):
        raise ValueError(f"parameter vector of length {len(xi)} does not fit mode {mode!r}")
    out = []
    for k, (kind, i, j) in enumerate(arc_pairs(n, mode)):
        try:
            out.append(arc_value(curve, params, kind, float(xi[i]), float(xi[j])))
        except ArcError as exc:
            raise WordArcError(k, kind, exc) from exc
    return out


def assemble_gradient(values: Sequence[JacobiValue], n: int, mode: str) -> np.ndarray:
    grad = np.zeros(n_params(n, mode))
    for jv, (_, i, j) in zip(values, arc_pairs(n, mode)):
        grad[i] += jv.d_a
        grad[j] += jv.d_b
    return grad


def total_length(curve, params: BilliardParams, word: Sequence[int], xi: Sequence[float], mode: str = "periodic"):
    """Total Jacobi length of the concatenation and its gradient.

    Args:
        word: symbols; only its length matters for the functional.
        xi: ``2n`` parameters for periodic words, ``2n - 1`` for fixed ends
            (including both pinned endpoints).
        mode: ``"periodic"`` or ``"fixed_ends"``.

    Returns:
        ``(value, gradient)`` with the gradient taken with respect to every
        entry of ``xi``. For fixed ends, the first and last entries are the
        pinned endpoints and their components are not constrained to vanish.
    """
    n = len(word)
    if len(xi) != n_params(n, mode):
        raise ValueError(f"expected {n_params(n, mode)} parameters for a word of length {n} in mode {mode!r}")
    values = evaluate_arcs(curve, params, xi, mode)
    return float(sum(v.value for v in values)), assemble_gradient(values, n, mode)
