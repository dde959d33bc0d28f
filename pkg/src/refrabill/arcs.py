"""Analytic trajectory segments on either side of the interface.

Outer arcs solve ``z'' = -omega2 z`` at energy ``calE`` and are explicit
trigonometric curves. Inner arcs solve the Kepler problem at energy
``calE + h`` through the Levi-Civita map ``z = w**2`` with the time change
``dt = sqrt(2/E) |w|^2 dtau``, which turns the motion into the linear
repulsor ``w'' = w`` with first integral ``|w'|^2 - |w|^2 = mu/E``.
Collisions are regular points of the ``w`` flow.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .model import BilliardParams, v_inner, v_outer


class ArcError(RuntimeError):
    """Base class for arc-solver failures."""


class NoExteriorRootError(ArcError):
    """No outer arc joining the endpoints stays outside the domain."""


class TangencyError(ArcError):
    """The arc touches the boundary tangentially within tolerance."""


class AntipodalEndpointsError(ArcError):
    """The origin lies on the segment joining the inner endpoints."""


class ZeroEndpointError(ArcError):
    """An inner endpoint sits at the attracting centre."""


class EnergyMismatchError(ArcError):
    """Initial state is not on the required energy shell."""


# ---------------------------------------------------------------------------
# outer harmonic arcs


@dataclass(frozen=True)
class OuterPath:
    """Harmonic flow ``z(s) = z0 cos(omega s) + v0/omega sin(omega s)``."""

    z0: np.ndarray
    v0: np.ndarray
    omega: float

    def position(self, s):
        s = np.asarray(s, dtype=float)
        c, sn = np.cos(self.omega * s), np.sin(self.omega * s)
        return np.multiply.outer(c, self.z0) + np.multiply.outer(sn, self.v0 / self.omega)

    def velocity(self, s):
        s = np.asarray(s, dtype=float)
        c, sn = np.cos(self.omega * s), np.sin(self.omega * s)
        return np.multiply.outer(-self.omega * sn, self.z0) + np.multiply.outer(c, self.v0)

    def state(self, s):
        return self.position(s), self.velocity(s)


@dataclass(frozen=True)
class OuterArc(OuterPath):
    """Outer arc between two boundary points.

    Attributes:
        z1, v1: arrival point and velocity.
        T: duration.
        xi1, xi2: boundary parameters of the endpoints, when known.
    """

    z1: np.ndarray = field(default=None)
    v1: np.ndarray = field(default=None)
    T: float = 0.0
    xi1: float = float("nan")
    xi2: float = float("nan")
    regime: str = "outer"

    def sample(self, n: int = 200):
        s = np.linspace(0.0, self.T, n)
        return s, self.position(s), self.velocity(s)


def propagate_outer(params: BilliardParams, z0, v0, tol: float = 1e-9) -> OuterPath:
    """Harmonic flow from ``(z0, v0)`` on the outer zero-energy shell."""
    z0 = np.asarray(z0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    res = 0.5 * float(v0 @ v0) - v_outer(params, z0)
    if abs(res) > tol * max(1.0, params.calE):
        raise EnergyMismatchError(f"outer energy residual {res:.3e}")
    return OuterPath(z0, v0, params.omega)


def _outer_candidates(params: BilliardParams, z0, z1):
    """Angles ``phi = omega T`` in (0, 2 pi) solving the two-point condition."""
    w2 = params.omega2
    x0, y0 = z0
    x1, y1 = z1
    kin = 2.0 * params.calE - w2 * (x0 * x0 + y0 * y0)

    def g(phi: float) -> float:
        c, s = math.cos(phi), math.sin(phi)
        dx, dy = x1 - x0 * c, y1 - y0 * c
        return w2 * (dx * dx + dy * dy) - s * s * kin

    phis = np.concatenate([np.geomspace(1e-12, 0.05, 60), np.linspace(0.05, 2 * math.pi - 1e-9, 721)[1:]])
    c, s = np.cos(phis), np.sin(phis)
    dx, dy = x1 - x0 * c, y1 - y0 * c
    vals = w2 * (dx * dx + dy * dy) - s * s * kin
    roots = []
    for k in range(len(phis) - 1):
        if vals[k] == 0.0:
            roots.append(float(phis[k]))
        elif vals[k] * vals[k + 1] < 0.0:
            roots.append(brentq(g, phis[k], phis[k + 1], xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200))
    return roots


def _outer_from_phi(params: BilliardParams, z0, z1, phi: float):
    om = params.omega
    c, s = math.cos(phi), math.sin(phi)
    v0 = om * (z1 - z0 * c) / s
    v1 = -om * z0 * s + v0 * c
    return v0, v1, phi / om


def _exterior_margin(curve, path: OuterPath, T: float, n: int) -> float:
    k = np.arange(n)
    s = 0.5 * T * (1.0 - np.cos(math.pi * (k + 0.5) / n))
    mid = (s > 0.05 * T) & (s < 0.95 * T)
    vals = curve.implicit_v(path.position(s))
    if vals.min() <= 0.0:
        return float(vals.min())
    return float(vals[mid].min()) if mid.any() else float(vals.min())


def solve_outer_arc(curve, params: BilliardParams, xi1: float, xi2: float, samples: int = 64) -> OuterArc:
    """Outer arc from ``gamma(xi1)`` to ``gamma(xi2)`` lying outside the domain.

    Among the roots of the two-point condition the shortest exterior one is
    returned.

    Raises:
        NoExteriorRootError: no candidate stays outside the domain.
        TangencyError: the best candidate grazes the boundary.
    """
    p0, t0, n0 = curve.frame_tuple(xi1)
    p1, t1, n1 = curve.frame_tuple(xi2)
    z0, z1 = np.array(p0), np.array(p1)
    grazing = None
    for phi in _outer_candidates(params, z0, z1):
        v0, v1, T = _outer_from_phi(params, z0, z1, phi)
        sp0 = math.hypot(v0[0], v0[1])
        sp1 = math.hypot(v1[0], v1[1])
        out0 = (v0[0] * n0[0] + v0[1] * n0[1]) / sp0
        in1 = (v1[0] * n1[0] + v1[1] * n1[1]) / sp1
        if out0 < -1e-10 or in1 > 1e-10:
            continue
        path = OuterPath(z0, v0, params.omega)
        n = samples
        margin = _exterior_margin(curve, path, T, n)
        while 0.0 < margin < 1e-6 and n < 1024:
            n *= 2
            margin = _exterior_margin(curve, path, T, n)
        if margin <= 0.0:
            continue
        if margin < 1e-12 or out0 < 1e-10 or in1 > -1e-10:
            grazing = (phi, margin, out0, in1)
            continue
        return OuterArc(z0, v0, params.omega, z1=z1, v1=v1, T=T, xi1=float(xi1), xi2=float(xi2))
    if grazing is not None:
        raise TangencyError(f"outer arc grazes the boundary (phi={grazing[0]:.6g}, margin={grazing[1]:.3e})")
    raise NoExteriorRootError(f"no exterior outer arc between xi={xi1:.12g} and xi={xi2:.12g}")


def homothetic_outer_duration(params: BilliardParams, r0: float) -> float:
    """Duration of the radial outer excursion launched from radius ``r0``."""
    vr = math.sqrt(2.0 * params.calE - params.omega2 * r0 * r0)
    return 2.0 * math.atan(vr / (params.omega * r0)) / params.omega


# ---------------------------------------------------------------------------
# inner Kepler arcs in Levi-Civita coordinates


def _dot(a: complex, b: complex) -> float:
    """Euclidean dot product of two plane vectors stored as complex numbers."""
    return a.real * b.real + a.imag * b.imag


@dataclass(frozen=True)
class LeviCivitaPath:
    """Kepler motion ``z = w(tau)**2`` with ``w = A e^tau + B e^-tau``.

    Attributes:
        A, B: complex coefficients.
        energy: inner energy ``calE + h``.
        mu: Kepler mass parameter.
    """

    A: complex
    B: complex
    energy: float
    mu: float

    @property
    def time_scale(self) -> float:
        return math.sqrt(2.0 / self.energy)

    @property
    def eprime(self) -> float:
        return self.mu / (2.0 * self.energy)

    def w(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.A * np.exp(tau) + self.B * np.exp(-tau)

    def w_tau(self, tau):
        tau = np.asarray(tau, dtype=float)
        return self.A * np.exp(tau) - self.B * np.exp(-tau)

    def position(self, tau):
        z = self.w(tau) ** 2
        return np.stack([np.real(z), np.imag(z)], axis=-1)

    def velocity(self, tau):
        w = self.w(tau)
        v = 2.0 * self.w_tau(tau) / (self.time_scale * np.conj(w))
        return np.stack([np.real(v), np.imag(v)], axis=-1)

    def time(self, tau):
        """Physical time elapsed between regularized times 0 and ``tau``."""
        tau = np.asarray(tau, dtype=float)
        a2, b2 = abs(self.A) ** 2, abs(self.B) ** 2
        ab = _dot(self.A, self.B)
        return self.time_scale * (0.5 * a2 * np.expm1(2 * tau) - 0.5 * b2 * np.expm1(-2 * tau) + 2.0 * ab * tau)

    def tau_of_time(self, s: float) -> float:
        if s == 0.0:
            return 0.0
        hi = 1.0
        while self.time(hi) < s:
            hi *= 2.0
        return brentq(lambda x: float(self.time(x)) - s, 0.0, hi, xtol=1e-15)

    def energy_residual(self, tau):
        """Physical energy error ``|z'|^2/2 - mu/|z| - E`` at regularized times."""
        w = self.w(tau)
        wt = self.w_tau(tau)
        return self.energy * (np.abs(wt) ** 2 - np.abs(w) ** 2 - 2.0 * self.eprime) / np.abs(w) ** 2

    def min_w(self, t_lo: float = -np.inf, t_hi: float = np.inf) -> tuple[float, float]:
        """Regularized time and value of the smallest ``|w|`` on ``[t_lo, t_hi]``."""
        a, b = abs(self.A), abs(self.B)
        if a == 0.0 or b == 0.0:
            tau = t_hi if a == 0.0 else t_lo
        else:
            tau = 0.5 * math.log(b / a)
        tau = min(max(tau, t_lo), t_hi)
        return tau, abs(self.A * math.exp(tau) + self.B * math.exp(-tau))


@dataclass(frozen=True)
class InnerArc(LeviCivitaPath):
    """Inner Kepler arc between two boundary points.

    Attributes:
        p0, p1: endpoints.
        w0, w1: Levi-Civita endpoints, ``w0**2 = p0`` and ``w1**2 = p1``.
        Ttilde: regularized duration.
        T: physical duration.
        u0, u1: departure and arrival velocities.
        collision: the arc passes through the origin.
        homotopy: ``"TnT"`` (winds around the centre) or ``"direct"``.
    """

    p0: np.ndarray = field(default=None)
    p1: np.ndarray = field(default=None)
    w0: complex = 0j
    w1: complex = 0j
    Ttilde: float = 0.0
    T: float = 0.0
    u0: np.ndarray = field(default=None)
    u1: np.ndarray = field(default=None)
    collision: bool = False
    homotopy: str = "TnT"
    xi1: float = float("nan")
    xi2: float = float("nan")
    regime: str = "inner"

    @property
    def Eprime(self) -> float:  # noqa: N802 - matches the LC literature symbol
        return self.eprime

    def sample(self, n: int = 200):
        """Positions and velocities on a grid uniform in physical time."""
        s = np.linspace(0.0, self.T, n)
        grid = np.linspace(0.0, self.Ttilde, 4 * n)
        taus = np.interp(s, self.time(grid), grid)
        # Newton on s(tau) = s, ds/dtau = c |w|^2 > 0
        for _ in range(50):
            step = (self.time(taus) - s) / (self.time_scale * np.abs(self.w(taus)) ** 2)
            taus = np.clip(taus - step, 0.0, self.Ttilde)
            if np.all(np.abs(step) <= 1e-15 * max(1.0, self.Ttilde)):
                break
        else:
            bad = np.abs(self.time(taus) - s) > 1e-13 * max(1.0, self.T)
            taus[bad] = [self.tau_of_time(x) for x in s[bad]]
        taus[0], taus[-1] = 0.0, self.Ttilde
        return s, self.position(taus), self.velocity(taus)

    def sample_tau(self, n: int = 200):
        taus = np.linspace(0.0, self.Ttilde, n)
        return self.time(taus), self.position(taus), self.velocity(taus)


def solve_inner_arc(
    params: BilliardParams,
    p0,
    p1,
    homotopy: str = "TnT",
    xi1: float = float("nan"),
    xi2: float = float("nan"),
    antipodal_tol: float = 1e-9,
) -> InnerArc:
    """Kepler arc at energy ``calE + h`` joining ``p0`` to ``p1``.

    Args:
        params: physical constants.
        p0, p1: endpoints (nonzero, not antipodal).
        homotopy: ``"TnT"`` for the arc winding around the centre relative to
            the chord, ``"direct"`` for the arc homotopic to the chord.

    Raises:
        ZeroEndpointError: an endpoint is at the origin.
        AntipodalEndpointsError: the origin lies on the chord.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    r0, r1 = math.hypot(*p0), math.hypot(*p1)
    if r0 < 1e-14 or r1 < 1e-14:
        raise ZeroEndpointError("inner arc endpoint at the origin")
    cross = p0[0] * p1[1] - p0[1] * p1[0]
    dot = p0[0] * p1[0] + p0[1] * p1[1]
    if abs(math.atan2(-cross, -dot)) <= antipodal_tol:
        raise AntipodalEndpointsError("inner arc endpoints are antipodal")
    if homotopy not in ("TnT", "direct"):
        raise ValueError(f"unknown homotopy class {homotopy!r}")

    E = params.inner_energy
    ep = params.mu / (2.0 * E)
    w0 = cmath.sqrt(complex(p0[0], p0[1]))
    s1 = cmath.sqrt(complex(p1[0], p1[1]))
    d = _dot(w0, s1)
    if homotopy == "TnT":
        w1 = -s1 if d > 0.0 else s1
    else:
        w1 = s1 if d >= 0.0 else -s1
    q = _dot(w0, w1) / (2.0 * ep)
    # cosh(Ttilde) = 1 + delta; solving for delta avoids cancellation on short arcs
    c = abs(w1 - w0) ** 2 / (2.0 * ep)
    k = 1.0 + q
    root = math.sqrt(k * k + c)
    delta = c / (k + root) if k > 0.0 else root - k
    tt = math.log1p(delta + math.sqrt(delta * (2.0 + delta)))
    if tt == 0.0:
        raise ArcError("degenerate inner arc of zero duration")
    ep_t, em_t = math.exp(tt), math.exp(-tt)
    den = ep_t - em_t
    A = (w1 - w0 * em_t) / den
    B = (w0 * ep_t - w1) / den
    ident = ep + 2.0 * _dot(A, B)
    if abs(ident) > 1e-10 * max(1.0, abs(A) * abs(B)):
        raise ArcError(f"Levi-Civita energy identity violated by {ident:.3e}")

    base = LeviCivitaPath(A, B, E, params.mu)
    T = float(base.time(tt))
    tau_c, wmin = base.min_w(0.0, tt)
    collision = 0.0 < tau_c < tt and wmin < 1e-12 * max(1.0, abs(w0))
    u0 = base.velocity(0.0)
    u1 = base.velocity(tt)
    return InnerArc(
        A, B, E, params.mu,
        p0=p0, p1=p1, w0=w0, w1=w1, Ttilde=tt, T=T, u0=u0, u1=u1,
        collision=bool(collision), homotopy=homotopy, xi1=float(xi1), xi2=float(xi2),
    )


def solve_inner_arc_params(curve, params: BilliardParams, xi1: float, xi2: float, homotopy: str = "TnT") -> InnerArc:
    """:func:`solve_inner_arc` between two boundary parameters."""
    return solve_inner_arc(params, curve.point(xi1), curve.point(xi2), homotopy, xi1=xi1, xi2=xi2)


def propagate_inner(params: BilliardParams, z0, v0, tol: float = 1e-9) -> LeviCivitaPath:
    """Regularized Kepler flow from ``(z0, v0)`` on the inner energy shell.

    The returned path starts at regularized time 0 and passes smoothly
    through collisions, which reflect the motion back along the same ray.
    """
    z0 = np.asarray(z0, dtype=float)
    v0 = np.asarray(v0, dtype=float)
    if math.hypot(*z0) < 1e-14:
        raise ZeroEndpointError("cannot start at the origin")
    res = 0.5 * float(v0 @ v0) - v_inner(params, z0)
    if abs(res) > tol * max(1.0, v_inner(params, z0)):
        raise EnergyMismatchError(f"inner energy residual {res:.3e}")
    E = params.inner_energy
    c = math.sqrt(2.0 / E)
    w0 = cmath.sqrt(complex(z0[0], z0[1]))
    wt0 = 0.5 * c * complex(v0[0], v0[1]) * w0.conjugate()
    return LeviCivitaPath(0.5 * (w0 + wt0), 0.5 * (w0 - wt0), E, params.mu)


# ---------------------------------------------------------------------------
# export


def arc_rows(arc, n: int = 200, t_offset: float = 0.0) -> list[tuple]:
    """Rows ``(s, x, y, vx, vy, regime)`` sampled along an arc."""
    if isinstance(arc, InnerArc):
        # an even grid in regularized time never lands on a mid-arc collision
        s, z, v = arc.sample_tau(n + (n % 2))
    else:
        s, z, v = arc.sample(n)
    return [
        (float(t_offset + si), float(zi[0]), float(zi[1]), float(vi[0]), float(vi[1]), arc.regime)
        for si, zi, vi in zip(s, z, v)
    ]
