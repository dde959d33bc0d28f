"""Boundary curves parametrized by arc length.

Two analytic families are supported:

* ``ellipse``: ``(cx + a cos t, cy + b sin t)``
* ``polar_fourier``: ``c + r(t) (cos t, sin t)`` with
  ``r(t) = c0 + sum_k (cos_k cos kt + sin_k sin kt)``

Both are traversed counter-clockwise, so the outward normal is the tangent
rotated clockwise. All derivatives are analytic in the native parameter and
converted to arc length through a Gauss-Legendre table.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

TWO_PI = 2.0 * math.pi

ANTIPODAL_TOL = 1e-9
DEGENERACY_TOL = 1e-8

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_GL_X = tuple(float(x) for x in _GL_NODES)
_GL_W = tuple(float(w) for w in _GL_WEIGHTS)


class GeometryError(ValueError):
    """Invalid or unsupported curve description."""


class OriginOutsideError(GeometryError):
    """The origin does not lie strictly inside the curve."""


class NonPositiveRadiusError(GeometryError):
    """A polar radius is zero or negative somewhere."""


class SelfIntersectionError(GeometryError):
    """The curve description does not give a simple closed curve."""


class PlateauWarning(UserWarning):
    """The radius is constant on an interval, central configurations are not isolated."""


# ---------------------------------------------------------------------------
# curve families in their native parameter


@dataclass(frozen=True)
class CurveSpec:
    """Analytic curve descriptor.

    Attributes:
        family: ``"ellipse"`` or ``"polar_fourier"``.
        a, b: ellipse semi-axes along x and y.
        c0: constant term of the polar radius.
        cos, sin: harmonic coefficients ``c_k``, ``s_k`` for ``k = 1..K``.
        center: translation applied to the whole curve.
    """

    family: str = "ellipse"
    a: float = 1.5
    b: float = 1.0
    c0: float = 1.0
    cos: tuple[float, ...] = ()
    sin: tuple[float, ...] = ()
    center: tuple[float, float] = (0.0, 0.0)

    @staticmethod
    def ellipse(a: float, b: float, center: Sequence[float] = (0.0, 0.0)) -> "CurveSpec":
        return CurveSpec("ellipse", a=float(a), b=float(b), center=(float(center[0]), float(center[1])))

    @staticmethod
    def polar_fourier(
        c0: float,
        cos: Sequence[float] = (),
        sin: Sequence[float] = (),
        center: Sequence[float] = (0.0, 0.0),
    ) -> "CurveSpec":
        return CurveSpec(
            "polar_fourier",
            c0=float(c0),
            cos=tuple(float(c) for c in cos),
            sin=tuple(float(s) for s in sin),
            center=(float(center[0]), float(center[1])),
        )

    def to_dict(self) -> dict:
        if self.family == "ellipse":
            return {"family": "ellipse", "a": self.a, "b": self.b, "center": list(self.center)}
        return {
            "family": "polar_fourier",
            "c0": self.c0,
            "cos": list(self.cos),
            "sin": list(self.sin),
            "center": list(self.center),
        }


class _Ellipse:
    def __init__(self, spec: CurveSpec):
        if not (spec.a > 0 and spec.b > 0):
            raise SelfIntersectionError(f"ellipse semi-axes must be positive, got a={spec.a}, b={spec.b}")
        self.a, self.b = spec.a, spec.b
        self.cx, self.cy = spec.center

    def derivs(self, t: float):
        c, s = math.cos(t), math.sin(t)
        a, b = self.a, self.b
        return (self.cx + a * c, self.cy + b * s), (-a * s, b * c), (-a * c, -b * s)

    def speed(self, t: float) -> float:
        return math.hypot(self.a * math.sin(t), self.b * math.cos(t))

    def speed_v(self, t: np.ndarray) -> np.ndarray:
        return np.hypot(self.a * np.sin(t), self.b * np.cos(t))

    def derivs_v(self, t: np.ndarray):
        c, s = np.cos(t), np.sin(t)
        a, b = self.a, self.b
        p = np.stack([self.cx + a * c, self.cy + b * s], axis=-1)
        d1 = np.stack([-a * s, b * c], axis=-1)
        d2 = np.stack([-a * c, -b * s], axis=-1)
        return p, d1, d2

    def implicit(self, x: float, y: float) -> float:
        u, v = (x - self.cx) / self.a, (y - self.cy) / self.b
        return u * u + v * v - 1.0

    def implicit_v(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        u, v = (x - self.cx) / self.a, (y - self.cy) / self.b
        return u * u + v * v - 1.0

    def native_angle(self, x: float, y: float) -> float:
        return math.atan2((y - self.cy) / self.b, (x - self.cx) / self.a) % TWO_PI


class _PolarFourier:
    def __init__(self, spec: CurveSpec):
        k = max(len(spec.cos), len(spec.sin))
        self.c0 = spec.c0
        self.ck = np.zeros(k)
        self.sk = np.zeros(k)
        self.ck[: len(spec.cos)] = spec.cos
        self.sk[: len(spec.sin)] = spec.sin
        self.kk = np.arange(1, k + 1, dtype=float)
        self.terms = [(float(i), float(c), float(s)) for i, c, s in zip(self.kk, self.ck, self.sk) if c or s]
        self.cx, self.cy = spec.center
        grid = np.linspace(0.0, TWO_PI, 8192, endpoint=False)
        if np.min(self.radius_v(grid)[0]) <= 0.0:
            raise NonPositiveRadiusError("polar radius must stay positive")

    def radius(self, t: float):
        r, r1, r2 = self.c0, 0.0, 0.0
        for k, c, s in self.terms:
            ck, sk = math.cos(k * t), math.sin(k * t)
            r += c * ck + s * sk
            r1 += k * (-c * sk + s * ck)
            r2 -= k * k * (c * ck + s * sk)
        return r, r1, r2

    def radius_v(self, t: np.ndarray):
        t = np.asarray(t, dtype=float)
        if not self.terms:
            z = np.zeros_like(t)
            return z + self.c0, z, z
        kt = np.multiply.outer(t, self.kk)
        ck, sk = np.cos(kt), np.sin(kt)
        r = self.c0 + ck @ self.ck + sk @ self.sk
        r1 = (-sk * self.kk) @ self.ck + (ck * self.kk) @ self.sk
        r2 = -((ck * self.kk**2) @ self.ck + (sk * self.kk**2) @ self.sk)
        return r, r1, r2

    def derivs(self, t: float):
        r, r1, r2 = self.radius(t)
        c, s = math.cos(t), math.sin(t)
        p = (self.cx + r * c, self.cy + r * s)
        d1 = (r1 * c - r * s, r1 * s + r * c)
        d2 = (r2 * c - 2 * r1 * s - r * c, r2 * s + 2 * r1 * c - r * s)
        return p, d1, d2

    def speed(self, t: float) -> float:
        r, r1, _ = self.radius(t)
        return math.hypot(r, r1)

    def speed_v(self, t: np.ndarray) -> np.ndarray:
        r, r1, _ = self.radius_v(t)
        return np.hypot(r, r1)

    def derivs_v(self, t: np.ndarray):
        r, r1, r2 = self.radius_v(t)
        c, s = np.cos(t), np.sin(t)
        p = np.stack([self.cx + r * c, self.cy + r * s], axis=-1)
        d1 = np.stack([r1 * c - r * s, r1 * s + r * c], axis=-1)
        d2 = np.stack([r2 * c - 2 * r1 * s - r * c, r2 * s + 2 * r1 * c - r * s], axis=-1)
        return p, d1, d2

    def implicit(self, x: float, y: float) -> float:
        dx, dy = x - self.cx, y - self.cy
        return math.hypot(dx, dy) - self.radius(math.atan2(dy, dx))[0]

    def implicit_v(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        dx, dy = x - self.cx, y - self.cy
        return np.hypot(dx, dy) - self.radius_v(np.arctan2(dy, dx))[0]

    def native_angle(self, x: float, y: float) -> float:
        return math.atan2(y - self.cy, x - self.cx) % TWO_PI


# ---------------------------------------------------------------------------
# arc-length parametrized curve


@dataclass(frozen=True)
class Frame:
    point: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    curvature: float


@dataclass(frozen=True)
class CentralConfiguration:
    """Critical point of the distance from the origin along the boundary.

    Attributes:
        xi_bar: arc-length parameter of the critical point.
        kind: ``strict_min``, ``strict_max`` or ``degenerate``.
        second_derivative: second arc-length derivative of the radius.
        lsc_ok: the origin ray through the point meets the curve once.
        interval: for a plateau, the parameter range where the radius is flat.
    """

    xi_bar: float
    kind: str
    second_derivative: float
    lsc_ok: bool
    radius: float = float("nan")
    interval: tuple[float, float] | None = None


@dataclass(frozen=True)
class LscReport:
    crossings: int
    tangential: bool

    @property
    def ok(self) -> bool:
        return self.crossings == 1 and not self.tangential


class BoundaryCurve:
    """Closed curve with arc-length parameter ``xi`` in ``[0, L)``.

    The parameter origin ``xi = 0`` is the native parameter origin (for a
    centred ellipse, the positive end of the x semi-axis).

    Args:
        spec: analytic family descriptor.
        panels: number of Gauss-Legendre panels for the arc-length table.
    """

    def __init__(self, spec: CurveSpec, panels: int = 512):
        self.spec = spec
        if spec.family == "ellipse":
            self._fam = _Ellipse(spec)
        elif spec.family == "polar_fourier":
            self._fam = _PolarFourier(spec)
        else:
            raise GeometryError(f"unknown curve family {spec.family!r}")
        if not self._fam.implicit(0.0, 0.0) < 0.0:
            raise OriginOutsideError("origin must lie strictly inside the curve")

        self._edges = np.linspace(0.0, TWO_PI, panels + 1)
        half = 0.5 * (self._edges[1] - self._edges[0])
        mids = 0.5 * (self._edges[:-1] + self._edges[1:])
        nodes = mids[:, None] + half * _GL_NODES[None, :]
        panel_len = half * (self._fam.speed_v(nodes) @ _GL_WEIGHTS)
        self._s_edges = np.concatenate([[0.0], np.cumsum(panel_len)])
        self.length = float(self._s_edges[-1])
        self._dtheta = 2.0 * half
        self._s_edges_list = self._s_edges.tolist()
        self._max_radius = self._compute_max_radius()

    # -- native <-> arc length ------------------------------------------------

    @property
    def L(self) -> float:  # noqa: N802 - conventional symbol for perimeter
        return self.length

    def _s_of_theta(self, t: float) -> float:
        k = min(int(t / self._dtheta), len(self._s_edges_list) - 2)
        t0 = self._edges[k]
        half = 0.5 * (t - t0)
        if half == 0.0:
            return self._s_edges_list[k]
        mid = t0 + half
        sp = self._fam.speed
        acc = 0.0
        for x, w in zip(_GL_X, _GL_W):
            acc += w * sp(mid + half * x)
        return self._s_edges_list[k] + half * acc

    def theta_of_xi(self, xi: float) -> float:
        """Native parameter of arc length ``xi`` (wrapped), accurate to ~1e-14."""
        xi = xi % self.length
        k = int(np.searchsorted(self._s_edges, xi, side="right")) - 1
        k = min(max(k, 0), len(self._s_edges_list) - 2)
        s0, s1 = self._s_edges_list[k], self._s_edges_list[k + 1]
        lo, hi = self._edges[k], self._edges[k + 1]
        t = lo + (xi - s0) / (s1 - s0) * (hi - lo)
        sp = self._fam.speed
        for _ in range(30):
            f = self._s_of_theta(t) - xi
            if f > 0:
                hi = t
            else:
                lo = t
            step = f / sp(t)
            t_new = t - step
            if not lo <= t_new <= hi:
                t_new = 0.5 * (lo + hi)
            if abs(t_new - t) < 1e-15 or hi - lo < 1e-15:
                t = t_new
                break
            t = t_new
        return t

    def xi_of_theta(self, t: float) -> float:
        return self._s_of_theta(t % TWO_PI) % self.length

    def theta_of_xi_v(self, xi: np.ndarray) -> np.ndarray:
        return np.array([self.theta_of_xi(float(x)) for x in np.ravel(xi)]).reshape(np.shape(xi))

    # -- pointwise geometry ---------------------------------------------------

    def point(self, xi: float) -> np.ndarray:
        p, _, _ = self._fam.derivs(self.theta_of_xi(xi))
        return np.array(p)

    def frame(self, xi: float) -> Frame:
        """Point, unit tangent, outward unit normal and signed curvature at ``xi``."""
        p, d1, d2 = self._fam.derivs(self.theta_of_xi(xi))
        sp = math.hypot(d1[0], d1[1])
        tx, ty = d1[0] / sp, d1[1] / sp
        kappa = (d1[0] * d2[1] - d1[1] * d2[0]) / sp**3
        return Frame(np.array(p), np.array([tx, ty]), np.array([ty, -tx]), kappa)

    def frame_tuple(self, xi: float):
        """Fast scalar variant of :meth:`frame` returning plain tuples."""
        p, d1, _ = self._fam.derivs(self.theta_of_xi(xi))
        sp = math.hypot(d1[0], d1[1])
        tx, ty = d1[0] / sp, d1[1] / sp
        return p, (tx, ty), (ty, -tx)

    def radius(self, xi: float) -> tuple[float, float, float]:
        """Return ``(r, r', r'')`` with derivatives taken in arc length."""
        p, d1, d2 = self._fam.derivs(self.theta_of_xi(xi))
        return _radius_derivs(p, d1, d2)

    def radius_v(self, xi: np.ndarray):
        t = self.theta_of_xi_v(xi)
        p, d1, d2 = self._fam.derivs_v(t)
        return _radius_derivs_v(p, d1, d2)

    def implicit(self, z) -> float:
        """Negative inside, zero on the curve, positive outside."""
        return self._fam.implicit(float(z[0]), float(z[1]))

    def implicit_v(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return self._fam.implicit_v(pts[..., 0], pts[..., 1])

    def contains(self, z) -> bool:
        return self.implicit(z) < 0.0

    def param_of_point(self, z) -> float:
        """Arc-length parameter of a point on (or very near) the curve."""
        return self.xi_of_theta(self._fam.native_angle(float(z[0]), float(z[1])))

    def sample(self, n: int = 1024):
        """Points, tangents and normals at ``n`` equispaced arc-length values."""
        xi = np.linspace(0.0, self.length, n, endpoint=False)
        p, d1, _ = self._fam.derivs_v(self.theta_of_xi_v(xi))
        t = d1 / np.linalg.norm(d1, axis=-1, keepdims=True)
        nrm = np.stack([t[:, 1], -t[:, 0]], axis=-1)
        return xi, p, t, nrm

    def max_radius(self) -> float:
        """Largest distance from the origin to the curve."""
        return self._max_radius

    def _compute_max_radius(self) -> float:
        t = np.linspace(0.0, TWO_PI, 4096, endpoint=False)
        p, _, _ = self._fam.derivs_v(t)
        guess = float(t[np.argmax(np.hypot(p[:, 0], p[:, 1]))])
        d = TWO_PI / 4096
        res = minimize_scalar(
            lambda s: -math.hypot(*self._fam.derivs(s)[0]), bounds=(guess - d, guess + d), method="bounded",
            options={"xatol": 1e-12},
        )
        return max(-float(res.fun), float(np.max(np.hypot(p[:, 0], p[:, 1]))))

    def wrap(self, xi: float) -> float:
        return xi % self.length

    def signed_gap(self, xi1: float, xi2: float) -> float:
        """Shortest signed parameter difference ``xi2 - xi1`` modulo ``L``."""
        d = (xi2 - xi1) % self.length
        return d - self.length if d > 0.5 * self.length else d

    def __repr__(self) -> str:
        return f"BoundaryCurve({self.spec!r}, L={self.length:.12g})"


def _radius_derivs(p, d1, d2):
    sp = math.hypot(d1[0], d1[1])
    tx, ty = d1[0] / sp, d1[1] / sp
    kappa = (d1[0] * d2[1] - d1[1] * d2[0]) / sp**3
    r = math.hypot(p[0], p[1])
    gt = p[0] * tx + p[1] * ty
    gn = p[0] * ty - p[1] * tx
    r1 = gt / r
    r2 = (1.0 - kappa * gn - r1 * r1) / r
    return r, r1, r2


def _radius_derivs_v(p, d1, d2):
    sp = np.hypot(d1[:, 0], d1[:, 1])
    tx, ty = d1[:, 0] / sp, d1[:, 1] / sp
    kappa = (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]) / sp**3
    r = np.hypot(p[:, 0], p[:, 1])
    gt = p[:, 0] * tx + p[:, 1] * ty
    gn = p[:, 0] * ty - p[:, 1] * tx
    r1 = gt / r
    r2 = (1.0 - kappa * gn - r1 * r1) / r
    return r, r1, r2


def build_boundary(spec: CurveSpec | dict) -> BoundaryCurve:
    """Build a :class:`BoundaryCurve` from a spec or a config-style dict."""
    if isinstance(spec, dict):
        spec = spec_from_dict(spec)
    return BoundaryCurve(spec)


def spec_from_dict(d: dict) -> CurveSpec:
    d = dict(d)
    fam = d.pop("family", "ellipse")
    center = tuple(d.pop("center", (0.0, 0.0)))
    if len(center) != 2:
        raise GeometryError("center must have two components")
    if fam == "ellipse":
        allowed = {"a", "b"}
        extra = set(d) - allowed
        if extra:
            raise GeometryError(f"unknown ellipse keys: {sorted(extra)}")
        return CurveSpec.ellipse(d.get("a", 1.5), d.get("b", 1.0), center)
    if fam == "polar_fourier":
        allowed = {"c0", "cos", "sin"}
        extra = set(d) - allowed
        if extra:
            raise GeometryError(f"unknown polar_fourier keys: {sorted(extra)}")
        return CurveSpec.polar_fourier(d.get("c0", 1.0), d.get("cos", ()), d.get("sin", ()), center)
    raise GeometryError(f"unknown curve family {fam!r}")


# ---------------------------------------------------------------------------
# predicates


def frame(curve: BoundaryCurve, xi: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    f = curve.frame(xi)
    return f.point, f.tangent, f.normal


def lsc_report(curve: BoundaryCurve, xi: float, samples: int = 4096) -> LscReport:
    """Count the crossings of the origin ray through ``gamma(xi)`` with the curve."""
    u = curve.point(xi)
    u = u / np.linalg.norm(u)
    fam = curve._fam
    t = (np.arange(samples) + 0.37) * (TWO_PI / samples)
    p, d1, _ = fam.derivs_v(t)
    cross = u[0] * p[:, 1] - u[1] * p[:, 0]
    ahead = u[0] * p[:, 0] + u[1] * p[:, 1]

    def f(s: float) -> float:
        q = fam.derivs(s)[0]
        return u[0] * q[1] - u[1] * q[0]

    count, tangential = 0, False
    for k in range(samples):
        k2 = (k + 1) % samples
        c0, c1 = cross[k], cross[k2]
        if c0 == 0.0 or c0 * c1 < 0.0:
            if ahead[k] <= 0.0 and ahead[k2] <= 0.0:
                continue
            lo, hi = t[k], t[k] + TWO_PI / samples
            root = lo if c0 == 0.0 else brentq(f, lo, hi, xtol=1e-15)
            q, dq, _ = fam.derivs(root)
            if u[0] * q[0] + u[1] * q[1] <= 0.0:
                continue
            count += 1
            sin_angle = abs(u[0] * dq[1] - u[1] * dq[0]) / math.hypot(dq[0], dq[1])
            if sin_angle < 1e-9:
                tangential = True
    return LscReport(count, tangential)


def is_lsc(curve: BoundaryCurve, xi: float) -> bool:
    """True iff the origin ray through ``gamma(xi)`` meets the curve only there."""
    return lsc_report(curve, xi).ok


def _angle_between(u, v) -> float:
    return abs(math.atan2(u[0] * v[1] - u[1] * v[0], u[0] * v[0] + u[1] * v[1]))


def are_antipodal(curve: BoundaryCurve, xi1: float, xi2: float, tol: float = ANTIPODAL_TOL) -> bool:
    """True iff the origin lies on the segment joining ``gamma(xi1)`` and ``gamma(xi2)``."""
    p1, p2 = curve.point(xi1), curve.point(xi2)
    return _angle_between(p1, -p2) <= tol


def _angular_sweep(curve: BoundaryCurve, interval: tuple[float, float], samples: int = 257) -> tuple[float, float]:
    a, b = interval
    if b < a:
        b += curve.length
    xi = np.linspace(a, b, samples)
    p, _, _ = curve._fam.derivs_v(curve.theta_of_xi_v(xi % curve.length))
    ang = np.unwrap(np.arctan2(p[:, 1], p[:, 0]))
    return float(ang.min()), float(ang.max())


def intervals_not_antipodal(
    curve: BoundaryCurve, i1: tuple[float, float], i2: tuple[float, float], tol: float = ANTIPODAL_TOL
) -> bool:
    """True iff no point of ``i1`` is antipodal to a point of ``i2``.

    Compares the polar-angle range swept by the curve over ``i1`` with the
    range swept over ``i2`` shifted by pi, modulo ``2 pi``.
    """
    lo1, hi1 = _angular_sweep(curve, i1)
    lo2, hi2 = _angular_sweep(curve, i2)
    lo2, hi2 = lo2 + math.pi, hi2 + math.pi
    if hi1 - lo1 + hi2 - lo2 >= TWO_PI - 2 * tol:
        return False
    # shift the second range so that its start lies in [lo1, lo1 + 2 pi)
    k = math.floor((lo2 - lo1) / TWO_PI)
    lo2 -= k * TWO_PI
    hi2 -= k * TWO_PI
    overlap = lo2 <= hi1 + tol or hi2 >= lo1 + TWO_PI - tol
    return not overlap


def find_central_configurations(curve: BoundaryCurve, samples: int = 2048) -> list[CentralConfiguration]:
    """Locate and classify the critical points of the distance to the origin.

    Returns a single ``degenerate`` entry spanning ``[0, L]`` (with a
    :class:`PlateauWarning`) when the radius is constant.
    """
    L = curve.length
    xi = (np.arange(samples) + 0.37) * (L / samples)
    r, r1, _ = curve.radius_v(xi)
    if np.max(np.abs(r1)) < 1e-10:
        warnings.warn("radius is constant: degenerate plateau of central configurations", PlateauWarning, stacklevel=2)
        return [CentralConfiguration(0.0, "degenerate", 0.0, True, float(r[0]), (0.0, L))]

    def d1(s: float) -> float:
        return curve.radius(s)[1]

    out: list[CentralConfiguration] = []
    for k in range(samples):
        k2 = (k + 1) % samples
        a, b = r1[k], r1[k2]
        if a * b > 0.0:
            continue
        lo = xi[k]
        hi = xi[k2] if k2 else xi[k2] + L
        root = brentq(d1, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps) if a * b < 0.0 else (lo if a == 0.0 else hi)
        root %= L
        if L - root < 1e-13:
            root = 0.0
        rr, _, r2 = curve.radius(root)
        if abs(r2) < DEGENERACY_TOL:
            kind = "degenerate"
        else:
            kind = "strict_min" if r2 > 0 else "strict_max"
        if any(abs(curve.signed_gap(c.xi_bar, root)) < 1e-10 for c in out):
            continue
        out.append(CentralConfiguration(float(root), kind, float(r2), is_lsc(curve, root), float(rr)))
    out.sort(key=lambda c: c.xi_bar)
    return out
