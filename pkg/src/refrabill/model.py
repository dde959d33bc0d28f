"""Physical constants and the piecewise potential."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np


class ParamsError(ValueError):
    """Invalid physical parameters or parameter/curve pairing."""


class CollisionSingularityError(ValueError):
    """Inner potential evaluated at the attracting centre."""


@dataclass(frozen=True)
class BilliardParams:
    """Constants of the refraction billiard.

    Attributes:
        omega2: squared frequency of the outer harmonic potential.
        mu: Kepler mass parameter of the inner potential.
        calE: outer energy level.
        h: energy jump across the interface.
    """

    omega2: float = 1.0
    mu: float = 1.0
    calE: float = 2.0
    h: float = 100.0

    def __post_init__(self):
        for name in ("omega2", "mu", "calE", "h"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise ParamsError(f"{name} must be a positive finite number, got {val!r}")

    @property
    def omega(self) -> float:
        return math.sqrt(self.omega2)

    @property
    def inner_energy(self) -> float:
        """Total energy of the inner Kepler motion, ``calE + h``."""
        return self.calE + self.h

    @property
    def hill_radius(self) -> float:
        return math.sqrt(2.0 * self.calE / self.omega2)

    @property
    def period(self) -> float:
        """Period of the outer harmonic flow."""
        return 2.0 * math.pi / self.omega

    def with_h(self, h: float) -> "BilliardParams":
        return replace(self, h=float(h))

    def to_dict(self) -> dict:
        return asdict(self)


def v_outer(params: BilliardParams, z) -> float:
    """Outer potential ``calE - omega2/2 |z|^2``."""
    return params.calE - 0.5 * params.omega2 * (z[0] * z[0] + z[1] * z[1])


def v_inner(params: BilliardParams, z) -> float:
    """Inner potential ``calE + h + mu/|z|``."""
    r = math.hypot(z[0], z[1])
    if r < 1e-14:
        raise CollisionSingularityError("inner potential is singular at the origin")
    return params.calE + params.h + params.mu / r


def alpha_crit(params: BilliardParams, curve, xi: float) -> float:
    """Largest inner incidence angle that still transmits to the outside."""
    p = curve.point(xi)
    return math.asin(math.sqrt(v_outer(params, p) / v_inner(params, p)))


def check_pairing(params: BilliardParams, curve) -> None:
    """Raise if the curve leaves the Hill disk of the outer potential."""
    rmax = curve.max_radius()
    if not rmax < params.hill_radius:
        raise ParamsError(f"curve reaches radius {rmax:.6g}, not inside the Hill radius {params.hill_radius:.6g}")


def outer_energy_residual(params: BilliardParams, z, v) -> float:
    return 0.5 * float(np.dot(v, v)) - v_outer(params, z)


def inner_energy_residual(params: BilliardParams, z, v) -> float:
    return 0.5 * float(np.dot(v, v)) - v_inner(params, z)
