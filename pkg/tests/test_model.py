import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from refrabill.geometry import CurveSpec, build_boundary
from refrabill.model import (
    BilliardParams,
    CollisionSingularityError,
    ParamsError,
    alpha_crit,
    check_pairing,
    v_inner,
    v_outer,
)


def test_defaults_and_validation():
    p = BilliardParams()
    assert (p.omega2, p.mu, p.calE) == (1.0, 1.0, 2.0)
    for bad in [dict(omega2=0.0), dict(mu=-1.0), dict(calE=float("nan")), dict(h=0.0), dict(h=float("inf"))]:
        with pytest.raises(ParamsError):
            BilliardParams(**bad)
    assert p.with_h(5.0).h == 5.0 and p.h == 100.0


def test_outer_potential_values():
    p = BilliardParams()
    assert v_outer(p, (0.0, 0.0)) == p.calE
    assert abs(v_outer(p, (p.hill_radius, 0.0))) < 1e-15
    assert v_outer(p, (1.0, 1.0)) == 1.0


def test_inner_potential_values():
    p = BilliardParams(mu=2.0, calE=1.0, h=3.0)
    assert v_inner(p, (1.0, 0.0)) == 6.0
    far = v_inner(p, (1e9, 0.0))
    assert abs(far - 4.0) / 4.0 < 1e-8
    with pytest.raises(CollisionSingularityError):
        v_inner(p, (0.0, 1e-15))


def test_inner_exceeds_outer_on_boundary():
    curve = build_boundary(CurveSpec.ellipse(1.5, 1.0))
    p = BilliardParams(h=0.01)
    for xi in np.linspace(0, curve.length, 50):
        z = curve.point(xi)
        gap = v_inner(p, z) - v_outer(p, z)
        assert gap > p.h
        assert abs(gap - (p.h + p.mu / np.linalg.norm(z) + 0.5 * (z @ z))) < 1e-12


def test_alpha_crit_examples():
    curve = build_boundary(CurveSpec.ellipse(1.5, 1.0))
    p = BilliardParams(h=10.0)
    xi = curve.length / 4  # |gamma| = 1 at the minor vertex
    assert abs(alpha_crit(p, curve, xi) - math.asin(math.sqrt(1.5 / 13.0))) < 1e-12
    # V_E = 1 and V_I = 4 at |z| = sqrt(2): calE = 2, h + mu/|z| = 3
    circ = build_boundary(CurveSpec.ellipse(math.sqrt(2), math.sqrt(2)))
    q = BilliardParams(mu=math.sqrt(2), h=1.0)
    assert abs(alpha_crit(q, circ, 0.3) - math.pi / 6) < 1e-12


def test_alpha_crit_decreases_with_h():
    curve = build_boundary(CurveSpec.ellipse(1.5, 1.0))
    vals = [alpha_crit(BilliardParams(h=h), curve, 0.7) for h in np.geomspace(0.1, 1e6, 15)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert 0 < vals[-1] < 2e-3


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 1e4), st.floats(0.0, 1.0))
def test_alpha_crit_in_open_quarter(h, u):
    curve = build_boundary(CurveSpec.ellipse(1.5, 1.0))
    a = alpha_crit(BilliardParams(h=h), curve, u * curve.length)
    assert 0 < a < math.pi / 2


def test_pairing():
    p = BilliardParams()
    check_pairing(p, build_boundary(CurveSpec.ellipse(1.5, 1.0)))
    with pytest.raises(ParamsError):
        check_pairing(p, build_boundary(CurveSpec.ellipse(2.0, 1.0)))
    with pytest.raises(ParamsError):
        check_pairing(p, build_boundary(CurveSpec.ellipse(2.5, 1.0)))
