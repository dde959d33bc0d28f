import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import ellipe

from refrabill.geometry import (
    CurveSpec,
    GeometryError,
    NonPositiveRadiusError,
    OriginOutsideError,
    PlateauWarning,
    are_antipodal,
    build_boundary,
    find_central_configurations,
    frame,
    intervals_not_antipodal,
    is_lsc,
    lsc_report,
    spec_from_dict,
)


@pytest.fixture(scope="module")
def ell21():
    return build_boundary(CurveSpec.ellipse(2.0, 1.0))


@pytest.fixture(scope="module")
def circle():
    return build_boundary(CurveSpec.ellipse(1.0, 1.0))


@pytest.fixture(scope="module")
def trefoil():
    return build_boundary(CurveSpec.polar_fourier(1.0, [0.0, 0.0, 0.2]))


def test_circle_length(circle):
    assert abs(circle.length - 2 * math.pi) < 1e-10


def test_ellipse_length_matches_elliptic_integral(ell21):
    # 4 a E(e) with m = e^2 = 1 - b^2/a^2, and an independent adaptive quadrature
    assert abs(ell21.length - 4 * 2.0 * ellipe(1 - 0.25)) < 1e-10
    speed = lambda t: math.hypot(2 * math.sin(t), math.cos(t))
    assert abs(ell21.length - quad(speed, 0, 2 * math.pi, epsabs=1e-13, limit=200)[0]) < 1e-10


def test_polar_circle_matches_ellipse_circle(circle):
    pc = build_boundary(CurveSpec.polar_fourier(1.0))
    for xi in np.linspace(0, circle.length, 17):
        for a, b in zip(frame(pc, xi), frame(circle, xi)):
            assert np.allclose(a, b, atol=1e-9)


def test_closed_and_unit_speed(ell21):
    L = ell21.length
    assert np.allclose(ell21.point(0.0), ell21.point(L), atol=1e-10)
    assert np.allclose(ell21.frame(0.0).tangent, ell21.frame(L).tangent, atol=1e-10)
    xs = np.linspace(0, L, 400)
    h = 1e-6
    for x in xs[::20]:
        d = (ell21.point(x + h) - ell21.point(x - h)) / (2 * h)
        assert abs(np.linalg.norm(d) - 1.0) < 1e-8


def test_circle_frame(circle):
    p, t, n = frame(circle, 0.0)
    assert np.allclose(p, [1, 0], atol=1e-12)
    assert np.allclose(t, [0, 1], atol=1e-12)
    assert np.allclose(n, [1, 0], atol=1e-12)


def test_ellipse_vertex_normal(ell21):
    p, _, n = frame(ell21, 0.0)
    assert np.allclose(p, [2, 0], atol=1e-12)
    assert np.allclose(n, [1, 0], atol=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0))
def test_normal_is_implicit_gradient(u):
    curve = build_boundary(CurveSpec.ellipse(2.0, 1.0))
    p, t, n = frame(curve, u * curve.length)
    g = np.array([p[0] / 2.0, 2 * p[1]])
    assert np.allclose(n, g / np.linalg.norm(g), atol=1e-10)
    assert abs(p[0] ** 2 / 4 + p[1] ** 2 - 1) < 1e-12


@settings(max_examples=300, deadline=None)
@given(st.floats(0.0, 1.0), st.sampled_from(["ellipse", "trefoil"]))
def test_frame_orthonormal_and_outward(u, which):
    spec = CurveSpec.ellipse(2.0, 1.0) if which == "ellipse" else CurveSpec.polar_fourier(1.0, [0, 0, 0.2])
    curve = build_boundary(spec)
    f = curve.frame(u * curve.length)
    assert abs(f.tangent @ f.normal) < 1e-10
    assert abs(np.linalg.norm(f.tangent) - 1) < 1e-10
    assert abs(np.linalg.norm(f.normal) - 1) < 1e-10
    assert not curve.contains(f.point + 1e-6 * f.normal)
    assert curve.contains(f.point - 1e-6 * f.normal)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.0, 1.0))
def test_radius_derivative_is_cosine(u):
    curve = build_boundary(CurveSpec.polar_fourier(1.0, [0.1, 0.0, 0.2], [0.0, 0.05]))
    xi = u * curve.length
    r, r1, r2 = curve.radius(xi)
    p, t, _ = frame(curve, xi)
    assert abs(r1 - p @ t / np.linalg.norm(p)) < 1e-12
    h = 1e-5
    fd = (curve.radius(xi + h)[0] - curve.radius(xi - h)[0]) / (2 * h)
    assert abs(fd - r1) < 1e-6
    fd2 = (curve.radius(xi + h)[1] - curve.radius(xi - h)[1]) / (2 * h)
    assert abs(fd2 - r2) < 1e-5


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 1.0))
def test_parameter_round_trip(u):
    curve = build_boundary(CurveSpec.ellipse(1.5, 1.0))
    xi = u * curve.length * 0.999999
    assert abs(curve.param_of_point(curve.point(xi)) - xi) < 1e-9


def test_construction_errors():
    with pytest.raises(OriginOutsideError):
        build_boundary(CurveSpec.ellipse(1.0, 1.0, center=(3.0, 0.0)))
    with pytest.raises(NonPositiveRadiusError):
        build_boundary(CurveSpec.polar_fourier(1.0, [1.5]))
    with pytest.raises(GeometryError):
        spec_from_dict({"family": "ellipse", "a": 1, "b": 1, "radius": 3})
    with pytest.raises(GeometryError):
        spec_from_dict({"family": "spline"})


def test_lsc_convex_and_star_shaped(trefoil):
    curve = build_boundary(CurveSpec.ellipse(1.5, 1.0))
    assert all(is_lsc(curve, x) for x in np.linspace(0, curve.length, 25))
    assert all(is_lsc(trefoil, x) for x in np.linspace(0, trefoil.length, 25))


def _ray_crossings(curve, u, rmax=5.0, n=20000):
    """Oracle: sign changes of the implicit function along the ray."""
    lam = np.linspace(1e-6, rmax, n)
    vals = curve.implicit_v(lam[:, None] * u[None, :])
    return int(np.count_nonzero(np.sign(vals[1:]) != np.sign(vals[:-1])))


def test_lsc_detects_double_crossing():
    # peanut shifted off the origin: rays through the waist cross twice
    curve = build_boundary(CurveSpec.polar_fourier(1.0, [0.0, 0.6], center=(1.2, 0.0)))
    found_false = False
    for xi in np.linspace(0, curve.length, 60, endpoint=False):
        p = curve.point(xi)
        u = p / np.linalg.norm(p)
        oracle = _ray_crossings(curve, u) == 1
        assert lsc_report(curve, xi).ok == oracle
        found_false |= not oracle
    assert found_false


def test_antipodality(circle, ell21):
    assert are_antipodal(circle, 0.3, 0.3 + circle.length / 2)
    assert not are_antipodal(circle, 0.3, 0.3)
    q = ell21.length / 4
    assert not are_antipodal(ell21, 0.0, q)
    for a, b in [(0.1, 2.0), (1.0, 1.0 + ell21.length / 2)]:
        assert are_antipodal(ell21, a, b) == are_antipodal(ell21, b, a)


def test_intervals_not_antipodal(ell21):
    L = ell21.length
    w = 0.05
    at = lambda c: (c - w, c + w)
    assert not intervals_not_antipodal(ell21, at(0.0), at(L / 2))
    assert intervals_not_antipodal(ell21, at(0.0), at(L / 4))
    assert intervals_not_antipodal(ell21, at(0.0), at(0.0))


def test_intervals_consistent_with_pointwise(ell21):
    L = ell21.length
    rng = np.random.default_rng(3)
    for _ in range(40):
        c1, c2 = rng.uniform(0, L, 2)
        i1, i2 = (c1 - 0.2, c1 + 0.2), (c2 - 0.2, c2 + 0.2)
        res = intervals_not_antipodal(ell21, i1, i2)
        # pointwise sampling oracle: minimal angular distance between p1 and -p2
        s1 = np.linspace(*i1, 81) % L
        s2 = np.linspace(*i2, 81) % L
        a1 = np.array([math.atan2(*ell21.point(x)[::-1]) for x in s1])
        a2 = np.array([math.atan2(*(-ell21.point(x))[::-1]) for x in s2])
        d = np.abs((a1[:, None] - a2[None, :] + math.pi) % (2 * math.pi) - math.pi).min()
        if d > 1e-2:
            assert res
        if d < 1e-6:
            assert not res


def test_central_configurations_ellipse(ell21):
    ccs = find_central_configurations(ell21)
    assert len(ccs) == 4
    L = ell21.length
    for cc, xi, kind in zip(ccs, [0, L / 4, L / 2, 3 * L / 4], ["strict_max", "strict_min"] * 2):
        assert abs(cc.xi_bar - xi) < 1e-9
        assert cc.kind == kind
        assert cc.lsc_ok
        r, r1, r2 = ell21.radius(cc.xi_bar)
        assert abs(r1) < 1e-10
        assert (r2 > 0) == (kind == "strict_min")
    # second arc-length derivative of the radius at the vertices: (1 - kappa r)/r
    assert abs(ccs[0].second_derivative - (1 - 2.0 * 2.0) / 2.0) < 1e-8
    assert abs(ccs[1].second_derivative - (1 - 0.25 * 1.0) / 1.0) < 1e-8


def test_circle_plateau(circle):
    with pytest.warns(PlateauWarning):
        ccs = find_central_configurations(circle)
    assert len(ccs) == 1 and ccs[0].kind == "degenerate"
    assert ccs[0].interval == (0.0, circle.length)


def test_trefoil_configurations(trefoil):
    ccs = find_central_configurations(trefoil)
    assert len(ccs) == 6
    kinds = [c.kind for c in ccs]
    assert all(k1 != k2 for k1, k2 in zip(kinds, kinds[1:] + kinds[:1]))
    # analytic oracle: r'(theta) = -0.6 sin(3 theta) = 0 at theta = k pi/3
    thetas = sorted(math.atan2(*trefoil.point(c.xi_bar)[::-1]) % (2 * math.pi) for c in ccs)
    assert np.allclose(thetas, np.arange(6) * math.pi / 3, atol=1e-9)
    maxima = [c for c in ccs if c.kind == "strict_max"]
    assert not any(are_antipodal(trefoil, a.xi_bar, b.xi_bar) for a in maxima for b in maxima if a is not b)


def test_max_radius_and_sample(ell21):
    assert abs(ell21.max_radius() - 2.0) < 1e-9
    xi, p, t, n = ell21.sample(64)
    assert p.shape == (64, 2) and np.allclose(np.einsum("ij,ij->i", t, n), 0.0, atol=1e-12)
    assert np.allclose(p, [ell21.point(x) for x in xi], atol=1e-12)
