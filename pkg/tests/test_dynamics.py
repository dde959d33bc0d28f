import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import H_WORK
from refrabill.dynamics import (
    CriticalAngleTrapError,
    DynamicsError,
    EnergyShellError,
    SurfaceState,
    TotalInternalReflectionError,
    WrongWindowError,
    inverse_return_map,
    refract,
    replay,
    return_map,
    state_from_angle,
    state_from_tangential,
    trace,
    validate_state,
)
from refrabill.geometry import CurveSpec, build_boundary
from refrabill.model import BilliardParams, alpha_crit, v_inner, v_outer
from refrabill.shooting import realize_fixed_ends, realize_periodic
from refrabill.words import WordWindow, build_interval_system, necklaces, word_distance

ELL = build_boundary(CurveSpec.ellipse(1.5, 1.0))
SYS = build_interval_system(ELL)
P = BilliardParams(h=H_WORK)


def _shell_velocity(params, xi, angle, pot):
    p, t, n = map(np.asarray, ELL.frame_tuple(xi))
    speed = math.sqrt(2 * pot(params, p))
    return speed * (math.sin(angle) * t + math.cos(angle) * n)


def test_refract_normal_incidence():
    xi = 0.4
    _, _, n = map(np.asarray, ELL.frame_tuple(xi))
    v = -math.sqrt(2 * v_outer(P, ELL.point(xi))) * n
    out = refract(P, ELL, v, xi, "outer_to_inner")
    assert np.allclose(out, -math.sqrt(2 * v_inner(P, ELL.point(xi))) * n, atol=1e-12)


def test_refract_sine_law():
    r = math.sqrt(2)
    circ = build_boundary(CurveSpec.ellipse(r, r))
    p = BilliardParams(mu=r, h=1.0)  # V_E = 1, V_I = 4 on this circle
    xi = 1.1
    z, t, n = map(np.asarray, circ.frame_tuple(xi))
    v = math.sqrt(2) * (math.sin(math.pi / 6) * t - math.cos(math.pi / 6) * n)
    u = refract(p, circ, v, xi, "outer_to_inner")
    angle = math.atan2(u @ t, -(u @ n))
    assert abs(angle - math.asin(0.25)) < 1e-12
    assert abs(0.5 * u @ u - 4) < 1e-12


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1), st.floats(-1.5, 1.5), st.sampled_from([1.0, 72.0, 1000.0]))
def test_refract_round_trip(u, angle, h):
    p = BilliardParams(h=h)
    xi = u * ELL.length
    v = _shell_velocity(p, xi, angle, v_outer)
    inner = refract(p, ELL, v, xi, "outer_to_inner")
    assert abs(0.5 * inner @ inner - v_inner(p, ELL.point(xi))) < 1e-9 * v_inner(p, ELL.point(xi))
    back = refract(p, ELL, inner, xi, "inner_to_outer")
    assert np.allclose(back, v, atol=1e-12 * max(1.0, np.linalg.norm(inner)))


def test_total_internal_reflection():
    xi = 0.4
    ac = alpha_crit(P, ELL, xi)
    ok = _shell_velocity(P, xi, 0.99 * ac, v_inner)
    refract(P, ELL, ok, xi, "inner_to_outer")
    bad = _shell_velocity(P, xi, 1.01 * ac, v_inner)
    with pytest.raises(TotalInternalReflectionError):
        refract(P, ELL, bad, xi, "inner_to_outer")
    with pytest.raises(EnergyShellError):
        refract(P, ELL, ok, xi, "outer_to_inner")


def test_state_validation():
    s = state_from_angle(ELL, P, 0.1, 0.2)
    validate_state(ELL, P, s)
    with pytest.raises(EnergyShellError):
        validate_state(ELL, P, SurfaceState(0.1, 2 * s.v, "outward"))
    with pytest.raises(EnergyShellError):
        validate_state(ELL, P, SurfaceState(0.1, s.v, "inward"))
    with pytest.raises(EnergyShellError):
        state_from_tangential(ELL, P, 0.1, 10.0)


def test_homothetic_fixed_points():
    for sym in SYS.symbols:
        s = state_from_angle(ELL, P, SYS.center(sym), 0.0)
        out, rec = return_map(ELL, P, SYS, s)
        assert abs(ELL.signed_gap(out.xi, s.xi)) < 1e-8
        assert np.allclose(out.v, s.v, atol=1e-8)
        assert rec.collision
        assert rec.intervals == (sym, sym, sym)


def test_realized_orbit_is_reproduced_and_coded():
    conc = realize_periodic(SYS, P, (1, 2))
    xi0, v0 = conc.initial_state()
    tr = trace(ELL, P, SYS, SurfaceState(xi0, v0, "outward"), 4)
    assert tr.forward_error is None
    assert tr.window.symbols == (1, 2, 1, 2, 1)
    per = [x % ELL.length for x in conc.xi]
    for k, x in enumerate(tr.crossings[:4]):
        assert abs(ELL.signed_gap(x, per[k])) < 1e-6
    rep = replay(ELL, P, conc)
    assert rep.max_transit_deviation < 1e-9


def test_transit_energy_bookkeeping_and_snell():
    conc = realize_periodic(SYS, P, (1, 2, 2))
    xi0, v0 = conc.initial_state()
    tr = trace(ELL, P, SYS, SurfaceState(xi0, v0, "outward"), 3)
    for rec in tr.records:
        for xi, vo, vi in [(rec.xi1, rec.v1, rec.v1p), (rec.exit.xi, rec.v2, rec.v2p)]:
            z, t, _ = map(np.asarray, ELL.frame_tuple(xi))
            assert abs(0.5 * vo @ vo - v_outer(P, z)) < 1e-9 * max(1, v_outer(P, z))
            assert abs(0.5 * vi @ vi - v_inner(P, z)) < 1e-9 * v_inner(P, z)
            jump = 0.5 * vi @ vi - 0.5 * vo @ vo
            assert abs(jump - (P.h + P.mu / np.linalg.norm(z) + 0.5 * P.omega2 * z @ z)) < 1e-9 * v_inner(P, z)
            # tangential Jacobi momentum sqrt(V) v.t/|v| is continuous
            snell = math.sqrt(v_outer(P, z)) * (vo @ t) / np.linalg.norm(vo) - math.sqrt(v_inner(P, z)) * (vi @ t) / np.linalg.norm(vi)
            assert abs(snell) < 1e-8
        taus = np.linspace(0, rec.tau2, 51)[1:-1]
        zs = rec.inner_path.position(taus)
        assert (ELL.implicit_v(zs) < 0).all()


def test_grammar_and_duration_bounds():
    # departure states of every realized necklace up to length 4, each with
    # small perturbations; every successful transit is checked
    rng = np.random.default_rng(1)
    durations, failures = [], 0
    for n in range(1, 5):
        for w in necklaces(SYS, n):
            conc = realize_periodic(SYS, P, w)
            for j in range(len(w)):
                xi, v = float(conc.xi_lifted[2 * j]), conc.arcs[2 * j].v0
                _, t, nrm = map(np.asarray, ELL.frame_tuple(xi))
                base = math.atan2(v @ t, v @ nrm)
                for k in range(7):
                    d_xi, d_ang = (0.0, 0.0) if k == 0 else rng.uniform(-1e-4, 1e-4, 2)
                    s = state_from_angle(ELL, P, xi + d_xi, base + d_ang)
                    try:
                        out, rec = return_map(ELL, P, SYS, s)
                    except DynamicsError:
                        failures += 1
                        continue
                    r, r1, r2 = rec.intervals
                    assert r == r1 and r2 in SYS.na[r]
                    durations.append((rec.s1, rec.s2))
    d = np.array(durations)
    assert len(d) >= 1000 and failures < 0.1 * len(d)
    assert d[:, 0].max() < P.period and d[:, 1].max() < 1.0


def test_time_reversal_round_trip():
    # low energy jump and a tiny offset keep the saddle expansion over 5 steps mild
    p = BilliardParams(h=3.0)
    s0 = state_from_angle(ELL, p, SYS.center(1) + 1e-9, 1e-9)
    back = trace(ELL, p, SYS, s0, 0, 5)
    assert back.backward_error is None
    fwd = trace(ELL, p, SYS, back.states[0], 5, 0)
    end = fwd.states[-1]
    assert abs(ELL.signed_gap(end.xi, s0.xi)) < 1e-7
    assert np.allclose(end.v, s0.v, atol=1e-7)


def test_inverse_is_left_inverse():
    conc = realize_periodic(SYS, P, (1, 2))
    xi0, v0 = conc.initial_state()
    s = SurfaceState(xi0, v0, "outward")
    out, _ = return_map(ELL, P, SYS, s)
    prev = inverse_return_map(ELL, P, SYS, out)
    assert abs(ELL.signed_gap(prev.xi, s.xi)) < 1e-10
    assert np.allclose(prev.v, s.v, atol=1e-10)


def test_perturbation_off_homothetic_diverges():
    c = SYS.center(1)
    s = state_from_angle(ELL, P, c + 1e-9, 0.0)
    tr = trace(ELL, P, SYS, s, 4, permissive=True)
    dist = [abs(ELL.signed_gap(st.xi, c)) for st in tr.states]
    assert all(b > a for a, b in zip(dist, dist[1:]))
    assert dist[-1] > 1e3 * dist[0] or tr.forward_error is not None


def test_wrong_window_and_trap():
    s = state_from_angle(ELL, P, ELL.length / 8, 0.0)
    with pytest.raises(WrongWindowError):
        return_map(ELL, P, SYS, s)
    p = BilliardParams(h=3.0)
    s = state_from_angle(ELL, p, SYS.center(1) + 2 * SYS.half_width, 0.1)
    with pytest.raises(WrongWindowError):
        return_map(ELL, p, SYS, s)
    out, rec = return_map(ELL, p, SYS, s, permissive=True)
    assert rec.intervals == (None, 2, 4)
    # steep departure lands far from the departure interval
    s = state_from_angle(ELL, P, SYS.center(1), 1.2)
    with pytest.raises((WrongWindowError, CriticalAngleTrapError)):
        return_map(ELL, P, SYS, s)


def test_trace_records_error_step():
    s = state_from_angle(ELL, P, SYS.center(1) + 0.9 * SYS.half_width, 0.3)
    tr = trace(ELL, P, SYS, s, 10)
    assert tr.forward_error is not None
    assert tr.forward_error.step == len(tr.records)
    d = tr.to_dict()
    assert d["forward_error"]["step"] == len(tr.records)


def test_coding_continuity_bound():
    # words agree on |k| <= 3 around position 3 and differ at k = 4
    left, right = (1, 2, 1, 2), (1, 2, 1, 2)
    w1 = left + (1, 2, 1) + (2, 1)
    w2 = left + (1, 2, 1) + (4, 1)
    c1 = realize_fixed_ends(SYS, P, w1, SYS.center(w1[0]), SYS.center(w1[-1]))
    c2 = realize_fixed_ends(SYS, P, w2, SYS.center(w2[0]), SYS.center(w2[-1]))
    codes = []
    for conc in (c1, c2):
        syms = tuple(SYS.locate(x) for x in conc.xi[::2])
        codes.append(WordWindow(syms, center=3))
    assert codes[0].symbols == w1 and codes[1].symbols == w2
    lo, _ = word_distance(codes[0], codes[1])
    bound = 2 * sum(4.0**-k for k in range(4, 60))
    assert 0 < lo <= bound
