import math

import numpy as np
import pytest
from scipy.optimize import brentq

from conftest import H_WORK
from refrabill.arcs import InnerArc, OuterArc
from refrabill.geometry import CurveSpec, build_boundary
from refrabill.jacobi import s_inner, s_outer, total_length
from refrabill.model import BilliardParams
from refrabill.shooting import (
    InadmissibleWordError,
    RealizationError,
    UniquenessPreconditionError,
    miranda_check,
    multi_start,
    realize_fixed_ends,
    realize_periodic,
    uniqueness_check,
    word_problem,
)
from refrabill.words import build_interval_system, is_symmetric, necklaces, primitive_root

ELL = build_boundary(CurveSpec.ellipse(1.5, 1.0))
SYS = build_interval_system(ELL)
L = ELL.length
P = BilliardParams(h=H_WORK)


def _check_concatenation(conc):
    arcs = conc.arcs
    assert all(isinstance(a, OuterArc if k % 2 == 0 else InnerArc) for k, a in enumerate(arcs))
    ends = [a.z1 if isinstance(a, OuterArc) else a.p1 for a in arcs]
    starts = [a.z0 if isinstance(a, OuterArc) else a.p0 for a in arcs]
    n_join = len(arcs) if conc.mode == "periodic" else len(arcs) - 1
    for k in range(n_join):
        assert np.linalg.norm(ends[k] - starts[(k + 1) % len(arcs)]) < 1e-9
    for k, x in enumerate(conc.xi_lifted):
        a, b = SYS.interval(conc.word[k // 2])
        assert a - 1e-12 <= x <= b + 1e-12
    assert conc.max_snell < 1e-8
    assert conc.gradient_norm < 1e-8


def test_homothetic_words():
    for s in SYS.symbols:
        conc = realize_periodic(SYS, P, (s,))
        assert np.allclose(conc.xi_lifted, SYS.center(s), atol=1e-9)
        assert conc.collision == [True] and conc.radial_outer == [True]
        _check_concatenation(conc)


def test_realize_12():
    conc = realize_periodic(SYS, P, (1, 2), check=True)
    _check_concatenation(conc)
    assert conc.miranda.passed
    assert [SYS.locate(x) for x in conc.xi] == [1, 1, 2, 2]
    assert not any(conc.collision)
    assert abs(conc.period - sum(conc.outer_durations) - sum(conc.inner_durations)) < 1e-12
    assert abs(conc.partial_times[-1] - conc.period) < 1e-12


def test_symmetric_collision_word_has_two_radial_arcs():
    conc = realize_periodic(SYS, P, (1, 2, 2, 1))
    _check_concatenation(conc)
    assert conc.radial_count == 2
    assert conc.collision == [False, True, False, True]
    assert is_symmetric(conc.word).symmetric


def test_collisions_only_for_symmetric_words():
    for n in range(1, 4):
        for w in necklaces(SYS, n):
            if primitive_root(w) != w:
                continue
            conc = realize_periodic(SYS, P, w)
            _check_concatenation(conc)
            assert conc.radial_count in (0, 2)
            if any(conc.collision):
                assert is_symmetric(w).symmetric
            if not is_symmetric(w).symmetric:
                assert not any(conc.collision)


def test_inadmissible_word():
    with pytest.raises(InadmissibleWordError):
        realize_periodic(SYS, P, (1, 3))
    with pytest.raises(InadmissibleWordError):
        realize_fixed_ends(SYS, P, (1, 2), SYS.center(2), SYS.center(2))


def test_fixed_ends_one_free_variable():
    xa, xb = SYS.center(1) + 0.1, SYS.center(2) - 0.2
    conc = realize_fixed_ends(SYS, P, (1, 2), xa, xb, check=True)
    assert len(conc.xi_lifted) == 3 and conc.miranda.passed
    _check_concatenation(conc)
    # 1-D oracle: root of dW/dx along the free coordinate by Brent's method
    g = lambda x: total_length(ELL, P, (1, 2), [xa, x, xb], "fixed_ends")[1][1]
    lo, hi = SYS.interval(1)
    assert abs(brentq(g, lo, hi, xtol=1e-14) - conc.xi_lifted[1]) < 1e-9
    face = conc.miranda.faces[0]
    assert face.lower_max < 0 < face.upper_min or face.lower_min > 0 > face.upper_max
    assert np.sign(g(lo)) != np.sign(g(hi))


def test_fixed_ends_recovers_periodic_solution():
    per = realize_periodic(SYS, P, (1, 2, 2))
    xs = per.xi_lifted
    # unroll the periodic orbit into the fixed-ends word 1,2,2,1 pinned at the periodic crossings
    fixed = realize_fixed_ends(SYS, P, (1, 2, 2, 1), xs[0], xs[0])
    assert np.allclose(fixed.xi_lifted[1:6], xs[1:6], atol=1e-8)
    # the pinned ends carry no Snell constraint
    assert 0 not in fixed.snell and 6 not in fixed.snell


def test_fixed_ends_ends_need_not_satisfy_snell():
    xa, xb = SYS.center(1) + 0.3, SYS.center(2) + 0.3
    conc = realize_fixed_ends(SYS, P, (1, 2), xa, xb)
    # snell law at the departure point would need d_a of the first outer arc to vanish
    assert abs(s_outer(ELL, P, conc.xi_lifted[0], conc.xi_lifted[1]).d_a) > 1e-3


def test_low_h_fails_or_is_inconclusive():
    p = BilliardParams(h=0.01)
    rep = miranda_check(SYS, p, (1, 2), density=3, max_doublings=0)
    assert not rep.passed


def test_miranda_passes_above_threshold():
    rep = miranda_check(SYS, BilliardParams(h=2 * H_WORK / 10), (1, 2))
    assert rep.passed
    assert len(rep.faces) == 4
    d = rep.to_dict()
    assert d["passed"] and len(d["faces"]) == 4


def test_uniqueness_and_multistart():
    for w in [(1, 2), (1, 2, 2, 1), (1, 1, 2)]:
        rep = uniqueness_check(SYS, P, w)
        assert rep.passed
        sols = multi_start(SYS, P, w, seeds=10)
        xs = [s.xi_lifted for s in sols if not isinstance(s, RealizationError)]
        assert len(xs) == 10
        assert max(np.abs(x - xs[0]).max() for x in xs) < 1e-7


def test_uniqueness_refused_on_circle():
    circ = build_boundary(CurveSpec.ellipse(1.0, 1.0))
    fake = SYS.__class__(circ, SYS.intervals, tuple(c.__class__(**{**c.__dict__, "kind": "degenerate"}) for c in SYS.ccs), SYS.na, SYS.half_width)
    with pytest.raises(UniquenessPreconditionError):
        uniqueness_check(fake, P, (1, 2))


def test_box_dimensions():
    assert word_problem(SYS, P, (1, 2, 3, 2)).dim == 8
    xa, xb = SYS.center(1), SYS.center(2)
    assert word_problem(SYS, P, (1, 2, 3, 2), "fixed_ends", xa, xb).dim == 2 * 4 - 3


def test_report_serialization():
    conc = realize_periodic(SYS, P, (1, 2, 2, 1), check=True)
    d = conc.to_dict()
    assert d["word"] == [1, 2, 2, 1] and d["realized"]
    assert d["collision_flags"] == [False, True, False, True]
    assert d["miranda"]["passed"]
    rows = conc.trajectory_rows(20)
    assert sum(r[-1] for r in rows) == 8
