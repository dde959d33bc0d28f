import math
import warnings

import numpy as np
import pytest

from conftest import H1, H_WORK
from refrabill.analysis import (
    DegenerateConfigurationError,
    GeometryWarning,
    agreeing_pair,
    change_sign_check,
    containment_check,
    euclidean_change_sign,
    geometric_ratios,
    half_heteroclinic,
    heteroclinic_realize,
    monotonicity_violations,
    saddle_spectrum,
    sensitivity_probe,
    smallest_monotone_threshold,
    threshold_scan,
)
from refrabill.geometry import CurveSpec, build_boundary
from refrabill.model import BilliardParams
from refrabill.words import build_interval_system

ELL = build_boundary(CurveSpec.ellipse(1.5, 1.0))
SYS = build_interval_system(ELL)
P = BilliardParams(h=H_WORK)


@pytest.mark.parametrize("h", [10.0, 100.0, 1000.0])
def test_saddles_on_h_sweep(h):
    for k in SYS.symbols:
        rep = saddle_spectrum(ELL, BilliardParams(h=h), SYS, k)
        assert rep.classification == "saddle"
        assert rep.drift < 1e-8
        assert abs(abs(np.prod(rep.normalized_eigenvalues)) - 1.0) < 1e-6
        if h <= 100.0:
            assert rep.area_preserving


def test_saddle_expansion_grows_with_h():
    exp = [saddle_spectrum(ELL, BilliardParams(h=h), SYS, 2).expansion for h in [10.0, 100.0, 1000.0]]
    assert exp[0] < exp[1] < exp[2]


def test_saddle_refused_on_circle():
    circ = build_boundary(CurveSpec.ellipse(1.0, 1.0))
    with pytest.raises(DegenerateConfigurationError):
        saddle_spectrum(circ, P, None, 1)


def test_saddle_report_serializes():
    d = saddle_spectrum(ELL, P, SYS, 1).to_dict()
    assert d["classification"] == "saddle" and len(d["jacobian"]) == 2


def test_heteroclinic_rate_matches_saddle():
    lam = saddle_spectrum(ELL, P, SYS, 2).expansion
    tails = []
    for pad in (2, 4, 6):
        rep = heteroclinic_realize(ELL, P, SYS, 1, 2, pad)
        assert rep.concatenation.max_snell < 1e-8
        tails.append(rep.tail_distance)
    rep6 = heteroclinic_realize(ELL, P, SYS, 1, 2, 6)
    assert abs(rep6.decay_rate * lam - 1.0) < 0.2
    # two extra padding symbols shrink the tail distance by about lambda^2
    assert tails[0] > tails[1] > tails[2]
    assert abs(math.log(tails[0] / tails[1]) / (2 * math.log(lam)) - 1.0) < 0.2


def test_distinct_bridges():
    xs = [heteroclinic_realize(ELL, P, SYS, 1, 2, 3, b).concatenation.xi_lifted for b in [(1, 2, 1), (1, 4, 1), (1, 2, 2)]]
    for a in range(3):
        for b in range(a + 1, 3):
            assert np.abs(xs[a] - xs[b]).max() > 1e-3


def test_heteroclinic_argument_errors():
    with pytest.raises(ValueError):
        heteroclinic_realize(ELL, P, SYS, 1, 1, 3)
    with pytest.raises(ValueError):
        heteroclinic_realize(ELL, P, SYS, 1, 3, 3)
    with pytest.raises(ValueError):
        heteroclinic_realize(ELL, P, SYS, 1, 2, 0)


def test_half_heteroclinic_converges():
    start = SYS.center(2) + 0.5 * SYS.half_width
    conc, dist = half_heteroclinic(SYS, P, 2, 1, start, 6)
    assert conc.max_snell < 1e-8
    # the last entry is the pinned end itself
    free = [d for d in dist[:-1] if d > 1e-15]
    assert all(b < 1e-2 * a for a, b in zip(free, free[1:]))
    assert dist[-2] < 1e-12


def test_threshold_helpers():
    hs = [1, 2, 3, 4, 5]
    assert smallest_monotone_threshold(hs, [False, True, False, True, True]) == 4
    assert smallest_monotone_threshold(hs, [False] * 5) is None
    assert monotonicity_violations(hs, [False, True, False, True, True]) == [3]
    assert geometric_ratios([1.0, 0.1, 0.01, 1e-13]) == [0.1, pytest.approx(0.1)]


def test_euclidean_change_sign():
    assert euclidean_change_sign(SYS) == [True] * 4
    for s in SYS.symbols:
        a, b = SYS.interval(s)
        assert ELL.radius(a)[1] * ELL.radius(b)[1] < 0


def test_change_sign_threshold_bracket():
    assert not change_sign_check(SYS, BilliardParams(h=6.0))["passed"]
    assert change_sign_check(SYS, BilliardParams(h=H1))["passed"]
    assert change_sign_check(SYS, BilliardParams(h=1000.0))["passed"]


def test_containment_holds_across_h():
    for h in [0.01, 1.0, 100.0]:
        rep = containment_check(SYS, BilliardParams(h=h), grid=3)
        assert rep["passed"] and rep["max_implicit"] < 0


def test_small_scan():
    with warnings.catch_warnings():
        warnings.simplefilter("error", GeometryWarning)
        rep = threshold_scan(ELL, BilliardParams(), SYS, [(1, 2)], [1.0, H1, 100.0], saddles=True)
    assert rep.h1 == H1
    assert rep.h0 == 1.0 and rep.h0 <= rep.h1
    assert rep.thresholds["miranda"] <= 100.0
    assert rep.passes("saddle") == [True, True, True]
    assert rep.csv_rows()[0] == ("h", "criterion", "pass")
    assert set(rep.to_dict()) >= {"h_grid", "thresholds", "rows"}


def test_sensitivity_distinct_words():
    rep = sensitivity_probe(ELL, P, SYS, (1, 2), (1, 4), periodic=True)
    assert rep.separation > 1e-3
    same = sensitivity_probe(ELL, P, SYS, (1, 2), (1, 2), periodic=True)
    assert same.separation < 1e-10 and same.distance_bounds[0] == 0.0


def test_sensitivity_decays_with_shared_block():
    core = tuple(1 if k % 2 == 0 else 2 for k in range(-5, 6))
    # replacements differ from the core at every position and keep the grammar
    repl = tuple(4 if d % 2 else 3 for d in range(1, 6))
    seps = []
    for m in range(0, 4):
        w1, w2 = agreeing_pair(core, m, repl, repl)
        rep = sensitivity_probe(ELL, P, SYS, w1, w2)
        seps.append(rep.separation)
    assert all(b < a for a, b in zip(seps, seps[1:]))
    assert seps[-1] < 1e-6 * seps[0]
