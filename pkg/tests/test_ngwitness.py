from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest

from golden import ROWS, within_tolerance
from photonstats.coincidence import CoincidenceCounts, WindowSpec
from photonstats.estimators import PhotonStats, SplittingRatio, estimate_stats
from photonstats.ngwitness import (
    GAUSSIAN_COMPATIBLE,
    INDETERMINATE,
    NON_GAUSSIAN,
    R_MAX,
    OutOfReachError,
    boundary_p2_at_p1,
    boundary_point,
    boundary_slope,
    p1_peak,
    sample_boundary,
    witness,
    witness_from_values,
)

mp.mp.dps = 60


def mp_point(r):
    # the defining parametrisation, evaluated naively at 60 digits
    r = mp.mpf(r)
    d2 = (mp.e ** (4 * r) - 1) / 4
    e = mp.e ** (-d2 * (1 - mp.tanh(r)))
    p0 = e / mp.cosh(r)
    p1 = d2 * e / mp.cosh(r) ** 3
    return p0, p1, 1 - p0 - p1


def mp_p2_at_p1(p1):
    p1 = mp.mpf(p1)
    r = mp.findroot(lambda x: mp_point(x)[1] - p1, (p1 * 0.5, min(p1 * 2, mp.log(3) / 2)),
                    solver="anderson")
    return mp_point(r)[2], r


def test_vacuum_endpoint():
    bp = boundary_point(0.0)
    assert (bp.p0, bp.p1, bp.p2, bp.d_sq) == (1.0, 0.0, 0.0, 0.0)


@pytest.mark.parametrize("r", [-1e-9, R_MAX * 1.01, float("nan")])
def test_out_of_range(r):
    with pytest.raises(ValueError):
        boundary_point(r)


def test_matches_high_precision_reference():
    for r in np.geomspace(1e-7, 5.0, 300):
        bp = boundary_point(r)
        ref = mp_point(r)
        for got, want in zip((bp.p0, bp.p1, bp.p2), ref):
            if want > 1e-290:
                assert abs(got - want) <= 1e-12 * want
        assert bp.d_sq == pytest.approx(float((mp.e ** (4 * mp.mpf(r)) - 1) / 4), rel=1e-13)


def test_curve_invariants():
    for r in np.geomspace(1e-6, R_MAX, 500):
        bp = boundary_point(r)
        assert bp.p2 >= 0.0
        assert 0.0 <= bp.p0 <= 1.0 and 0.0 <= bp.p1 <= 1.0
        assert abs(bp.p0 + bp.p1 + bp.p2 - 1.0) < 1e-15


def test_small_r_series():
    r = 1e-3
    bp = boundary_point(r)
    assert bp.p2 / r**3 == pytest.approx(2 / 3, abs=3e-3)
    assert bp.p0 == pytest.approx(1 - r - r * r, abs=5 * r**3)
    assert bp.p1 == pytest.approx(r + r * r, abs=5 * r**3)
    bp = boundary_point(3.05e-3)
    assert bp.p1 == pytest.approx(3.059e-3, rel=1e-3)
    assert bp.p2 == pytest.approx(1.89e-8, rel=0.01)


def test_p1_peak_closed_form():
    r_peak, p1_max = p1_peak()
    # p1 peaks where tanh r = 1/2
    assert r_peak == pytest.approx(math.log(3) / 2, rel=1e-11)
    assert p1_max == pytest.approx(3 * math.sqrt(3) / (4 * math.e), rel=1e-12)
    assert p1_max >= boundary_point(r_peak / 2).p1
    assert p1_max >= boundary_point(2 * r_peak).p1
    grid = [boundary_point(r).p1 for r in np.geomspace(1e-8, R_MAX, 1000)]
    assert max(grid) <= p1_max
    # frozen regression constant
    assert p1_max == pytest.approx(0.4778894, abs=1e-7)


def test_p2_at_p1_against_reference():
    for p1 in (1e-6, 1e-4, 3.061e-3, 0.0192, 0.1314, 0.3, 0.47):
        p2, r = boundary_p2_at_p1(p1)
        p2_ref, r_ref = mp_p2_at_p1(p1)
        assert p2 == pytest.approx(float(p2_ref), rel=1e-10)
        assert r == pytest.approx(float(r_ref), rel=1e-10)


def test_p2_at_p1_examples():
    assert boundary_p2_at_p1(1e-4)[0] / 1e-12 == pytest.approx(2 / 3, abs=5e-4)
    assert boundary_p2_at_p1(3.061e-3)[0] == pytest.approx(1.894e-8, rel=0.01)
    r_peak, p1_max = p1_peak()
    assert boundary_p2_at_p1(p1_max)[1] == r_peak
    with pytest.raises(OutOfReachError):
        boundary_p2_at_p1(p1_max * 1.0001)
    with pytest.raises(ValueError):
        boundary_p2_at_p1(0.0)


def test_root_round_trip():
    r_peak, _ = p1_peak()
    for r in np.geomspace(1e-6, 0.999 * r_peak, 200):
        assert boundary_p2_at_p1(boundary_point(r).p1)[1] == pytest.approx(r, rel=1e-9)


def test_slope_against_finite_difference():
    for r in (1e-3, 0.01, 0.2, 0.5):
        h = r * 1e-15
        a = mp_point(mp.mpf(r) + h)
        b = mp_point(mp.mpf(r) - h)
        assert boundary_slope(r) == pytest.approx(float((a[2] - b[2]) / (a[1] - b[1])), rel=1e-9)
    p1 = boundary_point(1e-3).p1
    assert boundary_slope(1e-3) == pytest.approx(2 * p1 * p1, rel=0.01)


@pytest.mark.parametrize("row", ROWS, ids=[r[0] for r in ROWS])
def test_reference_rows(row):
    _, p1, p2, sigma, _, expected = row
    w = witness_from_values(p1, p2, sigma)
    assert within_tolerance(w.delta_w_sigma, expected)
    assert w.side == (NON_GAUSSIAN if expected > 0 else GAUSSIAN_COMPATIBLE)


def test_witness_on_curve_is_zero():
    bp = boundary_point(0.01)
    w = witness_from_values(bp.p1, bp.p2, 1e-9)
    assert w.delta_w_sigma == pytest.approx(0.0, abs=1e-3)


def test_p1_uncertainty_term():
    plain = witness_from_values(3.061e-3, 0.52e-8, 0.52e-8)
    full = witness_from_values(3.061e-3, 0.52e-8, 0.52e-8, 3e-6)
    assert abs(full.delta_w_sigma / plain.delta_w_sigma - 1) < 1e-4
    # not negligible at large p1
    big = witness_from_values(131.4e-3, 3477e-8, 941e-8, 3e-4)
    assert big.delta_w_sigma < 0.8 * witness_from_values(131.4e-3, 3477e-8, 941e-8).delta_w_sigma


def _stats(p1, p2, s2, low=False, p0=None):
    p0 = 1 - p1 - p2 if p0 is None else p0
    return PhotonStats(p0, p1, p2, 1e-6, 1e-6, s2, None, SplittingRatio(0.5), low)


def test_depends_only_on_p1_p2_sigma():
    a = witness(_stats(3e-3, 1e-8, 5e-9), include_p1_uncertainty=False)
    b = witness(_stats(3e-3, 1e-8, 5e-9, p0=0.5), include_p1_uncertainty=False)
    assert a.delta_w_sigma == b.delta_w_sigma


def test_low_count_is_indeterminate():
    s = estimate_stats(CoincidenceCounts(10**6, 2000, 2000, 0, WindowSpec(100)), 0.5)
    w = witness(s)
    assert s.low_count_flag and w.side == INDETERMINATE and w.delta_w_sigma > 0


def test_out_of_reach_sentinel():
    with pytest.warns(RuntimeWarning):
        w = witness_from_values(0.6, 0.01, 0.001)
    assert w.delta_w_sigma == math.inf and w.side == NON_GAUSSIAN and w.boundary is None


def test_zero_p1():
    w = witness_from_values(0.0, 1e-6, 1e-6)
    assert w.delta_w_sigma == pytest.approx(-1.0)


def test_sample_boundary():
    pts = sample_boundary(1e-4, 0.2, 2)
    assert pts[0] == (1e-4, boundary_p2_at_p1(1e-4)[0])
    assert pts[1] == (0.2, boundary_p2_at_p1(0.2)[0])
    pts = sample_boundary(1e-5, 0.45, 300)
    p1s, p2s = zip(*pts)
    assert all(np.diff(p1s) > 0) and all(np.diff(p2s) > 0)
    for p1, p2 in sample_boundary(1e-5, 1e-2, 50):
        assert p2 == pytest.approx(2 / 3 * p1**3, rel=0.05)
    with pytest.raises(ValueError):
        sample_boundary(1e-4, 0.2, 1)
    with pytest.raises(ValueError):
        sample_boundary(0.2, 1e-4, 5)
    with pytest.raises(ValueError):
        sample_boundary(1e-4, 0.6, 5)
