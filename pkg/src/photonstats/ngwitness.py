"""Boundary of Gaussian-mixture photon statistics and the distance witness.

The boundary is the curve

    p0(r) = exp(-d^2 (1 - tanh r)) / cosh r
    p1(r) = d^2 exp(-d^2 (1 - tanh r)) / cosh^3 r,     d^2 = (e^{4r} - 1) / 4

With ``u = tanh r`` these collapse to ``d^2 (1-u) = u/(1-u)`` and
``d^2 / cosh^2 r = u(1+u)/(1-u)``, and the multiphoton remainder is

    p2 = 1 - p0 - p1 = -expm1(L),  L = (r - u) - u^3/(1-u) + (log1p(u^2) - u^2)

which is free of the catastrophic cancellation of the naive difference
(p2 ~ 2 r^3 / 3 for small r). ``1 - u`` is evaluated as ``2 / (e^{2r} + 1)``.

p1(r) peaks where ``2u^3 - 5u^2 + 1 = 0``, i.e. at ``tanh r = 1/2``; the
search below locates the peak numerically and the tests compare against
that closed form.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq

from .estimators import PhotonStats

R_MAX = 10.0
ROOT_RTOL = 1e-12

NON_GAUSSIAN = "non_gaussian"
GAUSSIAN_COMPATIBLE = "gaussian_compatible"
INDETERMINATE = "indeterminate"

# r - tanh(r) = sum c_n r^n for small r
_R_MINUS_TANH = (
    (3, 1 / 3), (5, -2 / 15), (7, 17 / 315), (9, -62 / 2835), (11, 1382 / 155925),
    (13, -21844 / 6081075), (15, 929569 / 638512875),
)


def _r_minus_tanh(r: float) -> float:
    if r < 0.1:
        return sum(c * r**n for n, c in _R_MINUS_TANH)
    return r - math.tanh(r)


def _log1p_minus(y: float) -> float:
    # log1p(y) - y
    if y < 0.01:
        return sum((-1) ** (n + 1) * y**n / n for n in range(2, 12))
    return math.log1p(y) - y


def _one_minus_tanh(r: float) -> float:
    return 2.0 / (math.exp(2.0 * r) + 1.0)


@dataclass(frozen=True)
class BoundaryPoint:
    r: float
    d_sq: float
    p0: float
    p1: float
    p2: float


def _check_r(r: float) -> float:
    r = float(r)
    if not (0.0 <= r <= R_MAX) or math.isnan(r):
        raise ValueError(f"squeezing parameter {r} outside [0, {R_MAX}]")
    return r


def _p1(r: float) -> float:
    if r == 0.0:
        return 0.0
    u = math.tanh(r)
    omu = _one_minus_tanh(r)
    p0 = math.exp(-u / omu) * math.sqrt(omu * (1.0 + u))
    return p0 * u * (1.0 + u) / omu


def boundary_point(r: float) -> BoundaryPoint:
    """Point of the boundary curve at squeezing ``r``."""
    r = _check_r(r)
    if r == 0.0:
        return BoundaryPoint(0.0, 0.0, 1.0, 0.0, 0.0)
    u = math.tanh(r)
    omu = _one_minus_tanh(r)
    d_sq = math.expm1(4.0 * r) / 4.0
    p0 = math.exp(-u / omu) * math.sqrt(omu * (1.0 + u))
    p1 = p0 * u * (1.0 + u) / omu
    log_rest = _r_minus_tanh(r) - u**3 / omu + _log1p_minus(u * u)
    p2 = -math.expm1(log_rest)
    return BoundaryPoint(r, d_sq, p0, p1, p2)


def _dlogp1_sign(r: float) -> float:
    # d ln p1 / dr has the sign of 1 - 5u^2 + 2u^3
    u = math.tanh(r)
    return 1.0 - 5.0 * u * u + 2.0 * u**3


@lru_cache(maxsize=1)
def p1_peak() -> tuple[float, float]:
    """``(r_peak, p1_max)``: the maximum of p1 along the curve.

    Bisection on the sign of dp1/dr, to relative width 1e-12.
    """
    lo, hi = 0.0, 1.0
    while _dlogp1_sign(hi) > 0.0:
        hi *= 2.0
    while hi - lo > 1e-12 * hi:
        mid = 0.5 * (lo + hi)
        if _dlogp1_sign(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    r_peak = 0.5 * (lo + hi)
    return r_peak, _p1(r_peak)


def _dp1_dr(r: float) -> float:
    u = math.tanh(r)
    omu = _one_minus_tanh(r)
    return _p1(r) * (1.0 - 5.0 * u * u + 2.0 * u**3) / (u * omu)


def _dp2_dr(r: float) -> float:
    u = math.tanh(r)
    omu = _one_minus_tanh(r)
    p2 = boundary_point(r).p2
    return (1.0 - p2) * 2.0 * u * u * (1.0 + 2.0 * u - u * u) / (omu * (1.0 + u * u))


class OutOfReachError(ValueError):
    """p1 above the curve's maximum: no Gaussian-mixture point at that p1."""


def boundary_p2_at_p1(p1_meas: float) -> tuple[float, float]:
    """Boundary multiphoton fraction at single-photon fraction ``p1_meas``.

    Solves ``p1(r) = p1_meas`` on the ascending branch ``(0, r_peak]``, where
    p1 is monotone, and returns ``(p2(r), r)``.
    """
    p1_meas = float(p1_meas)
    r_peak, p1_max = p1_peak()
    if not p1_meas > 0.0:
        raise ValueError(f"p1 must be positive, got {p1_meas}")
    if p1_meas > p1_max:
        raise OutOfReachError(f"p1 = {p1_meas} exceeds the boundary maximum {p1_max:.6f}")
    if p1_meas == p1_max:
        r = r_peak
    else:
        r = brentq(lambda x: _p1(x) - p1_meas, 0.0, r_peak, xtol=1e-300, rtol=ROOT_RTOL,
                   maxiter=200)
    return boundary_point(r).p2, r


def boundary_slope(r: float) -> float:
    """dp2/dp1 along the curve at ``r`` (about 2 p1^2 for small p1)."""
    r = _check_r(r)
    if r == 0.0:
        return 0.0
    return _dp2_dr(r) / _dp1_dr(r)


@dataclass(frozen=True)
class WitnessResult:
    delta_w_sigma: float
    boundary: BoundaryPoint | None
    p2_boundary: float
    side: str
    p1: float
    p2plus: float
    sigma: float

    def to_row(self, window_ps: int | str = "") -> dict:
        return {
            "window_ps": window_ps, "p1": self.p1, "p2plus": self.p2plus,
            "sigma_p2plus": self.sigma, "delta_w_sigma": self.delta_w_sigma, "side": self.side,
        }


def witness_from_values(p1: float, p2plus: float, sigma_p2plus: float, sigma_p1: float = 0.0,
                        *, low_count: bool = False) -> WitnessResult:
    """Signed vertical distance to the boundary at fixed p1, in units of sigma.

    Positive when the point lies below the curve (non-Gaussian). ``sigma_p1``
    is carried through the local boundary slope and added in quadrature.
    """
    if p1 <= 0.0:
        bp = boundary_point(0.0)
        p2b = 0.0
        slope = 0.0
    else:
        try:
            p2b, r = boundary_p2_at_p1(p1)
        except OutOfReachError:
            warnings.warn(f"p1 = {p1} lies beyond the boundary maximum; reported as non-Gaussian",
                          RuntimeWarning, stacklevel=2)
            return WitnessResult(math.inf, None, math.nan, NON_GAUSSIAN, p1, p2plus, sigma_p2plus)
        bp = boundary_point(r)
        slope = boundary_slope(r)
    sigma = math.hypot(sigma_p2plus, slope * sigma_p1)
    if sigma <= 0.0:
        raise ValueError("witness needs a positive uncertainty")
    dw = (p2b - p2plus) / sigma
    if low_count:
        side = INDETERMINATE
    elif dw > 0.0:
        side = NON_GAUSSIAN
    else:
        side = GAUSSIAN_COMPATIBLE
    return WitnessResult(dw, bp, p2b, side, p1, p2plus, sigma)


def witness(stats: PhotonStats, *, include_p1_uncertainty: bool = True) -> WitnessResult:
    """Witness for estimated statistics; ``low_count_flag`` makes the side indeterminate."""
    return witness_from_values(stats.p1, stats.p2plus, stats.sigma_p2plus,
                               stats.sigma_p1 if include_p1_uncertainty else 0.0,
                               low_count=stats.low_count_flag)


def sample_boundary(p1_lo: float, p1_hi: float, n: int) -> list[tuple[float, float]]:
    """``n`` log-spaced ``(p1, p2)`` samples of the ascending branch."""
    _, p1_max = p1_peak()
    if n < 2:
        raise ValueError("need at least two samples")
    if not 0.0 < p1_lo < p1_hi <= p1_max:
        raise ValueError(f"need 0 < p1_lo < p1_hi <= {p1_max:.6f}")
    grid = np.geomspace(p1_lo, p1_hi, n)
    grid[0], grid[-1] = p1_lo, p1_hi
    return [(float(p), boundary_p2_at_p1(p)[0]) for p in grid]
