"""Photon-number statistics from trigger-conditioned coincidence counts.

The four counters are treated as independent Poisson variables for error
propagation; their correlations are of relative order r2/r0 and ignored.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

from .coincidence import CoincidenceCounts, ValueWithError

CSV_FIELDS = ("window_ps", "p0", "sigma_p0", "p1", "sigma_p1", "p2plus", "sigma_p2plus",
              "low_count_flag")


@dataclass(frozen=True)
class SplittingRatio:
    """Beamsplitter transmission toward arm A."""

    t: float

    def __post_init__(self) -> None:
        if not 0.0 < float(self.t) < 1.0:
            raise ValueError(f"splitting ratio must lie in (0, 1), got {self.t}")
        object.__setattr__(self, "t", float(self.t))


def _ratio(t: SplittingRatio | float) -> SplittingRatio:
    return t if isinstance(t, SplittingRatio) else SplittingRatio(t)


def k_factor(t: SplittingRatio | float) -> float:
    """Unbalanced-splitter weight ``(t^2 + (1-t)^2) / (2 t (1-t))``; equals 1 at t = 1/2."""
    t = _ratio(t).t
    return (t * t + (1.0 - t) ** 2) / (2.0 * t * (1.0 - t))


@dataclass(frozen=True)
class PhotonStats:
    p0: float
    p1: float
    p2plus: float
    sigma_p0: float
    sigma_p1: float
    sigma_p2plus: float
    counts: CoincidenceCounts | None
    t: SplittingRatio
    low_count_flag: bool = False

    def to_row(self) -> dict:
        window = self.counts.window.width_ps if self.counts is not None else ""
        return {
            "window_ps": window,
            "p0": self.p0, "sigma_p0": self.sigma_p0,
            "p1": self.p1, "sigma_p1": self.sigma_p1,
            "p2plus": self.p2plus, "sigma_p2plus": self.sigma_p2plus,
            "low_count_flag": int(self.low_count_flag),
        }

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["t"] = self.t.t
        return doc


def estimate_stats(counts: CoincidenceCounts, t: SplittingRatio | float) -> PhotonStats:
    """Vacuum, single-photon (lower bound) and multiphoton fractions per trigger.

    ``p2plus`` is evaluated as ``(1 + k) r2 / r0`` which equals ``1 - p0 - p1``
    algebraically but keeps full relative precision when it is tiny. With
    ``r2 == 0`` the multiphoton error uses one count and ``low_count_flag`` is set.
    """
    t = _ratio(t)
    r0, r1a, r1b, r2 = counts.r0, counts.r1a, counts.r1b, counts.r2
    if r0 <= 0:
        raise ValueError("no triggers (r0 = 0)")
    k = k_factor(t)
    r1 = r1a + r1b
    p0 = 1.0 - (r1 + r2) / r0
    p1 = r1 / r0 - k * r2 / r0
    p2plus = (1.0 + k) * r2 / r0

    s = r1 + r2
    var_p0 = s / r0**2 + s * s / r0**3
    var_p1 = (r1 + k * k * r2) / r0**2 + (r1 - k * r2) ** 2 / r0**3
    low = r2 == 0
    r2_err = max(r2, 1) if low else r2
    var_p2 = (1.0 + k) ** 2 * (r2_err / r0**2 + r2 * r2 / r0**3)

    if p1 < 0.0:
        warnings.warn(f"negative single-photon estimate {p1:.3g} clamped to 0", RuntimeWarning,
                      stacklevel=2)
        p1 = 0.0
        p2plus = 1.0 - p0
    return PhotonStats(p0, p1, p2plus, math.sqrt(var_p0), math.sqrt(var_p1), math.sqrt(var_p2),
                       counts, t, low)


def g2_from_stats(stats: PhotonStats) -> ValueWithError:
    """Zero-delay autocorrelation ``2 p2+ / (2 (1 - p0) - p1)^2``."""
    denom = 2.0 * (1.0 - stats.p0) - stats.p1
    if denom <= 0.0:
        raise ValueError("degenerate statistics: no non-vacuum events")
    g2 = 2.0 * stats.p2plus / denom**2
    # 1 - p0 = p1 + p2+, so the denominator is p1 + 2 p2+ and p0 carries no extra information
    d_p1 = -4.0 * stats.p2plus / denom**3
    d_p2 = 2.0 / denom**2 - 8.0 * stats.p2plus / denom**3
    sigma = math.hypot(d_p1 * stats.sigma_p1, d_p2 * stats.sigma_p2plus)
    return ValueWithError(g2, sigma)


def alpha(counts: CoincidenceCounts) -> ValueWithError:
    """Grangier anticorrelation parameter ``r0 r2 / (r1a r1b)``."""
    r0, r1a, r1b, r2 = counts.r0, counts.r1a, counts.r1b, counts.r2
    if r1a <= 0 or r1b <= 0:
        raise ValueError("alpha needs two-fold counts in both arms")
    a = r0 * r2 / (r1a * r1b)
    if r2 == 0:
        return ValueWithError(0.0, r0 / (r1a * r1b))
    rel = math.sqrt(1.0 / r0 + 1.0 / r1a + 1.0 / r1b + 1.0 / r2)
    return ValueWithError(a, a * rel)


def noise_floor_triples(r0: float, p_a: float, p_b: float, dark_a_hz: float, dark_b_hz: float,
                        width_ps: float) -> float:
    """Expected accidental three-fold counts from dark clicks.

    A true click in one arm plus a dark click in the other, or dark clicks in
    both, inside the window of each of ``r0`` triggers.
    """
    for name, v in (("r0", r0), ("p_a", p_a), ("p_b", p_b), ("dark_a_hz", dark_a_hz),
                    ("dark_b_hz", dark_b_hz), ("width_ps", width_ps)):
        if v < 0:
            raise ValueError(f"{name} must be non-negative")
    w = width_ps * 1e-12
    return r0 * (p_a * dark_b_hz * w + p_b * dark_a_hz * w + dark_a_hz * dark_b_hz * w * w)
