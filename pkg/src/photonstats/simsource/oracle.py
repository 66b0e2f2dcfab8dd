"""Closed-form and quadrature predictions of the triggered click statistics.

Every trigger falls in one of four categories: no click, A only, B only,
both. The oracles compute the per-trigger probability of each category as
a 4-vector ``(none, a, b, ab)``. Independent photon sources combine through
:func:`_combine`, which is bilinear and has only non-negative terms, so
tiny both-arm probabilities are never obtained as a difference of numbers
close to one.

Real triggers (detected biexciton or herald photons) and dark-count
triggers are treated separately and mixed by their rates. Where the
simulators floor continuous emission times to whole picoseconds, the
window seen by the continuous delay is shifted by half a picosecond.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.linalg import expm

from ..coincidence import WindowSpec
from ..estimators import k_factor
from .config import QdCwConfig, QdPulsedConfig, SpdcConfig

# probability mass neglected in truncated tails
_TAIL = 1e-18


@dataclass(frozen=True)
class OracleStats:
    p0: float
    p1: float
    p2plus: float
    expected_r0: float
    r1a: float
    r1b: float
    r2: float
    categories: tuple[float, float, float, float]
    trigger_rate_hz: float


def _combine(v, u):
    n, a, b, ab = v
    n2, a2, b2, ab2 = u
    return np.array([
        n * n2,
        n * a2 + a * n2 + a * a2,
        n * b2 + b * n2 + b * b2,
        ab * (n2 + a2 + b2 + ab2) + (n + a + b) * ab2 + a * b2 + b * a2,
    ])


_NONE = np.array([1.0, 0.0, 0.0, 0.0])


def _photon_unit(p_click: float, t: float):
    """One photon reaching the splitter with probability ``p_click`` of being detected."""
    return np.array([1.0 - p_click, p_click * t, p_click * (1.0 - t), 0.0])


def _dark_units(dark_per_ps: float, width: float):
    miss = math.exp(-dark_per_ps * width)
    return np.array([miss, 1.0 - miss, 0.0, 0.0]), np.array([miss, 0.0, 1.0 - miss, 0.0])


def _finish(q_real, q_dark, real_rate_ps: float, dark_rate_ps: float, t: float,
            duration_ps: float) -> OracleStats:
    total = real_rate_ps + dark_rate_ps
    if total <= 0.0:
        q = _NONE.copy()
    else:
        q = (real_rate_ps * np.asarray(q_real) + dark_rate_ps * np.asarray(q_dark)) / total
    q = q / q.sum()
    k = k_factor(t)
    r0 = total * duration_ps
    return OracleStats(
        p0=float(q[0]),
        p1=float(q[1] + q[2] - k * q[3]),
        p2plus=float((1.0 + k) * q[3]),
        expected_r0=r0,
        r1a=r0 * float(q[1]), r1b=r0 * float(q[2]), r2=r0 * float(q[3]),
        categories=tuple(float(x) for x in q),
        trigger_rate_hz=total * 1e12,
    )


# --- pulsed quantum dot -------------------------------------------------------

def _hypoexp_cdf(s: float, la: float, lb: float) -> float:
    # CDF of Exp(la) + Exp(lb)
    if s <= 0.0:
        return 0.0
    if math.isclose(la, lb, rel_tol=1e-9):
        return -math.expm1(-la * s) - la * s * math.exp(-la * s)
    return 1.0 - (lb * math.exp(-la * s) - la * math.exp(-lb * s)) / (lb - la)


def _telegraph(cfg) -> tuple[float, np.ndarray]:
    on = cfg.on_fraction
    if cfg.tau_off_ps <= 0.0:
        return 1.0, np.array([[1.0, 0.0], [1.0, 0.0]])
    relax = math.exp(-cfg.period_ps * (1.0 / cfg.tau_on_ps + 1.0 / cfg.tau_off_ps))
    off = 1.0 - on
    m = np.array([[on + off * relax, off * (1.0 - relax)],
                  [on * (1.0 - relax), off + on * relax]])
    return on, m


def _walk(m: np.ndarray, start: tuple[float, float], units) -> np.ndarray:
    """Expected category vector over a telegraph path visiting ``units`` in order.

    ``units`` yields the 4-vector a pulse contributes when the dot is on;
    off pulses contribute nothing.
    """
    v_on = start[0] * _NONE
    v_off = start[1] * _NONE
    first = True
    for u in units:
        if not first:
            v_on, v_off = m[0, 0] * v_on + m[1, 0] * v_off, m[0, 1] * v_on + m[1, 1] * v_off
        first = False
        v_on = _combine(v_on, u)
    return v_on + v_off


def _walk_from_on(m, units) -> np.ndarray:
    # chain conditioned on the dot being on at the reference pulse, which is excluded
    v_on, v_off = _NONE.copy(), 0.0 * _NONE
    for u in units:
        v_on, v_off = m[0, 0] * v_on + m[1, 0] * v_off, m[0, 1] * v_on + m[1, 1] * v_off
        v_on = _combine(v_on, u)
    return v_on + v_off


def _integrate4(f, lo: float, hi: float, points) -> np.ndarray:
    pts = sorted(p for p in set(points) if lo < p < hi)
    out = np.empty(4)
    for i in range(4):
        out[i] = quad(lambda x: f(x)[i], lo, hi, points=pts or None, limit=400,
                      epsabs=0.0, epsrel=1e-10)[0]
    return out


def _pulsed_lookback(cfg: QdPulsedConfig, window: WindowSpec) -> int:
    reach = -math.log(_TAIL) * max(cfg.tau_xx_ps, cfg.tau_x_ps) - min(window.offset_ps, 0)
    return int(reach // cfg.period_ps) + 1


def _pulsed_ahead(cfg: QdPulsedConfig, window: WindowSpec) -> int:
    return int((window.offset_ps + window.width_ps + cfg.period_ps) // cfg.period_ps) + 1


def _pulsed_phase_fn(cfg: QdPulsedConfig, window: WindowSpec):
    """Category vector (no dark clicks) for a trigger independent of the dot at phase ``phi``."""
    period = float(cfg.period_ps)
    la, lb = 1.0 / cfg.tau_xx_ps, 1.0 / cfg.tau_x_ps
    w, o = float(window.width_ps), float(window.offset_ps)
    on_frac, m = _telegraph(cfg)
    j_lo, j_hi = -_pulsed_lookback(cfg, window), _pulsed_ahead(cfg, window)
    scale = cfg.p_excite * cfg.eta_x

    def at_phase(phi: float) -> np.ndarray:
        units = (_photon_unit(scale * (_hypoexp_cdf(o + w + phi - j * period, la, lb)
                                       - _hypoexp_cdf(o + phi - j * period, la, lb)), cfg.splitter_t)
                 for j in range(j_lo, j_hi + 1))
        return _walk(m, (on_frac, 1.0 - on_frac), units)

    return at_phase


def _qd_pulsed(cfg: QdPulsedConfig, window: WindowSpec) -> OracleStats:
    period = float(cfg.period_ps)
    la, lb = 1.0 / cfg.tau_xx_ps, 1.0 / cfg.tau_x_ps
    tau_max = max(cfg.tau_xx_ps, cfg.tau_x_ps)
    w, o = float(window.width_ps), float(window.offset_ps)
    eta, t, pe = cfg.eta_x, cfg.splitter_t, cfg.p_excite
    dark = cfg.dark_hz * 1e-12
    on_frac, m = _telegraph(cfg)
    tail = -math.log(_TAIL)

    def unit(c: float):
        return _photon_unit(pe * eta * c, t)

    # real trigger: biexciton photon of pulse 0 leaving a after the pulse
    lo, hi = o - 0.5, o + w - 0.5
    own = _photon_unit(eta * (math.exp(-max(lo, 0.0) * lb) - math.exp(-max(hi, 0.0) * lb)), t)
    a_max = tail * cfg.tau_xx_ps
    j_fwd = range(1, int((hi + a_max) // period) + 2)
    j_bwd = range(1, int(max(tail * tau_max - lo, 0.0) // period) + 2)

    def cap(j: float, a: float) -> float:
        return _hypoexp_cdf(hi + a - j * period, la, lb) - _hypoexp_cdf(lo + a - j * period, la, lb)

    dark_a, dark_b = _dark_units(dark, w)

    def real(a: float) -> np.ndarray:
        fwd = _walk_from_on(m, (unit(cap(j, a)) for j in j_fwd))
        bwd = _walk_from_on(m, (unit(cap(-j, a)) for j in j_bwd))
        v = _combine(_combine(fwd, bwd), own)
        return la * math.exp(-la * a) * v

    kinks = [j * period - x for j in j_fwd for x in (lo, hi)]
    q_real = _integrate4(real, 0.0, a_max, kinks)
    q_real = _combine(_combine(q_real / q_real.sum(), dark_a), dark_b)

    # dark trigger at a uniform phase phi in [0, period) relative to the pulse grid
    at_phase = _pulsed_phase_fn(cfg, window)
    kinks = [j * period - x for j in range(-_pulsed_lookback(cfg, window), _pulsed_ahead(cfg, window) + 1)
             for x in (o, o + w)]
    q_dark = _integrate4(lambda phi: at_phase(phi) / period, 0.0, period, kinks)
    q_dark = _combine(_combine(q_dark / q_dark.sum(), dark_a), dark_b)

    real_rate = on_frac * pe * cfg.eta_xx / period
    return _finish(q_real, q_dark, real_rate, dark, t, cfg.duration_ps)


# --- continuous-wave quantum dot ----------------------------------------------

def _cw_generator(cfg: QdCwConfig):
    """Generator over (dot, telegraph) states and the marked exciton-emission rates."""
    tele = 1 if cfg.tau_off_ps <= 0.0 else 2
    n = 3 * tele
    q = np.zeros((n, n))
    emit = np.zeros((n, n))
    idx = lambda dot, s: dot * tele + s  # noqa: E731  dot: 0 ground, 1 biexciton, 2 exciton
    pump = cfg.pump_rate_hz * 1e-12
    reexcite = cfg.reexcite_hz * 1e-12
    for s in range(tele):
        if s == 0:
            q[idx(0, s), idx(1, s)] += pump
        q[idx(1, s), idx(2, s)] += 1.0 / cfg.tau_xx_ps
        q[idx(2, s), idx(1, s)] += reexcite
        emit[idx(2, s), idx(0, s)] += 1.0 / cfg.tau_x_ps
        if tele == 2:
            for dot in range(3):
                other = 1 - s
                q[idx(dot, s), idx(dot, other)] += 1.0 / (cfg.tau_on_ps if s == 0 else cfg.tau_off_ps)
    full = q + emit
    np.fill_diagonal(full, -full.sum(axis=1))
    return full, q, emit, tele, idx


def _stationary(gen: np.ndarray) -> np.ndarray:
    n = gen.shape[0]
    a = np.vstack([gen.T, np.ones(n)])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi = np.linalg.lstsq(a, rhs, rcond=None)[0]
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _cw_categories(q_plain, emit, start, width: float, eta: float, t: float) -> np.ndarray:
    n = q_plain.shape[0]
    big = np.zeros((4 * n, 4 * n))
    # categories: 0 none, 1 A, 2 B, 3 both
    add_a = (1, 1, 3, 3)
    add_b = (2, 3, 2, 3)
    for c in range(4):
        blk = slice(c * n, (c + 1) * n)
        big[blk, blk] += q_plain + emit * (1.0 - eta)
        big[blk, add_a[c] * n:(add_a[c] + 1) * n] += emit * eta * t
        big[blk, add_b[c] * n:(add_b[c] + 1) * n] += emit * eta * (1.0 - t)
    np.fill_diagonal(big, 0.0)
    diag = np.zeros(4 * n)
    diag += big.sum(axis=1)
    # diagonal elements of q_plain (self loops) are zero, so the row sums are the exit rates
    np.fill_diagonal(big, -diag)
    v0 = np.zeros(4 * n)
    v0[:n] = start
    v = v0 @ expm(big * width)
    return np.array([v[c * n:(c + 1) * n].sum() for c in range(4)])


def _qd_cw(cfg: QdCwConfig, window: WindowSpec) -> OracleStats:
    if window.offset_ps < 0:
        raise ValueError("continuous-wave oracle supports only non-negative window offsets")
    full, q_plain, emit, tele, idx = _cw_generator(cfg)
    pi = _stationary(full)
    eta, t = cfg.eta_x, cfg.splitter_t
    dark = cfg.dark_hz * 1e-12
    w, o = float(window.width_ps), float(window.offset_ps)
    dark_a, dark_b = _dark_units(dark, w)

    xx_states = [idx(1, s) for s in range(tele)]
    xx_rate = sum(pi[i] for i in xx_states) / cfg.tau_xx_ps
    start = np.zeros_like(pi)
    if xx_rate > 0:
        for s in range(tele):
            start[idx(2, s)] = pi[idx(1, s)]
        start /= start.sum()
        lo, hi = max(o - 0.5, 0.0), o + w - 0.5
        v = start @ expm(full * lo) if lo > 0 else start
        q_real = _cw_categories(q_plain, emit, v, hi - lo, eta, t)
    else:
        q_real = _NONE.copy()
    q_real = _combine(_combine(q_real, dark_a), dark_b)

    v = pi @ expm(full * o) if o > 0 else pi
    q_dark = _cw_categories(q_plain, emit, v, w, eta, t)
    q_dark = _combine(_combine(q_dark, dark_a), dark_b)

    return _finish(q_real, q_dark, cfg.eta_xx * xx_rate, dark, t, cfg.duration_ps)


def cw_rates(cfg: QdCwConfig) -> dict[str, float]:
    """Stationary biexciton and exciton photon emission rates in Hz."""
    full, _, emit, tele, idx = _cw_generator(cfg)
    pi = _stationary(full)
    xx = sum(pi[idx(1, s)] for s in range(tele)) / cfg.tau_xx_ps
    x = sum(pi[idx(2, s)] for s in range(tele)) / cfg.tau_x_ps
    return {"biexciton_hz": xx * 1e12, "exciton_hz": x * 1e12}


# --- heralded down-conversion -------------------------------------------------

def _uniform_capture(lo, hi, jitter: int):
    # fraction of integers u in [0, jitter) with lo <= u < hi, lo/hi integer arrays
    lo = np.clip(np.ceil(lo), 0, jitter)
    hi = np.clip(np.ceil(hi), 0, jitter)
    return np.maximum(hi - lo, 0) / jitter


def _spdc_at_phase(cfg: SpdcConfig, window: WindowSpec, phi: np.ndarray) -> np.ndarray:
    """Category vectors (no dark clicks) for triggers independent of the source at phases ``phi``."""
    period = cfg.period_ps
    jitter = max(int(cfg.jitter_ps), 1)
    delay = int(cfg.idler_delay_ps)
    w, o = window.width_ps, window.offset_ps
    click_a = -math.expm1(-cfg.mu * cfg.eta_idler * cfg.attenuation * cfg.splitter_t)
    click_b = -math.expm1(-cfg.mu * cfg.eta_idler * cfg.attenuation * (1.0 - cfg.splitter_t))
    j_lo = int(math.floor((o - delay - jitter) / period)) - 1
    j_hi = int(math.ceil((o + w + period - delay) / period)) + 1
    zero = np.zeros(len(phi))
    vec = np.stack([zero + 1.0, zero, zero, zero])
    for j in range(j_lo, j_hi + 1):
        cj = _uniform_capture(phi + o - delay - j * period, phi + o + w - delay - j * period, jitter)
        if not cj.any():
            continue
        vec = _combine(vec, _combine(np.array([1 - click_a * cj, click_a * cj, zero, zero]),
                                     np.array([1 - click_b * cj, zero, click_b * cj, zero])))
    return vec


def _spdc(cfg: SpdcConfig, window: WindowSpec) -> OracleStats:
    period = cfg.period_ps
    jitter = max(int(cfg.jitter_ps), 1)
    delay = int(cfg.idler_delay_ps)
    w, o = window.width_ps, window.offset_ps
    mu, eh, t = cfg.mu, cfg.eta_herald, cfg.splitter_t
    qa = cfg.eta_idler * cfg.attenuation * t
    qb = cfg.eta_idler * cfg.attenuation * (1.0 - t)
    dark = cfg.dark_hz * 1e-12
    click_a = -math.expm1(-mu * qa)
    click_b = -math.expm1(-mu * qb)
    dark_a, dark_b = _dark_units(dark, w)

    herald = -math.expm1(-mu * eh)
    if herald > 0.0:
        # own pulse click pattern given a herald click, from independent Poisson categories
        no_a = math.exp(-mu * qa) * -math.expm1(-mu * eh * (1.0 - qa)) / herald
        no_b = math.exp(-mu * qb) * -math.expm1(-mu * eh * (1.0 - qb)) / herald
        none = math.exp(-mu * (qa + qb)) * -math.expm1(-mu * eh * (1.0 - qa - qb)) / herald
        only_a, only_b = no_b - none, no_a - none
        both = max(1.0 - none - only_a - only_b, 0.0)
        u = np.arange(jitter)
        g0 = _uniform_capture(o + u - delay, o + w + u - delay, jitter)
        # pattern -> observed categories; the herald time u is shared by both idler clicks
        own = np.array([
            none + (only_a + only_b) * (1 - g0) + both * (1 - g0) ** 2,
            only_a * g0 + both * g0 * (1 - g0),
            only_b * g0 + both * g0 * (1 - g0),
            both * g0 * g0,
        ])
        reach = int(math.ceil((abs(o) + w + delay + jitter) / period)) + 1
        vec = own
        for j in range(-reach, reach + 1):
            if j == 0:
                continue
            cj = _uniform_capture(o + u - delay - j * period, o + w + u - delay - j * period, jitter)
            vec = _combine(vec, _combine(np.array([1 - click_a * cj, click_a * cj, 0 * cj, 0 * cj]),
                                         np.array([1 - click_b * cj, 0 * cj, click_b * cj, 0 * cj])))
        q_real = vec.mean(axis=1)
    else:
        q_real = _NONE.copy()
    q_real = _combine(_combine(q_real, dark_a), dark_b)

    # dark trigger at a uniform integer phase relative to the pulse grid
    q_dark = _spdc_at_phase(cfg, window, np.arange(period)).mean(axis=1)
    q_dark = _combine(_combine(q_dark, dark_a), dark_b)

    n_pulses = -(-cfg.duration_ps // period)
    real_rate = herald * n_pulses / cfg.duration_ps
    return _finish(q_real, q_dark, real_rate, dark, t, cfg.duration_ps)


def _laser(cfg, window: WindowSpec, phase_ps: int) -> OracleStats:
    period = cfg.period_ps
    if not 0 <= phase_ps < period:
        raise ValueError(f"laser phase {phase_ps} outside [0, {period})")
    if isinstance(cfg, QdPulsedConfig):
        q = _pulsed_phase_fn(cfg, window)(float(phase_ps))
    else:
        q = _spdc_at_phase(cfg, window, np.array([phase_ps]))[:, 0]
    dark_a, dark_b = _dark_units(cfg.dark_hz * 1e-12, window.width_ps)
    q = _combine(_combine(q, dark_a), dark_b)
    n = (cfg.duration_ps - phase_ps - 1) // period + 1
    return _finish(q, q, n / cfg.duration_ps, 0.0, cfg.splitter_t, cfg.duration_ps)


def oracle_stats(cfg, window: WindowSpec, *, laser_phase_ps: int | None = None) -> OracleStats:
    """Expected per-trigger statistics for a source config and coincidence window.

    By default the triggers are the source's own trigger-channel clicks
    (biexciton or herald detections, plus trigger-detector dark counts). With
    ``laser_phase_ps`` they are instead the synthetic laser triggers at
    ``phase + k * period``, available for the two pulsed models.
    """
    if laser_phase_ps is not None:
        if isinstance(cfg, (QdPulsedConfig, SpdcConfig)):
            return _laser(cfg, window, int(laser_phase_ps))
        raise ValueError(f"unsupported config combination: laser triggers need a pulsed model, "
                         f"not {cfg.model}")
    if isinstance(cfg, QdPulsedConfig):
        return _qd_pulsed(cfg, window)
    if isinstance(cfg, QdCwConfig):
        return _qd_cw(cfg, window)
    if isinstance(cfg, SpdcConfig):
        return _spdc(cfg, window)
    raise TypeError(f"unsupported config type {type(cfg).__name__}")
