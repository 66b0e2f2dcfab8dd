"""Seeded Monte Carlo sources producing time-tag streams.

Every simulator draws from one ``numpy.random.Generator`` (PCG64) seeded by
``cfg.seed`` in a fixed order, so a config reproduces its stream bit for bit.
Channels follow the default convention: 0 trigger, 1 arm A, 2 arm B.
"""
from __future__ import annotations

import math

import numba
import numpy as np

from ..tagstream import DEFAULT_ROLES, TagStream
from .config import QdCwConfig, QdPulsedConfig, SpdcConfig

RNG_ALGORITHM = "numpy.PCG64"
TRIGGER, ARM_A, ARM_B = 0, 1, 2
PULSE_BLOCK = 1 << 21


def _telegraph_switches(rng: np.random.Generator, tau_on: float, tau_off: float,
                        on_fraction: float, duration: float) -> tuple[bool, np.ndarray]:
    """Initial on/off state and the switching times of the blinking telegraph."""
    if tau_off <= 0.0:
        return True, np.empty(0)
    start_on = bool(rng.random() < on_fraction)
    dwell_first, dwell_second = (tau_on, tau_off) if start_on else (tau_off, tau_on)
    n = max(16, int(2 * duration / (tau_on + tau_off)) + 16)
    chunks = []
    total = 0.0
    while total < duration:
        d = np.empty(2 * n)
        d[0::2] = rng.exponential(dwell_first, n)
        d[1::2] = rng.exponential(dwell_second, n)
        chunks.append(d)
        total += d.sum()
    switches = np.cumsum(np.concatenate(chunks))
    return start_on, switches[: np.searchsorted(switches, duration) + 1]


def _state_at(start_on: bool, switches: np.ndarray, t: np.ndarray) -> np.ndarray:
    flips = np.searchsorted(switches, t, side="right")
    return (flips % 2 == 0) if start_on else (flips % 2 == 1)


def _on_intervals(start_on: bool, switches: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    edges = np.concatenate(([0.0], switches, [np.inf]))
    first = 0 if start_on else 1
    return edges[first:-1:2], edges[first + 1::2]


def _darks(rng: np.random.Generator, dark_hz: float, duration_ps: int,
           channels: tuple[int, ...]) -> list[tuple[int, np.ndarray]]:
    out = []
    for ch in channels:
        n = rng.poisson(dark_hz * duration_ps * 1e-12) if dark_hz > 0 else 0
        out.append((ch, rng.integers(0, duration_ps, n, dtype=np.int64)))
    return out


def _assemble(parts: list[tuple[int, np.ndarray]], duration_ps: int, meta: dict) -> TagStream:
    chans, times = [], []
    for ch, t in parts:
        t = np.floor(np.asarray(t, dtype=np.float64)).astype(np.int64) if t.dtype.kind == "f" else t
        t = t[t < duration_ps]
        chans.append(np.full(len(t), ch, dtype=np.uint8))
        times.append(t)
    channels = np.concatenate(chans) if chans else np.empty(0, np.uint8)
    stamps = np.concatenate(times) if times else np.empty(0, np.int64)
    order = np.lexsort((channels, stamps))
    return TagStream(channels[order], stamps[order].astype(np.uint64), duration_ps,
                     DEFAULT_ROLES, meta)


def _meta(cfg) -> dict:
    return {"model": cfg.model, "seed": str(cfg.seed), "config_hash": cfg.config_hash(),
            "rng": RNG_ALGORITHM}


def _route_exciton(rng, times, eta_x, t) -> list[tuple[int, np.ndarray]]:
    m = len(times)
    detected = rng.random(m) < eta_x
    to_a = rng.random(m) < t
    return [(ARM_A, times[detected & to_a]), (ARM_B, times[detected & ~to_a])]


def simulate_qd_pulsed(cfg: QdPulsedConfig) -> TagStream:
    """Pulsed two-photon excitation of the biexciton with blinking.

    Per pulse in the on state the cascade starts with probability
    ``p_excite``; the biexciton photon leaves after Exp(tau_xx) and the
    exciton photon a further Exp(tau_x) later. Pulses are processed in
    fixed-size blocks to bound memory.
    """
    rng = np.random.default_rng(cfg.seed)
    period = cfg.period_ps
    n_pulses = -(-cfg.duration_ps // period)
    start_on, switches = _telegraph_switches(rng, cfg.tau_on_ps, cfg.tau_off_ps,
                                             cfg.on_fraction, cfg.duration_ps)
    trig, arm_a, arm_b = [], [], []
    for first in range(0, n_pulses, PULSE_BLOCK):
        pulses = np.arange(first, min(first + PULSE_BLOCK, n_pulses), dtype=np.float64) * period
        on = _state_at(start_on, switches, pulses)
        excited = on & (rng.random(len(pulses)) < cfg.p_excite)
        tp = pulses[excited]
        t_xx = tp + rng.exponential(cfg.tau_xx_ps, len(tp))
        t_x = t_xx + rng.exponential(cfg.tau_x_ps, len(tp))
        trig.append(t_xx[rng.random(len(tp)) < cfg.eta_xx])
        (_, a), (_, b) = _route_exciton(rng, t_x, cfg.eta_x, cfg.splitter_t)
        arm_a.append(a)
        arm_b.append(b)
    parts = [(TRIGGER, np.concatenate(trig)), (ARM_A, np.concatenate(arm_a)),
             (ARM_B, np.concatenate(arm_b))]
    parts += _darks(rng, cfg.dark_hz, cfg.duration_ps, (TRIGGER, ARM_A, ARM_B))
    return _assemble(parts, cfg.duration_ps, _meta(cfg))


@numba.njit(cache=True)
def _cw_kernel(rng, duration, on_start, on_end, pump_per_ps, tau_xx, x_exit_rate, p_emit,
               xx, x, t, state, k):
    # next-reaction walk over ground(0) / biexciton(1) / exciton(2); only the
    # ground-state pump is gated by the telegraph. Fills the fixed buffers xx
    # and x and returns the walk state so the caller can resume with fresh
    # buffers; the draw sequence does not depend on where it pauses.
    nxx = 0
    nx = 0
    n_on = on_start.shape[0]
    cap_xx = xx.shape[0]
    cap_x = x.shape[0]
    while t < duration and nxx < cap_xx and nx < cap_x:
        if state == 0:
            if pump_per_ps <= 0.0:
                t = np.inf
                break
            need = rng.exponential(1.0 / pump_per_ps)
            while True:
                while k < n_on and on_end[k] <= t:
                    k += 1
                if k == n_on:
                    t = np.inf
                    break
                if t < on_start[k]:
                    t = on_start[k]
                avail = on_end[k] - t
                if need < avail:
                    t += need
                    break
                need -= avail
                t = on_end[k]
            state = 1
        elif state == 1:
            t += rng.exponential(tau_xx)
            if t >= duration:
                break
            xx[nxx] = t
            nxx += 1
            state = 2
        else:
            t += rng.exponential(1.0 / x_exit_rate)
            if t >= duration:
                break
            if rng.random() < p_emit:
                x[nx] = t
                nx += 1
                state = 0
            else:
                state = 1
    return nxx, nx, t, state, k


def _run_cw(rng, cfg: QdCwConfig, on_start, on_end) -> tuple[np.ndarray, np.ndarray]:
    decay = 1.0 / cfg.tau_x_ps
    reexcite = cfg.reexcite_hz * 1e-12
    pump = cfg.pump_rate_hz * 1e-12
    duration = float(cfg.duration_ps)
    # buffer sized from the mean cycle time, generous enough for one pass
    cycle = (1.0 / pump if pump > 0 else np.inf) + cfg.tau_xx_ps + cfg.tau_x_ps
    expect = duration / cycle * (1.0 + reexcite / decay)
    cap = int(min(1.2 * expect + 4096, 1 << 24))
    parts_xx, parts_x = [], []
    t, state, k = 0.0, 0, 0
    while t < duration:
        xx, x = np.empty(cap), np.empty(cap)
        nxx, nx, t, state, k = _cw_kernel(rng, duration, on_start, on_end, pump,
                                          cfg.tau_xx_ps, decay + reexcite, decay / (decay + reexcite),
                                          xx, x, t, state, k)
        parts_xx.append(xx[:nxx])
        parts_x.append(x[:nx])
    return np.concatenate(parts_xx), np.concatenate(parts_x)


def simulate_qd_cw(cfg: QdCwConfig) -> TagStream:
    """Continuous above-band pumping with exciton re-excitation.

    Ground to biexciton at the pump rate (only while the dot is on), biexciton
    to exciton after Exp(tau_xx) with a biexciton photon, exciton to ground
    with an exciton photon at 1/tau_x, or back to the biexciton at the
    re-excitation rate without one.
    """
    rng = np.random.default_rng(cfg.seed)
    start_on, switches = _telegraph_switches(rng, cfg.tau_on_ps, cfg.tau_off_ps,
                                             cfg.on_fraction, cfg.duration_ps)
    on_start, on_end = _on_intervals(start_on, switches)
    t_xx, t_x = _run_cw(rng, cfg, on_start, on_end)
    parts = [(TRIGGER, t_xx[rng.random(len(t_xx)) < cfg.eta_xx])]
    parts += _route_exciton(rng, t_x, cfg.eta_x, cfg.splitter_t)
    parts += _darks(rng, cfg.dark_hz, cfg.duration_ps, (TRIGGER, ARM_A, ARM_B))
    return _assemble(parts, cfg.duration_ps, _meta(cfg))


def simulate_spdc(cfg: SpdcConfig) -> TagStream:
    """Heralded down-conversion: Poisson(mu) pairs per pulse, click union per channel.

    The herald clicks at the pulse time plus a uniform integer jitter in
    ``[0, jitter_ps)``; idler clicks additionally carry ``idler_delay_ps``.
    """
    rng = np.random.default_rng(cfg.seed)
    period = cfg.period_ps
    n_pulses = -(-cfg.duration_ps // period)
    pairs = rng.poisson(cfg.mu, n_pulses)
    pulse_of_pair = np.repeat(np.arange(n_pulses, dtype=np.int64), pairs)
    m = len(pulse_of_pair)
    heralded = rng.random(m) < cfg.eta_herald
    survives = rng.random(m) < cfg.eta_idler * cfg.attenuation
    to_a = rng.random(m) < cfg.splitter_t
    jitter = max(int(cfg.jitter_ps), 1)

    def stamp(pulse_idx: np.ndarray, delay: int) -> np.ndarray:
        pulse_idx = np.unique(pulse_idx)
        return pulse_idx * period + delay + rng.integers(0, jitter, len(pulse_idx), dtype=np.int64)

    parts = [
        (TRIGGER, stamp(pulse_of_pair[heralded], 0)),
        (ARM_A, stamp(pulse_of_pair[survives & to_a], cfg.idler_delay_ps)),
        (ARM_B, stamp(pulse_of_pair[survives & ~to_a], cfg.idler_delay_ps)),
    ]
    parts += _darks(rng, cfg.dark_hz, cfg.duration_ps, (TRIGGER, ARM_A, ARM_B))
    return _assemble(parts, cfg.duration_ps, _meta(cfg))


SIMULATORS = {
    "qd_pulsed": simulate_qd_pulsed,
    "qd_cw": simulate_qd_cw,
    "spdc": simulate_spdc,
}


def simulate(cfg) -> TagStream:
    return SIMULATORS[cfg.model](cfg)


def expected_pulses(cfg) -> int:
    return math.ceil(cfg.duration_ps / cfg.period_ps)
