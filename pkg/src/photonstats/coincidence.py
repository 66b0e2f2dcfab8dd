"""Trigger-based coincidence counting and cross-correlation histograms."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .tagstream import TagStream, merge_streams


class ValueWithError(NamedTuple):
    value: float
    sigma: float


@dataclass(frozen=True)
class WindowSpec:
    """Half-open window ``[t0 + offset_ps, t0 + offset_ps + width_ps)`` after a trigger at ``t0``."""

    width_ps: int
    offset_ps: int = 0

    def __post_init__(self) -> None:
        if int(self.width_ps) != self.width_ps or self.width_ps <= 0:
            raise ValueError(f"window width must be a positive integer, got {self.width_ps}")
        object.__setattr__(self, "width_ps", int(self.width_ps))
        object.__setattr__(self, "offset_ps", int(self.offset_ps))


@dataclass(frozen=True)
class CoincidenceCounts:
    r0: int
    r1a: int
    r1b: int
    r2: int
    window: WindowSpec
    duration_ps: int = 0
    trigger_source: str = "channel"

    def __post_init__(self) -> None:
        for name in ("r0", "r1a", "r1b", "r2"):
            v = getattr(self, name)
            if v < 0:
                raise ValueError(f"{name} must be non-negative, got {v}")
            object.__setattr__(self, name, int(v))
        if self.r1a + self.r1b + self.r2 > self.r0:
            raise ValueError("r1a + r1b + r2 exceeds r0")
        if self.trigger_source not in ("channel", "synthetic_periodic"):
            raise ValueError(f"unknown trigger source {self.trigger_source!r}")

    def __add__(self, other: CoincidenceCounts) -> CoincidenceCounts:
        if not isinstance(other, CoincidenceCounts):
            return NotImplemented
        if other.window != self.window or other.trigger_source != self.trigger_source:
            raise ValueError("cannot add counts taken with different windows or trigger sources")
        return CoincidenceCounts(
            self.r0 + other.r0, self.r1a + other.r1a, self.r1b + other.r1b, self.r2 + other.r2,
            self.window, max(self.duration_ps, other.duration_ps), self.trigger_source)

    def scaled(self, factor: float) -> CoincidenceCounts:
        """Counts multiplied by ``factor`` and rounded (for scaling studies)."""
        return CoincidenceCounts(round(self.r0 * factor), round(self.r1a * factor),
                                 round(self.r1b * factor), round(self.r2 * factor),
                                 self.window, self.duration_ps, self.trigger_source)


def _clicks(signal: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    # at least one signal tag in [lo, hi)
    return np.searchsorted(signal, hi, side="left") > np.searchsorted(signal, lo, side="left")


def _count_block(trig: np.ndarray, sig_a: np.ndarray, sig_b: np.ndarray,
                 window: WindowSpec) -> tuple[int, int, int, int]:
    lo = trig + window.offset_ps
    hi = lo + window.width_ps
    a = _clicks(sig_a, lo, hi)
    b = _clicks(sig_b, lo, hi)
    both = a & b
    return (len(trig), int(np.count_nonzero(a & ~b)),
            int(np.count_nonzero(b & ~a)), int(np.count_nonzero(both)))


def _trigger_source(stream: TagStream) -> str:
    return stream.meta.get("trigger_source", "channel")


def count_triggered(stream: TagStream, window: WindowSpec, *, chunks: int = 1,
                    workers: int | None = None) -> CoincidenceCounts:
    """Classify every trigger by which signal arms clicked inside its window.

    Each trigger lands in exactly one of: neither arm, A only, B only, both.
    Several tags of one arm inside a window count as a single click, and
    overlapping windows are evaluated independently. A window running past
    the end of the stream is counted as-is (truncated).

    ``chunks`` splits the triggers into contiguous blocks that are counted
    separately (optionally on ``workers`` threads) and summed; the result is
    identical to the single-block count.
    """
    trig = stream.channel_times(stream.channel_for("trigger"))
    sig_a = stream.channel_times(stream.channel_for("signal_a"))
    sig_b = stream.channel_times(stream.channel_for("signal_b"))
    blocks = np.array_split(trig, max(1, int(chunks))) if len(trig) else [trig]
    if workers and workers > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda blk: _count_block(blk, sig_a, sig_b, window), blocks))
    else:
        parts = [_count_block(blk, sig_a, sig_b, window) for blk in blocks]
    r0, r1a, r1b, r2 = (sum(p[i] for p in parts) for i in range(4))
    return CoincidenceCounts(r0, r1a, r1b, r2, window, stream.duration_ps, _trigger_source(stream))


def count_triggered_range(stream: TagStream, window: WindowSpec, t_start: int,
                          t_stop: int) -> CoincidenceCounts:
    """Counts restricted to triggers with ``t_start <= t0 < t_stop``.

    Signal tags are looked up in the whole stream, so per-range results for a
    partition of the time axis sum to :func:`count_triggered`.
    """
    trig = stream.channel_times(stream.channel_for("trigger"))
    i, j = np.searchsorted(trig, [t_start, t_stop], side="left")
    sig_a = stream.channel_times(stream.channel_for("signal_a"))
    sig_b = stream.channel_times(stream.channel_for("signal_b"))
    r = _count_block(trig[i:j], sig_a, sig_b, window)
    return CoincidenceCounts(*r, window, stream.duration_ps, _trigger_source(stream))


def synth_periodic_triggers(period_ps: int, phase_ps: int, duration_ps: int, *,
                            channel: int = 3) -> TagStream:
    """Trigger-only stream with tags at ``phase + k * period`` below ``duration``."""
    if period_ps <= 0:
        raise ValueError("period must be positive")
    if not 0 <= phase_ps < period_ps:
        raise ValueError(f"phase {phase_ps} outside [0, period); normalize it first")
    if phase_ps >= duration_ps:
        times = np.empty(0, dtype=np.uint64)
    else:
        n = (duration_ps - phase_ps - 1) // period_ps + 1
        times = phase_ps + period_ps * np.arange(n, dtype=np.uint64)
    return TagStream(np.full(len(times), channel, dtype=np.uint8), times, duration_ps,
                     {channel: "trigger"},
                     {"trigger_source": "synthetic_periodic", "trigger_period_ps": str(period_ps),
                      "trigger_phase_ps": str(phase_ps)})


def with_periodic_triggers(stream: TagStream, period_ps: int, phase_ps: int) -> TagStream:
    """``stream`` with its trigger channel demoted to ``other`` and laser triggers merged in.

    The synthetic triggers go on the lowest channel number not yet in use.
    """
    phase_ps %= period_ps
    roles = dict(stream.channel_roles)
    for ch, role in roles.items():
        if role == "trigger":
            roles[ch] = "other"
    free = next(ch for ch in range(256) if ch not in roles)
    laser = synth_periodic_triggers(period_ps, phase_ps, stream.duration_ps, channel=free)
    return merge_streams(stream.with_roles(roles), laser)


@dataclass(frozen=True, eq=False)
class Histogram:
    """Counts of ``t_y - t_x`` in bins ``[start, start + bin_ps)``."""

    bin_start_ps: np.ndarray
    counts: np.ndarray
    bin_ps: int

    @property
    def range_ps(self) -> int:
        return -int(self.bin_start_ps[0]) if len(self.bin_start_ps) else 0

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("bin_start_ps,count\n")
            for start, c in zip(self.bin_start_ps.tolist(), self.counts.tolist()):
                fh.write(f"{start},{c}\n")


def cross_histogram(stream: TagStream, ch_x: int, ch_y: int, bin_ps: int, range_ps: int,
                    *, block: int = 65536) -> Histogram:
    """Histogram of delays ``t_y - t_x`` over all ordered pairs within ``[-range, range)``.

    For ``ch_x == ch_y`` the zero-delay self pair of each tag is excluded.
    The x tags are processed in blocks against a sliding search window into
    the sorted y tags, so memory is bounded by the pairs of one block.
    """
    if bin_ps <= 0:
        raise ValueError("bin width must be positive")
    if range_ps <= 0 or range_ps % bin_ps:
        raise ValueError(f"range {range_ps} must be a positive multiple of the bin {bin_ps}")
    nbins = 2 * range_ps // bin_ps
    starts = np.arange(-range_ps, range_ps, bin_ps, dtype=np.int64)
    counts = np.zeros(nbins, dtype=np.int64)
    tx = stream.channel_times(ch_x)
    ty = tx if ch_x == ch_y else stream.channel_times(ch_y)
    if len(tx) and len(ty):
        for s in range(0, len(tx), block):
            xs = tx[s:s + block]
            lo = np.searchsorted(ty, xs - range_ps, side="left")
            hi = np.searchsorted(ty, xs + range_ps, side="left")
            n = hi - lo
            total = int(n.sum())
            if total == 0:
                continue
            first = np.repeat(lo - np.concatenate(([0], np.cumsum(n)[:-1])), n)
            yidx = first + np.arange(total)
            xrep = np.repeat(np.arange(s, s + len(xs)), n)
            dt = ty[yidx] - tx[xrep]
            if ch_x == ch_y:
                dt = dt[yidx != xrep]
            counts += np.bincount((dt + range_ps) // bin_ps, minlength=nbins)
    return Histogram(starts, counts, bin_ps)


def _peak_area(hist: Histogram, center: float, half: float) -> int | None:
    mid = hist.bin_start_ps + hist.bin_ps / 2.0
    lo, hi = center - half, center + half
    if lo < hist.bin_start_ps[0] or hi > hist.bin_start_ps[-1] + hist.bin_ps:
        return None
    return int(hist.counts[(mid >= lo) & (mid < hi)].sum())


def g2_peak_ratio(hist: Histogram, period_ps: float, integration_ps: float,
                  far_peak_min_index: int) -> ValueWithError:
    """Zero-delay peak area over the mean area of far side peaks.

    Peak ``k`` is centred at ``k * period_ps`` and integrates the bins whose
    centres lie in ``[k*period - integration/2, k*period + integration/2)``.
    Side peaks with ``|k| >= far_peak_min_index`` that fit entirely inside the
    histogram form the normalisation. Errors are Poisson on the summed bins;
    an empty centre peak is given the one-count error.
    """
    half = integration_ps / 2.0
    center = _peak_area(hist, 0.0, half)
    if center is None:
        raise ValueError("integration window does not fit around zero delay")
    far = []
    k = max(1, int(far_peak_min_index))
    while True:
        pair = [_peak_area(hist, s * k * period_ps, half) for s in (-1, 1)]
        if pair[0] is None and pair[1] is None:
            break
        far.extend(a for a in pair if a is not None)
        k += 1
    if not far:
        raise ValueError(f"histogram holds no peaks with |index| >= {far_peak_min_index}")
    total = sum(far)
    if total == 0:
        raise ValueError("zero normalisation area")
    mean = total / len(far)
    ratio = center / mean
    sigma = math.sqrt(max(center, 1)) / mean if center == 0 else ratio * math.sqrt(1.0 / center + 1.0 / total)
    return ValueWithError(ratio, sigma)


def peak_areas(hist: Histogram, period_ps: float, integration_ps: float) -> dict[int, int]:
    """Area of every peak that fits in the histogram, keyed by peak index."""
    half = integration_ps / 2.0
    out = {}
    kmax = int(hist.range_ps // period_ps) + 1
    for k in range(-kmax, kmax + 1):
        a = _peak_area(hist, k * period_ps, half)
        if a is not None:
            out[k] = a
    return out
