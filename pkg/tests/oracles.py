"""Brute-force references shared by the unit and acceptance tests.

Each compares every (trigger, signal) or (x, y) pair explicitly; nothing
here uses sorted-order searches, so agreement with the library is a check
of its sliding-window logic.
"""
from __future__ import annotations

import numpy as np

from photonstats.tagstream import TagStream

_BLOCK = 1024


def _diffs(y: np.ndarray, x: np.ndarray, shift: int) -> np.ndarray:
    # every y - x + shift viewed as unsigned, so one comparison tests
    # 0 <= d < bound (negatives wrap high); int32 halves the memory traffic
    d = y.astype(np.int32)[None, :] - x.astype(np.int32)[:, None]
    d += np.int32(shift)
    return d.view(np.uint32)


def _times(stream: TagStream) -> np.ndarray:
    if stream.duration_ps >= 1 << 29:
        raise ValueError("brute-force oracles take streams shorter than 2^29 ps")
    return stream.times.astype(np.int64)


def _any_in_window(trig: np.ndarray, sig: np.ndarray, lo: int, hi: int) -> np.ndarray:
    hit = np.zeros(len(trig), dtype=bool)
    for s in range(0, len(trig), _BLOCK):
        hit[s:s + _BLOCK] = (_diffs(sig, trig[s:s + _BLOCK], -lo) < hi - lo).any(axis=1)
    return hit


def brute_counts(stream: TagStream, width: int, offset: int = 0) -> tuple[int, int, int, int]:
    ch = {role: ch for ch, role in stream.channel_roles.items()}
    times = _times(stream)
    trig = times[stream.channels == ch["trigger"]]
    a = _any_in_window(trig, times[stream.channels == ch["signal_a"]], offset, offset + width)
    b = _any_in_window(trig, times[stream.channels == ch["signal_b"]], offset, offset + width)
    return len(trig), int((a & ~b).sum()), int((b & ~a).sum()), int((a & b).sum())


def brute_histogram(stream: TagStream, ch_x: int, ch_y: int, bin_ps: int,
                    range_ps: int) -> np.ndarray:
    times = _times(stream)
    ix = np.flatnonzero(stream.channels == ch_x)
    iy = np.flatnonzero(stream.channels == ch_y)
    counts = np.zeros(2 * range_ps // bin_ps, dtype=np.int64)
    ty = times[iy]
    for s in range(0, len(ix), _BLOCK):
        xs = ix[s:s + _BLOCK]
        d = _diffs(ty, times[xs], range_ps)
        keep = d < 2 * range_ps
        if ch_x == ch_y:
            keep &= xs[:, None] != iy[None, :]
        counts += np.bincount(d[keep] // bin_ps, minlength=len(counts))
    return counts


def random_stream(rng: np.random.Generator, max_tags: int = 10_000) -> TagStream:
    """Clustered random stream on channels 0-2 so windows see many coincidences."""
    n = int(rng.integers(0, max_tags + 1))
    span = int(rng.integers(1, 50 * max(n, 1)))
    times = np.sort(rng.integers(0, span, n))
    chans = rng.integers(0, 3, n).astype(np.uint8)
    return TagStream(chans, times.astype(np.uint64), span)
