"""Time-tag event streams and the PTAG v1 / CSV file formats.

A stream is held as two parallel numpy arrays (``channels`` as uint8 and
``times`` as uint64 picoseconds) rather than a list of objects; ``TimeTag``
exists for record-level access and construction in tests.

Binary layout (all little-endian)::

    offset  size  field
    0       4     magic b"PTAG"
    4       2     version (1)
    6       2     resolution_ps (1)
    8       8     duration_ps
    16      9*n   records: channel u8, time_ps u64
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

MAGIC = b"PTAG"
VERSION = 1
RESOLUTION_PS = 1
HEADER = struct.Struct("<4sHHQ")
RECORD_DTYPE = np.dtype([("channel", "u1"), ("time", "<u8")])
CSV_HEADER = "channel,time_ps"

ROLES = ("trigger", "signal_a", "signal_b", "other")
DEFAULT_ROLES = {0: "trigger", 1: "signal_a", 2: "signal_b"}


class StreamFormatError(ValueError):
    """Raised when a stream file or stream contents violate the format."""


@dataclass(frozen=True)
class TimeTag:
    channel: int
    time_ps: int


def _frozen(arr: np.ndarray, dtype) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class TagStream:
    """Immutable, time-sorted sequence of detection events.

    Ties at equal ``time_ps`` are legal and kept in construction order.
    """

    channels: np.ndarray
    times: np.ndarray
    duration_ps: int
    channel_roles: Mapping[int, str] = field(default_factory=lambda: dict(DEFAULT_ROLES))
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        channels = np.asarray(self.channels)
        times = np.asarray(self.times)
        if channels.shape != times.shape or channels.ndim != 1:
            raise StreamFormatError("channels and times must be 1-d arrays of equal length")
        if len(times) and (times.min() < 0 if times.dtype.kind == "i" else False):
            raise StreamFormatError("negative time stamp")
        object.__setattr__(self, "channels", _frozen(channels, np.uint8))
        object.__setattr__(self, "times", _frozen(times, np.uint64))
        object.__setattr__(self, "duration_ps", int(self.duration_ps))
        roles = {int(k): str(v) for k, v in dict(self.channel_roles).items()}
        for ch, role in roles.items():
            if role not in ROLES:
                raise StreamFormatError(f"unknown role {role!r} for channel {ch}")
        object.__setattr__(self, "channel_roles", roles)
        object.__setattr__(self, "meta", {str(k): str(v) for k, v in dict(self.meta).items()})
        _validate(self.channels, self.times, self.duration_ps, roles)

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self) -> Iterator[TimeTag]:
        for ch, t in zip(self.channels.tolist(), self.times.tolist()):
            yield TimeTag(ch, t)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TagStream):
            return NotImplemented
        return (
            self.duration_ps == other.duration_ps
            and dict(self.channel_roles) == dict(other.channel_roles)
            and np.array_equal(self.channels, other.channels)
            and np.array_equal(self.times, other.times)
        )

    @property
    def tags(self) -> list[TimeTag]:
        return list(self)

    @classmethod
    def from_tags(
        cls,
        tags: Iterable[TimeTag | tuple[int, int]],
        duration_ps: int,
        channel_roles: Mapping[int, str] | None = None,
        meta: Mapping[str, str] | None = None,
    ) -> TagStream:
        pairs = [(t.channel, t.time_ps) if isinstance(t, TimeTag) else tuple(t) for t in tags]
        channels = np.array([p[0] for p in pairs], dtype=np.uint8)
        times = np.array([p[1] for p in pairs], dtype=np.uint64)
        return cls(channels, times, duration_ps,
                   DEFAULT_ROLES if channel_roles is None else channel_roles, meta or {})

    def channel_for(self, role: str) -> int:
        """Return the unique channel carrying ``role``."""
        found = [ch for ch, r in self.channel_roles.items() if r == role]
        if len(found) != 1:
            raise StreamFormatError(
                f"expected exactly one channel with role {role!r}, found {len(found)}")
        return found[0]

    def channel_times(self, channel: int) -> np.ndarray:
        """Sorted time stamps of one channel, as int64."""
        return self.times[self.channels == channel].astype(np.int64)

    def with_roles(self, channel_roles: Mapping[int, str]) -> TagStream:
        return TagStream(self.channels, self.times, self.duration_ps, channel_roles, self.meta)

    def with_meta(self, **extra: str) -> TagStream:
        return TagStream(self.channels, self.times, self.duration_ps, self.channel_roles,
                         {**self.meta, **extra})


def _validate(channels: np.ndarray, times: np.ndarray, duration_ps: int,
              roles: Mapping[int, str]) -> None:
    if duration_ps < 0:
        raise StreamFormatError("duration must be non-negative")
    if len(times) == 0:
        return
    bad = np.flatnonzero(times[1:] < times[:-1])
    if bad.size:
        raise StreamFormatError(f"tags not sorted by time at index {int(bad[0]) + 1}")
    if int(times[-1]) > duration_ps:
        idx = int(np.flatnonzero(times > np.uint64(duration_ps))[0])
        raise StreamFormatError(f"tag {idx} at {int(times[idx])} ps exceeds duration {duration_ps} ps")
    known = np.array(sorted(roles), dtype=np.int64)
    unknown = ~np.isin(channels.astype(np.int64), known)
    if unknown.any():
        idx = int(np.flatnonzero(unknown)[0])
        raise StreamFormatError(f"unknown channel {int(channels[idx])} at index {idx}")


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def write_stream(stream: TagStream, path: str | os.PathLike, format: str = "binary",
                 *, sidecar: bool | None = None) -> None:
    """Write ``stream`` to ``path``.

    The binary file is self-contained except for channel roles and meta, which
    go to a ``<path>.meta.json`` sidecar when ``sidecar`` is true (the default
    for CSV, where the sidecar also carries the duration).
    """
    path = Path(path)
    if format == "binary":
        rec = np.empty(len(stream), dtype=RECORD_DTYPE)
        rec["channel"] = stream.channels
        rec["time"] = stream.times
        with open(path, "wb") as fh:
            fh.write(HEADER.pack(MAGIC, VERSION, RESOLUTION_PS, stream.duration_ps))
            fh.write(rec.tobytes())
        want_sidecar = bool(sidecar)
    elif format == "csv":
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            if len(stream):
                body = np.column_stack([stream.channels.astype(np.uint64), stream.times])
                np.savetxt(fh, body, fmt="%d", delimiter=",")
        want_sidecar = True if sidecar is None else sidecar
    else:
        raise ValueError(f"unknown format {format!r}")
    if want_sidecar:
        doc = {
            "duration_ps": stream.duration_ps,
            "resolution_ps": RESOLUTION_PS,
            "channel_roles": {str(k): v for k, v in sorted(stream.channel_roles.items())},
            "meta": dict(stream.meta),
        }
        _sidecar(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_stream(path: str | os.PathLike, format: str = "binary", *,
                duration_ps: int | None = None,
                channel_roles: Mapping[int, str] | None = None) -> TagStream:
    """Read a stream written by :func:`write_stream`.

    Roles come from, in order: the ``channel_roles`` argument, the sidecar,
    the default 0/1/2 convention. Tags on channels outside the role map are
    rejected.
    """
    path = Path(path)
    side = _sidecar(path)
    side_doc = json.loads(side.read_text(encoding="utf-8")) if side.exists() else {}
    roles = channel_roles
    if roles is None and "channel_roles" in side_doc:
        roles = {int(k): v for k, v in side_doc["channel_roles"].items()}
    if roles is None:
        roles = DEFAULT_ROLES
    meta = side_doc.get("meta", {})

    if format == "binary":
        raw = path.read_bytes()
        if len(raw) < HEADER.size:
            raise StreamFormatError("file shorter than the 16-byte header")
        magic, version, resolution, file_duration = HEADER.unpack_from(raw, 0)
        if magic != MAGIC:
            raise StreamFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise StreamFormatError(f"unsupported version {version}")
        if resolution != RESOLUTION_PS:
            raise StreamFormatError(f"unsupported resolution {resolution} ps")
        body = len(raw) - HEADER.size
        if body % RECORD_DTYPE.itemsize:
            raise StreamFormatError(f"truncated record: body of {body} bytes")
        rec = np.frombuffer(raw, dtype=RECORD_DTYPE, offset=HEADER.size)
        if duration_ps is not None and duration_ps != file_duration:
            raise StreamFormatError("duration argument disagrees with file header")
        return TagStream(rec["channel"], rec["time"], file_duration, roles, meta)

    if format == "csv":
        if duration_ps is None:
            duration_ps = side_doc.get("duration_ps")
        if duration_ps is None:
            raise StreamFormatError("CSV stream needs a duration (sidecar or argument)")
        with open(path, encoding="utf-8") as fh:
            first = fh.readline().strip()
            if first != CSV_HEADER:
                raise StreamFormatError(f"bad CSV header {first!r}")
            try:
                body = np.loadtxt(fh, delimiter=",", dtype=np.uint64, ndmin=2)
            except ValueError as exc:
                raise StreamFormatError(f"malformed CSV record: {exc}") from exc
        if body.size == 0:
            body = np.empty((0, 2), dtype=np.uint64)
        if body.shape[1] != 2:
            raise StreamFormatError("CSV records must have two fields")
        if len(body) and body[:, 0].max() > 255:
            raise StreamFormatError("channel does not fit in 8 bits")
        return TagStream(body[:, 0], body[:, 1], int(duration_ps), roles, meta)

    raise ValueError(f"unknown format {format!r}")


def merge_streams(a: TagStream, b: TagStream) -> TagStream:
    """Time-ordered merge; at equal times tags of ``a`` precede tags of ``b``."""
    if a.duration_ps != b.duration_ps:
        raise StreamFormatError(f"duration mismatch: {a.duration_ps} vs {b.duration_ps}")
    roles = dict(a.channel_roles)
    for ch, role in b.channel_roles.items():
        if ch in roles and roles[ch] != role:
            raise StreamFormatError(f"channel {ch} has role {roles[ch]!r} in a and {role!r} in b")
        roles[ch] = role
    times = np.concatenate([a.times, b.times])
    channels = np.concatenate([a.channels, b.channels])
    order = np.argsort(times, kind="stable")
    return TagStream(channels[order], times[order], a.duration_ps, roles, {**a.meta, **b.meta})
