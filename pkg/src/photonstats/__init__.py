"""Photon-number statistics and non-Gaussianity witness from time-tagged detections."""
from __future__ import annotations

from .coincidence import (
    CoincidenceCounts,
    Histogram,
    ValueWithError,
    WindowSpec,
    count_triggered,
    cross_histogram,
    g2_peak_ratio,
    synth_periodic_triggers,
    with_periodic_triggers,
)
from .estimators import (
    PhotonStats,
    SplittingRatio,
    alpha,
    estimate_stats,
    g2_from_stats,
    k_factor,
    noise_floor_triples,
)
from .ngwitness import (
    BoundaryPoint,
    OutOfReachError,
    WitnessResult,
    boundary_p2_at_p1,
    boundary_point,
    p1_peak,
    sample_boundary,
    witness,
    witness_from_values,
)
from .tagstream import StreamFormatError, TagStream, TimeTag, merge_streams, read_stream, write_stream

__version__ = "0.1.0"

__all__ = [
    "CoincidenceCounts", "Histogram", "ValueWithError", "WindowSpec", "count_triggered",
    "cross_histogram", "g2_peak_ratio", "synth_periodic_triggers", "with_periodic_triggers",
    "PhotonStats", "SplittingRatio", "alpha", "estimate_stats", "g2_from_stats", "k_factor",
    "noise_floor_triples",
    "BoundaryPoint", "OutOfReachError", "WitnessResult", "boundary_p2_at_p1", "boundary_point",
    "p1_peak", "sample_boundary", "witness", "witness_from_values",
    "StreamFormatError", "TagStream", "TimeTag", "merge_streams", "read_stream", "write_stream",
    "__version__",
]
