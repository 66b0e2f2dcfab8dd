"""Parameter sets for the three source simulators.

Configs are frozen dataclasses; :func:`load_config` builds one from a JSON
document and rejects unknown keys.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any, Mapping

# 12 ms: a little over 10^6 pulses at 84 MHz
DEFAULT_DURATION_PS = 12_000_000_000


def _prob(name: str, v: float) -> None:
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {v}")


def _nonneg(name: str, v: float) -> None:
    if not v >= 0.0:
        raise ValueError(f"{name} must be non-negative, got {v}")


def _positive(name: str, v: float) -> None:
    if not v > 0.0:
        raise ValueError(f"{name} must be positive, got {v}")


def _splitter(v: float) -> None:
    if not 0.0 < v < 1.0:
        raise ValueError(f"splitter_t must lie in (0, 1), got {v}")


class _ConfigMixin:
    model: str = ""

    @property
    def period_ps(self) -> int:
        return int(round(1e12 / self.rep_rate_hz))

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        doc = json.dumps({"model": self.model, **self.to_dict()}, sort_keys=True)
        return hashlib.sha256(doc.encode()).hexdigest()[:16]

    def replace(self, **changes):
        base = self.to_dict()
        if "on_fraction" in base:
            # on_fraction is derived unless changed explicitly
            base.pop("on_fraction")
            if "on_fraction" in changes and "tau_off_ps" not in changes:
                base.pop("tau_off_ps")
        return type(self).from_dict({**base, **changes})

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(doc) - names
        if unknown:
            raise ValueError(f"unknown {cls.model} config keys: {sorted(unknown)}")
        return cls(**_prepare(cls, dict(doc)))


def _prepare(cls, doc: dict) -> dict:
    # on_fraction alone fixes the off dwell relative to the on dwell
    if "on_fraction" in doc and doc["on_fraction"] is not None and "tau_off_ps" not in doc:
        f = float(doc["on_fraction"])
        if not 0.0 < f <= 1.0:
            raise ValueError(f"on_fraction must lie in (0, 1], got {f}")
        tau_on = float(doc.get("tau_on_ps", cls.__dataclass_fields__["tau_on_ps"].default))
        doc["tau_off_ps"] = tau_on * (1.0 - f) / f
    return doc


def _blinking(cfg) -> None:
    _positive("tau_on_ps", cfg.tau_on_ps)
    _nonneg("tau_off_ps", cfg.tau_off_ps)
    derived = cfg.tau_on_ps / (cfg.tau_on_ps + cfg.tau_off_ps)
    if cfg.on_fraction is None:
        object.__setattr__(cfg, "on_fraction", derived)
    elif not math.isclose(cfg.on_fraction, derived, rel_tol=1e-9):
        raise ValueError(f"on_fraction {cfg.on_fraction} inconsistent with dwell times "
                         f"(tau_on/(tau_on+tau_off) = {derived})")


@dataclass(frozen=True)
class QdPulsedConfig(_ConfigMixin):
    """Resonantly pumped quantum dot: one cascade attempt per laser pulse."""

    rep_rate_hz: float = 84e6
    p_excite: float = 0.60
    tau_on_ps: float = 1e6
    tau_off_ps: float = 2e6
    on_fraction: float | None = None
    tau_x_ps: float = 710.0
    tau_xx_ps: float = 355.0
    eta_xx: float = 0.003
    eta_x: float = 0.003
    splitter_t: float = 0.54
    dark_hz: float = 500.0
    duration_ps: int = DEFAULT_DURATION_PS
    seed: int = 0

    model = "qd_pulsed"

    def __post_init__(self) -> None:
        _positive("rep_rate_hz", self.rep_rate_hz)
        _prob("p_excite", self.p_excite)
        _prob("eta_xx", self.eta_xx)
        _prob("eta_x", self.eta_x)
        _positive("tau_x_ps", self.tau_x_ps)
        _positive("tau_xx_ps", self.tau_xx_ps)
        _splitter(self.splitter_t)
        _nonneg("dark_hz", self.dark_hz)
        _positive("duration_ps", self.duration_ps)
        _blinking(self)


@dataclass(frozen=True)
class QdCwConfig(_ConfigMixin):
    """Incoherently (above-band) pumped quantum dot in continuous time.

    The exciton-to-biexciton re-excitation rate is ``reexcite_rate_hz`` when
    given, else ``reexcite_ratio * pump_rate_hz``.
    """

    pump_rate_hz: float = 5e8
    reexcite_rate_hz: float | None = None
    reexcite_ratio: float = 0.3
    tau_x_ps: float = 710.0
    tau_xx_ps: float = 355.0
    eta_xx: float = 0.003
    eta_x: float = 0.003
    splitter_t: float = 0.64
    dark_hz: float = 500.0
    tau_on_ps: float = 1e6
    tau_off_ps: float = 2e6
    on_fraction: float | None = None
    duration_ps: int = DEFAULT_DURATION_PS
    seed: int = 0

    model = "qd_cw"

    def __post_init__(self) -> None:
        _nonneg("pump_rate_hz", self.pump_rate_hz)
        if self.reexcite_rate_hz is not None:
            _nonneg("reexcite_rate_hz", self.reexcite_rate_hz)
        _nonneg("reexcite_ratio", self.reexcite_ratio)
        _positive("tau_x_ps", self.tau_x_ps)
        _positive("tau_xx_ps", self.tau_xx_ps)
        _prob("eta_xx", self.eta_xx)
        _prob("eta_x", self.eta_x)
        _splitter(self.splitter_t)
        _nonneg("dark_hz", self.dark_hz)
        _positive("duration_ps", self.duration_ps)
        _blinking(self)

    @property
    def reexcite_hz(self) -> float:
        if self.reexcite_rate_hz is not None:
            return self.reexcite_rate_hz
        return self.reexcite_ratio * self.pump_rate_hz


@dataclass(frozen=True)
class SpdcConfig(_ConfigMixin):
    """Pulsed heralded down-conversion source with Poissonian pair number.

    ``eta_idler`` is the whole idler-arm efficiency (coupling, fibre splitter,
    detector); 0.14 reproduces a 14 % single-photon fraction at full
    transmission. Idler clicks are stamped ``idler_delay_ps`` after the pulse
    so that they follow the herald inside a forward window.
    """

    mu: float = 0.003
    rep_rate_hz: float = 84e6
    eta_herald: float = 0.74 * 0.5
    eta_idler: float = 0.14
    attenuation: float = 1.0
    splitter_t: float = 0.5
    dark_hz: float = 500.0
    jitter_ps: int = 100
    idler_delay_ps: int = 200
    pair_statistics: str = "poisson"
    duration_ps: int = DEFAULT_DURATION_PS
    seed: int = 0

    model = "spdc"

    def __post_init__(self) -> None:
        _nonneg("mu", self.mu)
        _positive("rep_rate_hz", self.rep_rate_hz)
        _prob("eta_herald", self.eta_herald)
        _prob("eta_idler", self.eta_idler)
        _prob("attenuation", self.attenuation)
        _splitter(self.splitter_t)
        _nonneg("dark_hz", self.dark_hz)
        _nonneg("jitter_ps", self.jitter_ps)
        _nonneg("idler_delay_ps", self.idler_delay_ps)
        _positive("duration_ps", self.duration_ps)
        if self.pair_statistics != "poisson":
            raise ValueError(f"pair statistics {self.pair_statistics!r} not implemented "
                             "(only 'poisson')")


MODELS = {
    "qd_pulsed": QdPulsedConfig,
    "qd_cw": QdCwConfig,
    "spdc": SpdcConfig,
}


def load_config(model: str, doc: Mapping[str, Any] | str | None = None):
    """Config for ``model`` from a mapping, a JSON file path, or defaults."""
    try:
        cls = MODELS[model]
    except KeyError:
        raise ValueError(f"unknown model {model!r}; choose from {sorted(MODELS)}") from None
    if doc is None:
        return cls()
    if isinstance(doc, str):
        with open(doc, encoding="utf-8") as fh:
            doc = json.load(fh)
    return cls.from_dict(doc)
