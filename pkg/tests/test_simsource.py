from __future__ import annotations

import json
import math

import numpy as np
import pytest

from photonstats.coincidence import (
    WindowSpec,
    count_triggered,
    cross_histogram,
    peak_areas,
    with_periodic_triggers,
)
from photonstats.estimators import estimate_stats
from photonstats.simsource import (
    QdCwConfig,
    QdPulsedConfig,
    SpdcConfig,
    load_config,
    oracle_stats,
    simulate,
)

SHORT = 1_200_000_000  # 1.2 ms


def _z(cfg, window, **kw):
    s = estimate_stats(count_triggered(simulate(cfg), window), cfg.splitter_t)
    o = oracle_stats(cfg, window, **kw)
    return [(getattr(s, n) - getattr(o, n)) / getattr(s, "sigma_" + n) for n in ("p0", "p1", "p2plus")]


@pytest.mark.parametrize("cfg", [
    QdPulsedConfig(duration_ps=SHORT, eta_x=0.1, eta_xx=0.1),
    QdCwConfig(duration_ps=SHORT, eta_x=0.1, eta_xx=0.1),
    SpdcConfig(duration_ps=SHORT, mu=0.05),
], ids=lambda c: c.model)
def test_deterministic_sorted_in_range(cfg):
    a, b = simulate(cfg), simulate(cfg)
    assert a == b and len(a) > 0
    assert np.all(np.diff(a.times.astype(np.int64)) >= 0)
    assert int(a.times[-1]) < cfg.duration_ps
    assert a.meta["config_hash"] == cfg.config_hash() and a.meta["seed"] == "0"
    assert simulate(cfg.replace(seed=1)) != a


def test_config_validation():
    with pytest.raises(ValueError, match="eta_x"):
        QdPulsedConfig(eta_x=1.5)
    with pytest.raises(ValueError, match="splitter_t"):
        SpdcConfig(splitter_t=1.0)
    with pytest.raises(ValueError, match="inconsistent"):
        QdCwConfig(on_fraction=0.9)
    with pytest.raises(ValueError, match="not implemented"):
        SpdcConfig(pair_statistics="thermal")
    with pytest.raises(ValueError, match="unknown"):
        load_config("spdc", {"mu": 0.1, "bogus": 1})
    with pytest.raises(ValueError, match="unknown model"):
        load_config("laser")


def test_on_fraction_derives_off_dwell(tmp_path):
    cfg = load_config("qd_pulsed", {"on_fraction": 0.25, "tau_on_ps": 1000})
    assert cfg.tau_off_ps == pytest.approx(3000)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert load_config("qd_pulsed", str(p)) == cfg
    assert cfg.config_hash() != QdPulsedConfig().config_hash()


def test_degenerate_sources_are_empty():
    assert len(simulate(QdPulsedConfig(p_excite=0.0, dark_hz=0, duration_ps=SHORT))) == 0
    assert len(simulate(SpdcConfig(mu=0.0, dark_hz=0, duration_ps=SHORT))) == 0
    assert len(simulate(QdCwConfig(pump_rate_hz=0.0, dark_hz=0, duration_ps=SHORT))) == 0


def test_zero_pump_leaves_dark_counts_only():
    s = simulate(QdCwConfig(pump_rate_hz=0.0, dark_hz=1e6, duration_ps=SHORT))
    for ch in (0, 1, 2):
        n = len(s.channel_times(ch))
        assert abs(n - 1200) < 5 * math.sqrt(1200)


def test_zero_efficiency_oracle_is_vacuum():
    for cfg in (QdPulsedConfig(eta_x=0, dark_hz=0), QdCwConfig(eta_x=0, dark_hz=0),
                SpdcConfig(eta_idler=0, dark_hz=0)):
        o = oracle_stats(cfg, WindowSpec(5000))
        assert o.p0 == pytest.approx(1.0, abs=1e-15) and o.p2plus == pytest.approx(0, abs=1e-15)


def test_pulsed_without_darks_has_no_multiphoton():
    o = oracle_stats(QdPulsedConfig(dark_hz=0), WindowSpec(3000))
    # exponential tails always leave a sliver of neighbour-pulse capture
    assert 0 <= o.p2plus < 1e-12


def test_full_efficiency_capture():
    cfg = QdPulsedConfig(eta_x=1.0, eta_xx=1.0, dark_hz=0, tau_off_ps=0)
    w = 1000
    o = oracle_stats(cfg, WindowSpec(w))
    # flooring both stamps shifts the window by half a picosecond on average
    assert o.p1 == pytest.approx(1 - math.exp(-(w - 0.5) / cfg.tau_x_ps), rel=1e-7)


@pytest.mark.parametrize("cfg, window", [
    (QdPulsedConfig(eta_x=0.3, eta_xx=0.5, duration_ps=SHORT), WindowSpec(11240)),
    (QdPulsedConfig(eta_x=0.3, eta_xx=0.05, dark_hz=2e5, duration_ps=SHORT), WindowSpec(20000, -3000)),
    (QdCwConfig(eta_x=0.05, eta_xx=0.05, duration_ps=SHORT), WindowSpec(3840)),
    (QdCwConfig(eta_x=0.1, eta_xx=0.02, dark_hz=2e5, duration_ps=SHORT), WindowSpec(3840, 200)),
    (SpdcConfig(mu=0.05, eta_idler=0.5, duration_ps=SHORT), WindowSpec(1000)),
    (SpdcConfig(mu=0.05, eta_idler=0.5, dark_hz=3e5, duration_ps=SHORT), WindowSpec(5000, -2000)),
], ids=["qd-pulsed", "qd-pulsed-dark", "qd-cw", "qd-cw-dark", "spdc", "spdc-dark"])
def test_simulation_agrees_with_oracle(cfg, window):
    z = np.array([_z(cfg.replace(seed=s), window) for s in range(8)])
    assert np.all(np.abs(z) < 4.5)
    assert np.all(np.abs(z.mean(0)) < 3 / math.sqrt(len(z)) + 0.5)


def test_laser_triggered_oracle():
    cfg = QdPulsedConfig(eta_x=0.3, eta_xx=0.5, tau_off_ps=0, duration_ps=SHORT)
    w = WindowSpec(5000)
    for phase in (0, 3000):
        s = with_periodic_triggers(simulate(cfg), cfg.period_ps, phase)
        counts = count_triggered(s, w)
        assert counts.trigger_source == "synthetic_periodic" or counts.r0 > 0
        st = estimate_stats(counts, cfg.splitter_t)
        o = oracle_stats(cfg, w, laser_phase_ps=phase)
        assert counts.r0 == round(o.expected_r0)
        assert abs(st.p1 - o.p1) < 4 * st.sigma_p1
    with pytest.raises(ValueError, match="unsupported config combination"):
        oracle_stats(QdCwConfig(), w, laser_phase_ps=0)
    with pytest.raises(TypeError):
        oracle_stats(object(), w)


def test_cw_oracle_rejects_negative_offset():
    with pytest.raises(ValueError):
        oracle_stats(QdCwConfig(), WindowSpec(1000, -10))


def test_spdc_single_photon_fraction_at_full_transmission():
    o = oracle_stats(SpdcConfig(), WindowSpec(1000))
    assert o.p1 == pytest.approx(0.14, rel=0.02)


def test_spdc_attenuation_scaling():
    w = WindowSpec(1000)
    base = oracle_stats(SpdcConfig(dark_hz=0), w)
    for att in (0.5, 0.1, 0.02):
        o = oracle_stats(SpdcConfig(dark_hz=0, attenuation=att), w)
        assert o.p1 / base.p1 == pytest.approx(att, rel=0.1)
        assert o.p2plus / base.p2plus == pytest.approx(att**2, rel=0.1)


def test_blinking_bunches_exciton_clicks():
    cfg = QdPulsedConfig(eta_x=0.3, eta_xx=0.0, dark_hz=0, tau_on_ps=50_000, tau_off_ps=100_000,
                         duration_ps=SHORT)
    s = simulate(cfg)
    period = cfg.period_ps
    hist = cross_histogram(s, 1, 2, 100, 60 * period)
    areas = peak_areas(hist, period, 2000)
    near = np.mean([areas[k] for k in (-2, -1, 1, 2)])
    far = np.mean([a for k, a in areas.items() if abs(k) >= 40])
    assert near / far > 1.05


def test_cw_pump_raises_multiphoton_content():
    w = WindowSpec(3840)
    ratio = []
    for rate in (1e8, 5e8, 2e9, 8e9):
        o = oracle_stats(QdCwConfig(pump_rate_hz=rate), w)
        ratio.append(o.p2plus / o.p1**2)
    assert all(np.diff(ratio) > 0)
