import math

import numpy as np
import pytest

from app.models.config import default_config
from app.models.signals import Precoder
from app.services.signal_service import draw_channels, uniform_precoder
from app.services.sinr_service import user_sinr
from app.utils.errors import DimensionError


@pytest.fixture
def cfg():
    return default_config(num_antennas=4, num_subcarriers=16, repeater_user_chan_var_db=0.0)


@pytest.fixture
def channels(cfg):
    return draw_channels(cfg, 21).g


def test_zero_gain_gives_zero_sinr(cfg, channels):
    report = user_sinr(uniform_precoder(cfg), 0.0, channels, cfg)

    assert report.sinr_linear == 0.0
    assert report.sinr_db == -math.inf
    assert report.noise_plus_interference == pytest.approx(16 * cfg.noise_power)


def test_large_gain_approaches_limit(cfg, channels):
    w = uniform_precoder(cfg).w
    limit = np.sum(np.abs(channels @ w) ** 2) / (
        cfg.num_subcarriers * cfg.repeater_user_chan_var * cfg.noise_power
    )
    assert user_sinr(Precoder(w=w), 1e6, channels, cfg).sinr_linear == pytest.approx(limit, rel=1e-6)


def test_single_subcarrier_hand_value():
    cfg = default_config(num_antennas=3, num_subcarriers=1)
    g = np.array([[1.0, 0.0, 0.0]], dtype=complex)
    w = np.array([math.sqrt(cfg.max_power), 0.0, 0.0], dtype=complex)

    expected = cfg.max_power / (cfg.repeater_user_chan_var * cfg.noise_power + cfg.noise_power)
    report = user_sinr(Precoder(w=w), 1.0, g, cfg)

    assert report.sinr_linear == pytest.approx(expected, rel=1e-12)
    assert report.sinr_db == pytest.approx(10 * math.log10(expected), rel=1e-12)


def test_scaling_precoder_scales_sinr(cfg, channels):
    w = uniform_precoder(cfg).w * np.exp(0.4j * np.arange(4))
    c = 0.3 - 1.7j
    base = user_sinr(Precoder(w=w), 2.5, channels, cfg).sinr_linear
    scaled = user_sinr(Precoder(w=c * w), 2.5, channels, cfg).sinr_linear

    assert scaled == pytest.approx(abs(c) ** 2 * base, rel=1e-12)


def test_sinr_increases_with_gain(cfg, channels):
    w = uniform_precoder(cfg)
    values = [user_sinr(w, alpha, channels, cfg).sinr_linear for alpha in np.logspace(-3, 4, 15)]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_transpose_not_hermitian_product():
    cfg = default_config(num_antennas=2, num_subcarriers=1)
    g = np.array([[1.0, 1.0j]])
    aligned = Precoder(w=np.array([1.0, -1.0j]))
    crossed = Precoder(w=np.array([1.0, 1.0j]))

    assert user_sinr(aligned, 1.0, g, cfg).signal_power == pytest.approx(4.0)
    assert user_sinr(crossed, 1.0, g, cfg).signal_power == pytest.approx(0.0, abs=1e-30)


def test_rejects_negative_gain(cfg, channels):
    with pytest.raises(ValueError, match="non-negative"):
        user_sinr(uniform_precoder(cfg), -1.0, channels, cfg)


def test_rejects_mismatched_channel(cfg):
    with pytest.raises(DimensionError):
        user_sinr(uniform_precoder(cfg), 1.0, np.zeros((16, 3)), cfg)
