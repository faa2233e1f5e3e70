import logging
from typing import Optional

import numpy as np

from app.models.config import SPEED_OF_LIGHT, SystemConfig
from app.models.signals import ChannelRealization, Precoder, SteeringVector
from app.utils.errors import DimensionError

logger = logging.getLogger(__name__)

# Stream tags: every random quantity gets its own generator derived from
# (seed, tag, indices), so draws never depend on call order.
_TAG_REPEATER_CHANNEL = 1
_TAG_USER_CHANNEL = 2
_TAG_RCS = 3
_TAG_SYMBOLS = 4
_TAG_NOISE = 5

SYMBOL_TOLERANCE = 1e-9


def _rng(seed: int, *tags: int) -> np.random.Generator:
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"Seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.default_rng([int(seed), *tags])


def _complex_gaussian(rng: np.random.Generator, variance: float, shape) -> np.ndarray:
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def steering_vector(phi: float, num_antennas: int) -> SteeringVector:
    if num_antennas < 1:
        raise ValueError(f"Number of antennas must be at least 1, got {num_antennas}")
    m = np.arange(num_antennas)
    return SteeringVector(entries=np.exp(1j * np.pi * m * np.cos(phi)), angle=float(phi))


def ofdm_sample(symbols: np.ndarray, n: int, num_time_samples: Optional[int] = None) -> complex:
    """Sampled OFDM symbol s[n] = sum_k c_k exp(j 2 pi k n / N_s)."""
    symbols = np.asarray(symbols, dtype=complex)
    if np.any(np.abs(np.abs(symbols) - 1.0) > SYMBOL_TOLERANCE):
        raise ValueError("OFDM symbols must have unit modulus")
    if n < 0 or (num_time_samples is not None and n >= num_time_samples):
        raise ValueError(f"Sample index {n} outside [0, {num_time_samples})")

    k = np.arange(symbols.shape[0])
    return complex(np.sum(symbols * np.exp(2j * np.pi * k * n / symbols.shape[0])))


def path_loss(d: float) -> float:
    if d <= 0:
        raise ValueError(f"Distance must be positive, got {d}")
    return 1.0 / d**2


def round_trip_delay(d: float, c: float = SPEED_OF_LIGHT) -> float:
    if d <= 0:
        raise ValueError(f"Distance must be positive, got {d}")
    return 2.0 * d / c


def sampling_frequency(cfg: SystemConfig) -> float:
    return cfg.subcarrier_spacing * cfg.num_subcarriers


def uniform_precoder(cfg: SystemConfig, power: Optional[float] = None) -> Precoder:
    power = cfg.max_power if power is None else power
    m = cfg.num_antennas
    return Precoder(w=np.full(m, np.sqrt(power / m), dtype=complex))


def matched_precoder(cfg: SystemConfig, power: Optional[float] = None) -> Precoder:
    power = cfg.max_power if power is None else power
    a = steering_vector(cfg.target_angle, cfg.num_antennas).entries
    return Precoder(w=np.sqrt(power / cfg.num_antennas) * a)


def draw_channels(cfg: SystemConfig, seed: int) -> ChannelRealization:
    """
    Rayleigh draw of one trial.

    h ~ CN(0, sigma_g^2 / sigma_b^2) and b ~ CN(0, sigma_b^2) are drawn
    independently and g_k = b_k h_k, so E|g|^2 = sigma_g^2.
    """
    shape = (cfg.num_subcarriers, cfg.num_antennas)
    h = _complex_gaussian(
        _rng(seed, _TAG_REPEATER_CHANNEL),
        cfg.composite_chan_var / cfg.repeater_user_chan_var,
        shape,
    )
    b = _complex_gaussian(_rng(seed, _TAG_USER_CHANNEL), cfg.repeater_user_chan_var, shape[0])
    rcs = _complex_gaussian(_rng(seed, _TAG_RCS), cfg.rcs_var, 1)[0]

    logger.debug(f"Drew channels for seed {seed}: {shape[0]} sub-carriers x {shape[1]} antennas")
    return ChannelRealization(g=b[:, None] * h, h=h, b=b, rcs=complex(rcs))


def draw_symbols(num_subcarriers: int, seed: int) -> np.ndarray:
    """Unit-modulus QPSK symbols c_k."""
    quadrant = _rng(seed, _TAG_SYMBOLS).integers(0, 4, num_subcarriers)
    return np.exp(1j * (np.pi / 4 + np.pi / 2 * quadrant))


def check_dimensions(cfg: SystemConfig, w: np.ndarray, g: Optional[np.ndarray] = None) -> None:
    if w.shape != (cfg.num_antennas,):
        raise DimensionError(f"Precoder has shape {w.shape}, expected ({cfg.num_antennas},)")
    if g is not None and g.shape != (cfg.num_subcarriers, cfg.num_antennas):
        raise DimensionError(
            f"Channel matrix has shape {g.shape}, expected "
            f"({cfg.num_subcarriers}, {cfg.num_antennas})"
        )


def synthesize_received_ap(
    cfg: SystemConfig,
    precoder: Precoder,
    alpha: float,
    chan: ChannelRealization,
    symbols: np.ndarray,
    k: int,
    n: int,
    noise_seed: Optional[int] = None,
    with_noise: bool = True,
) -> np.ndarray:
    """
    Sampled AP receive vector y_k[n]: target echo, repeater loop-back of the
    transmitted signal, repeater-propagated noise and receiver noise.

    The echo is evaluated analytically with the delay carried as the phase
    exp(+j 2 pi k df tau(d)), the same convention as the Fisher model.
    """
    w = precoder.w
    check_dimensions(cfg, w, chan.g)
    if alpha < 0:
        raise ValueError(f"Repeater gain must be non-negative, got {alpha}")
    if not 0 <= k < cfg.num_subcarriers:
        raise ValueError(f"Sub-carrier index {k} outside [0, {cfg.num_subcarriers})")
    if not 0 <= n < cfg.num_time_samples:
        raise ValueError(f"Sample index {n} outside [0, {cfg.num_time_samples})")

    d = cfg.target_distance
    a = steering_vector(cfg.target_angle, cfg.num_antennas).entries
    h_k = chan.h[k]
    carrier = symbols[k] * np.exp(2j * np.pi * k * n / cfg.num_subcarriers)
    delay_phase = np.exp(2j * np.pi * k * cfg.subcarrier_spacing * round_trip_delay(d))

    echo = chan.rcs * path_loss(d) * a * np.vdot(a, w) * carrier * delay_phase
    loop_back = alpha * h_k * (h_k @ w) * carrier

    if not with_noise:
        return echo + loop_back

    rng = _rng(noise_seed, _TAG_NOISE, k, n) if noise_seed is not None else np.random.default_rng()
    repeater_noise = _complex_gaussian(rng, cfg.noise_power, 1)[0]
    receiver_noise = _complex_gaussian(rng, cfg.noise_power, cfg.num_antennas)
    return echo + loop_back + alpha * h_k * repeater_noise + receiver_noise


def beam_alignment(w: np.ndarray, phi: float) -> float:
    """|a^H w|^2 / (M ||w||^2): 1 for a beam matched to the target direction."""
    a = steering_vector(phi, w.shape[0]).entries
    return float(abs(np.vdot(a, w)) ** 2 / (w.shape[0] * np.vdot(w, w).real))
