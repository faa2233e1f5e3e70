import logging
import math

import numpy as np

from app.models.config import SystemConfig
from app.models.results import SinrReport
from app.models.signals import Precoder
from app.services.signal_service import check_dimensions

logger = logging.getLogger(__name__)


def user_sinr(precoder: Precoder, alpha: float, g: np.ndarray, cfg: SystemConfig) -> SinrReport:
    """
    User SINR with one precoder shared by every sub-carrier:

        sum_k alpha^2 |g_k^T w|^2 / (N_s alpha^2 sigma_b^2 sigma_e^2 + N_s sigma_e^2)
    """
    w = precoder.w
    check_dimensions(cfg, w, g)
    if alpha < 0:
        raise ValueError(f"Repeater gain must be non-negative, got {alpha}")

    gain = alpha**2
    signal_power = gain * float(np.sum(np.abs(g @ w) ** 2))
    noise = cfg.num_subcarriers * cfg.noise_power * (gain * cfg.repeater_user_chan_var + 1.0)
    sinr_linear = signal_power / noise
    sinr_db = 10.0 * math.log10(sinr_linear) if sinr_linear > 0 else -math.inf

    return SinrReport(
        sinr_linear=sinr_linear,
        sinr_db=sinr_db,
        signal_power=signal_power,
        noise_plus_interference=noise,
    )
