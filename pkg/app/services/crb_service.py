import logging
import math
from typing import Optional, Tuple

import numpy as np

from app.models.config import SystemConfig
from app.models.results import CrbBreakdown, FisherMatrix
from app.models.signals import Precoder
from app.services.signal_service import beam_alignment, check_dimensions, path_loss, steering_vector
from app.utils.errors import CrbConsistencyError, IdentifiabilityError

logger = logging.getLogger(__name__)

CONSISTENCY_RTOL = 1e-9
DEGENERACY_RTOL = 1e-12
NULL_BEAM_RTOL = 1e-24


def sigma_from_power(sigma_sq: float) -> complex:
    """RCS realization with the given |sigma|^2 and equal real/imaginary parts."""
    amplitude = math.sqrt(sigma_sq / 2.0)
    return complex(amplitude, amplitude)


def interference_power(precoder: Precoder, alpha: float, cfg: SystemConfig) -> float:
    """Per-antenna variance of the residual repeater interference plus noise."""
    gain = alpha**2
    return (
        gain * cfg.chan_est_err_var * precoder.power
        + gain * cfg.propagated_noise_var
        + cfg.noise_power
    )


def psi(precoder: Precoder, alpha: float, phi: float, cfg: SystemConfig) -> float:
    if alpha < 0:
        raise ValueError(f"Repeater gain must be non-negative, got {alpha}")
    check_dimensions(cfg, precoder.w)
    a = steering_vector(phi, cfg.num_antennas).entries
    beam_gain = abs(np.vdot(a, precoder.w)) ** 2
    numerator = 2.0 * cfg.num_antennas * cfg.num_time_samples * beam_gain
    return numerator / interference_power(precoder, alpha, cfg)


def coeff_C(cfg: SystemConfig, d: float) -> float:
    ns = cfg.num_subcarriers
    df = cfg.subcarrier_spacing
    c = cfg.speed_of_light
    return 4.0 * ns / d**2 + 16.0 * math.pi**2 * df**2 * ns * (ns - 1) * (2 * ns - 1) / (6.0 * c**2)


def coeff_S(sigma: complex, cfg: SystemConfig, d: float) -> Tuple[float, float]:
    ns = cfg.num_subcarriers
    coupling = 4.0 * math.pi * cfg.subcarrier_spacing * ns * (ns - 1) / (2.0 * cfg.speed_of_light)
    s_re = -2.0 * sigma.real * ns / d - sigma.imag * coupling
    s_im = -2.0 * sigma.imag * ns / d + sigma.real * coupling
    return s_re, s_im


def _scaled_fim(scale: float, sigma: complex, C: float, s_re: float, s_im: float, diagonal: float):
    return FisherMatrix(
        entries=scale
        * np.array(
            [
                [abs(sigma) ** 2 * C, s_re, s_im],
                [s_re, diagonal, 0.0],
                [s_im, 0.0, diagonal],
            ]
        )
    )


def fim_closed_form(
    precoder: Precoder, alpha: float, sigma: complex, phi: float, d: float, cfg: SystemConfig
) -> FisherMatrix:
    """
    Closed-form Fisher matrix. Each sub-carrier contributes one unit of
    information on (sigma_re, sigma_im), so the trailing diagonal is N_s.
    """
    scale = psi(precoder, alpha, phi, cfg) / d**4
    s_re, s_im = coeff_S(sigma, cfg, d)
    return _scaled_fim(scale, sigma, coeff_C(cfg, d), s_re, s_im, float(cfg.num_subcarriers))


def fim_closed_form_printed(
    precoder: Precoder, alpha: float, sigma: complex, phi: float, d: float, cfg: SystemConfig
) -> FisherMatrix:
    """Printed variant with a unit trailing diagonal; not PSD for N_s >= 2."""
    scale = psi(precoder, alpha, phi, cfg) / d**4
    s_re, s_im = coeff_S(sigma, cfg, d)
    return _scaled_fim(scale, sigma, coeff_C(cfg, d), s_re, s_im, 1.0)


def _grid(cfg: SystemConfig):
    n = np.arange(cfg.num_time_samples)[:, None]
    k = np.arange(cfg.num_subcarriers)[None, :]
    carrier = np.exp(2j * np.pi * k * n / cfg.num_subcarriers)
    omega = 4.0 * np.pi * k * cfg.subcarrier_spacing / cfg.speed_of_light
    return carrier, omega


def mean_echo(
    precoder: Precoder,
    sigma: complex,
    phi: float,
    d: float,
    cfg: SystemConfig,
    symbols: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Noise-free echo mu_nk as an (N, N_s, M) array."""
    a = steering_vector(phi, cfg.num_antennas).entries
    symbols = np.ones(cfg.num_subcarriers, dtype=complex) if symbols is None else symbols
    carrier, omega = _grid(cfg)
    coeff = sigma * path_loss(d) * np.vdot(a, precoder.w) * symbols[None, :] * carrier
    coeff = coeff * np.exp(1j * omega * d)
    return coeff[:, :, None] * a[None, None, :]


def fim_direct(
    precoder: Precoder, alpha: float, sigma: complex, phi: float, d: float, cfg: SystemConfig
) -> FisherMatrix:
    """
    Slepian-Bangs summation over every (n, k) with analytic derivatives of
    mu_nk. The covariance is a scalar times I_M, so Sigma^{-1} reduces to a
    division and the array enters through a^H a.
    """
    check_dimensions(cfg, precoder.w)
    a = steering_vector(phi, cfg.num_antennas).entries
    carrier, omega = _grid(cfg)
    beta = path_loss(d)
    beta_prime = -2.0 / d**3

    base = np.vdot(a, precoder.w) * carrier * np.exp(1j * omega * d)
    d_sigma_re = base * beta
    d_sigma_im = 1j * d_sigma_re
    d_range = sigma * base * (beta_prime + 1j * beta * omega)

    partials = np.stack([d_range, d_sigma_re, d_sigma_im])
    weight = 2.0 * np.vdot(a, a).real / interference_power(precoder, alpha, cfg)
    entries = weight * np.einsum("inm,jnm->ij", partials.conj(), partials).real
    return FisherMatrix(entries=0.5 * (entries + entries.T))


def fim_finite_difference(
    precoder: Precoder,
    alpha: float,
    sigma: complex,
    phi: float,
    d: float,
    cfg: SystemConfig,
    rel_step: float = 1e-6,
) -> FisherMatrix:
    """Slepian-Bangs assembly from central differences of mu_nk in (d, sigma_re, sigma_im)."""
    xi = np.array([d, sigma.real, sigma.imag])

    def mu(params: np.ndarray) -> np.ndarray:
        return mean_echo(precoder, complex(params[1], params[2]), phi, params[0], cfg)

    partials = []
    for i in range(3):
        step = rel_step * (abs(xi[i]) if xi[i] != 0 else 1.0)
        offset = np.zeros(3)
        offset[i] = step
        partials.append((mu(xi + offset) - mu(xi - offset)) / (2.0 * step))

    stacked = np.stack([p.ravel() for p in partials])
    weight = 2.0 / interference_power(precoder, alpha, cfg)
    return FisherMatrix(entries=weight * (stacked.conj() @ stacked.T).real)


def range_schur(sigma: complex, d: float, cfg: SystemConfig, diagonal: Optional[float] = None) -> float:
    """|sigma|^2 C - (S_re^2 + S_im^2) / D, the range information left after the RCS is profiled out."""
    diagonal = float(cfg.num_subcarriers) if diagonal is None else diagonal
    s_re, s_im = coeff_S(sigma, cfg, d)
    return abs(sigma) ** 2 * coeff_C(cfg, d) - (s_re**2 + s_im**2) / diagonal


def check_identifiable(sigma_sq: float, d: float, cfg: SystemConfig) -> float:
    if d <= 0:
        raise ValueError(f"Distance must be positive, got {d}")
    if not sigma_sq > 0:
        raise IdentifiabilityError(f"RCS power must be positive, got {sigma_sq}")

    sigma = sigma_from_power(sigma_sq)
    schur = range_schur(sigma, d, cfg)
    if schur <= DEGENERACY_RTOL * abs(sigma) ** 2 * coeff_C(cfg, d):
        raise IdentifiabilityError(
            f"Range is not separable from the RCS phase with {cfg.num_subcarriers} "
            f"sub-carrier(s): Schur complement {schur:.3e} is not positive"
        )
    return schur


def crb_range(
    precoder: Precoder,
    alpha: float,
    sigma_sq: float,
    phi: float,
    d: float,
    cfg: SystemConfig,
    cross_check: bool = True,
) -> CrbBreakdown:
    """
    Range CRB [I^{-1}]_11 = d^4 / (psi (|sigma|^2 C - (S_re^2 + S_im^2) / N_s)).

    The bound depends on sigma only through |sigma|^2. With `cross_check`
    the value is recomputed from the full inverse of fim_direct.
    """
    schur = check_identifiable(sigma_sq, d, cfg)
    sigma = sigma_from_power(sigma_sq)
    psi_value = psi(precoder, alpha, phi, cfg)
    if precoder.power <= 0 or beam_alignment(precoder.w, phi) <= NULL_BEAM_RTOL:
        raise IdentifiabilityError("Precoder places a null toward the target (a^H w = 0)")

    crb_d = d**4 / (psi_value * schur)
    s_re, s_im = coeff_S(sigma, cfg, d)

    crb_direct = None
    if cross_check:
        crb_direct = float(fim_direct(precoder, alpha, sigma, phi, d, cfg).inverse()[0, 0])
        discrepancy = abs(crb_d - crb_direct) / crb_d
        if discrepancy > CONSISTENCY_RTOL:
            raise CrbConsistencyError(
                f"Closed-form CRB {crb_d:.17g} disagrees with direct summation "
                f"{crb_direct:.17g} (relative {discrepancy:.3e})"
            )

    return CrbBreakdown(
        crb_d=crb_d,
        psi=psi_value,
        coeff_C=coeff_C(cfg, d),
        s_re=s_re,
        s_im=s_im,
        fim=fim_closed_form(precoder, alpha, sigma, phi, d, cfg),
        crb_direct=crb_direct,
    )


def crb_range_printed(
    precoder: Precoder, alpha: float, sigma_sq: float, phi: float, d: float, cfg: SystemConfig
) -> float:
    """Printed Cramer's-rule element with a unit trailing diagonal; may be negative."""
    sigma = sigma_from_power(sigma_sq)
    return d**4 / (psi(precoder, alpha, phi, cfg) * range_schur(sigma, d, cfg, diagonal=1.0))
