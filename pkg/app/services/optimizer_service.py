import logging
import math
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.linalg import eigh

from app.models.config import SystemConfig
from app.models.results import OptimizationResult
from app.models.settings import OptimizerSettings
from app.models.signals import Precoder
from app.services.crb_service import check_identifiable, crb_range
from app.services.signal_service import check_dimensions, steering_vector, uniform_precoder
from app.services.sinr_service import user_sinr
from app.utils.errors import IdentifiabilityError

logger = logging.getLogger(__name__)

FEASIBILITY_RTOL = 1e-12
GAIN_MARGIN = 1e-9
POLISH_BISECTIONS = 40


class _Run(NamedTuple):
    v: np.ndarray
    t: float
    converged: bool
    iterations: int
    trace: List[float]
    feasibility_iterations: int


class _Candidate(NamedTuple):
    crb_d: float
    w: np.ndarray
    alpha: float
    run: _Run


def _sinr_matrix(g: np.ndarray) -> np.ndarray:
    # sum_k conj(g_k) g_k^T, so that sum_k |g_k^T w|^2 = w^H Q w
    return g.conj().T @ g


def feasibility_check(
    g: np.ndarray, cfg: SystemConfig, alpha: Optional[float] = None
) -> Tuple[bool, float]:
    """
    Supremum of the user SINR over ||w||^2 = P_max, relative to the floor.

    With `alpha=None` the gain is free and the supremum is the alpha -> inf
    limit P_max lambda_max / (N_s sigma_b^2 sigma_e^2); otherwise the gain is
    held at `alpha`.
    """
    check_dimensions(cfg, np.zeros(cfg.num_antennas, dtype=complex), g)
    m = cfg.num_antennas
    lambda_max = max(float(eigh(_sinr_matrix(g), eigvals_only=True, subset_by_index=[m - 1, m - 1])[0]), 0.0)

    noise = cfg.num_subcarriers * cfg.noise_power
    if alpha is None:
        best_sinr = cfg.max_power * lambda_max / (noise * cfg.repeater_user_chan_var)
    else:
        gain = alpha**2
        best_sinr = gain * cfg.max_power * lambda_max / (noise * (gain * cfg.repeater_user_chan_var + 1.0))

    certificate = best_sinr / cfg.min_user_sinr
    return certificate >= 1.0 - FEASIBILITY_RTOL, certificate


class PrecoderOptimizer:
    """
    Projected gradient descent on the scaled precoder v = w / sqrt(P_max) and
    t = log(alpha), minimizing log(CRB_d) plus the SINR penalty
    rho * max(0, log(gamma_u) - log(gamma))^2. Terms of log(CRB_d) that do not
    depend on (w, alpha) are kept out of the merit used for step acceptance.
    """

    def __init__(
        self,
        cfg: SystemConfig,
        g: np.ndarray,
        settings: Optional[OptimizerSettings] = None,
        fixed_alpha: Optional[float] = None,
    ):
        check_dimensions(cfg, np.zeros(cfg.num_antennas, dtype=complex), g)
        if fixed_alpha is not None and fixed_alpha <= 0:
            raise ValueError(f"Fixed repeater gain must be positive, got {fixed_alpha}")

        self.cfg = cfg
        self.g = g
        self.settings = settings or OptimizerSettings()
        self.fixed_alpha = fixed_alpha

        self._scale = math.sqrt(cfg.max_power)
        self._a = steering_vector(cfg.target_angle, cfg.num_antennas).entries
        self._q = _sinr_matrix(g)
        self._k = cfg.num_subcarriers * cfg.noise_power
        self._log_gamma = math.log(cfg.min_user_sinr)
        self._t_bounds = (math.log(self.settings.alpha_min), math.log(self.settings.alpha_max))

        d = cfg.target_distance
        schur = check_identifiable(cfg.rcs_var, d, cfg)
        self._log_const = math.log(
            d**4 / (2.0 * cfg.num_antennas * cfg.num_time_samples * schur)
        )

        _, eigenvectors = eigh(self._q)
        self._sinr_beam = eigenvectors[:, -1].astype(complex)

    # merit and gradient

    def _terms(self, v: np.ndarray, t: float):
        cfg = self.cfg
        w = self._scale * v
        beam = np.vdot(self._a, w)
        beam_gain = abs(beam) ** 2
        qw = self._q @ w
        x = float(np.vdot(w, qw).real)
        gain = math.exp(2.0 * t)
        interference = gain * (cfg.chan_est_err_var * float(np.vdot(w, w).real) + cfg.propagated_noise_var)
        interference += cfg.noise_power
        if beam_gain <= 0 or x <= 0:
            return None
        log_sinr = 2.0 * t + math.log(x) - math.log(self._k) - math.log1p(gain * cfg.repeater_user_chan_var)
        violation = max(0.0, self._log_gamma - log_sinr)
        return w, beam, beam_gain, qw, x, gain, interference, violation

    def merit(self, v: np.ndarray, t: float, rho: float) -> float:
        terms = self._terms(v, t)
        if terms is None:
            return math.inf
        _, _, beam_gain, _, _, _, interference, violation = terms
        return math.log(interference) - math.log(beam_gain) + rho * violation**2

    def merit_gradient(self, v: np.ndarray, t: float, rho: float) -> Tuple[np.ndarray, float]:
        """Gradient as (d/dRe v + j d/dIm v, d/dt)."""
        if self.settings.gradient == "finite_difference":
            return self._fd_gradient(v, t, rho)

        cfg = self.cfg
        w, beam, beam_gain, qw, x, gain, interference, violation = self._terms(v, t)
        pull = 2.0 * rho * violation

        grad_w = (
            2.0 * gain * cfg.chan_est_err_var * w / interference
            - 2.0 * self._a * beam / beam_gain
            - pull * 2.0 * qw / x
        )
        grad_t = 2.0 * gain * (cfg.chan_est_err_var * float(np.vdot(w, w).real) + cfg.propagated_noise_var)
        grad_t = grad_t / interference - pull * 2.0 / (1.0 + gain * cfg.repeater_user_chan_var)

        if self.fixed_alpha is not None:
            grad_t = 0.0
        return self._scale * grad_w, grad_t

    def _fd_gradient(self, v: np.ndarray, t: float, rho: float) -> Tuple[np.ndarray, float]:
        h = self.settings.fd_step
        grad = np.zeros(v.shape[0], dtype=complex)
        for m in range(v.shape[0]):
            for direction in (1.0, 1j):
                e = np.zeros_like(v)
                e[m] = direction * h
                slope = (self.merit(v + e, t, rho) - self.merit(v - e, t, rho)) / (2.0 * h)
                grad[m] += direction * slope
        grad_t = 0.0
        if self.fixed_alpha is None:
            grad_t = (self.merit(v, t + h, rho) - self.merit(v, t - h, rho)) / (2.0 * h)
        return grad, grad_t

    def _project(self, v: np.ndarray, t: float) -> Tuple[np.ndarray, float]:
        norm = float(np.linalg.norm(v))
        if norm > 1.0:
            v = v / norm
        if self.fixed_alpha is not None:
            return v, math.log(self.fixed_alpha)
        return v, min(max(t, self._t_bounds[0]), self._t_bounds[1])

    def _shortfall(self, v: np.ndarray, t: float) -> float:
        terms = self._terms(v, t)
        if terms is None:
            return 1.0
        violation = terms[-1]
        return -math.expm1(-violation)

    # descent

    def _descend(self, v: np.ndarray, t: float) -> _Run:
        s = self.settings
        rho = s.penalty_start
        v, t = self._project(v, t)
        merit = self.merit(v, t, rho)
        if not math.isfinite(merit):
            return _Run(v, t, False, 0, [], 0)

        trace = [merit + self._log_const]
        feasibility_iterations = 0
        stall = 0
        converged = False
        iteration = 0

        while iteration < s.max_iterations:
            iteration += 1
            grad_v, grad_t = self.merit_gradient(v, t, rho)
            step = s.initial_step
            accepted = False
            stationary = False

            while True:
                v_new, t_new = self._project(v - step * grad_v, t - step * grad_t)
                decrease = float(np.vdot(grad_v, v_new - v).real) + grad_t * (t_new - t)
                if not decrease < 0:
                    stationary = True
                    break
                merit_new = self.merit(v_new, t_new, rho)
                if merit_new <= merit + s.armijo * decrease:
                    accepted = True
                    break
                step *= 0.5
                if step < s.min_step:
                    stationary = True
                    break

            if accepted:
                change = abs(merit - merit_new) / max(1.0, abs(merit))
                v, t, merit = v_new, t_new, merit_new
                trace.append(merit + self._log_const)
                stall = stall + 1 if change < s.stall_tolerance else 0
                stationary = stall >= s.stall_steps

            if not stationary:
                continue

            shortfall = self._shortfall(v, t)
            if shortfall > s.sinr_tolerance and rho < s.penalty_max:
                rho *= s.penalty_growth
                merit = self.merit(v, t, rho)
                feasibility_iterations = len(trace)
                trace.append(merit + self._log_const)
                stall = 0
                logger.debug(f"SINR shortfall {shortfall:.3e}, penalty weight raised to {rho:.1e}")
                continue

            converged = shortfall <= s.sinr_tolerance
            break

        return _Run(v, t, converged, iteration, trace, feasibility_iterations)

    # polish

    def minimal_gain(self, w: np.ndarray) -> Optional[float]:
        """Smallest alpha in the gain box meeting the SINR floor for w, or None."""
        x = float(np.vdot(w, self._q @ w).real)
        required = self.cfg.min_user_sinr * self._k
        headroom = x - required * self.cfg.repeater_user_chan_var
        if headroom <= 0:
            return None
        alpha = math.sqrt(required / headroom) * (1.0 + GAIN_MARGIN)
        alpha = max(alpha, self.settings.alpha_min)
        return alpha if alpha <= self.settings.alpha_max else None

    def _gain_for(self, w: np.ndarray) -> Optional[float]:
        if self.fixed_alpha is None:
            return self.minimal_gain(w)
        sinr = user_sinr(Precoder(w=w), self.fixed_alpha, self.g, self.cfg).sinr_linear
        return self.fixed_alpha if sinr >= self.cfg.min_user_sinr else None

    def _full_power(self, w: np.ndarray) -> Optional[np.ndarray]:
        norm = float(np.linalg.norm(w))
        return None if norm == 0 else w * (self._scale / norm)

    def _polish(self, v: np.ndarray) -> Optional[Tuple[np.ndarray, float]]:
        """
        Feasible point near v: full transmit power, then the minimal gain
        meeting the SINR floor. When w alone cannot reach the floor it is
        blended toward the SINR-optimal beam by bisection.
        """
        w = self._full_power(self._scale * v)
        if w is None:
            return None
        alpha = self._gain_for(w)
        if alpha is not None:
            return w, alpha

        beam = self._sinr_beam * np.exp(1j * np.angle(np.vdot(self._sinr_beam, w)))
        target = self._full_power(beam)

        def blended(weight: float) -> Optional[np.ndarray]:
            return self._full_power((1.0 - weight) * w / self._scale + weight * target / self._scale)

        if self._gain_for(target) is None:
            return None
        low, high = 0.0, 1.0
        for _ in range(POLISH_BISECTIONS):
            middle = 0.5 * (low + high)
            candidate = blended(middle)
            if candidate is not None and self._gain_for(candidate) is not None:
                high = middle
            else:
                low = middle
        w = blended(high) if high < 1.0 else target
        return w, self._gain_for(w)

    def _candidate(self, v: np.ndarray, run: _Run) -> Optional[_Candidate]:
        polished = self._polish(v)
        if polished is None:
            return None
        w, alpha = polished
        try:
            breakdown = crb_range(
                Precoder(w=w), alpha, self.cfg.rcs_var, self.cfg.target_angle,
                self.cfg.target_distance, self.cfg, cross_check=False,
            )
        except IdentifiabilityError as e:
            logger.debug(f"Dropping candidate: {e}")
            return None
        return _Candidate(breakdown.crb_d, w, alpha, run)

    # entry point

    def run(self, w0: np.ndarray, alpha0: float = 1.0) -> OptimizationResult:
        cfg = self.cfg
        check_dimensions(cfg, w0, self.g)
        if alpha0 <= 0:
            raise ValueError(f"Initial repeater gain must be positive, got {alpha0}")

        feasible, certificate = feasibility_check(self.g, cfg, self.fixed_alpha)
        alpha_start = self.fixed_alpha if self.fixed_alpha is not None else alpha0
        if not feasible:
            logger.warning(f"SINR floor unreachable (certificate {certificate:.3e})")
            return self._result(w0, alpha_start, None, infeasible=True)

        starts = [w0 / self._scale]
        if self.settings.multi_start:
            starts.append(self._a / math.sqrt(cfg.num_antennas))
            starts.append(self._sinr_beam)

        candidates: List[_Candidate] = []
        for index, v0 in enumerate(starts):
            run = self._descend(v0.astype(complex), math.log(alpha_start))
            logger.debug(
                f"Start {index}: {run.iterations} iterations, converged={run.converged}"
            )
            # the polished init stays a candidate so the result never loses to it
            for v in [run.v, v0] if index == 0 else [run.v]:
                candidate = self._candidate(v, run)
                if candidate is not None:
                    candidates.append(candidate)

        if not candidates:
            logger.warning("No feasible point recovered from any start")
            return self._result(w0, alpha_start, None, infeasible=True)

        best = min(candidates, key=lambda c: c.crb_d)
        if not best.run.converged:
            logger.warning(f"Optimizer stopped after {best.run.iterations} iterations without converging")
        return self._result(best.w, best.alpha, best, infeasible=False)

    def _result(
        self, w: np.ndarray, alpha: float, best: Optional[_Candidate], infeasible: bool
    ) -> OptimizationResult:
        sinr = user_sinr(Precoder(w=w), alpha, self.g, self.cfg)
        return OptimizationResult(
            w=w,
            alpha=alpha,
            crb_d=best.crb_d if best else math.nan,
            sinr_db=sinr.sinr_db,
            power_used=float(np.vdot(w, w).real),
            converged=best.run.converged if best else False,
            iterations=best.run.iterations if best else 0,
            objective_trace=best.run.trace if best else [],
            feasibility_iterations=best.run.feasibility_iterations if best else 0,
            infeasible=infeasible,
        )


def optimize_joint(
    cfg: SystemConfig,
    g: np.ndarray,
    init: Optional[Tuple[np.ndarray, float]] = None,
    settings: Optional[OptimizerSettings] = None,
) -> OptimizationResult:
    w0, alpha0 = init if init is not None else (uniform_precoder(cfg).w, 1.0)
    return PrecoderOptimizer(cfg, g, settings).run(w0, alpha0)


def optimize_fixed_gain(
    cfg: SystemConfig,
    g: np.ndarray,
    alpha_fixed: float,
    init: Optional[np.ndarray] = None,
    settings: Optional[OptimizerSettings] = None,
) -> OptimizationResult:
    w0 = init if init is not None else uniform_precoder(cfg).w
    return PrecoderOptimizer(cfg, g, settings, fixed_alpha=alpha_fixed).run(w0, alpha_fixed)
