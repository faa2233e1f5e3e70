import math
from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

SweepVariable = Literal["max_power", "min_user_sinr_db", "rcs_var_db"]
Arm = Literal["joint", "fixed_gain"]

PARAMETER_ORDER = ("d", "sigma_re", "sigma_im")


class SinrReport(BaseModel):
    sinr_linear: float = Field(ge=0)
    sinr_db: float
    signal_power: float
    noise_plus_interference: float


class FisherMatrix(BaseModel):
    """Real symmetric 3x3 information matrix over (d, sigma_re, sigma_im)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    entries: np.ndarray

    @field_validator("entries")
    @classmethod
    def _check_shape(cls, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value, dtype=float)
        if value.shape != (3, 3):
            raise ValueError(f"Fisher matrix must be 3x3, got {value.shape}")
        return value

    def is_symmetric(self, rtol: float = 1e-12) -> bool:
        scale = np.max(np.abs(self.entries))
        return bool(np.all(np.abs(self.entries - self.entries.T) <= rtol * scale))

    def is_psd(self, rtol: float = 1e-9) -> bool:
        eigenvalues = np.linalg.eigvalsh(0.5 * (self.entries + self.entries.T))
        return bool(np.min(eigenvalues) >= -rtol * abs(np.trace(self.entries)))

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.entries)


class CrbBreakdown(BaseModel):
    crb_d: float = Field(gt=0)
    psi: float
    coeff_C: float
    s_re: float
    s_im: float
    fim: FisherMatrix
    crb_direct: Optional[float] = None

    @property
    def sqrt_crb_d(self) -> float:
        return math.sqrt(self.crb_d)


class OptimizationResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    w: np.ndarray
    alpha: float
    crb_d: float
    sinr_db: float
    power_used: float
    converged: bool
    iterations: int
    objective_trace: List[float] = Field(default_factory=list)
    feasibility_iterations: int = 0
    infeasible: bool = False


class SweepSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    variable: SweepVariable
    grid: List[float]
    trials: int = Field(ge=1)
    base_seed: int = Field(ge=0, lt=2**64)
    arms: List[Arm] = Field(default_factory=lambda: ["joint", "fixed_gain"])
    fixed_alpha_db: float = 18.5

    @field_validator("grid")
    @classmethod
    def _grid_strictly_ordered(cls, grid: List[float]) -> List[float]:
        if not grid:
            raise ValueError("grid must not be empty")
        steps = np.diff(grid)
        if len(grid) > 1 and not (np.all(steps > 0) or np.all(steps < 0)):
            raise ValueError("grid must be strictly ordered")
        return grid

    @field_validator("arms")
    @classmethod
    def _arms_unique(cls, arms: List[str]) -> List[str]:
        if not arms:
            raise ValueError("at least one arm is required")
        if len(set(arms)) != len(arms):
            raise ValueError("arms must not repeat")
        return arms


class TrialRecord(BaseModel):
    variable: SweepVariable
    sweep_value: float
    trial_index: int
    arm: Arm
    alpha: float
    crb_d: float
    sqrt_crb_d: float
    sinr_db: float
    power_used: float
    converged: bool
    infeasible: bool
    iterations: int
    channel_digest: str
    wall_time: float = 0.0


class SweepSummary(BaseModel):
    variable: SweepVariable
    sweep_value: float
    arm: Arm
    n_total: int
    n_ok: int
    n_excluded: int
    mean_sqrt_crb: Optional[float] = None
    median_sqrt_crb: Optional[float] = None
    p10: Optional[float] = None
    p90: Optional[float] = None
    feasible_rate: float
    converged_rate: float

    @property
    def empty(self) -> bool:
        return self.n_ok == 0
