import logging
import os
from typing import Literal

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field

logger = logging.getLogger(__name__)

GradientMode = Literal["analytic", "finite_difference"]


class OptimizerSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_iterations: int = Field(default=5000, ge=1)
    stall_tolerance: float = Field(default=1e-10, gt=0)
    stall_steps: int = Field(default=5, ge=1)
    armijo: float = Field(default=1e-4, gt=0, lt=1)
    initial_step: float = Field(default=1.0, gt=0)
    min_step: float = Field(default=1e-20, gt=0)
    penalty_start: float = Field(default=1.0, gt=0)
    penalty_growth: float = Field(default=10.0, gt=1)
    penalty_max: float = Field(default=1e12, gt=0)
    sinr_tolerance: float = Field(default=1e-6, gt=0)
    alpha_min: float = Field(default=1e-6, gt=0)
    alpha_max: float = Field(default=1e9, gt=0)
    gradient: GradientMode = "analytic"
    fd_step: float = Field(default=1e-7, gt=0)
    multi_start: bool = True


class RuntimeSettings(BaseModel):
    model_config = ConfigDict(frozen=True)

    log_level: str = "info"
    workers: int = Field(default=1, ge=1)
    gradient: GradientMode = "analytic"

    @classmethod
    def from_env(cls) -> "RuntimeSettings":
        load_dotenv()
        workers_env = os.getenv("NCR_ISAC_WORKERS")
        workers = int(workers_env) if workers_env else (os.cpu_count() or 1)
        settings = cls(
            log_level=os.getenv("LOG_LEVEL", "info"),
            workers=workers,
            gradient=os.getenv("NCR_ISAC_GRADIENT", "analytic"),
        )
        logger.debug(f"Runtime settings: {settings}")
        return settings

    def optimizer_settings(self) -> OptimizerSettings:
        return OptimizerSettings(gradient=self.gradient)
