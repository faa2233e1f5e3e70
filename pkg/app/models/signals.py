import hashlib

import numpy as np
from pydantic import BaseModel, ConfigDict


class SteeringVector(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    entries: np.ndarray
    angle: float

    @property
    def num_antennas(self) -> int:
        return int(self.entries.shape[0])


class Precoder(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    w: np.ndarray

    @property
    def power(self) -> float:
        return float(np.vdot(self.w, self.w).real)


class ChannelRealization(BaseModel):
    """One Monte Carlo draw: composite channels g (N_s x M), their factors
    h (N_s x M) and b (N_s), and the target RCS."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    g: np.ndarray
    h: np.ndarray
    b: np.ndarray
    rcs: complex

    def digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.g).tobytes()).hexdigest()[:16]
