import math


def db_to_linear(x: float) -> float:
    if not math.isfinite(x):
        raise ValueError(f"dB value must be finite, got {x}")
    return 10.0 ** (x / 10.0)


def linear_to_db(x: float) -> float:
    if not math.isfinite(x) or x <= 0:
        raise ValueError(f"Linear power ratio must be positive and finite, got {x}")
    return 10.0 * math.log10(x)
