import math

import numpy as np
import pytest

from app.utils.units import db_to_linear, linear_to_db


@pytest.mark.parametrize("db, linear", [(0.0, 1.0), (10.0, 10.0), (-20.0, 0.01), (18.5, 70.79457843841379)])
def test_db_to_linear(db, linear):
    assert db_to_linear(db) == pytest.approx(linear, rel=1e-12)


def test_round_trip_over_wide_range():
    for x in np.logspace(-30, 30, 121):
        assert db_to_linear(linear_to_db(x)) == pytest.approx(x, rel=1e-12)


@pytest.mark.parametrize("value", [math.nan, math.inf, -math.inf])
def test_db_to_linear_rejects_non_finite(value):
    with pytest.raises(ValueError, match="must be finite"):
        db_to_linear(value)


@pytest.mark.parametrize("value", [0.0, -1.0, math.inf])
def test_linear_to_db_rejects_non_positive(value):
    with pytest.raises(ValueError, match="positive and finite"):
        linear_to_db(value)
