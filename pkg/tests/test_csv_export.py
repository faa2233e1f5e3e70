import math

import pandas as pd
import pytest

from app.models.results import SweepSummary, TrialRecord
from app.utils.csv_export import (
    SUMMARY_COLUMNS,
    TRIAL_COLUMNS,
    summary_path_for,
    write_summary_csv,
    write_trials_csv,
)


@pytest.fixture
def records():
    return [
        TrialRecord(
            variable="max_power", sweep_value=1e7, trial_index=i, arm=arm,
            alpha=70.79457843841379, crb_d=1 / 3 + i, sqrt_crb_d=math.sqrt(1 / 3 + i),
            sinr_db=2.000000001, power_used=9999999.999999998, converged=True,
            infeasible=False, iterations=42, channel_digest="ab12cd34ef56ab78", wall_time=0.5,
        )
        for i in range(2)
        for arm in ("joint", "fixed_gain")
    ]


@pytest.fixture
def summaries():
    return [
        SweepSummary(
            variable="max_power", sweep_value=1e7, arm="joint", n_total=4, n_ok=3, n_excluded=1,
            mean_sqrt_crb=0.1, median_sqrt_crb=0.2, p10=0.05, p90=0.3,
            feasible_rate=1.0, converged_rate=0.75,
        ),
        SweepSummary(
            variable="max_power", sweep_value=1e7, arm="fixed_gain", n_total=4, n_ok=0, n_excluded=4,
            feasible_rate=0.0, converged_rate=0.0,
        ),
    ]


def test_trial_csv_header_and_rows(records, tmp_path):
    path = write_trials_csv(records, tmp_path / "out" / "trials.csv")

    lines = path.read_text(encoding="utf-8").split("\n")
    assert lines[0] == ",".join(TRIAL_COLUMNS.values())
    assert lines[0].startswith("variable,sweep_value,trial,arm,alpha_linear,crb_d_m2")
    assert lines[-1] == ""
    assert len(lines) == len(records) + 2
    assert "\r" not in path.read_text(encoding="utf-8")


def test_trial_csv_round_trips_floats(records, tmp_path):
    path = write_trials_csv(records, tmp_path / "trials.csv")
    frame = pd.read_csv(path, float_precision="round_trip")

    assert frame["alpha_linear"].tolist() == [r.alpha for r in records]
    assert frame["crb_d_m2"].tolist() == [r.crb_d for r in records]
    assert frame["trial"].tolist() == [0, 0, 1, 1]
    assert frame["converged"].tolist() == [True] * 4
    assert "wall_time" not in frame.columns


def test_trial_csv_is_byte_identical(records, tmp_path):
    first = write_trials_csv(records, tmp_path / "a.csv").read_bytes()
    second = write_trials_csv(records, tmp_path / "b.csv").read_bytes()
    assert first == second


def test_empty_trial_csv_keeps_header(tmp_path):
    path = write_trials_csv([], tmp_path / "empty.csv")
    assert path.read_text(encoding="utf-8") == ",".join(TRIAL_COLUMNS.values()) + "\n"


def test_summary_csv(summaries, tmp_path):
    path = write_summary_csv(summaries, tmp_path / "agg.csv")
    lines = path.read_text(encoding="utf-8").splitlines()

    assert lines[0] == ",".join(SUMMARY_COLUMNS)
    assert lines[1] == (
        "max_power,10000000,joint,3,0.10000000000000001,0.20000000000000001,"
        "0.050000000000000003,0.29999999999999999,1,0.75"
    )
    assert lines[2] == "max_power,10000000,fixed_gain,0,,,,,0,0"


def test_summary_path_for():
    assert summary_path_for("runs/power_sweep.csv").as_posix() == "runs/power_sweep_aggregate.csv"
    assert summary_path_for("runs/power_sweep").as_posix() == "runs/power_sweep_aggregate.csv"
