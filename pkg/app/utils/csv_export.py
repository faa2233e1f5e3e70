import logging
from pathlib import Path
from typing import List, Union

import pandas as pd

from app.models.results import SweepSummary, TrialRecord

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

TRIAL_COLUMNS = {
    "variable": "variable",
    "sweep_value": "sweep_value",
    "trial_index": "trial",
    "arm": "arm",
    "alpha": "alpha_linear",
    "crb_d": "crb_d_m2",
    "sqrt_crb_d": "sqrt_crb_d_m",
    "sinr_db": "sinr_db",
    "power_used": "power_used",
    "converged": "converged",
    "infeasible": "infeasible",
    "iterations": "iterations",
    "channel_digest": "channel_digest",
}

SUMMARY_COLUMNS = [
    "variable",
    "sweep_value",
    "arm",
    "n_ok",
    "mean_sqrt_crb",
    "median_sqrt_crb",
    "p10",
    "p90",
    "feasible_rate",
    "converged_rate",
]


def _write(frame: pd.DataFrame, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(
        path,
        index=False,
        float_format=FLOAT_FORMAT,
        lineterminator="\n",
        encoding="utf-8",
    )


def trials_frame(records: List[TrialRecord]) -> pd.DataFrame:
    rows = [{column: getattr(r, field) for field, column in TRIAL_COLUMNS.items()} for r in records]
    return pd.DataFrame(rows, columns=list(TRIAL_COLUMNS.values()))


def summary_frame(summaries: List[SweepSummary]) -> pd.DataFrame:
    rows = [{column: getattr(s, column) for column in SUMMARY_COLUMNS} for s in summaries]
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def write_trials_csv(records: List[TrialRecord], path: Union[str, Path]) -> Path:
    path = Path(path)
    _write(trials_frame(records), path)
    logger.info(f"Wrote {len(records)} trial rows to {path}")
    return path


def write_summary_csv(summaries: List[SweepSummary], path: Union[str, Path]) -> Path:
    path = Path(path)
    _write(summary_frame(summaries), path)
    logger.info(f"Wrote {len(summaries)} summary rows to {path}")
    return path


def summary_path_for(trials_path: Union[str, Path]) -> Path:
    trials_path = Path(trials_path)
    return trials_path.with_name(f"{trials_path.stem}_aggregate{trials_path.suffix or '.csv'}")
