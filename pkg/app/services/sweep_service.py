import logging
import math
import time
from typing import List, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from app.models.config import SystemConfig
from app.models.results import OptimizationResult, SweepSpec, SweepSummary, TrialRecord
from app.models.settings import OptimizerSettings
from app.services.optimizer_service import optimize_fixed_gain, optimize_joint
from app.services.signal_service import draw_channels, uniform_precoder
from app.utils.units import db_to_linear

logger = logging.getLogger(__name__)


def trial_seed(base_seed: int, trial_index: int) -> int:
    """Channel seed shared by every arm and grid point of one trial."""
    state = np.random.SeedSequence([base_seed, trial_index]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def _record(
    spec: SweepSpec,
    value: float,
    trial_index: int,
    arm: str,
    digest: str,
    result: Optional[OptimizationResult],
    wall_time: float,
) -> TrialRecord:
    if result is None:
        return TrialRecord(
            variable=spec.variable, sweep_value=value, trial_index=trial_index, arm=arm,
            alpha=math.nan, crb_d=math.nan, sqrt_crb_d=math.nan, sinr_db=math.nan,
            power_used=math.nan, converged=False, infeasible=False, iterations=0,
            channel_digest=digest, wall_time=wall_time,
        )
    return TrialRecord(
        variable=spec.variable,
        sweep_value=value,
        trial_index=trial_index,
        arm=arm,
        alpha=result.alpha,
        crb_d=result.crb_d,
        sqrt_crb_d=math.sqrt(result.crb_d) if result.crb_d >= 0 else math.nan,
        sinr_db=result.sinr_db,
        power_used=result.power_used,
        converged=result.converged,
        infeasible=result.infeasible,
        iterations=result.iterations,
        channel_digest=digest,
        wall_time=wall_time,
    )


def run_trial(
    cfg: SystemConfig,
    spec: SweepSpec,
    trial_index: int,
    settings: Optional[OptimizerSettings] = None,
) -> List[TrialRecord]:
    seed = trial_seed(spec.base_seed, trial_index)
    fixed_alpha = db_to_linear(spec.fixed_alpha_db)
    records = []

    for value in spec.grid:
        point_cfg = cfg.with_overrides(**{spec.variable: value})
        channels = draw_channels(point_cfg, seed)
        digest = channels.digest()
        w0 = uniform_precoder(point_cfg).w

        for arm in spec.arms:
            started = time.perf_counter()
            try:
                if arm == "joint":
                    result = optimize_joint(point_cfg, channels.g, (w0, 1.0), settings)
                else:
                    result = optimize_fixed_gain(point_cfg, channels.g, fixed_alpha, w0, settings)
            except Exception as e:
                logger.warning(f"Trial {trial_index} arm {arm} at {spec.variable}={value} failed: {e}")
                result = None
            records.append(
                _record(spec, value, trial_index, arm, digest, result, time.perf_counter() - started)
            )

    return records


class SweepRunner:
    def __init__(
        self,
        cfg: SystemConfig,
        spec: SweepSpec,
        settings: Optional[OptimizerSettings] = None,
        workers: int = 1,
        progress: bool = False,
    ):
        self.cfg = cfg
        self.spec = spec
        self.settings = settings
        self.workers = max(1, workers)
        self.progress = progress

    def _canonical(self, records: List[TrialRecord]) -> List[TrialRecord]:
        grid_position = {value: i for i, value in enumerate(self.spec.grid)}
        arm_position = {arm: i for i, arm in enumerate(self.spec.arms)}
        return sorted(
            records,
            key=lambda r: (grid_position[r.sweep_value], r.trial_index, arm_position[r.arm]),
        )

    def _check_grid(self) -> None:
        # every grid point must yield a valid config before any trial is dispatched
        for value in self.spec.grid:
            self.cfg.with_overrides(**{self.spec.variable: value})

    def run(self) -> List[TrialRecord]:
        spec = self.spec
        self._check_grid()
        logger.info(
            f"Sweeping {spec.variable} over {len(spec.grid)} points, {spec.trials} trials, "
            f"arms {','.join(spec.arms)} on {self.workers} worker(s)"
        )

        per_trial = Parallel(n_jobs=self.workers)(
            delayed(run_trial)(self.cfg, spec, i, self.settings)
            for i in tqdm(range(spec.trials), desc="trials", disable=not self.progress)
        )
        records = [record for trial_records in per_trial for record in trial_records]

        logger.info(f"Sweep finished with {len(records)} records")
        return self._canonical(records)


def run_sweep(
    cfg: SystemConfig,
    spec: SweepSpec,
    settings: Optional[OptimizerSettings] = None,
    workers: int = 1,
    progress: bool = False,
) -> List[TrialRecord]:
    return SweepRunner(cfg, spec, settings, workers, progress).run()


def aggregate(records: List[TrialRecord]) -> List[SweepSummary]:
    """Per (sweep value, arm) statistics of sqrt(CRB_d) over converged, feasible records."""
    if not records:
        raise ValueError("No records to aggregate")

    frame = pd.DataFrame([r.model_dump() for r in records])
    summaries = []
    for (variable, value, arm), group in frame.groupby(
        ["variable", "sweep_value", "arm"], sort=False
    ):
        ok = group[group["converged"] & ~group["infeasible"] & np.isfinite(group["sqrt_crb_d"])]
        values = ok["sqrt_crb_d"]
        has_data = len(values) > 0
        summaries.append(
            SweepSummary(
                variable=variable,
                sweep_value=float(value),
                arm=arm,
                n_total=len(group),
                n_ok=len(values),
                n_excluded=len(group) - len(values),
                mean_sqrt_crb=float(values.mean()) if has_data else None,
                median_sqrt_crb=float(values.median()) if has_data else None,
                p10=float(values.quantile(0.1)) if has_data else None,
                p90=float(values.quantile(0.9)) if has_data else None,
                feasible_rate=float((~group["infeasible"]).mean()),
                converged_rate=float(group["converged"].mean()),
            )
        )
        if not has_data:
            logger.warning(f"No usable records for {variable}={value} arm {arm}")
    return summaries
