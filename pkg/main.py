import argparse
import logging
import math
import sys
from typing import List, Optional

from app.models.config import SystemConfig, default_config, load_config_file
from app.models.results import SweepSpec, TrialRecord
from app.models.settings import RuntimeSettings
from app.services.crb_service import crb_range, crb_range_printed
from app.services.optimizer_service import optimize_fixed_gain, optimize_joint
from app.services.signal_service import (
    beam_alignment,
    draw_channels,
    matched_precoder,
    uniform_precoder,
)
from app.services.sweep_service import aggregate, run_sweep, trial_seed
from app.services.validation_service import FAULTS, run_validation
from app.utils.csv_export import (
    summary_path_for,
    write_summary_csv,
    write_trials_csv,
)
from app.utils.errors import (
    ConfigError,
    CrbConsistencyError,
    IdentifiabilityError,
)
from app.utils.logging_setup import configure_logging
from app.utils.units import db_to_linear

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_NOT_CONVERGED = 3
EXIT_VALIDATION = 4
EXIT_IDENTIFIABILITY = 5

ARM_NAMES = {"joint": "joint", "fixed": "fixed_gain"}


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _arm_list(text: str) -> List[str]:
    arms = [item.strip() for item in text.split(",") if item.strip()]
    unknown = [arm for arm in arms if arm not in ARM_NAMES]
    if unknown:
        raise argparse.ArgumentTypeError(f"unknown arm(s) {unknown}, expected joint or fixed")
    return [ARM_NAMES[arm] for arm in arms]


def _load(path: Optional[str]) -> SystemConfig:
    return load_config_file(path) if path else default_config()


def cmd_crb(args: argparse.Namespace, runtime: RuntimeSettings) -> int:
    cfg = _load(args.config)
    if args.distance is not None:
        cfg = cfg.with_overrides(target_distance_m=args.distance)
    if args.alpha < 0:
        raise ConfigError(f"repeater gain must be non-negative, got {args.alpha}", key="alpha")

    build = matched_precoder if args.precoder == "matched" else uniform_precoder
    precoder = build(cfg)
    phi, d, sigma_sq = cfg.target_angle, cfg.target_distance, cfg.rcs_var

    breakdown = crb_range(precoder, args.alpha, sigma_sq, phi, d, cfg, cross_check=True)
    printed = crb_range_printed(precoder, args.alpha, sigma_sq, phi, d, cfg)

    print(f"precoder             {args.precoder} (power {precoder.power:.6g})")
    print(f"alpha                {args.alpha:.17g}")
    print(f"crb_d [m^2]          {breakdown.crb_d:.17g}")
    print(f"sqrt(crb_d) [m]      {breakdown.sqrt_crb_d:.17g}")
    print(f"psi                  {breakdown.psi:.17g}")
    print(f"C                    {breakdown.coeff_C:.17g}")
    print(f"S_re                 {breakdown.s_re:.17g}")
    print(f"S_im                 {breakdown.s_im:.17g}")
    print(f"reconciled (D=N_s)   {breakdown.crb_d:.17g}")
    print(f"direct summation     {breakdown.crb_direct:.17g}")
    print(f"printed (D=1)        {printed:.17g}")
    print(f"reconciled vs direct {abs(breakdown.crb_d - breakdown.crb_direct) / breakdown.crb_d:.3e}")
    print(f"reconciled vs printed {abs(breakdown.crb_d - printed) / breakdown.crb_d:.3e}")
    return EXIT_OK


def cmd_optimize(args: argparse.Namespace, runtime: RuntimeSettings) -> int:
    cfg = _load(args.config)
    settings = runtime.optimizer_settings()
    channels = draw_channels(cfg, trial_seed(args.seed, 0))
    w0 = uniform_precoder(cfg).w

    if args.arm == "joint":
        result = optimize_joint(cfg, channels.g, (w0, 1.0), settings)
    else:
        result = optimize_fixed_gain(cfg, channels.g, db_to_linear(args.fixed_alpha_db), w0, settings)

    print(f"arm                  {args.arm}")
    print(f"channel digest       {channels.digest()}")
    print(f"infeasible           {result.infeasible}")
    print(f"converged            {result.converged}")
    print(f"iterations           {result.iterations}")
    print(f"alpha                {result.alpha:.17g}")
    print(f"crb_d [m^2]          {result.crb_d:.17g}")
    print(f"sinr [dB]            {result.sinr_db:.6f} (floor {cfg.min_user_sinr_db:.6f})")
    print(f"power used           {result.power_used:.17g} (max {cfg.max_power:.17g})")
    print(f"beam alignment       {beam_alignment(result.w, cfg.target_angle):.6f}")

    if args.csv:
        record = TrialRecord(
            variable="max_power",
            sweep_value=cfg.max_power,
            trial_index=0,
            arm=ARM_NAMES[args.arm],
            alpha=result.alpha,
            crb_d=result.crb_d,
            sqrt_crb_d=math.sqrt(result.crb_d) if result.crb_d >= 0 else math.nan,
            sinr_db=result.sinr_db,
            power_used=result.power_used,
            converged=result.converged,
            infeasible=result.infeasible,
            iterations=result.iterations,
            channel_digest=channels.digest(),
        )
        write_trials_csv([record], args.csv)

    if result.infeasible:
        return EXIT_INFEASIBLE
    if not result.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, runtime: RuntimeSettings) -> int:
    cfg = _load(args.config)
    spec = SweepSpec(
        variable=args.variable,
        grid=args.grid,
        trials=args.trials,
        base_seed=args.seed,
        arms=args.arms,
        fixed_alpha_db=args.fixed_alpha_db,
    )
    workers = args.workers or runtime.workers
    records = run_sweep(cfg, spec, runtime.optimizer_settings(), workers, progress=not args.quiet)
    summaries = aggregate(records)

    trials_path = write_trials_csv(records, args.out)
    summary_path = write_summary_csv(summaries, summary_path_for(trials_path))

    print(f"{'value':>14} {'arm':>10} {'n_ok':>6} {'mean sqrt(crb)':>16} {'median':>14}")
    for s in summaries:
        mean = f"{s.mean_sqrt_crb:.6g}" if s.mean_sqrt_crb is not None else "-"
        median = f"{s.median_sqrt_crb:.6g}" if s.median_sqrt_crb is not None else "-"
        print(f"{s.sweep_value:>14.6g} {s.arm:>10} {s.n_ok:>6} {mean:>16} {median:>14}")
    print(f"trials written to {trials_path}")
    print(f"aggregate written to {summary_path}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace, runtime: RuntimeSettings) -> int:
    report = run_validation(trials=args.trials, seed=args.seed, fault=args.fault)
    for check in report.checks:
        status = "PASS" if check.passed else "FAIL"
        print(
            f"{status} {check.name:<34} max {check.max_discrepancy:.3e} "
            f"(threshold {check.threshold:.0e}, {check.cases} cases)"
        )
    return EXIT_OK if report.passed else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="ncr-isac",
        description="Range CRB analysis and precoder/repeater-gain optimization for NCR-assisted ISAC",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    crb = commands.add_parser("crb", help="Evaluate the range CRB at a single operating point")
    crb.add_argument("--config", help="Configuration file (defaults to the built-in parameters)")
    crb.add_argument("--alpha", type=float, default=1.0, help="Repeater gain, linear")
    crb.add_argument("--precoder", choices=["uniform", "matched"], default="matched")
    crb.add_argument("--distance", type=float, help="Target distance override in metres")
    crb.set_defaults(handler=cmd_crb)

    optimize = commands.add_parser("optimize", help="Run one optimization on a drawn channel")
    optimize.add_argument("--config")
    optimize.add_argument("--seed", type=int, default=0)
    optimize.add_argument("--arm", choices=sorted(ARM_NAMES), default="joint")
    optimize.add_argument("--fixed-alpha-db", type=float, default=18.5)
    optimize.add_argument("--csv", help="Write the result as a one-row trial CSV")
    optimize.set_defaults(handler=cmd_optimize)

    sweep = commands.add_parser("sweep", help="Monte Carlo sweep over one parameter")
    sweep.add_argument("--config")
    sweep.add_argument(
        "--variable", choices=["max_power", "min_user_sinr_db", "rcs_var_db"], required=True
    )
    sweep.add_argument("--grid", type=_float_list, required=True, help="Comma-separated values")
    sweep.add_argument("--trials", type=int, default=100)
    sweep.add_argument("--seed", type=int, default=0)
    sweep.add_argument("--arms", type=_arm_list, default=["joint", "fixed_gain"])
    sweep.add_argument("--fixed-alpha-db", type=float, default=18.5)
    sweep.add_argument("--out", required=True, help="Trial CSV path; the aggregate lands next to it")
    sweep.add_argument("--workers", type=int, help="Worker processes (env NCR_ISAC_WORKERS)")
    sweep.add_argument("--quiet", action="store_true", help="Hide the progress bar")
    sweep.set_defaults(handler=cmd_sweep)

    validate = commands.add_parser("validate", help="Run the oracle and property suites")
    validate.add_argument("--trials", type=int, default=100)
    validate.add_argument("--seed", type=int, default=0)
    validate.add_argument("--fault", choices=FAULTS, help="Inject a known defect")
    validate.set_defaults(handler=cmd_validate)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        runtime = RuntimeSettings.from_env()
        configure_logging(runtime.log_level)
        return args.handler(args, runtime)
    except IdentifiabilityError as e:
        logger.error(f"Identifiability error: {e}")
        return EXIT_IDENTIFIABILITY
    except CrbConsistencyError as e:
        logger.error(str(e))
        return EXIT_VALIDATION
    except ValueError as e:
        logger.error(f"Invalid input: {e}")
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return EXIT_USAGE


def run() -> None:
    sys.exit(main())


if __name__ == "__main__":
    run()
