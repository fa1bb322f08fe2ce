"""
UAV Planner
Command-line entry point: generate instances, solve, train, evaluate, compare and plot
"""
import argparse
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import structlog

from core.config import AppConfig, merge_overrides, overlay_config_file
from core.errors import PlannerError, UsageError
from core.evaluation import compare, evaluate, write_sweep
from core.executor import SOLVER_NAMES, SolveExecutor, build_jobs
from core.instances import Instance, derive_seed, generate, list_instance_files, load, save
from core.logger import setup_logging
from core.training import held_out_instances, train
from services.checkpoint import load_checkpoint
from services.plotting import emit_trajectory_plot, plot_ratio_sweep, plot_training_curve
from services.reports import TrainingLog, read_table, write_reports, write_table

logger = structlog.get_logger(__name__)


def _key_value(text: str) -> tuple:
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got '{text}'")
    try:
        parsed: Any = float(value)
        if parsed.is_integer() and "." not in value and "e" not in value.lower():
            parsed = int(value)
    except ValueError:
        parsed = value
    return key.strip(), parsed


def _non_negative_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got '{text}'") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from None


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="YAML config file; its values override flags")
    parser.add_argument("--omega", type=float, help="Weighting coefficient in [0, 1]")
    parser.add_argument(
        "--energy",
        type=_key_value,
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override an energy parameter (repeatable)",
    )
    parser.add_argument("--workers", type=int, help="Worker processes (default: WORKERS env var)")
    parser.add_argument("--log-level", help="Log level (default: LOG_LEVEL env var)")


def _add_aco(parser: argparse.ArgumentParser):
    parser.add_argument("--ants", type=int, dest="n_ants")
    parser.add_argument("--iterations", type=int, dest="n_iterations")
    parser.add_argument("--evaporation", type=float)
    parser.add_argument("--pheromone-weight", type=float)
    parser.add_argument("--visibility-weight", type=float)
    parser.add_argument("--aco-seed", type=_non_negative_int, dest="rng_seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uav-planner", description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="Write seeded instance files")
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--N", type=int, default=20)
    p.add_argument("--zeta", type=float, default=100.0)
    p.add_argument("--area", type=float, default=1000.0)
    p.add_argument("--count", type=_non_negative_int, default=30)
    p.add_argument("--seed", type=_non_negative_int, default=0)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--log-level")

    p = sub.add_parser("solve", help="Run solvers on instance files")
    p.add_argument("instances", nargs="+", help="Instance files or directories")
    p.add_argument("--solver", action="append", choices=SOLVER_NAMES, required=True)
    p.add_argument("--checkpoint", help="Policy checkpoint (required for drl)")
    p.add_argument("--out", required=True, help="CSV report path")
    _add_common(p)
    _add_aco(p)

    p = sub.add_parser("train", help="Train the policy")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--steps", type=int, dest="n_steps")
    p.add_argument("--K", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--zeta", type=float)
    p.add_argument("--area", type=float, dest="area_size")
    p.add_argument("--lr", type=float, dest="actor_lr")
    p.add_argument("--critic-lr", type=float)
    p.add_argument("--seed", type=_non_negative_int)
    p.add_argument("--embed-dim", type=int)
    p.add_argument("--eval-every", type=int)
    p.add_argument("--eval-size", type=int)
    p.add_argument("--grad-clip", type=float)
    p.add_argument("--checkpoint", dest="checkpoint_path")
    p.add_argument("--log", dest="log_path")
    p.add_argument("--full-scale", action="store_true", help="D=128, B=256, S=40000")
    p.add_argument("--resume", action="store_true")
    _add_common(p)

    p = sub.add_parser("evaluate", help="Compare a checkpoint with the baselines")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--instances", nargs="*", default=[], help="Instance files or directories")
    p.add_argument("--K", type=int, help="Generate a held-out set with this K instead")
    p.add_argument("--count", type=_non_negative_int, default=30)
    p.add_argument("--baselines", default="greedy,aco")
    p.add_argument("--out", required=True, help="Comparison CSV path")
    _add_common(p)
    _add_aco(p)

    p = sub.add_parser("compare", help="Omega / K sweeps of mean ratios and runtimes")
    p.add_argument("instances", nargs="+", help="Instance files or directories")
    p.add_argument("--omegas", type=_float_list, default=[0.0, 0.3, 0.6, 0.9])
    p.add_argument("--solvers", default="greedy,aco")
    p.add_argument("--checkpoint")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--plot", action="store_true", help="Also render ratio charts")
    _add_common(p)
    _add_aco(p)

    p = sub.add_parser("plot", help="Render figures")
    p.add_argument("--instance", help="Instance file for a trajectory plot")
    p.add_argument("--solver", choices=SOLVER_NAMES, default="exact")
    p.add_argument("--checkpoint")
    p.add_argument("--ratios", help="ratios.csv from compare")
    p.add_argument("--axis", choices=("omega", "K"), default="omega")
    p.add_argument("--training-log", help="Training log CSV")
    p.add_argument("--out", required=True, help="SVG path")
    _add_common(p)
    _add_aco(p)
    return parser


# Configuration resolution: defaults < flags < config file

def resolve_config(args: argparse.Namespace) -> AppConfig:
    app = AppConfig()
    energy_flags: Dict[str, Any] = dict(getattr(args, "energy", []) or [])
    energy_flags["omega"] = getattr(args, "omega", None)
    energy = merge_overrides(app.energy, energy_flags)
    aco = merge_overrides(
        app.aco,
        {k: getattr(args, k, None) for k in ("n_ants", "n_iterations", "evaporation", "pheromone_weight", "visibility_weight", "rng_seed")},
    )
    train_cfg = app.train
    if getattr(args, "full_scale", False):
        train_cfg = type(train_cfg).full_scale()
    if args.command == "train":
        train_cfg = merge_overrides(train_cfg, {k: getattr(args, k, None) for k in type(train_cfg).model_fields})
    app = AppConfig(energy=energy, aco=aco, train=train_cfg)
    if getattr(args, "config", None):
        app = overlay_config_file(app, args.config)
    return app


def load_instances(locations: Sequence[str]) -> Dict[str, Instance]:
    instances: Dict[str, Instance] = {}
    for location in locations:
        for path in list_instance_files(location):
            name = path.stem if path.stem not in instances else str(path)
            instances[name] = load(path)
    return instances


def _policy_arrays(checkpoint: Optional[str]):
    if checkpoint is None:
        return None
    return load_checkpoint(checkpoint).policy.to_arrays()


# Commands

def cmd_generate(args: argparse.Namespace) -> int:
    if args.K < 1 or args.N < 2 or args.zeta <= 0:
        raise UsageError(f"Invalid generation flags K={args.K}, N={args.N}, zeta={args.zeta}")
    out_dir = Path(args.out_dir)
    for i in range(args.count):
        out_dir.mkdir(parents=True, exist_ok=True)
        instance = generate(args.K, args.N, args.zeta, derive_seed(args.seed, i), args.area)
        save(instance, out_dir / f"instance_K{args.K}_{i:04d}.yml")
    logger.info("instances_generated", count=args.count, out_dir=str(out_dir))
    return 0


def cmd_solve(args: argparse.Namespace, app: AppConfig) -> int:
    if "drl" in args.solver and not args.checkpoint:
        raise UsageError("Solver 'drl' requires --checkpoint")
    instances = load_instances(args.instances)
    executor = SolveExecutor(app.energy, app.aco, _policy_arrays(args.checkpoint), args.workers)
    reports = executor.run(build_jobs(instances, args.solver))
    write_reports(args.out, reports)
    return 0


def cmd_train(args: argparse.Namespace, app: AppConfig) -> int:
    result = train(app.train, app.energy, resume=args.resume, workers=args.workers)
    final = result.eval_ratios.get(max(result.eval_ratios)) if result.eval_ratios else None
    logger.info("training_finished", checkpoint=str(result.checkpoint_path), eval_ratio=final)
    return 0


def cmd_evaluate(args: argparse.Namespace, app: AppConfig) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    if args.K is not None:
        test_cfg = app.train.model_copy(update={"eval_size": args.count})
        instances = {f"heldout_K{args.K}_{i:04d}": inst for i, inst in enumerate(held_out_instances(test_cfg, args.K))}
    elif args.instances:
        instances = load_instances(args.instances)
    else:
        raise UsageError("evaluate needs instance paths or --K")
    baselines = [b for b in args.baselines.split(",") if b]
    table = evaluate(instances, app.energy, checkpoint.policy.to_arrays(), baselines, app.aco, args.workers)
    write_table(args.out, table.columns(), table.records())
    return 0


def cmd_compare(args: argparse.Namespace, app: AppConfig) -> int:
    solvers = [s for s in args.solvers.split(",") if s]
    unknown = set(solvers) - set(SOLVER_NAMES)
    if unknown:
        raise UsageError(f"Unknown solvers {sorted(unknown)}")
    if "drl" in solvers and not args.checkpoint:
        raise UsageError("Solver 'drl' requires --checkpoint")
    instances = load_instances(args.instances)
    result = compare(instances, app.energy, args.omegas, solvers, _policy_arrays(args.checkpoint), app.aco, args.workers)
    write_sweep(result, args.out_dir)
    if args.plot:
        out_dir = Path(args.out_dir)
        plot_ratio_sweep(result.ratio_rows, out_dir / "ratios_omega.svg", axis="omega")
        plot_ratio_sweep(result.ratio_rows, out_dir / "ratios_K.svg", axis="K", fixed=float(args.omegas[-1]))
    return 0


def cmd_plot(args: argparse.Namespace, app: AppConfig) -> int:
    if args.instance:
        if args.solver == "drl" and not args.checkpoint:
            raise UsageError("Solver 'drl' requires --checkpoint")
        instance = load(args.instance)
        executor = SolveExecutor(app.energy, app.aco, _policy_arrays(args.checkpoint), workers=1)
        report = executor.run(build_jobs({Path(args.instance).stem: instance}, [args.solver]))[0]
        emit_trajectory_plot(report, instance, args.out)
    elif args.ratios:
        rows = read_table(args.ratios)
        plot_ratio_sweep(rows, args.out, axis=args.axis, fixed=args.omega)
    elif args.training_log:
        plot_training_curve(TrainingLog(args.training_log).read(), args.out)
    else:
        raise UsageError("plot needs one of --instance, --ratios or --training-log")
    return 0


COMMANDS = {
    "solve": cmd_solve,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
    "plot": cmd_plot,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.log_level)

    try:
        if args.command == "generate":
            return cmd_generate(args)
        if getattr(args, "workers", None) is not None and args.workers < 1:
            raise UsageError(f"--workers must be at least 1, got {args.workers}")
        app = resolve_config(args)
        return COMMANDS[args.command](args, app)
    except PlannerError as e:
        logger.error("command_failed", command=args.command, error=str(e), exit_code=e.exit_code, exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    except Exception as e:
        logger.error("command_crashed", command=args.command, error=str(e), exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
