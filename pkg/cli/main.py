import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Sequence, Type

from dishka import Container
from pydantic import BaseModel

from application.benchmark.models import CorruptionSpec, SweepConfig
from application.benchmark.services import SweepRunner
from application.benchmark.use_cases import (
    corrupt_cloud_file,
    evaluate_transform,
    run_sweep_files,
)
from application.point_clouds.models import SurfaceConfig
from application.point_clouds.services import SurfaceEstimator
from application.point_clouds.use_cases import annotate_cloud_file
from application.registration.exceptions import ConvergenceError
from application.registration.models import EmConfig, ModelConfig
from application.registration.services import Registrar
from application.registration.use_cases import register_clouds
from cli.parser import CliArgumentParser, add_model_flags, build_model, collect_values
from config import Config, get_config
from core.errors import EXIT_OK, UsageError
from core.handlers.handlers import handle_cli_error
from core.ioc import make_ioc
from logger import setup_logging

logger = logging.getLogger(__name__)

# Модели конфигурации, флаги которых принимает каждая команда
COMMAND_MODELS: Dict[str, List[Type[BaseModel]]] = {
    "register": [ModelConfig, EmConfig, SurfaceConfig],
    "annotate": [SurfaceConfig],
    "corrupt": [CorruptionSpec],
    "eval": [],
    "sweep": [ModelConfig, EmConfig, SurfaceConfig, SweepConfig],
}


def build_parser() -> CliArgumentParser:
    parser = CliArgumentParser(
        prog="lsg-cpd",
        description="Rigid point cloud registration with local surface geometry",
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="Worker threads, 0 = all cores (default: THREADS from environment, 1)",
    )
    parser.add_argument(
        "--config", type=Path, default=None, help="Flat key=value file with run parameters"
    )
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    register = commands.add_parser("register", help="Register source onto target")
    register.add_argument("--source", type=Path, required=True)
    register.add_argument("--target", type=Path, required=True)
    register.add_argument("--out", type=Path, required=True, help="4×4 transform output")
    register.add_argument("--report", type=Path, default=None, help="Report path (default: <out>.report.json)")
    register.add_argument("--init", type=Path, default=None, help="Initial transform file")
    register.add_argument("--dump-p", type=Path, default=None, help="Write final P as CSV")

    annotate = commands.add_parser("annotate", help="Estimate normals and surface variation")
    annotate.add_argument("--input", type=Path, required=True)
    annotate.add_argument("--out", type=Path, required=True)

    corrupt = commands.add_parser("corrupt", help="Add Gaussian noise and outliers")
    corrupt.add_argument("--input", type=Path, required=True)
    corrupt.add_argument("--out", type=Path, required=True)

    evaluate = commands.add_parser("eval", help="Compare an estimate with ground truth")
    evaluate.add_argument("--source", type=Path, required=True)
    evaluate.add_argument("--est", type=Path, required=True)
    evaluate.add_argument("--gt", type=Path, required=True)

    sweep = commands.add_parser("sweep", help="Run a seeded robustness sweep")
    sweep.add_argument("--source", type=Path, required=True)
    sweep.add_argument("--target", type=Path, default=None, help="Target cloud (default: source)")
    sweep.add_argument("--out", type=Path, default=Path("sweep.csv"), help="CSV output (default: sweep.csv)")

    for name, subparser in commands.choices.items():
        add_model_flags(subparser, *COMMAND_MODELS[name])
    return parser


def _run_register(args: argparse.Namespace, container: Container, values: dict) -> int:
    report = register_clouds(
        container.get(Registrar),
        args.source,
        args.target,
        args.out,
        model_cfg=build_model(ModelConfig, values),
        em_cfg=build_model(EmConfig, values),
        surface_cfg=build_model(SurfaceConfig, values),
        report_path=args.report,
        init_path=args.init,
        dump_p_path=args.dump_p,
    )
    if not report.converged:
        raise ConvergenceError(
            message=f"Registration did not converge in {report.iterations} iterations",
            details={"stop_reason": report.stop_reason},
        )
    return EXIT_OK


def _run_annotate(args: argparse.Namespace, container: Container, values: dict) -> int:
    surface_cfg = build_model(SurfaceConfig, values)
    with container(context={SurfaceConfig: surface_cfg}) as request_container:
        annotate_cloud_file(
            request_container.get(SurfaceEstimator),
            args.input,
            args.out,
            voxel_size=surface_cfg.voxel_size,
        )
    return EXIT_OK


def _run_corrupt(args: argparse.Namespace, container: Container, values: dict) -> int:
    corrupt_cloud_file(args.input, args.out, build_model(CorruptionSpec, values))
    return EXIT_OK


def _run_eval(args: argparse.Namespace, container: Container, values: dict) -> int:
    metrics = evaluate_transform(args.source, args.est, args.gt)
    sys.stdout.write(json.dumps(metrics) + "\n")
    return EXIT_OK


def _run_sweep(args: argparse.Namespace, container: Container, values: dict) -> int:
    run_sweep_files(
        container.get(SweepRunner),
        args.source,
        args.target or args.source,
        args.out,
        sweep_cfg=build_model(SweepConfig, values),
        model_cfg=build_model(ModelConfig, values),
        em_cfg=build_model(EmConfig, values),
        surface_cfg=build_model(SurfaceConfig, values),
    )
    return EXIT_OK


COMMANDS: Dict[str, Callable[[argparse.Namespace, Container, dict], int]] = {
    "register": _run_register,
    "annotate": _run_annotate,
    "corrupt": _run_corrupt,
    "eval": _run_eval,
    "sweep": _run_sweep,
}


def _resolve_config(args: argparse.Namespace) -> Config:
    config = get_config()
    if args.threads is not None and args.threads < 0:
        raise UsageError(message="--threads must be >= 0")
    if args.threads is not None:
        config = config.model_copy(update={"THREADS": args.threads})
    return config


def main(argv: Sequence[str] | None = None) -> int:
    """Точка входа CLI; возвращает код выхода"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # --help
        return int(e.code or 0)
    except Exception as e:
        return handle_cli_error(e)

    container: Container | None = None
    try:
        config = _resolve_config(args)
        setup_logging(config, service_name="cli")
        values = collect_values(args, COMMAND_MODELS[args.command])
        container = make_ioc(config)
        logger.debug("Command started", extra={"command": args.command, "threads": config.resolved_threads()})
        return COMMANDS[args.command](args, container, values)
    except Exception as e:
        return handle_cli_error(e)
    finally:
        if container is not None:
            container.close()
