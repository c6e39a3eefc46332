import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Dict, List, Optional

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from fusecal import __version__
from fusecal.config import validated
from fusecal.config.pipeline import PipelineConfig, load_pipeline_config
from fusecal.core.errors import ConfigError, FusecalError
from fusecal.core.parallel import resolve_threads
from fusecal.core.processing import PipelineSession, load_inputs, run_pipeline, stage
from fusecal.models.calibrator import CalibrationMethod
from fusecal.repositories.calibrator_store import CalibratorRepository
from fusecal.repositories.score_store import ScoreRepository
from fusecal.services.report_generator import dump_json, emit_report, write_text
from fusecal.services.synthetic import SyntheticParams, generate_synthetic

logger = logging.getLogger(__name__)

LOG_LEVEL_ENV = "FUSECAL_LOG_LEVEL"
FUSED = "fused"


class _Parser(argparse.ArgumentParser):
    """Usage errors are config errors (exit code 1), not argparse's exit 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _common_flags() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", type=Path, default=Path("out"), help="Output directory")
    common.add_argument("--seed", type=int, help="Root seed of every random stream")
    common.add_argument("--threads", type=int, help="Worker threads (default: FUSECAL_THREADS or 1)")
    return common


def _pipeline_flags() -> argparse.ArgumentParser:
    flags = _Parser(add_help=False)
    flags.add_argument("--config", type=Path, required=True, help="Pipeline config document (YAML)")
    flags.add_argument("--mu", type=float, help="Fixed match-confidence threshold for local scores")
    flags.add_argument("--budget", type=int, help="Expensive evaluations per query for the shortlist")
    flags.add_argument("--calibration", choices=["isotonic", "platt"], help="Calibration method")
    flags.add_argument("--zero-shot", type=Path, help="Directory of calibrators fitted on another dataset")
    return flags


# -- stored intermediates ---------------------------------------------------------------------


def _scores(args) -> ScoreRepository:
    return ScoreRepository(args.out / "scores")


def _calibrators(args) -> CalibratorRepository:
    return CalibratorRepository(args.out / "calibrators")


def _session(args, config: PipelineConfig) -> PipelineSession:
    session = PipelineSession(config, load_inputs(config), threads=args.threads)
    # an explicit --mu must agree with any stored local score or calibrator
    if args.mu is not None and not session.zero_shot:
        for source in config.local_sources:
            session.pin_mu(source.name, args.mu)
    return session


def _use_stored_raw(args, session: PipelineSession) -> None:
    repository = _scores(args)
    for name in session.names:
        matrix = repository.get(name)
        if matrix is not None:
            with stage(f"load stored score: {name}"):
                session.use_raw(name, matrix, mu=repository.mu_of(name))
            logger.info(f"Using stored raw score {name!r}")


def _use_stored_calibrators(args, session: PipelineSession) -> None:
    if session.zero_shot:
        return
    repository = _calibrators(args)
    stored_names = set(repository.list_names())
    for name in session.names:
        if name in stored_names:
            stored = repository.get(name)
            with stage(f"load stored calibrator: {name}"):
                session.use_calibrator(name, stored.calibrator, mu=stored.mu)
            logger.info(f"Using stored calibrator {name!r}")


def _score_type(session: PipelineSession, name: str) -> str:
    return next(source.type for source in session.config.scores if source.name == name)


# -- subcommands ------------------------------------------------------------------------------


def cmd_synth(args, config: Optional[PipelineConfig]) -> None:
    settings = {
        "n_identities": args.n_identities,
        "items_per_identity": args.items_per_identity,
        "dims": args.dims,
        "sigma": args.sigma,
        "delta": args.delta,
        "matches_per_pair": args.matches_per_pair,
        "seed": args.seed,
    }
    params = validated(SyntheticParams, **{key: value for key, value in settings.items() if value is not None})
    dataset = generate_synthetic(params, args.out)
    print(
        f"Synthetic benchmark written to {args.out}: {len(dataset.query_catalog)} queries, "
        f"{len(dataset.db_catalog)} database items, {len(dataset.matches)} matches"
    )


def _save_raw(args, config: PipelineConfig, score_type: str) -> None:
    session = _session(args, config)
    repository = _scores(args)
    names = [source.name for source in config.scores if source.type == score_type]
    if not names:
        raise ConfigError(f"no {score_type} score is configured")
    for name in names:
        path = repository.save(name, session.raw_score(name), mu=session.mu.get(name))
        print(f"{name}: {path}")


def cmd_score_global(args, config: PipelineConfig) -> None:
    _save_raw(args, config, "global")


def cmd_score_local(args, config: PipelineConfig) -> None:
    _save_raw(args, config, "local")


def cmd_calibrate(args, config: PipelineConfig) -> None:
    if config.zero_shot is not None:
        raise ConfigError("calibrate fits new calibrators; it cannot run in zero-shot mode")
    session = _session(args, config)
    _use_stored_raw(args, session)
    repository = _calibrators(args)
    for name, calibrator in session.fit_all().items():
        path = repository.save(name, calibrator, _score_type(session, name), mu=session.mu.get(name))
        print(f"{name}: {calibrator.method.value} -> {path}")


def cmd_fuse(args, config: PipelineConfig) -> None:
    session = _session(args, config)
    _use_stored_raw(args, session)
    _use_stored_calibrators(args, session)
    path = _scores(args).save(FUSED, session.fused_score())
    print(f"{FUSED}: {path}")


def cmd_evaluate(args, config: PipelineConfig) -> None:
    session = _session(args, config)
    matrix = _scores(args).get(args.score)
    if matrix is None:
        raise ConfigError(f"no stored score {args.score!r} under {_scores(args).directory}")
    with stage(f"evaluate: {args.score}"):
        matrix.check_shape(len(session.inputs.query_catalog), len(session.db_catalog))
    session.release_test_labels()
    accuracy = session.test_accuracy(matrix)
    document = {"score": args.score, "test_queries": len(session.test), "top1_accuracy": accuracy}
    write_text(args.out / f"evaluation_{args.score}.json", dump_json(document))
    print(f"{args.score}: test top-1 accuracy {accuracy:.4f} over {len(session.test)} queries")


def cmd_tune_mu(args, config: PipelineConfig) -> None:
    if config.zero_shot is not None:
        raise ConfigError("mu cannot be tuned in zero-shot mode")
    if not config.local_sources:
        raise ConfigError("no local score is configured")
    session = _session(args, config)
    document: Dict[str, Dict] = {}
    for source in config.local_sources:
        tuning = session.tune(source.name)
        document[source.name] = {"mu": tuning.mu, "curve": tuning.as_rows()}
        print(f"{source.name}: mu={tuning.mu}")
    write_text(args.out / "tuning.json", dump_json(document))


def cmd_shortlist(args, config: PipelineConfig) -> None:
    if config.shortlist is None:
        raise ConfigError("no shortlist configured; pass --budget or add a shortlist section")
    session = _session(args, config)
    _use_stored_raw(args, session)
    _use_stored_calibrators(args, session)
    session.fit_all()
    session.release_test_labels()
    curve = [session.budget_point(budget) for budget in sorted(set(config.shortlist.budgets))]
    for row in curve:
        print(f"B={row['budget']}: test top-1 accuracy {row['accuracy']:.4f}")
    write_text(args.out / "shortlist.json", dump_json({"budget_curve": curve}))


def cmd_run(args, config: PipelineConfig) -> None:
    inputs = load_inputs(config)
    result, diagnostics = run_pipeline(config, inputs, threads=args.threads)
    emit_report(result, diagnostics, args.out, inputs.query_catalog, inputs.db_catalog, config.echo())
    for name, accuracy in diagnostics.accuracies.items():
        print(f"{name}: test top-1 accuracy {accuracy:.4f}")


COMMANDS = {
    "synth": (cmd_synth, "Generate a synthetic benchmark and its pipeline.yaml"),
    "score-global": (cmd_score_global, "Compute and store raw global (cosine) scores"),
    "score-local": (cmd_score_local, "Compute and store raw local (match count) scores"),
    "calibrate": (cmd_calibrate, "Fit calibrators on the validation split"),
    "fuse": (cmd_fuse, "Fuse calibrated scores and store the result"),
    "evaluate": (cmd_evaluate, "Test-split top-1 accuracy of a stored score"),
    "tune-mu": (cmd_tune_mu, "Search the match threshold on the validation split"),
    "shortlist": (cmd_shortlist, "Budgeted shortlist re-ranking accuracy"),
    "run": (cmd_run, "Full pipeline: report.json and predictions.csv"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fusecal", description="Calibrated similarity fusion for re-identification")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = _common_flags()
    pipeline = _pipeline_flags()

    for name, (handler, help_text) in COMMANDS.items():
        parents = [common] if name == "synth" else [common, pipeline]
        sub = subparsers.add_parser(name, parents=parents, help=help_text, description=help_text)
        sub.set_defaults(handler=handler)
        if name == "synth":
            sub.add_argument("--n-identities", type=int)
            sub.add_argument("--items-per-identity", type=int)
            sub.add_argument("--dims", type=int)
            sub.add_argument("--sigma", type=float, help="Embedding noise")
            sub.add_argument("--delta", type=float, help="Gap between low and high match confidences")
            sub.add_argument("--matches-per-pair", type=float)
        elif name == "evaluate":
            sub.add_argument("--score", default=FUSED, help="Stored score to evaluate (default: fused)")
    return parser


def _configure_logging() -> None:
    level = os.getenv(LOG_LEVEL_ENV, "INFO").upper()
    if not isinstance(logging.getLevelName(level), int):
        level = "INFO"
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _load_config(args) -> PipelineConfig:
    config = load_pipeline_config(args.config)
    calibration = CalibrationMethod.parse(args.calibration).value if args.calibration else None
    return config.with_overrides(
        seed=args.seed,
        mu=args.mu,
        budget=args.budget,
        calibration=calibration,
        zero_shot=args.zero_shot,
    )


def main(argv: Optional[List[str]] = None) -> int:
    # Load environment variables first
    load_dotenv()
    _configure_logging()

    try:
        args = build_parser().parse_args(argv)
        args.threads = resolve_threads(args.threads)
        config = None if args.command == "synth" else _load_config(args)
        args.handler(args, config)
    except FusecalError as e:
        where = f" [{e.stage}]" if e.stage else ""
        print(f"fusecal: {type(e).__name__}{where}: {e}", file=sys.stderr)
        return e.exit_code
    except ValidationError as e:
        print(f"fusecal: invalid configuration: {e}", file=sys.stderr)
        return 1
    except yaml.YAMLError as e:
        print(f"fusecal: invalid YAML: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
