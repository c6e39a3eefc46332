import logging
from typing import Literal, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from fusecal.config import default, default_mu_grid, validated
from fusecal.core.errors import ConfigError, ConstraintError, FlaggedCalibratorError, FusecalError
from fusecal.core.random_streams import SUBSAMPLE, stream
from fusecal.models.calibrator import CalibrationMethod
from fusecal.models.catalog import ItemCatalog
from fusecal.models.matches import MatchRecordSet
from fusecal.models.results import MuTuning
from fusecal.models.scores import ScoreMatrix
from fusecal.services.calibration import apply_calibrator, fit_calibrator
from fusecal.services.fusion import default_config, fuse
from fusecal.services.pairs import build_pair_labels
from fusecal.services.retrieval import rank_top1, top1_accuracy
from fusecal.services.similarity import MatchThreshold, local_score_matrix

logger = logging.getLogger(__name__)

Objective = Literal["local", "fused"]


def validation_accuracy(
    records: MatchRecordSet,
    mu: float,
    query_catalog: ItemCatalog,
    db_catalog: ItemCatalog,
    validation: Sequence[int],
    method: Union[CalibrationMethod, str, None] = None,
    others: Optional[Mapping[str, ScoreMatrix]] = None,
    name: str = "local",
) -> float:
    """
    Validation top-1 accuracy of the local score at one threshold.

    The calibrator is fitted on the validation pairs. With ``others`` the
    calibrated local score is first fused (equal weights) with those
    calibrated matrices, which must cover the validation rows only.
    """
    raw = local_score_matrix(records, MatchThreshold(mu=mu), len(query_catalog), len(db_catalog))
    pairs = build_pair_labels(raw, query_catalog, db_catalog, validation)
    calibrator = fit_calibrator(pairs, method)
    calibrated = apply_calibrator(calibrator, raw.rows(validation))

    if calibrated.flagged:
        raise FlaggedCalibratorError(f"calibrator fitted at mu={mu} is decreasing")

    scores = calibrated
    if others:
        scores = fuse({name: calibrated, **others}, default_config([name, *others]))

    predictions = rank_top1(scores, db_catalog, query_indices=validation)
    return top1_accuracy(predictions, query_catalog, db_catalog, query_indices=validation)


def tune_mu(
    records: MatchRecordSet,
    query_catalog: ItemCatalog,
    db_catalog: ItemCatalog,
    validation: Sequence[int],
    grid: Optional[Sequence[float]] = None,
    method: Union[CalibrationMethod, str, None] = None,
    objective: Objective = "local",
    others: Optional[Mapping[str, ScoreMatrix]] = None,
    name: str = "local",
) -> MuTuning:
    """
    Grid search for the match threshold on the validation split.

    Every grid value gets its own calibrator. A value whose calibrator cannot
    be fitted (or comes out decreasing) scores -inf and is recorded as a
    failure. The best accuracy wins; ties go to the smallest mu.
    """
    grid = default_mu_grid() if grid is None else [float(mu) for mu in grid]
    if not grid:
        raise ConfigError("mu grid is empty")
    for mu in grid:
        validated(MatchThreshold, mu=mu)
    validation = sorted(int(i) for i in validation)
    if not validation:
        raise ConfigError("mu tuning needs a non-empty validation split")
    if objective not in ("local", "fused"):
        raise ConfigError(f"unknown mu tuning objective {objective!r}")
    fused_with = None
    if objective == "fused" and others:
        fused_with = {other: matrix.rows(validation) for other, matrix in others.items()}

    curve = {}
    failures = {}
    first_error: Optional[FusecalError] = None
    for mu in sorted(set(grid)):
        try:
            accuracy = validation_accuracy(
                records, mu, query_catalog, db_catalog, validation, method, fused_with, name
            )
        except FusecalError as e:
            if e.exit_code != 3:
                raise
            logger.warning(f"{name}: mu={mu} skipped, calibration failed: {e}")
            failures[mu] = str(e)
            first_error = first_error or e
            accuracy = float("-inf")
        logger.debug(f"{name}: mu={mu} validation top-1 {accuracy}")
        curve[mu] = accuracy

    best_mu, best = None, float("-inf")
    for mu in sorted(curve):
        if curve[mu] > best:
            best_mu, best = mu, curve[mu]
    if best_mu is None:
        # add_note is 3.11+
        if hasattr(first_error, "add_note"):
            first_error.add_note(f"every mu in the grid failed for score {name!r}")
        raise first_error

    logger.info(f"{name}: tuned mu={best_mu} (validation top-1 {best:.4f})")
    return MuTuning(mu=best_mu, curve=curve, failures=failures)


def _pair_counts(query_catalog: ItemCatalog, db_catalog: ItemCatalog, candidates: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    identities = db_catalog.identities()
    positives = np.array(
        [int(np.count_nonzero(identities == query_catalog.identity_of(int(q)))) for q in candidates],
        dtype=np.int64,
    )
    return positives, len(db_catalog) - positives


def subsample_calibration_set(
    query_catalog: ItemCatalog,
    db_catalog: ItemCatalog,
    n_items: int,
    seed: int,
    candidates: Optional[Sequence[int]] = None,
    max_attempts: Optional[int] = None,
) -> Tuple[int, ...]:
    """
    Seeded uniform sample of ``n_items`` calibration queries (sorted).

    The induced (query x database) pair set must hold at least two positive
    and two negative pairs; samples that do not are redrawn from the same
    stream, up to ``max_attempts`` times.
    """
    if n_items < 1:
        raise ConfigError(f"n_items must be >= 1, got {n_items}")
    attempts = default("subsample", "max_attempts") if max_attempts is None else max_attempts
    min_positive = default("subsample", "min_positive_pairs")
    min_negative = default("subsample", "min_negative_pairs")

    available = np.array(
        sorted(int(i) for i in (range(len(query_catalog)) if candidates is None else candidates)),
        dtype=np.int64,
    )
    positives, negatives = _pair_counts(query_catalog, db_catalog, available)
    if positives.sum() < min_positive or negatives.sum() < min_negative:
        raise ConstraintError(
            f"no subset reaches {min_positive} positive and {min_negative} negative pairs "
            f"(all {available.size} candidates give {positives.sum()} and {negatives.sum()})"
        )
    if n_items >= available.size:
        return tuple(available.tolist())

    rng = stream(seed, SUBSAMPLE)
    for attempt in range(1, attempts + 1):
        picked = np.sort(rng.choice(available.size, size=n_items, replace=False))
        if positives[picked].sum() >= min_positive and negatives[picked].sum() >= min_negative:
            if attempt > 1:
                logger.debug(f"Calibration subsample of {n_items} accepted after {attempt} draws")
            return tuple(available[picked].tolist())
        if attempt == int(attempts * 0.9):
            logger.warning(f"Calibration subsample of {n_items}: {attempt} draws rejected so far")
    raise ConstraintError(
        f"no sample of {n_items} items met the pair constraint in {attempts} attempts"
    )
