import logging
import math
from typing import Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from fusecal.config import default
from fusecal.core.errors import DegenerateInputError, IndexOutOfRangeError, RangeError, ShapeError
from fusecal.core.parallel import run_row_blocks
from fusecal.models.embeddings import EmbeddingMatrix
from fusecal.models.matches import MatchRecordSet
from fusecal.models.scores import ScoreKind, ScoreMatrix

logger = logging.getLogger(__name__)


class MatchThreshold(BaseModel):
    """Confidence a local match must strictly exceed to be counted."""

    model_config = ConfigDict(frozen=True)

    mu: float = Field(
        default_factory=lambda: default("similarity", "default_mu"),
        ge=0.0,
        le=1.0,
        allow_inf_nan=False,
        description="Threshold on match confidence; matches with confidence > mu count",
    )


ThresholdLike = Union[MatchThreshold, float]


def as_threshold(threshold: Optional[ThresholdLike]) -> MatchThreshold:
    if threshold is None:
        return MatchThreshold()
    if isinstance(threshold, MatchThreshold):
        return threshold
    return MatchThreshold(mu=float(threshold))


def _ordered_sum(values: np.ndarray) -> np.ndarray:
    # cumsum adds strictly left to right along the last axis; np.sum would pair terms up
    return np.cumsum(values, axis=-1)[..., -1]


def cosine_similarity(a: Sequence[float], b: Sequence[float]) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape or a.size == 0:
        raise ShapeError(f"cannot compare vectors of length {a.size} and {b.size}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise DegenerateInputError("vector contains non-finite values")

    norm_a = float(_ordered_sum(a * a))
    norm_b = float(_ordered_sum(b * b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateInputError("cosine similarity of a zero-norm vector")
    value = float(_ordered_sum(a * b)) / math.sqrt(norm_a * norm_b)
    return min(1.0, max(-1.0, value))


def global_score_matrix(
    query: EmbeddingMatrix,
    db: EmbeddingMatrix,
    threads: Optional[int] = None,
) -> ScoreMatrix:
    """Cosine similarity of every (query, database) embedding pair."""
    if query.dims != db.dims:
        raise ShapeError(f"query embeddings have {query.dims} dims, database embeddings {db.dims}")

    q, d = query.values, db.values
    q_norms = _ordered_sum(q * q)
    d_norms = _ordered_sum(d * d)
    out = np.empty((query.rows, db.rows), dtype=np.float64)

    def work(start: int, stop: int) -> None:
        for row in range(start, stop):
            dots = _ordered_sum(d * q[row])
            out[row] = dots / np.sqrt(q_norms[row] * d_norms)

    run_row_blocks(work, query.rows, threads)
    np.clip(out, -1.0, 1.0, out=out)
    return ScoreMatrix(out, ScoreKind.RAW_GLOBAL)


def local_match_count(confidences: Sequence[float], threshold: Optional[ThresholdLike] = None) -> int:
    mu = as_threshold(threshold).mu
    values = np.asarray(confidences, dtype=np.float64).reshape(-1)
    bad = ~((values >= 0.0) & (values <= 1.0))
    if bad.any():
        raise RangeError(f"confidence {values[bad][0]!r} outside [0, 1]")
    return int(np.count_nonzero(values > mu))


def local_score_matrix(
    records: MatchRecordSet,
    threshold: Optional[ThresholdLike],
    n_query: int,
    n_database: int,
) -> ScoreMatrix:
    """Count, per pair, the matches whose confidence exceeds mu. Absent pairs score 0."""
    mu = as_threshold(threshold).mu
    if len(records):
        if records.query_idx.max() >= n_query or records.db_idx.max() >= n_database:
            raise IndexOutOfRangeError(
                f"match records reach beyond a {n_query}x{n_database} score matrix"
            )

    keep = records.confidences > mu
    codes = records.query_idx[keep] * n_database + records.db_idx[keep]
    counts = np.bincount(codes, minlength=n_query * n_database)
    logger.debug(f"mu={mu}: {int(keep.sum())} of {len(records)} matches counted")
    return ScoreMatrix(counts.reshape(n_query, n_database).astype(np.float64), ScoreKind.RAW_LOCAL)
