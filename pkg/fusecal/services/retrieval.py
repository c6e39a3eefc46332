import logging
from typing import Optional, Sequence

import numpy as np

from fusecal.core.errors import ConfigError, EmptyDatabaseError, ShapeError
from fusecal.models.catalog import ItemCatalog
from fusecal.models.results import Prediction
from fusecal.models.scores import ScoreMatrix

logger = logging.getLogger(__name__)


def ranking(row: np.ndarray) -> np.ndarray:
    """Database indices from best to worst score; equal scores keep index order."""
    return np.argsort(-np.asarray(row, dtype=np.float64), kind="stable")


def _query_indices(scores: ScoreMatrix, query_indices: Optional[Sequence[int]]) -> np.ndarray:
    if query_indices is None:
        return np.arange(scores.n_query, dtype=np.int64)
    indices = np.asarray(query_indices, dtype=np.int64).reshape(-1)
    if indices.size != scores.n_query:
        raise ShapeError(f"{indices.size} query indices for a score matrix with {scores.n_query} rows")
    return indices


def rank_top1(
    scores: ScoreMatrix,
    db_catalog: ItemCatalog,
    query_indices: Optional[Sequence[int]] = None,
) -> list[Prediction]:
    """
    Best database item per score row. Ties go to the lowest database index.

    ``query_indices`` names the query each row belongs to when the matrix
    holds only some of the queries (e.g. the test split).
    """
    if scores.n_database == 0:
        raise EmptyDatabaseError("cannot rank against an empty database")
    if scores.n_database != len(db_catalog):
        raise ShapeError(f"score matrix has {scores.n_database} columns, database has {len(db_catalog)} items")

    queries = _query_indices(scores, query_indices)
    best = np.argmax(scores.values, axis=1)
    return [
        Prediction(
            query_index=int(q),
            db_index=int(d),
            identity=db_catalog.identity_of(int(d)),
            score=float(scores.values[row, d]),
        )
        for row, (q, d) in enumerate(zip(queries, best))
    ]


def top1_accuracy(
    predictions: Sequence[Prediction],
    query_catalog: ItemCatalog,
    db_catalog: ItemCatalog,
    query_indices: Optional[Sequence[int]] = None,
) -> float:
    """Share of predictions whose database item has the query's identity."""
    expected = len(query_catalog) if query_indices is None else len(query_indices)
    if len(predictions) != expected:
        raise ShapeError(f"{len(predictions)} predictions for {expected} queries")
    if not predictions:
        return 0.0
    correct = sum(
        query_catalog.identity_of(p.query_index) == db_catalog.identity_of(p.db_index)
        for p in predictions
    )
    return correct / len(predictions)


def topk_accuracy(
    scores: ScoreMatrix,
    query_catalog: ItemCatalog,
    db_catalog: ItemCatalog,
    k: int,
    query_indices: Optional[Sequence[int]] = None,
) -> float:
    """Share of queries whose identity appears among their k best database items."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if scores.n_database == 0:
        raise EmptyDatabaseError("cannot rank against an empty database")
    queries = _query_indices(scores, query_indices)
    if queries.size == 0:
        return 0.0

    top = np.argsort(-scores.values, axis=1, kind="stable")[:, :k]
    identities = db_catalog.identities()[top]
    truth = np.array([query_catalog.identity_of(int(q)) for q in queries], dtype=str)
    hits = (identities == truth[:, None]).any(axis=1)
    return float(hits.mean())
