import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from fusecal.core.errors import EmptyDatabaseError, ScorerError, ShapeError
from fusecal.core.parallel import run_row_blocks
from fusecal.models.catalog import ItemCatalog
from fusecal.models.results import Prediction
from fusecal.models.scores import ScoreMatrix
from fusecal.services.retrieval import ranking

logger = logging.getLogger(__name__)

# (query index, database index) -> expensive score
PairScorer = Callable[[int, int], float]


class Budget(BaseModel):
    model_config = ConfigDict(frozen=True)

    b: int = Field(ge=1, strict=True, description="Expensive score evaluations allowed per query")


@dataclass
class ShortlistOutcome:
    """Per-query shortlist, the expensive scores it got, and the resulting predictions."""

    predictions: List[Prediction]
    shortlists: List[np.ndarray]
    expensive: List[np.ndarray]
    cheap_rankings: List[np.ndarray]

    @property
    def evaluations(self) -> np.ndarray:
        return np.array([s.size for s in self.shortlists], dtype=np.int64)


def _rerank(candidates: np.ndarray, values: np.ndarray) -> np.ndarray:
    # highest expensive score first, then lowest database index
    return candidates[np.lexsort((candidates, -values))]


def shortlist_rerank(
    cheap: ScoreMatrix,
    expensive_scorer: PairScorer,
    budget: Budget,
    db_catalog: ItemCatalog,
    query_indices: Optional[Sequence[int]] = None,
    threads: Optional[int] = None,
) -> ShortlistOutcome:
    """
    Re-rank the cheap top-B of every query with the expensive scorer.

    The scorer is called exactly min(B, D) times per query, on the cheap
    top candidates only. The scorer may be called from several threads at
    once, on distinct pairs.
    """
    if cheap.n_database == 0:
        raise EmptyDatabaseError("cannot shortlist against an empty database")
    if cheap.n_database != len(db_catalog):
        raise ShapeError(f"score matrix has {cheap.n_database} columns, database has {len(db_catalog)} items")
    queries = (
        np.arange(cheap.n_query, dtype=np.int64)
        if query_indices is None
        else np.asarray(query_indices, dtype=np.int64).reshape(-1)
    )
    if queries.size != cheap.n_query:
        raise ShapeError(f"{queries.size} query indices for a score matrix with {cheap.n_query} rows")

    size = min(budget.b, cheap.n_database)
    predictions: List[Optional[Prediction]] = [None] * cheap.n_query
    shortlists: List[Optional[np.ndarray]] = [None] * cheap.n_query
    expensive: List[Optional[np.ndarray]] = [None] * cheap.n_query
    rankings: List[Optional[np.ndarray]] = [None] * cheap.n_query

    def work(start: int, stop: int) -> None:
        for row in range(start, stop):
            query = int(queries[row])
            order = ranking(cheap.values[row])
            candidates = order[:size]
            values = np.empty(size, dtype=np.float64)
            for i, db_index in enumerate(candidates):
                pair = (query, int(db_index))
                try:
                    values[i] = float(expensive_scorer(*pair))
                except ScorerError:
                    raise
                except Exception as e:
                    raise ScorerError(pair, e)
            winner = int(_rerank(candidates, values)[0])
            predictions[row] = Prediction(
                query_index=query,
                db_index=winner,
                identity=db_catalog.identity_of(winner),
                score=float(values[candidates == winner][0]),
            )
            shortlists[row] = candidates
            expensive[row] = values
            rankings[row] = order

    run_row_blocks(work, cheap.n_query, threads)
    logger.debug(f"Shortlist B={budget.b}: {size * cheap.n_query} expensive evaluations")
    return ShortlistOutcome(predictions, shortlists, expensive, rankings)


def merged_ranking(outcome: ShortlistOutcome, row: int) -> np.ndarray:
    """Full ranking for one query: re-ranked shortlist first, then the rest in cheap order."""
    shortlist = outcome.shortlists[row]
    head = _rerank(shortlist, outcome.expensive[row])
    tail = outcome.cheap_rankings[row][shortlist.size:]
    return np.concatenate([head, tail])
