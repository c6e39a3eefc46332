import threading

import numpy as np
import pytest
from pydantic import ValidationError

from conftest import make_catalogs
from fusecal.core.errors import EmptyDatabaseError, ScorerError
from fusecal.models.catalog import CatalogRole, ItemCatalog
from fusecal.models.scores import ScoreKind, ScoreMatrix
from fusecal.services.retrieval import rank_top1
from fusecal.services.shortlist import Budget, merged_ranking, shortlist_rerank


def database_of(n):
    return make_catalogs([], [f"id{i % 7}" for i in range(n)])[1]


class CountingScorer:
    """Expensive scorer backed by a matrix, recording every pair it is asked about."""

    def __init__(self, values):
        self.values = values
        self.calls = []
        self._lock = threading.Lock()

    def __call__(self, query, db_index):
        with self._lock:
            self.calls.append((query, db_index))
        return float(self.values[query, db_index])


def exhaustive_shortlist_top1(cheap, expensive, b):
    winners = []
    for q in range(cheap.shape[0]):
        order = sorted(range(cheap.shape[1]), key=lambda d: (-cheap[q, d], d))
        candidates = order[:b]
        winners.append(min(candidates, key=lambda d: (-expensive[q, d], d)))
    return winners


class TestBudget:
    def test_positive_integer(self):
        assert Budget(b=3).b == 3
        with pytest.raises(ValidationError):
            Budget(b=0)
        with pytest.raises(ValidationError):
            Budget(b=2.5)


class TestShortlistRerank:
    def test_full_budget_equals_full_ranking(self, rng):
        for _ in range(100):
            n_query, n_db = int(rng.integers(1, 6)), int(rng.integers(1, 51))
            cheap = ScoreMatrix(rng.uniform(-1, 1, (n_query, n_db)), ScoreKind.RAW_GLOBAL)
            expensive = rng.integers(0, 5, (n_query, n_db)) / 4.0
            database = database_of(n_db)
            outcome = shortlist_rerank(cheap, CountingScorer(expensive), Budget(b=n_db), database)
            full = rank_top1(ScoreMatrix(expensive, ScoreKind.FUSED), database)
            assert [p.db_index for p in outcome.predictions] == [p.db_index for p in full]

    def test_budget_one_is_cheap_top1(self, rng):
        cheap = ScoreMatrix(rng.uniform(-1, 1, (8, 10)), ScoreKind.RAW_GLOBAL)
        database = database_of(10)
        outcome = shortlist_rerank(cheap, CountingScorer(rng.random((8, 10))), Budget(b=1), database)
        assert [p.db_index for p in outcome.predictions] == [p.db_index for p in rank_top1(cheap, database)]

    def test_matches_exhaustive_oracle(self, rng):
        for _ in range(50):
            cheap_values = rng.integers(0, 4, (6, 5)) / 3.0 - 0.5
            expensive = rng.integers(0, 3, (6, 5)) / 2.0
            cheap = ScoreMatrix(cheap_values, ScoreKind.RAW_GLOBAL)
            outcome = shortlist_rerank(cheap, CountingScorer(expensive), Budget(b=3), database_of(5))
            assert [p.db_index for p in outcome.predictions] == exhaustive_shortlist_top1(cheap_values, expensive, 3)

    def test_evaluation_count(self, rng):
        for _ in range(100):
            n_query, n_db = int(rng.integers(1, 5)), int(rng.integers(1, 51))
            cheap_values = rng.uniform(-1, 1, (n_query, n_db))
            cheap = ScoreMatrix(cheap_values, ScoreKind.RAW_GLOBAL)
            for b in sorted({1, 3, max(1, n_db // 2), n_db, 2 * n_db}):
                scorer = CountingScorer(rng.random((n_query, n_db)))
                outcome = shortlist_rerank(cheap, scorer, Budget(b=b), database_of(n_db))
                size = min(b, n_db)
                assert len(scorer.calls) == n_query * size
                np.testing.assert_array_equal(outcome.evaluations, [size] * n_query)
                for q, d in scorer.calls:
                    top = np.argsort(-cheap_values[q], kind="stable")[:size]
                    assert d in top

    def test_threads_do_not_change_predictions(self, rng):
        cheap = ScoreMatrix(rng.uniform(-1, 1, (25, 30)), ScoreKind.RAW_GLOBAL)
        expensive = rng.random((25, 30))
        database = database_of(30)
        single = shortlist_rerank(cheap, CountingScorer(expensive), Budget(b=5), database, threads=1)
        scorer = CountingScorer(expensive)
        several = shortlist_rerank(cheap, scorer, Budget(b=5), database, threads=4)
        assert single.predictions == several.predictions
        assert len(scorer.calls) == 25 * 5
        assert len(set(scorer.calls)) == 25 * 5

    def test_query_indices_forwarded(self):
        cheap = ScoreMatrix([[0.9, 0.1]], ScoreKind.RAW_GLOBAL)
        scorer = CountingScorer(np.array([[0.0, 0.0], [0.0, 0.0], [0.2, 0.8]]))
        outcome = shortlist_rerank(cheap, scorer, Budget(b=2), database_of(2), query_indices=[2])
        assert scorer.calls == [(2, 0), (2, 1)]
        assert outcome.predictions[0].query_index == 2
        assert outcome.predictions[0].db_index == 1
        assert outcome.predictions[0].score == 0.8

    def test_scorer_failure_names_pair(self):
        def scorer(query, db_index):
            if (query, db_index) == (1, 2):
                raise ValueError("matcher crashed")
            return 0.5

        cheap = ScoreMatrix([[0.1, 0.2, 0.3], [0.1, 0.2, 0.3]], ScoreKind.RAW_GLOBAL)
        with pytest.raises(ScorerError) as excinfo:
            shortlist_rerank(cheap, scorer, Budget(b=1), database_of(3))
        assert excinfo.value.pair == (1, 2)
        assert isinstance(excinfo.value.__cause__, ValueError)

    def test_empty_database(self):
        cheap = ScoreMatrix(np.zeros((1, 0)), ScoreKind.RAW_GLOBAL)
        with pytest.raises(EmptyDatabaseError):
            shortlist_rerank(cheap, CountingScorer(None), Budget(b=1), ItemCatalog.from_pairs([], CatalogRole.DATABASE))


class TestMergedRanking:
    def test_shortlist_first_then_cheap_order(self):
        cheap = ScoreMatrix([[0.9, 0.8, 0.7, 0.6, 0.5]], ScoreKind.RAW_GLOBAL)
        expensive = np.array([[0.1, 0.3, 0.2, 0.9, 0.9]])
        outcome = shortlist_rerank(cheap, CountingScorer(expensive), Budget(b=3), database_of(5))
        np.testing.assert_array_equal(merged_ranking(outcome, 0), [1, 2, 0, 3, 4])

    def test_is_a_permutation(self, rng):
        cheap = ScoreMatrix(rng.uniform(-1, 1, (4, 12)), ScoreKind.RAW_GLOBAL)
        outcome = shortlist_rerank(cheap, CountingScorer(rng.random((4, 12))), Budget(b=5), database_of(12))
        for row in range(4):
            assert sorted(merged_ranking(outcome, row).tolist()) == list(range(12))
