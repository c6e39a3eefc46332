import numpy as np
import pytest

from conftest import make_catalogs
from fusecal.core.errors import ConfigError, EmptyDatabaseError, ShapeError
from fusecal.models.catalog import CatalogRole, ItemCatalog
from fusecal.models.results import Prediction
from fusecal.models.scores import ScoreKind, ScoreMatrix
from fusecal.services.retrieval import rank_top1, ranking, top1_accuracy, topk_accuracy


def fused(values):
    return ScoreMatrix(np.asarray(values, dtype=np.float64), ScoreKind.FUSED)


class TestRankTop1:
    def test_best_column(self, small_catalogs):
        _, database = small_catalogs
        predictions = rank_top1(fused([[0.1, 0.7, 0.2], [0.9, 0.0, 0.3]]), database)
        assert [p.db_index for p in predictions] == [1, 0]
        assert predictions[0] == Prediction(query_index=0, db_index=1, identity="B", score=0.7)

    def test_ties_go_to_lowest_index(self, small_catalogs):
        _, database = small_catalogs
        predictions = rank_top1(fused([[0.4, 0.4, 0.4], [0.1, 0.6, 0.6]]), database)
        assert [p.db_index for p in predictions] == [0, 1]

    def test_matches_argmax(self, rng):
        _, database = make_catalogs([], [f"id{i}" for i in range(12)])
        values = rng.integers(0, 4, (40, 12)) / 4.0
        predictions = rank_top1(fused(values), database)
        expected = [min(np.flatnonzero(row == row.max())) for row in values]
        assert [p.db_index for p in predictions] == expected

    def test_query_indices_label_rows(self, small_catalogs):
        _, database = small_catalogs
        predictions = rank_top1(fused([[0.0, 1.0, 0.0]]), database, query_indices=[7])
        assert predictions[0].query_index == 7

    def test_errors(self, small_catalogs):
        _, database = small_catalogs
        empty = ItemCatalog.from_pairs([], CatalogRole.DATABASE)
        with pytest.raises(EmptyDatabaseError):
            rank_top1(fused(np.zeros((2, 0))), empty)
        with pytest.raises(ShapeError):
            rank_top1(fused([[0.5, 0.5]]), database)
        with pytest.raises(ShapeError):
            rank_top1(fused([[0.5, 0.5, 0.5]]), database, query_indices=[0, 1])


class TestRanking:
    def test_stable_descending(self):
        np.testing.assert_array_equal(ranking([0.2, 0.9, 0.2, 0.9]), [1, 3, 0, 2])


class TestTop1Accuracy:
    def test_all_correct(self):
        query, database = make_catalogs(["A", "B"], ["A", "B"])
        predictions = rank_top1(fused([[1.0, 0.0], [0.0, 1.0]]), database)
        assert top1_accuracy(predictions, query, database) == 1.0

    def test_all_wrong(self):
        query, database = make_catalogs(["A", "B"], ["A", "B"])
        predictions = rank_top1(fused([[0.0, 1.0], [1.0, 0.0]]), database)
        assert top1_accuracy(predictions, query, database) == 0.0

    def test_half_correct(self):
        query, database = make_catalogs(["A", "B"], ["A", "B"])
        predictions = rank_top1(fused([[1.0, 0.0], [1.0, 0.0]]), database)
        assert top1_accuracy(predictions, query, database) == 0.5

    def test_subset_of_queries(self, small_catalogs):
        query, database = small_catalogs
        predictions = rank_top1(fused([[0.0, 1.0, 0.0]]), database, query_indices=[1])
        assert top1_accuracy(predictions, query, database, query_indices=[1]) == 1.0

    def test_empty_and_mismatched(self, small_catalogs):
        query, database = small_catalogs
        assert top1_accuracy([], query, database, query_indices=[]) == 0.0
        with pytest.raises(ShapeError):
            top1_accuracy([], query, database)


class TestTopkAccuracy:
    def test_identity_within_k(self):
        query, database = make_catalogs(["A", "B"], ["A", "B", "C"])
        scores = fused([[0.1, 0.9, 0.5], [0.2, 0.5, 0.9]])
        assert topk_accuracy(scores, query, database, 1) == 0.0
        assert topk_accuracy(scores, query, database, 2) == 0.5
        assert topk_accuracy(scores, query, database, 3) == 1.0
        assert topk_accuracy(scores, query, database, 10) == 1.0

    def test_k1_agrees_with_top1(self, rng):
        identities = ["A", "B", "C", "D"]
        query, database = make_catalogs(
            [identities[i] for i in rng.integers(0, 4, 20)], [identities[i] for i in rng.integers(0, 4, 9)]
        )
        scores = fused(rng.integers(0, 3, (20, 9)) / 2.0)
        predictions = rank_top1(scores, database)
        assert topk_accuracy(scores, query, database, 1) == pytest.approx(top1_accuracy(predictions, query, database))

    def test_invalid_k(self, small_catalogs):
        query, database = small_catalogs
        with pytest.raises(ConfigError):
            topk_accuracy(fused(np.zeros((2, 3))), query, database, 0)
