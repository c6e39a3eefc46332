import math

import numpy as np
import pytest

from conftest import make_catalogs
from fusecal.core.errors import ConfigError, ConstraintError, FlaggedCalibratorError
from fusecal.models.matches import MatchRecordSet
from fusecal.models.scores import ScoreKind, ScoreMatrix
from fusecal.services.tuning import subsample_calibration_set, tune_mu, validation_accuracy

SAME_IDENTITY = [0.7, 0.75, 0.8, 0.85, 0.9]
OTHER_IDENTITY = [0.39] * 5


@pytest.fixture
def threshold_case():
    """Same-identity pairs match confidently; every other pair has five matches at 0.39."""
    query, database = make_catalogs(["A", "B", "C", "A", "B", "C"], ["A", "B", "C"])
    mapping = {}
    for q in range(len(query)):
        for d in range(len(database)):
            same = query.identity_of(q) == database.identity_of(d)
            mapping[(q, d)] = SAME_IDENTITY if same else OTHER_IDENTITY
    records = MatchRecordSet.from_mapping(mapping, len(query), len(database))
    return records, query, database


class TestTuneMu:
    def test_picks_smallest_best_threshold(self, threshold_case):
        records, query, database = threshold_case
        tuning = tune_mu(records, query, database, validation=range(6))
        assert tuning.mu == pytest.approx(0.40)
        assert tuning.curve[tuning.mu] == 1.0

    def test_unusable_thresholds_score_minus_infinity(self, threshold_case):
        records, query, database = threshold_case
        tuning = tune_mu(records, query, database, validation=range(6))
        # below 0.39 every pair counts five matches: nothing to calibrate on
        assert tuning.curve[0.35] == -math.inf
        assert 0.35 in tuning.failures
        rows = {row["mu"]: row for row in tuning.as_rows()}
        assert rows[0.35]["accuracy"] is None and "error" in rows[0.35]
        assert rows[0.4]["accuracy"] == 1.0

    def test_single_grid_value(self, threshold_case):
        records, query, database = threshold_case
        tuning = tune_mu(records, query, database, validation=range(6), grid=[0.5])
        assert tuning.mu == 0.5
        assert list(tuning.curve) == [0.5]

    def test_platt_method(self, threshold_case):
        records, query, database = threshold_case
        tuning = tune_mu(records, query, database, validation=range(6), grid=[0.3, 0.6], method="platt")
        assert tuning.mu == 0.6

    def test_fused_objective(self, threshold_case):
        records, query, database = threshold_case
        uninformative = ScoreMatrix(np.full((6, 3), 0.5), ScoreKind.CALIBRATED)
        tuning = tune_mu(
            records, query, database, validation=range(6), grid=[0.5, 0.8],
            objective="fused", others={"global": uninformative},
        )
        assert tuning.mu == 0.5
        assert tuning.curve[0.5] == 1.0

    def test_every_threshold_failing(self, threshold_case):
        records, query, database = threshold_case
        with pytest.raises(FlaggedCalibratorError):
            tune_mu(records, query, database, validation=range(6), grid=[0.1, 0.95])

    def test_invalid_arguments(self, threshold_case):
        records, query, database = threshold_case
        with pytest.raises(ConfigError):
            tune_mu(records, query, database, validation=range(6), grid=[])
        with pytest.raises(ConfigError):
            tune_mu(records, query, database, validation=[], grid=[0.5])
        with pytest.raises(ConfigError):
            tune_mu(records, query, database, validation=range(6), grid=[1.5])
        with pytest.raises(ConfigError):
            tune_mu(records, query, database, validation=range(6), objective="global")

    def test_validation_accuracy_single_threshold(self, threshold_case):
        records, query, database = threshold_case
        assert validation_accuracy(records, 0.6, query, database, [0, 1, 2]) == 1.0


class TestSubsampleCalibrationSet:
    def test_saturates_at_available_items(self):
        query, database = make_catalogs(["A", "B", "A"], ["A", "B", "C"])
        assert subsample_calibration_set(query, database, 10, seed=0) == (0, 1, 2)
        assert subsample_calibration_set(query, database, 3, seed=0, candidates=[2, 0]) == (0, 2)

    def test_seeded_and_sorted(self):
        identities = [f"id{i}" for i in range(10)]
        query, database = make_catalogs(identities * 3, identities)
        first = subsample_calibration_set(query, database, 5, seed=42)
        assert first == subsample_calibration_set(query, database, 5, seed=42)
        assert list(first) == sorted(first)
        assert len(set(first)) == 5

    def test_meets_pair_constraint(self, rng):
        identities = ["A", "B", "C", "D", "E"]
        query, database = make_catalogs(
            ["A", "B"] + [identities[i] for i in rng.integers(2, 5, 20)], ["A", "B", "C"]
        )
        for seed in range(20):
            subset = subsample_calibration_set(query, database, 2, seed=seed)
            positives = sum(
                query.identity_of(q) == database.identity_of(d) for q in subset for d in range(len(database))
            )
            assert positives >= 2
            assert len(subset) * len(database) - positives >= 2

    def test_unsatisfiable(self):
        query, database = make_catalogs(["X", "Y"], ["A", "B"])
        with pytest.raises(ConstraintError):
            subsample_calibration_set(query, database, 1, seed=0)

    def test_invalid_size(self, small_catalogs):
        query, database = small_catalogs
        with pytest.raises(ConfigError):
            subsample_calibration_set(query, database, 0, seed=0)
