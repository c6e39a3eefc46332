import numpy as np
import pytest

from fusecal.core.errors import ConfigError, FlaggedCalibratorError, KindError, ShapeError
from fusecal.models.scores import ScoreKind, ScoreMatrix
from fusecal.services.fusion import FusionConfig, default_config, fuse


def calibrated(values, flagged=False):
    return ScoreMatrix(np.asarray(values, dtype=np.float64), ScoreKind.CALIBRATED, flagged=flagged)


class TestFusionConfig:
    def test_weights_normalized(self):
        config = FusionConfig.from_weights({"global": 1.0, "local": 3.0})
        assert config.weights == {"global": 0.25, "local": 0.75}
        assert config.names == ["global", "local"]

    def test_default_is_equal_weights(self):
        config = default_config(["b", "a", "c"])
        assert config.names == ["a", "b", "c"]
        assert all(weight == pytest.approx(1 / 3) for weight in config.weights.values())

    def test_zero_weight_allowed_when_another_is_positive(self):
        assert FusionConfig.from_weights({"a": 0.0, "b": 2.0}).weights == {"a": 0.0, "b": 1.0}

    @pytest.mark.parametrize(
        "weights",
        [{}, {"a": -1.0, "b": 2.0}, {"a": 0.0, "b": 0.0}, {"a": float("nan")}, {"": 1.0}],
    )
    def test_invalid_weights(self, weights):
        with pytest.raises(ConfigError):
            FusionConfig.from_weights(weights)

    def test_default_needs_names(self):
        with pytest.raises(ConfigError):
            default_config([])

    def test_restricted_renormalizes(self):
        config = FusionConfig.from_weights({"a": 1.0, "b": 1.0, "c": 2.0})
        assert config.restricted(["a", "c"]).weights == pytest.approx({"a": 1 / 3, "c": 2 / 3})


class TestFuse:
    def test_single_score_is_identity(self, rng):
        values = rng.random((4, 6))
        out = fuse({"only": calibrated(values)}, default_config(["only"]))
        assert out.kind is ScoreKind.FUSED
        np.testing.assert_array_equal(out.values, values)

    def test_two_scores_average(self):
        out = fuse({"a": calibrated([[0.2]]), "b": calibrated([[0.8]])}, default_config(["a", "b"]))
        assert out.values[0, 0] == pytest.approx(0.5, abs=1e-15)

    def test_three_scores_average(self):
        matrices = {"a": calibrated([[1.0]]), "b": calibrated([[0.0]]), "c": calibrated([[1.0]])}
        out = fuse(matrices, default_config(list(matrices)))
        assert out.values[0, 0] == pytest.approx(0.666667, abs=1e-6)

    @pytest.mark.parametrize("k", [2, 3, 4])
    def test_convex_combination(self, rng, k):
        for _ in range(50):
            stack = rng.random((k, 5, 7))
            weights = {f"s{i}": float(w) for i, w in enumerate(rng.uniform(0.0, 1.0, k) + 1e-3)}
            matrices = {name: calibrated(stack[i]) for i, name in enumerate(weights)}
            out = fuse(matrices, FusionConfig.from_weights(weights)).values
            assert np.all(out >= stack.min(axis=0) - 1e-12)
            assert np.all(out <= stack.max(axis=0) + 1e-12)

    def test_input_order_does_not_matter(self, rng):
        matrices = [(name, calibrated(rng.random((3, 4)))) for name in ("x", "a", "m")]
        config = FusionConfig.from_weights({"x": 0.2, "a": 0.5, "m": 0.3})
        forward = fuse(matrices, config)
        backward = fuse(list(reversed(matrices)), config)
        np.testing.assert_array_equal(forward.values, backward.values)

    def test_weight_scale_does_not_matter(self, rng):
        matrices = {"a": calibrated(rng.random((3, 3))), "b": calibrated(rng.random((3, 3)))}
        base = fuse(matrices, FusionConfig.from_weights({"a": 1, "b": 2}))
        scaled = fuse(matrices, FusionConfig.from_weights({"a": 3, "b": 6}))
        np.testing.assert_array_equal(base.values, scaled.values)

    def test_thread_count_does_not_change_bits(self, rng):
        matrices = {"a": calibrated(rng.random((31, 9))), "b": calibrated(rng.random((31, 9)))}
        config = FusionConfig.from_weights({"a": 0.3, "b": 0.7})
        np.testing.assert_array_equal(
            fuse(matrices, config, threads=1).values, fuse(matrices, config, threads=5).values
        )

    def test_names_must_match_config(self):
        with pytest.raises(ConfigError):
            fuse({"a": calibrated([[0.5]])}, default_config(["a", "b"]))
        with pytest.raises(ConfigError):
            fuse([("a", calibrated([[0.5]])), ("a", calibrated([[0.5]]))], default_config(["a"]))

    def test_rejects_raw_scores(self):
        raw = ScoreMatrix([[0.3]], ScoreKind.RAW_GLOBAL)
        with pytest.raises(KindError):
            fuse({"a": raw, "b": calibrated([[0.5]])}, default_config(["a", "b"]))

    def test_rejects_flagged_scores(self):
        with pytest.raises(FlaggedCalibratorError):
            fuse({"a": calibrated([[0.5]], flagged=True)}, default_config(["a"]))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            fuse({"a": calibrated([[0.5, 0.5]]), "b": calibrated([[0.5]])}, default_config(["a", "b"]))
