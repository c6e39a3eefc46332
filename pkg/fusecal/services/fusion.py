import logging
import math
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from fusecal.config import validated
from fusecal.core.errors import ConfigError, FlaggedCalibratorError, KindError, ShapeError
from fusecal.core.parallel import run_row_blocks
from fusecal.models.scores import ScoreKind, ScoreMatrix

logger = logging.getLogger(__name__)

NamedMatrices = Union[Mapping[str, ScoreMatrix], Sequence[Tuple[str, ScoreMatrix]]]


class FusionConfig(BaseModel):
    """Named fusion weights, normalized to sum to 1 on construction."""

    model_config = ConfigDict(frozen=True)

    entries: Tuple[Tuple[str, float], ...] = Field(
        description="(score name, weight) pairs; weights are non-negative and rescaled to sum to 1"
    )

    @field_validator("entries")
    @classmethod
    def _normalize(cls, entries):
        if not entries:
            raise ValueError("at least one score is required")
        names = [name for name, _ in entries]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate score names in {names}")
        for name, weight in entries:
            if not name:
                raise ValueError("score names must be non-empty")
            if not math.isfinite(weight) or weight < 0:
                raise ValueError(f"weight of {name!r} must be a finite non-negative number, got {weight}")
        total = math.fsum(weight for _, weight in entries)
        if total <= 0:
            raise ValueError("at least one weight must be positive")
        return tuple((name, weight / total) for name, weight in entries)

    @classmethod
    def from_weights(cls, weights: Union[Mapping[str, float], Iterable[Tuple[str, float]]]) -> "FusionConfig":
        items = weights.items() if isinstance(weights, Mapping) else weights
        return validated(cls, entries=tuple((str(name), float(weight)) for name, weight in items))

    @property
    def names(self) -> List[str]:
        return sorted(name for name, _ in self.entries)

    @property
    def weights(self) -> Dict[str, float]:
        return dict(self.entries)

    def restricted(self, names: Iterable[str]) -> "FusionConfig":
        """The same weights over a subset of the scores, renormalized."""
        keep = set(names)
        return FusionConfig.from_weights([(name, weight) for name, weight in self.entries if name in keep])


def default_config(names: Sequence[str]) -> FusionConfig:
    """Equal weights 1/K over the given score names."""
    if not names:
        raise ConfigError("default fusion config needs at least one score name")
    return FusionConfig.from_weights([(name, 1.0) for name in names])


def fuse(matrices: NamedMatrices, config: FusionConfig, threads: Optional[int] = None) -> ScoreMatrix:
    """
    Weighted average of calibrated score matrices.

    Terms are added in score-name order, so the result does not depend on the
    order the matrices were given in.
    """
    pairs = list(matrices.items()) if isinstance(matrices, Mapping) else list(matrices)
    named = dict(pairs)
    if len(named) != len(pairs):
        raise ConfigError("duplicate score names among the matrices to fuse")
    if set(named) != set(config.names):
        raise ConfigError(f"fusion config names {config.names} do not match matrices {sorted(named)}")

    shape = None
    for name in config.names:
        matrix = named[name]
        if matrix.kind is not ScoreKind.CALIBRATED:
            raise KindError(f"score {name!r} is {matrix.kind.value}; only calibrated scores can be fused")
        if matrix.flagged:
            raise FlaggedCalibratorError(f"score {name!r} comes from a decreasing calibrator")
        if shape is None:
            shape = matrix.shape
        elif matrix.shape != shape:
            raise ShapeError(f"score {name!r} is {matrix.shape}, expected {shape}")

    weights = config.weights
    ordered = [(weights[name], named[name].values) for name in config.names]
    out = np.zeros(shape, dtype=np.float64)

    def work(start: int, stop: int) -> None:
        block = out[start:stop]
        for weight, values in ordered:
            block += weight * values[start:stop]

    run_row_blocks(work, shape[0], threads)
    np.clip(out, 0.0, 1.0, out=out)
    return ScoreMatrix(out, ScoreKind.FUSED)
