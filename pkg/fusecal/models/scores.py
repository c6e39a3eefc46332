from dataclasses import dataclass
from enum import Enum

import numpy as np

from fusecal.core.errors import RangeError, ShapeError


class ScoreKind(str, Enum):
    RAW_GLOBAL = "raw_global"
    RAW_LOCAL = "raw_local"
    CALIBRATED = "calibrated"
    FUSED = "fused"

    @property
    def is_raw(self) -> bool:
        return self in (ScoreKind.RAW_GLOBAL, ScoreKind.RAW_LOCAL)


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Dense query x database similarity values; row = query.

    ``flagged`` is set when the values came out of a calibrator that maps
    higher raw scores to lower probabilities. Fusion refuses such matrices.
    """

    values: np.ndarray
    kind: ScoreKind
    flagged: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, order="C", copy=True)
        if values.ndim != 2:
            raise ShapeError(f"score matrix must be 2-D, got shape {values.shape}")
        kind = ScoreKind(self.kind)

        if values.size:
            if not np.isfinite(values).all():
                raise RangeError(f"{kind.value} score matrix contains non-finite values")
            if kind is ScoreKind.RAW_GLOBAL and (values.min() < -1.0 or values.max() > 1.0):
                raise RangeError("raw_global scores must lie in [-1, 1]")
            if kind is ScoreKind.RAW_LOCAL and (values.min() < 0 or not np.array_equal(values, np.floor(values))):
                raise RangeError("raw_local scores must be non-negative integers")
            if kind in (ScoreKind.CALIBRATED, ScoreKind.FUSED) and (values.min() < 0.0 or values.max() > 1.0):
                raise RangeError(f"{kind.value} scores must lie in [0, 1]")

        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", kind)

    @property
    def n_query(self) -> int:
        return int(self.values.shape[0])

    @property
    def n_database(self) -> int:
        return int(self.values.shape[1])

    @property
    def shape(self):
        return self.values.shape

    def rows(self, indices) -> "ScoreMatrix":
        """Sub-matrix of the given query rows (in the given order)."""
        return ScoreMatrix(self.values[np.asarray(indices, dtype=np.int64)], self.kind, self.flagged)

    def check_shape(self, n_query: int, n_database: int) -> None:
        if self.values.shape != (n_query, n_database):
            raise ShapeError(f"score matrix is {self.values.shape}, expected {(n_query, n_database)}")

    def __repr__(self) -> str:
        return f"ScoreMatrix({self.n_query}x{self.n_database}, kind={self.kind.value})"
