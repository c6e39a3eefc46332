from dataclasses import dataclass

import numpy as np

from fusecal.core.errors import DegenerateInputError, ShapeError


@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """Row-major embedding vectors, one row per catalog item, held in float64.

    Ingestion rejects non-finite values and zero-norm rows, since cosine
    similarity is undefined for a zero vector.
    """

    values: np.ndarray
    catalog_ref: str = ""

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, order="C", copy=True)
        if values.ndim != 2:
            raise ShapeError(f"embedding matrix must be 2-D, got shape {values.shape}")
        if values.shape[1] == 0 and values.shape[0] > 0:
            raise ShapeError("embedding dimensionality must be positive")

        finite = np.isfinite(values).all(axis=1)
        if not finite.all():
            row = int(np.flatnonzero(~finite)[0])
            raise DegenerateInputError("non-finite embedding value", row=row)
        zero = ~np.any(values != 0.0, axis=1)
        if zero.any():
            row = int(np.flatnonzero(zero)[0])
            raise DegenerateInputError("zero-norm embedding", row=row)

        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def dims(self) -> int:
        return int(self.values.shape[1])

    def check_rows(self, expected: int) -> None:
        if self.rows != expected:
            raise ShapeError(
                f"embedding matrix {self.catalog_ref or '<unnamed>'} has {self.rows} rows, catalog has {expected} items"
            )
