from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np

from fusecal.core.errors import IndexOutOfRangeError, RangeError


@dataclass(frozen=True, eq=False)
class MatchRecordSet:
    """Per-pair local match confidences, stored as flat parallel arrays.

    Entry i says: pair (query_idx[i], db_idx[i]) has a match with confidence
    confidences[i]. A pair without entries has an empty confidence list.
    """

    query_idx: np.ndarray
    db_idx: np.ndarray
    confidences: np.ndarray
    n_query: int
    n_database: int

    def __post_init__(self):
        q = np.asarray(self.query_idx, dtype=np.int64).reshape(-1)
        d = np.asarray(self.db_idx, dtype=np.int64).reshape(-1)
        c = np.asarray(self.confidences, dtype=np.float64).reshape(-1)
        if not (q.size == d.size == c.size):
            raise ValueError("match record arrays differ in length")
        if q.size:
            if q.min() < 0 or q.max() >= self.n_query:
                raise IndexOutOfRangeError(f"query index outside [0, {self.n_query})")
            if d.min() < 0 or d.max() >= self.n_database:
                raise IndexOutOfRangeError(f"database index outside [0, {self.n_database})")
            bad = ~((c >= 0.0) & (c <= 1.0))
            if bad.any():
                raise RangeError(f"confidence {c[bad][0]!r} outside [0, 1]")
        for array in (q, d, c):
            array.setflags(write=False)
        object.__setattr__(self, "query_idx", q)
        object.__setattr__(self, "db_idx", d)
        object.__setattr__(self, "confidences", c)

    @classmethod
    def empty(cls, n_query: int, n_database: int) -> "MatchRecordSet":
        return cls(np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0), n_query, n_database)

    @classmethod
    def from_mapping(
        cls,
        records: Mapping[Tuple[int, int], Sequence[float]],
        n_query: int,
        n_database: int,
    ) -> "MatchRecordSet":
        q: List[int] = []
        d: List[int] = []
        c: List[float] = []
        for (qi, di), confidences in records.items():
            for value in confidences:
                q.append(qi)
                d.append(di)
                c.append(value)
        return cls(np.array(q, np.int64), np.array(d, np.int64), np.array(c, np.float64), n_query, n_database)

    def __len__(self) -> int:
        return int(self.confidences.size)

    def as_mapping(self) -> Dict[Tuple[int, int], List[float]]:
        """Group confidences per pair, keeping file/insertion order within each pair."""
        grouped: Dict[Tuple[int, int], List[float]] = defaultdict(list)
        for qi, di, value in zip(self.query_idx.tolist(), self.db_idx.tolist(), self.confidences.tolist()):
            grouped[(qi, di)].append(value)
        return dict(grouped)

    def pair_codes(self) -> np.ndarray:
        """Row-major flat position of each entry's pair."""
        return self.query_idx * self.n_database + self.db_idx

    def restrict_queries(self, keep: Iterable[int]) -> "MatchRecordSet":
        """Records whose query is in ``keep``; indices are left unchanged."""
        mask = np.isin(self.query_idx, np.fromiter(keep, dtype=np.int64))
        return MatchRecordSet(
            self.query_idx[mask], self.db_idx[mask], self.confidences[mask], self.n_query, self.n_database
        )
