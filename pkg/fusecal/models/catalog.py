from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from fusecal.core.errors import ConfigError, IndexOutOfRangeError, UnknownItemError


class CatalogRole(str, Enum):
    DATABASE = "database"
    QUERY = "query"


@dataclass(frozen=True)
class ItemCatalog:
    """Ordered (item_id, identity_id) list. Position in the list is the item's index everywhere."""

    items: Tuple[Tuple[str, str], ...]
    role: CatalogRole
    _index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        items = tuple((str(item_id), str(identity)) for item_id, identity in self.items)
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "role", CatalogRole(self.role))

        index: Dict[str, int] = {}
        for position, (item_id, identity) in enumerate(items):
            if item_id in index:
                raise ConfigError(f"duplicate item id {item_id!r} in {self.role.value} catalog")
            if not identity:
                raise ConfigError(f"item {item_id!r} has an empty identity")
            index[item_id] = position
        object.__setattr__(self, "_index", index)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Tuple[str, str]], role: CatalogRole) -> "ItemCatalog":
        return cls(items=tuple(pairs), role=role)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def item_ids(self) -> List[str]:
        return [item_id for item_id, _ in self.items]

    def index_of(self, item_id: str) -> int:
        try:
            return self._index[item_id]
        except KeyError:
            raise UnknownItemError(item_id)

    def identity_of(self, index: int) -> str:
        if not 0 <= index < len(self.items):
            raise IndexOutOfRangeError(f"index {index} outside {self.role.value} catalog of {len(self.items)} items")
        return self.items[index][1]

    def identities(self) -> np.ndarray:
        return np.array([identity for _, identity in self.items], dtype=str)


@dataclass(frozen=True)
class SplitSpec:
    """Disjoint validation/test partition of the query catalog."""

    validation_indices: Tuple[int, ...]
    test_indices: Tuple[int, ...]
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "validation_indices", tuple(sorted(int(i) for i in self.validation_indices)))
        object.__setattr__(self, "test_indices", tuple(sorted(int(i) for i in self.test_indices)))
        if set(self.validation_indices) & set(self.test_indices):
            raise ConfigError("validation and test indices overlap")

    def covers(self, n_query: int) -> bool:
        return sorted(self.validation_indices + self.test_indices) == list(range(n_query))


@dataclass(frozen=True, eq=False)
class PairLabelSet:
    """Raw scores with their same-identity labels, in row-major (query, database) order."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        labels = np.asarray(self.labels).reshape(-1)
        if scores.shape != labels.shape:
            raise ConfigError("scores and labels differ in length")
        if labels.size and not np.all((labels == 0) | (labels == 1)):
            raise ConfigError("pair labels must be exactly 0 or 1")
        labels = labels.astype(np.int8)
        scores.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_pairs(cls, pairs: Sequence[Tuple[float, int]]) -> "PairLabelSet":
        if not pairs:
            return cls(np.empty(0), np.empty(0, dtype=np.int8))
        scores, labels = zip(*pairs)
        return cls(np.array(scores, dtype=np.float64), np.array(labels))

    def __len__(self) -> int:
        return int(self.scores.size)

    @property
    def pairs(self) -> List[Tuple[float, int]]:
        return [(float(s), int(y)) for s, y in zip(self.scores, self.labels)]

    @property
    def n_positive(self) -> int:
        return int(self.labels.sum())

    @property
    def n_negative(self) -> int:
        return len(self) - self.n_positive
