import logging
from typing import Iterable, List

import numpy as np

from fusecal.core.errors import TestIsolationError
from fusecal.models.catalog import CatalogRole, ItemCatalog

logger = logging.getLogger(__name__)


class StagedQueryCatalog:
    """
    Read-through view of a query catalog that seals some identities.

    Item ids and positions stay readable. Reading the identity of a sealed
    query raises TestIsolationError until ``release()`` is called, which the
    pipeline does only right before the final test evaluation.
    """

    role = CatalogRole.QUERY

    def __init__(self, catalog: ItemCatalog, sealed: Iterable[int]):
        self._catalog = catalog
        self._sealed = frozenset(int(i) for i in sealed)
        self._released = False

    def __len__(self) -> int:
        return len(self._catalog)

    @property
    def items(self):
        self._check_all()
        return self._catalog.items

    @property
    def item_ids(self) -> List[str]:
        return self._catalog.item_ids

    @property
    def released(self) -> bool:
        return self._released

    def release(self) -> None:
        if not self._released:
            logger.info(f"Releasing {len(self._sealed)} sealed query identities for evaluation")
        self._released = True

    def index_of(self, item_id: str) -> int:
        return self._catalog.index_of(item_id)

    def identity_of(self, index: int) -> str:
        if not self._released and index in self._sealed:
            raise TestIsolationError(f"identity of sealed query {index} read before test evaluation")
        return self._catalog.identity_of(index)

    def identities(self) -> np.ndarray:
        self._check_all()
        return self._catalog.identities()

    def _check_all(self) -> None:
        if not self._released and self._sealed:
            raise TestIsolationError("all query identities requested while test identities are sealed")
