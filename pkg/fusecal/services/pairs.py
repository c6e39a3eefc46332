import logging
import math
from typing import Iterable, Optional

import numpy as np

from fusecal.config import default
from fusecal.core.errors import ConfigError, IndexOutOfRangeError
from fusecal.core.random_streams import SPLIT, stream
from fusecal.models.catalog import ItemCatalog, PairLabelSet, SplitSpec
from fusecal.models.scores import ScoreMatrix

logger = logging.getLogger(__name__)


def build_pair_labels(
    scores: ScoreMatrix,
    query_catalog: ItemCatalog,
    db_catalog: ItemCatalog,
    subset: Iterable[int],
) -> PairLabelSet:
    """
    Pair every query in ``subset`` with every database item.

    Pairs come out row-major: all database items of the first subset query,
    then the second, and so on. A pair is labelled 1 when both items share
    an identity.

    Only the identities of the subset queries are read, so a query catalog
    that guards its test split can be passed as long as the subset stays
    out of it.
    """
    scores.check_shape(len(query_catalog), len(db_catalog))
    rows = np.fromiter((int(i) for i in subset), dtype=np.int64)
    if rows.size == 0:
        return PairLabelSet(np.empty(0), np.empty(0, dtype=np.int8))
    if rows.min() < 0 or rows.max() >= scores.n_query:
        raise IndexOutOfRangeError(f"subset index outside [0, {scores.n_query})")

    query_identities = np.array([query_catalog.identity_of(int(i)) for i in rows], dtype=str)
    labels = query_identities[:, None] == db_catalog.identities()[None, :]
    return PairLabelSet(scores.values[rows].reshape(-1), labels.reshape(-1).astype(np.int8))


def make_split(query_catalog: ItemCatalog, ratio: Optional[float] = None, seed: int = 0) -> SplitSpec:
    """Random validation/test partition of the query catalog.

    The validation side gets round-half-up(ratio * N) queries.
    """
    if ratio is None:
        ratio = default("split", "ratio")
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"split ratio must lie in (0, 1), got {ratio}")
    n = len(query_catalog)
    if n == 0:
        raise ConfigError("cannot split an empty query catalog")

    n_validation = int(math.floor(ratio * n + 0.5))
    order = stream(seed, SPLIT).permutation(n)
    split = SplitSpec(order[:n_validation].tolist(), order[n_validation:].tolist(), seed)
    logger.info(f"Split {n} queries: {len(split.validation_indices)} validation, {len(split.test_indices)} test")
    return split
