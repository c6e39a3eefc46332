import csv
import logging
import math
from pathlib import Path
from typing import List, Union

import numpy as np

from fusecal.core.errors import IoError, RangeError, UnknownItemError
from fusecal.models.catalog import ItemCatalog
from fusecal.models.matches import MatchRecordSet
from fusecal.repositories.label_file import read_rows

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def read_match_file(path: PathLike, query_catalog: ItemCatalog, db_catalog: ItemCatalog) -> MatchRecordSet:
    """
    Match records from "query_id,database_id,confidence" lines.

    Lines for the same pair may appear anywhere; each one adds a confidence
    to that pair's list.
    """
    query_idx: List[int] = []
    db_idx: List[int] = []
    confidences: List[float] = []
    for line_number, (query_id, db_id, raw) in read_rows(path, 3):
        try:
            q = query_catalog.index_of(query_id)
        except UnknownItemError:
            raise UnknownItemError(query_id, line=line_number) from None
        try:
            d = db_catalog.index_of(db_id)
        except UnknownItemError:
            raise UnknownItemError(db_id, line=line_number) from None
        try:
            value = float(raw)
        except ValueError:
            raise RangeError(f"confidence {raw!r} is not a number", line=line_number) from None
        if not math.isfinite(value) or not 0.0 <= value <= 1.0:
            raise RangeError(f"confidence {raw} outside [0, 1]", line=line_number)
        query_idx.append(q)
        db_idx.append(d)
        confidences.append(value)

    records = MatchRecordSet(
        np.array(query_idx, dtype=np.int64),
        np.array(db_idx, dtype=np.int64),
        np.array(confidences, dtype=np.float64),
        len(query_catalog),
        len(db_catalog),
    )
    logger.info(f"Loaded {len(records)} matches from {path}")
    return records


def write_match_file(
    path: PathLike,
    records: MatchRecordSet,
    query_catalog: ItemCatalog,
    db_catalog: ItemCatalog,
) -> None:
    """Write one line per match, in record order. Confidences use the shortest exact repr."""
    query_ids = query_catalog.item_ids
    db_ids = db_catalog.item_ids
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write("# query_id,database_id,confidence\n")
            writer = csv.writer(f, lineterminator="\n")
            for q, d, value in zip(records.query_idx.tolist(), records.db_idx.tolist(), records.confidences.tolist()):
                writer.writerow((query_ids[q], db_ids[d], repr(value)))
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
