import csv
import logging
from pathlib import Path
from typing import Iterator, List, Tuple, Union

from fusecal.core.errors import FormatError, IoError
from fusecal.models.catalog import CatalogRole, ItemCatalog

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def read_rows(path: PathLike, columns: int) -> Iterator[Tuple[int, List[str]]]:
    """Yield (line number, fields) for every data line of a comma-separated text file.

    Blank lines and lines starting with '#' are skipped.
    """
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            for line_number, line in enumerate(f, start=1):
                stripped = line.strip()
                if not stripped or stripped.startswith("#"):
                    continue
                fields = next(csv.reader([stripped]))
                if len(fields) != columns:
                    raise FormatError("columns", f"expected {columns} fields, got {len(fields)}", line=line_number)
                yield line_number, [field.strip() for field in fields]
    except OSError as e:
        raise IoError(f"cannot read {path}: {e}") from e


def read_label_file(path: PathLike, role: CatalogRole) -> ItemCatalog:
    """Catalog from "item_id,identity_id" lines; file order is catalog order."""
    items = []
    seen = set()
    for line_number, (item_id, identity) in read_rows(path, 2):
        if not item_id:
            raise FormatError("item_id", "empty item id", line=line_number)
        if item_id in seen:
            raise FormatError("item_id", f"duplicate item id {item_id!r}", line=line_number)
        if not identity:
            raise FormatError("identity_id", f"item {item_id!r} has an empty identity", line=line_number)
        seen.add(item_id)
        items.append((item_id, identity))
    logger.info(f"Loaded {len(items)} {CatalogRole(role).value} items from {path}")
    return ItemCatalog.from_pairs(items, role)


def write_label_file(path: PathLike, catalog: ItemCatalog) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerows(catalog.items)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e
