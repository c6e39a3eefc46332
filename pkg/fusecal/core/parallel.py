import logging
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Optional

from fusecal.core.errors import ConfigError

logger = logging.getLogger(__name__)

THREADS_ENV = "FUSECAL_THREADS"


def resolve_threads(requested: Optional[int] = None) -> int:
    """Worker count: explicit value, then FUSECAL_THREADS, then 1."""
    if requested is None:
        raw = os.getenv(THREADS_ENV)
        if not raw:
            return 1
        try:
            requested = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}")
    if requested < 1:
        raise ConfigError(f"thread count must be >= 1, got {requested}")
    return requested


def run_row_blocks(
    work: Callable[[int, int], None],
    n_rows: int,
    threads: Optional[int] = None,
) -> None:
    """Call ``work(start, stop)`` over contiguous row blocks covering ``range(n_rows)``.

    Every row belongs to exactly one block, so a worker owns its output region.
    """
    workers = min(resolve_threads(threads), max(n_rows, 1))
    if workers == 1 or n_rows <= 1:
        if n_rows:
            work(0, n_rows)
        return

    bounds = [n_rows * i // workers for i in range(workers + 1)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(work, start, stop)
            for start, stop in zip(bounds[:-1], bounds[1:])
            if stop > start
        ]
        for future in futures:
            future.result()
