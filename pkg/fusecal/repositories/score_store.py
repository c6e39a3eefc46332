import logging
import zipfile
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from fusecal.core.errors import FormatError, IoError
from fusecal.models.scores import ScoreKind, ScoreMatrix

logger = logging.getLogger(__name__)


class ScoreRepository:
    """Score matrices kept as ``<name>.npz`` files in one directory."""

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)

    def path_for(self, name: str) -> Path:
        return self.directory / f"{name}.npz"

    def save(self, name: str, matrix: ScoreMatrix, mu: Optional[float] = None) -> Path:
        """Store ``matrix``; local scores also record the threshold they were counted at."""
        path = self.path_for(name)
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            with open(path, "wb") as f:
                np.savez(
                    f,
                    values=matrix.values,
                    kind=np.array(matrix.kind.value),
                    flagged=np.array(matrix.flagged),
                    mu=np.array(np.nan if mu is None else float(mu)),
                )
        except OSError as e:
            raise IoError(f"cannot write {path}: {e}") from e
        logger.info(f"Saved {matrix!r} to {path}")
        return path

    def exists(self, name: str) -> bool:
        return self.path_for(name).is_file()

    def get(self, name: str) -> Optional[ScoreMatrix]:
        """The stored matrix, or None when nothing is stored under ``name``."""
        path = self.path_for(name)
        if not path.is_file():
            return None
        try:
            with np.load(path, allow_pickle=False) as data:
                return ScoreMatrix(data["values"], ScoreKind(str(data["kind"])), bool(data["flagged"]))
        except OSError as e:
            raise IoError(f"cannot read {path}: {e}") from e
        except (KeyError, ValueError, zipfile.BadZipFile) as e:
            raise FormatError("score file", f"{path}: {e}") from e

    def mu_of(self, name: str) -> Optional[float]:
        path = self.path_for(name)
        if not path.is_file():
            return None
        try:
            with np.load(path, allow_pickle=False) as data:
                mu = float(data["mu"]) if "mu" in data.files else float("nan")
        except OSError as e:
            raise IoError(f"cannot read {path}: {e}") from e
        except (ValueError, zipfile.BadZipFile) as e:
            raise FormatError("score file", f"{path}: {e}") from e
        return None if np.isnan(mu) else mu

    def list_names(self) -> List[str]:
        if not self.directory.is_dir():
            return []
        return sorted(path.stem for path in self.directory.glob("*.npz"))
