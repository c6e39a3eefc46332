import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

from fusecal.core.errors import FormatError, IoError
from fusecal.models.calibrator import Calibrator

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StoredCalibrator:
    name: str
    score_type: str
    calibrator: Calibrator
    mu: Optional[float] = None


class CalibratorRepository:
    """
    One JSON calibrator document per score name in a directory.

    Next to the calibrator itself each document records the score type and,
    for local scores, the threshold mu the calibrator was fitted at. A
    directory written by one run can be imported by another (zero-shot use).
    """

    def __init__(self, directory: Union[str, Path]):
        self.directory = Path(directory)

    def path_for(self, name: str) -> Path:
        return self.directory / f"{name}.json"

    def save(self, name: str, calibrator: Calibrator, score_type: str, mu: Optional[float] = None) -> Path:
        document = calibrator.to_document()
        document["score"] = {"name": name, "type": score_type, "mu": mu}
        path = self.path_for(name)
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        except OSError as e:
            raise IoError(f"cannot write {path}: {e}") from e
        logger.info(f"Saved {calibrator.method.value} calibrator for {name!r} to {path}")
        return path

    def get(self, name: str) -> StoredCalibrator:
        path = self.path_for(name)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise IoError(f"cannot read calibrator {path}: {e}") from e
        try:
            document = json.loads(text)
        except json.JSONDecodeError as e:
            raise FormatError("json", f"{path}: {e}") from e
        if not isinstance(document, dict):
            raise FormatError("calibrator", f"{path} does not hold a JSON object")

        calibrator = Calibrator.from_document(document)
        score = document.get("score") or {}
        mu = score.get("mu")
        return StoredCalibrator(
            name=score.get("name", name),
            score_type=score.get("type", ""),
            calibrator=calibrator,
            mu=None if mu is None else float(mu),
        )

    def list_names(self) -> List[str]:
        if not self.directory.is_dir():
            return []
        return sorted(path.stem for path in self.directory.glob("*.json"))
