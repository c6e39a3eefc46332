from fusecal.repositories.calibrator_store import CalibratorRepository, StoredCalibrator
from fusecal.repositories.embedding_file import read_embedding_file, write_embedding_file
from fusecal.repositories.label_file import read_label_file, write_label_file
from fusecal.repositories.match_file import read_match_file, write_match_file
from fusecal.repositories.score_store import ScoreRepository

__all__ = [
    "CalibratorRepository",
    "StoredCalibrator",
    "ScoreRepository",
    "read_embedding_file",
    "write_embedding_file",
    "read_label_file",
    "write_label_file",
    "read_match_file",
    "write_match_file",
]
