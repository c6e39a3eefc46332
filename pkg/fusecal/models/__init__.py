from .catalog import CatalogRole, ItemCatalog, PairLabelSet, SplitSpec
from .embeddings import EmbeddingMatrix
from .matches import MatchRecordSet
from .scores import ScoreKind, ScoreMatrix
from .calibrator import CalibrationMethod, Calibrator, IsotonicFit
from .results import MuTuning, PipelineDiagnostics, Prediction, RetrievalResult

__all__ = [
    "CatalogRole", "ItemCatalog", "PairLabelSet", "SplitSpec",
    "EmbeddingMatrix", "MatchRecordSet", "ScoreKind", "ScoreMatrix",
    "CalibrationMethod", "Calibrator", "IsotonicFit",
    "MuTuning", "PipelineDiagnostics", "Prediction", "RetrievalResult",
]
