from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np


@dataclass(frozen=True)
class Prediction:
    query_index: int
    db_index: int
    identity: str
    score: float


@dataclass
class RetrievalResult:
    """Per-query top-1 predictions and their accuracy over the evaluated queries."""

    predictions: List[Prediction]
    top1_accuracy: Optional[float] = None
    score_name: str = "fused"

    def __len__(self) -> int:
        return len(self.predictions)

    @property
    def db_indices(self) -> np.ndarray:
        return np.array([p.db_index for p in self.predictions], dtype=np.int64)

    @property
    def query_indices(self) -> np.ndarray:
        return np.array([p.query_index for p in self.predictions], dtype=np.int64)


@dataclass
class MuTuning:
    """Outcome of a μ grid search for one local score."""

    mu: float
    curve: Dict[float, float]
    failures: Dict[float, str] = field(default_factory=dict)

    def as_rows(self) -> List[Dict[str, Any]]:
        rows = []
        for mu in sorted(self.curve):
            accuracy = self.curve[mu]
            row: Dict[str, Any] = {"mu": mu, "accuracy": None if accuracy == float("-inf") else accuracy}
            if mu in self.failures:
                row["error"] = self.failures[mu]
            rows.append(row)
        return rows


@dataclass
class PipelineDiagnostics:
    """Everything a run measures besides the headline predictions.

    Values are plain Python types so they can go straight into the report.
    """

    split_sizes: Dict[str, int] = field(default_factory=dict)
    accuracies: Dict[str, float] = field(default_factory=dict)
    chosen_mu: Dict[str, float] = field(default_factory=dict)
    tuning: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    topk: Dict[str, Dict[str, float]] = field(default_factory=dict)
    mu_curve: List[Dict[str, Any]] = field(default_factory=list)
    budget_curve: List[Dict[str, Any]] = field(default_factory=list)
    calibration_curve: List[Dict[str, Any]] = field(default_factory=list)
    ablation: Dict[str, float] = field(default_factory=dict)
    calibrators: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    zero_shot: bool = False

    def to_document(self) -> Dict[str, Any]:
        return {
            "split_sizes": dict(self.split_sizes),
            "accuracies": dict(self.accuracies),
            "chosen_mu": dict(self.chosen_mu),
            "tuning": dict(self.tuning),
            "topk": dict(self.topk),
            "mu_curve": list(self.mu_curve),
            "budget_curve": sorted(self.budget_curve, key=lambda row: row["budget"]),
            "calibration_curve": list(self.calibration_curve),
            "ablation": dict(self.ablation),
            "calibrators": dict(self.calibrators),
            "zero_shot": self.zero_shot,
        }
