from fusecal.services.similarity import MatchThreshold, cosine_similarity, global_score_matrix, local_match_count, local_score_matrix
from fusecal.services.pairs import build_pair_labels, make_split
from fusecal.services.calibration import apply_calibrator, build_pchip, fit_calibrator, fit_isotonic_pav, fit_platt
from fusecal.services.fusion import FusionConfig, default_config, fuse
from fusecal.services.retrieval import rank_top1, top1_accuracy, topk_accuracy
from fusecal.services.shortlist import Budget, ShortlistOutcome, shortlist_rerank
from fusecal.services.tuning import subsample_calibration_set, tune_mu
from fusecal.services.synthetic import SyntheticParams, generate_synthetic
from fusecal.services.report_generator import ReportGenerator, emit_report

__all__ = [
    "MatchThreshold",
    "cosine_similarity",
    "global_score_matrix",
    "local_match_count",
    "local_score_matrix",
    "build_pair_labels",
    "make_split",
    "apply_calibrator",
    "build_pchip",
    "fit_calibrator",
    "fit_isotonic_pav",
    "fit_platt",
    "FusionConfig",
    "default_config",
    "fuse",
    "rank_top1",
    "top1_accuracy",
    "topk_accuracy",
    "Budget",
    "ShortlistOutcome",
    "shortlist_rerank",
    "subsample_calibration_set",
    "tune_mu",
    "SyntheticParams",
    "generate_synthetic",
    "ReportGenerator",
    "emit_report",
]
