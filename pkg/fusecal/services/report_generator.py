import csv
import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

from fusecal.core.errors import IoError
from fusecal.models.catalog import ItemCatalog
from fusecal.models.results import PipelineDiagnostics, RetrievalResult

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
REPORT_FILE = "report.json"
PREDICTIONS_FILE = "predictions.csv"


def dump_json(document: Any) -> str:
    """Canonical JSON text: sorted keys, 2-space indent, trailing newline."""
    return json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_text(path: Path, text: str) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)
    except OSError as e:
        raise IoError(f"cannot write {path}: {e}") from e


class ReportGenerator:
    """
    Writes the outcome of a pipeline run.

    Two files are produced in the output directory:
    - report.json: accuracies, chosen thresholds and every experiment curve
    - predictions.csv: one row per evaluated query

    Neither file carries timestamps or absolute paths, so the same run
    always produces the same bytes.
    """

    def __init__(self, query_catalog: ItemCatalog, db_catalog: ItemCatalog):
        self.query_catalog = query_catalog
        self.db_catalog = db_catalog

    def build_report(
        self,
        result: RetrievalResult,
        diagnostics: PipelineDiagnostics,
        config_echo: Optional[Dict[str, Any]] = None,
    ) -> Dict[str, Any]:
        report = {
            "schema_version": SCHEMA_VERSION,
            "config": config_echo or {},
            "headline": {"score": result.score_name, "top1_accuracy": result.top1_accuracy},
        }
        report.update(diagnostics.to_document())
        return report

    def _predictions_csv(self, result: RetrievalResult) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        query_ids = self.query_catalog.item_ids
        db_ids = self.db_catalog.item_ids
        writer.writerow(["query_id", "predicted_id", "predicted_identity", "true_identity", "score", "correct"])
        for p in result.predictions:
            truth = self.query_catalog.identity_of(p.query_index)
            writer.writerow([
                query_ids[p.query_index],
                db_ids[p.db_index],
                p.identity,
                truth,
                repr(p.score),
                int(truth == p.identity),
            ])
        return buffer.getvalue()

    def emit(
        self,
        result: RetrievalResult,
        diagnostics: PipelineDiagnostics,
        out_dir: Union[str, Path],
        config_echo: Optional[Dict[str, Any]] = None,
    ) -> Dict[str, Path]:
        out_dir = Path(out_dir)
        paths = {"report": out_dir / REPORT_FILE, "predictions": out_dir / PREDICTIONS_FILE}
        write_text(paths["report"], dump_json(self.build_report(result, diagnostics, config_echo)))
        write_text(paths["predictions"], self._predictions_csv(result))
        logger.info(f"Report written to {paths['report']}, predictions to {paths['predictions']}")
        return paths


def emit_report(
    result: RetrievalResult,
    diagnostics: PipelineDiagnostics,
    path: Union[str, Path],
    query_catalog: ItemCatalog,
    db_catalog: ItemCatalog,
    config_echo: Optional[Dict[str, Any]] = None,
) -> Dict[str, Path]:
    return ReportGenerator(query_catalog, db_catalog).emit(result, diagnostics, path, config_echo)
