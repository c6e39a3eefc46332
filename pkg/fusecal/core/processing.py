import itertools
import logging
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from fusecal.config import default_mu_grid
from fusecal.config.pipeline import PipelineConfig
from fusecal.core.errors import ConfigError, ConstraintError, FusecalError
from fusecal.core.isolation import StagedQueryCatalog
from fusecal.models.calibrator import Calibrator
from fusecal.models.catalog import CatalogRole, ItemCatalog, SplitSpec
from fusecal.models.embeddings import EmbeddingMatrix
from fusecal.models.matches import MatchRecordSet
from fusecal.models.results import MuTuning, PipelineDiagnostics, RetrievalResult
from fusecal.models.scores import ScoreMatrix
from fusecal.repositories.calibrator_store import CalibratorRepository, StoredCalibrator
from fusecal.repositories.embedding_file import read_embedding_file
from fusecal.repositories.label_file import read_label_file
from fusecal.repositories.match_file import read_match_file
from fusecal.services.calibration import apply_calibrator, fit_calibrator
from fusecal.services.fusion import FusionConfig, default_config, fuse
from fusecal.services.pairs import build_pair_labels, make_split
from fusecal.services.retrieval import rank_top1, top1_accuracy, topk_accuracy
from fusecal.services.shortlist import Budget, shortlist_rerank
from fusecal.services.similarity import MatchThreshold, global_score_matrix, local_score_matrix
from fusecal.services.synthetic import SyntheticDataset
from fusecal.services.tuning import subsample_calibration_set, tune_mu

logger = logging.getLogger(__name__)


@contextmanager
def stage(name: str):
    """Tag any fusecal error raised inside with the pipeline stage it came from."""
    try:
        yield
    except FusecalError as e:
        raise e.with_stage(name)


@dataclass(frozen=True, eq=False)
class PipelineInputs:
    query_catalog: ItemCatalog
    db_catalog: ItemCatalog
    embeddings: Dict[str, Tuple[EmbeddingMatrix, EmbeddingMatrix]]
    matches: Dict[str, MatchRecordSet]

    @classmethod
    def from_synthetic(cls, dataset: SyntheticDataset, global_name: str = "global", local_name: str = "local"):
        return cls(
            query_catalog=dataset.query_catalog,
            db_catalog=dataset.db_catalog,
            embeddings={global_name: (dataset.query_embeddings, dataset.db_embeddings)},
            matches={local_name: dataset.matches},
        )


def load_inputs(config: PipelineConfig) -> PipelineInputs:
    with stage("load"):
        query_catalog = read_label_file(config.resolve(config.labels.query), CatalogRole.QUERY)
        db_catalog = read_label_file(config.resolve(config.labels.database), CatalogRole.DATABASE)
        embeddings = {}
        matches = {}
        for source in config.scores:
            if source.type == "global":
                query = read_embedding_file(config.resolve(source.query))
                database = read_embedding_file(config.resolve(source.database))
                query.check_rows(len(query_catalog))
                database.check_rows(len(db_catalog))
                embeddings[source.name] = (query, database)
            else:
                matches[source.name] = read_match_file(config.resolve(source.matches), query_catalog, db_catalog)
    return PipelineInputs(query_catalog, db_catalog, embeddings, matches)


class PipelineSession:
    """
    State of one evaluation run over a fixed split.

    Raw scores, thresholds and calibrators are computed on first use and
    cached, so the command-line stages can also inject stored intermediates.
    Calibration reads validation identities only; test identities stay
    sealed until ``release_test_labels``. In zero-shot mode every query
    identity is sealed and the calibrators come from another dataset.
    """

    def __init__(
        self,
        config: PipelineConfig,
        inputs: PipelineInputs,
        threads: Optional[int] = None,
        split: Optional[SplitSpec] = None,
    ):
        self.config = config
        self.inputs = inputs
        self.threads = threads
        self.db_catalog = inputs.db_catalog
        self._check_inputs()

        with stage("split"):
            self.split = split or make_split(inputs.query_catalog, config.split.ratio, config.split_seed)
            if not self.split.covers(len(inputs.query_catalog)):
                raise ConfigError("split does not partition the query catalog")

        self.raw: Dict[str, ScoreMatrix] = {}
        self.mu: Dict[str, float] = {}
        self.tunings: Dict[str, MuTuning] = {}
        self.calibrators: Dict[str, Calibrator] = {}
        self.calibrated: Dict[str, ScoreMatrix] = {}

        self.imported: Dict[str, StoredCalibrator] = {}
        if config.zero_shot is not None:
            self.imported = self._import_calibrators()
            for source in config.local_sources:
                self.mu[source.name] = self.imported[source.name].mu
        sealed = range(len(inputs.query_catalog)) if self.zero_shot else self.split.test_indices
        self.queries = StagedQueryCatalog(inputs.query_catalog, sealed)

        with stage("fusion config"):
            self.fusion = (
                FusionConfig.from_weights(config.fusion) if config.fusion else default_config(self.names)
            )

    @property
    def names(self) -> List[str]:
        return [source.name for source in self.config.scores]

    @property
    def zero_shot(self) -> bool:
        return self.config.zero_shot is not None

    @property
    def validation(self) -> List[int]:
        return list(self.split.validation_indices)

    @property
    def test(self) -> List[int]:
        return list(self.split.test_indices)

    def _check_inputs(self) -> None:
        for source in self.config.scores:
            available = self.inputs.embeddings if source.type == "global" else self.inputs.matches
            if source.name not in available:
                raise ConfigError(f"no {source.type} input loaded for score {source.name!r}")

    def _import_calibrators(self) -> Dict[str, StoredCalibrator]:
        repository = CalibratorRepository(self.config.resolve(self.config.zero_shot.calibrators))
        imported = {}
        with stage("zero-shot import"):
            for source in self.config.scores:
                stored = repository.get(source.name)
                if stored.score_type and stored.score_type != source.type:
                    raise ConfigError(
                        f"imported calibrator {source.name!r} is for a {stored.score_type} score, not {source.type}"
                    )
                if source.type == "local" and stored.mu is None:
                    raise ConfigError(f"imported local calibrator {source.name!r} does not record its mu")
                imported[source.name] = stored
        logger.info(f"Zero-shot: imported {len(imported)} calibrators from {repository.directory}")
        return imported

    # -- injection of stored intermediates -------------------------------------------------

    def use_raw(self, name: str, matrix: ScoreMatrix, mu: Optional[float] = None) -> None:
        if name not in self.names:
            raise ConfigError(f"unknown score {name!r}")
        if not matrix.kind.is_raw:
            raise ConfigError(f"stored score {name!r} is {matrix.kind.value}, expected raw scores")
        matrix.check_shape(len(self.inputs.query_catalog), len(self.db_catalog))
        if mu is not None:
            self.pin_mu(name, mu)
        self.raw[name] = matrix

    def use_calibrator(self, name: str, calibrator: Calibrator, mu: Optional[float] = None) -> None:
        if name not in self.names:
            raise ConfigError(f"unknown score {name!r}")
        if mu is not None:
            self.pin_mu(name, mu)
        self.calibrators[name] = calibrator

    def pin_mu(self, name: str, mu: float) -> None:
        if name in self.mu and self.mu[name] != mu:
            raise ConfigError(f"score {name!r} was prepared at mu={self.mu[name]}, not mu={mu}")
        self.mu[name] = mu

    # -- scores ----------------------------------------------------------------------------

    def _source(self, name: str):
        return next(source for source in self.config.scores if source.name == name)

    def resolve_mu(self, name: str) -> float:
        """Threshold of a local score: pinned (stored or imported), fixed or tuned, in that order."""
        if name in self.mu:
            return self.mu[name]
        if self.config.mu.policy == "fixed":
            mu = self.config.mu.value
        else:
            mu = self.tune(name).mu
        self.mu[name] = mu
        return mu

    def tune(self, name: str) -> MuTuning:
        if name not in self.tunings:
            policy = self.config.mu
            others = None
            if policy.objective == "fused":
                others = {
                    other: self.calibrated_score(other)
                    for other in sorted(self.names)
                    if other != name and (self._source(other).type == "global" or other in self.calibrated)
                }
            with stage(f"tune mu: {name}"):
                self.tunings[name] = tune_mu(
                    self.inputs.matches[name],
                    self.queries,
                    self.db_catalog,
                    self.validation,
                    grid=policy.grid,
                    method=self.config.calibration.method,
                    objective=policy.objective,
                    others=others,
                    name=name,
                )
        return self.tunings[name]

    def raw_score(self, name: str) -> ScoreMatrix:
        if name not in self.raw:
            source = self._source(name)
            with stage(f"score: {name}"):
                if source.type == "global":
                    query, database = self.inputs.embeddings[name]
                    self.raw[name] = global_score_matrix(query, database, self.threads)
                else:
                    mu = self.resolve_mu(name)
                    self.raw[name] = self._local_at(name, mu)
            logger.info(f"Computed raw {source.type} score {name!r}")
        return self.raw[name]

    def _local_at(self, name: str, mu: float) -> ScoreMatrix:
        return local_score_matrix(
            self.inputs.matches[name],
            MatchThreshold(mu=mu),
            len(self.inputs.query_catalog),
            len(self.db_catalog),
        )

    def fit(self, raw: ScoreMatrix, rows) -> Calibrator:
        pairs = build_pair_labels(raw, self.queries, self.db_catalog, rows)
        return fit_calibrator(pairs, self.config.calibration.method)

    def calibrator(self, name: str) -> Calibrator:
        if name not in self.calibrators:
            if name in self.imported:
                self.calibrators[name] = self.imported[name].calibrator
            else:
                raw = self.raw_score(name)
                with stage(f"calibrate: {name}"):
                    self.calibrators[name] = self.fit(raw, self.validation)
                logger.info(f"Fitted {self.calibrators[name].method.value} calibrator for {name!r}")
        return self.calibrators[name]

    def calibrated_score(self, name: str) -> ScoreMatrix:
        if name not in self.calibrated:
            calibrator = self.calibrator(name)
            with stage(f"apply calibrator: {name}"):
                self.calibrated[name] = apply_calibrator(calibrator, self.raw_score(name), self.threads)
        return self.calibrated[name]

    def fused_score(self, config: Optional[FusionConfig] = None) -> ScoreMatrix:
        config = config or self.fusion
        with stage("fuse"):
            return fuse({name: self.calibrated_score(name) for name in config.names}, config, self.threads)

    def fit_all(self) -> Dict[str, Calibrator]:
        return {name: self.calibrator(name) for name in self.names}

    # -- evaluation ------------------------------------------------------------------------

    def release_test_labels(self) -> None:
        self.queries.release()

    def predictions(self, matrix: ScoreMatrix):
        return rank_top1(matrix.rows(self.test), self.db_catalog, query_indices=self.test)

    def test_accuracy(self, matrix: ScoreMatrix) -> float:
        with stage("evaluate"):
            return top1_accuracy(self.predictions(matrix), self.queries, self.db_catalog, query_indices=self.test)

    def test_topk(self, matrix: ScoreMatrix, k: int) -> float:
        with stage("evaluate"):
            return topk_accuracy(matrix.rows(self.test), self.queries, self.db_catalog, k, query_indices=self.test)

    def pair_scorer(self, config: Optional[FusionConfig] = None):
        """Fused score of a single pair, computed on demand from the raw scores."""
        config = config or self.fusion
        weights = config.weights
        terms = [(weights[name], self.calibrator(name), self.raw_score(name).values) for name in config.names]

        def score(query: int, db_index: int) -> float:
            total = 0.0
            for weight, calibrator, raw in terms:
                total += weight * calibrator.evaluate(raw[query, db_index])
            return min(1.0, max(0.0, total))

        return score

    def budget_point(self, budget: int, cheap_name: Optional[str] = None) -> Dict:
        cheap_name = cheap_name or self.config.cheap_score
        if cheap_name is None:
            raise ConfigError("no cheap score configured for the shortlist")
        cheap = self.raw_score(cheap_name).rows(self.test)
        scorer = self.pair_scorer()
        with stage(f"shortlist: B={budget}"):
            outcome = shortlist_rerank(
                cheap, scorer, Budget(b=budget), self.db_catalog, query_indices=self.test, threads=self.threads
            )
            accuracy = top1_accuracy(outcome.predictions, self.queries, self.db_catalog, query_indices=self.test)
        return {
            "budget": int(budget),
            "cheap": cheap_name,
            "accuracy": accuracy,
            "evaluations_per_query": int(min(budget, len(self.db_catalog))),
        }

    # -- experiments -----------------------------------------------------------------------

    def ablation(self) -> Dict[str, float]:
        rows = {}
        names = sorted(self.names)
        for size in range(1, len(names) + 1):
            for subset in itertools.combinations(names, size):
                fused = self.fused_score(self.fusion.restricted(subset))
                rows["+".join(subset)] = self.test_accuracy(fused)
        return rows

    def _fused_accuracy_with(self, replaced: Dict[str, ScoreMatrix]) -> float:
        matrices = {
            name: replaced[name] if name in replaced else self.calibrated_score(name) for name in self.fusion.names
        }
        return self.test_accuracy(fuse(matrices, self.fusion, self.threads))

    def mu_curve(self) -> List[Dict]:
        """Test accuracy of the local scores, and of the fusion, at every fixed mu of the grid."""
        locals_ = [source.name for source in self.config.local_sources]
        grid = self.config.mu.grid or default_mu_grid()
        rows = []
        for mu in sorted(set(grid)):
            row: Dict = {"mu": mu}
            replaced = {}
            try:
                with stage(f"mu curve: mu={mu}"):
                    for name in locals_:
                        raw = self._local_at(name, mu)
                        row[name] = self.test_accuracy(raw)
                        replaced[name] = apply_calibrator(self.fit(raw, self.validation), raw, self.threads)
                    row["fused"] = self._fused_accuracy_with(replaced)
            except FusecalError as e:
                if e.exit_code != 3:
                    raise
                row["fused"] = None
                row["error"] = str(e)
            rows.append(row)
        return rows

    def calibration_curve(self, sizes) -> List[Dict]:
        """Fused test accuracy when calibrators (and tuned thresholds) see only n validation items."""
        rows = []
        for n_items in sorted(set(sizes)):
            row: Dict = {"n_items": int(n_items)}
            try:
                with stage(f"calibration curve: n={n_items}"):
                    subset = subsample_calibration_set(
                        self.queries, self.db_catalog, n_items, self.config.seed, candidates=self.validation
                    )
                    row["items_used"] = len(subset)
                    replaced = {}
                    for name in self.names:
                        raw = self.raw_score(name)
                        if self._source(name).type == "local" and self.config.mu.policy == "tuned":
                            tuning = tune_mu(
                                self.inputs.matches[name], self.queries, self.db_catalog, subset,
                                grid=self.config.mu.grid, method=self.config.calibration.method, name=name,
                            )
                            raw = self._local_at(name, tuning.mu)
                            row.setdefault("mu", {})[name] = tuning.mu
                        replaced[name] = apply_calibrator(self.fit(raw, subset), raw, self.threads)
                    row["fused"] = self._fused_accuracy_with(replaced)
            except FusecalError as e:
                if e.exit_code != 3 and not isinstance(e, ConstraintError):
                    raise
                logger.warning(f"Calibration curve: n={n_items} skipped: {e}")
                row["fused"] = None
                row["error"] = str(e)
            rows.append(row)
        return rows


def _calibrator_summaries(session: PipelineSession) -> Dict[str, Dict]:
    summaries = {}
    for name in session.names:
        summary = session.calibrator(name).summary()
        if name in session.mu:
            summary["mu"] = session.mu[name]
        summaries[name] = summary
    return summaries


def run_pipeline(
    config: PipelineConfig,
    inputs: Optional[PipelineInputs] = None,
    threads: Optional[int] = None,
    split: Optional[SplitSpec] = None,
) -> Tuple[RetrievalResult, PipelineDiagnostics]:
    """
    Full evaluation: score, calibrate on validation, fuse, evaluate on test.

    The headline result is the fused top-1 over the test split. Diagnostics
    carry per-score accuracies, chosen thresholds and the configured
    experiment curves.
    """
    inputs = inputs or load_inputs(config)
    session = PipelineSession(config, inputs, threads=threads, split=split)
    diagnostics = PipelineDiagnostics(
        split_sizes={"validation": len(session.validation), "test": len(session.test)},
        zero_shot=session.zero_shot,
    )

    logger.info("Stage: calibration")
    fused = session.fused_score()
    diagnostics.chosen_mu = {
        source.name: session.resolve_mu(source.name) for source in config.local_sources
    }
    diagnostics.tuning = {name: tuning.as_rows() for name, tuning in session.tunings.items()}
    diagnostics.calibrators = _calibrator_summaries(session)

    logger.info("Stage: evaluation")
    session.release_test_labels()
    predictions = session.predictions(fused)
    result = RetrievalResult(
        predictions=predictions,
        top1_accuracy=session.test_accuracy(fused),
    )
    diagnostics.accuracies = {name: session.test_accuracy(session.raw_score(name)) for name in session.names}
    diagnostics.accuracies["fused"] = result.top1_accuracy
    for name, accuracy in diagnostics.accuracies.items():
        logger.info(f"Test top-1 {name}: {accuracy:.4f}")

    experiments = config.experiments
    for k in experiments.topk:
        for name in session.names:
            diagnostics.topk.setdefault(name, {})[str(k)] = session.test_topk(session.raw_score(name), k)
        diagnostics.topk.setdefault("fused", {})[str(k)] = session.test_topk(fused, k)

    if experiments.ablation and len(session.names) > 1:
        logger.info("Stage: ablation")
        diagnostics.ablation = session.ablation()
    if not session.zero_shot:
        if experiments.mu_curve and config.local_sources:
            logger.info("Stage: mu curve")
            diagnostics.mu_curve = session.mu_curve()
        if experiments.calibration_sizes:
            logger.info("Stage: calibration curve")
            diagnostics.calibration_curve = session.calibration_curve(experiments.calibration_sizes)
    if config.shortlist is not None:
        logger.info("Stage: shortlist")
        diagnostics.budget_curve = [session.budget_point(b) for b in sorted(set(config.shortlist.budgets))]

    return result, diagnostics
