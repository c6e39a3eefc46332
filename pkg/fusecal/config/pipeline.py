import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, PrivateAttr, field_validator, model_validator

from fusecal.config import default, validated
from fusecal.core.errors import ConfigError
from fusecal.models.calibrator import CalibrationMethod

logger = logging.getLogger(__name__)

RESERVED_NAMES = {"fused"}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScoreSource(_Section):
    """One similarity score: a pair of embedding files (global) or a match file (local)."""

    name: str = Field(pattern=r"^[A-Za-z0-9_.-]+$", description="Score name used in reports and file names")
    type: Literal["global", "local"] = Field(description="global = cosine of embeddings, local = match counts")
    query: Optional[str] = Field(None, description="Query embedding file (global scores)")
    database: Optional[str] = Field(None, description="Database embedding file (global scores)")
    matches: Optional[str] = Field(None, description="Match record file (local scores)")

    @model_validator(mode="after")
    def _check_files(self):
        if self.name in RESERVED_NAMES:
            raise ValueError(f"score name {self.name!r} is reserved")
        if self.type == "global" and not (self.query and self.database):
            raise ValueError(f"global score {self.name!r} needs 'query' and 'database' embedding files")
        if self.type == "local" and not self.matches:
            raise ValueError(f"local score {self.name!r} needs a 'matches' file")
        return self


class LabelsConfig(_Section):
    query: str = Field(description="Label file of the query items")
    database: str = Field(description="Label file of the database items")


class CalibrationConfig(_Section):
    method: CalibrationMethod = Field(
        default_factory=lambda: CalibrationMethod(default("calibration", "method")),
        description="isotonic_pchip (alias isotonic) or platt (alias logistic)",
    )

    @field_validator("method", mode="before")
    @classmethod
    def _alias(cls, value):
        return CalibrationMethod.parse(value) if isinstance(value, str) else value


class MuPolicy(_Section):
    policy: Literal["fixed", "tuned"] = Field("fixed", description="Use 'value' as is, or search 'grid' on validation")
    value: float = Field(
        default_factory=lambda: default("similarity", "default_mu"),
        ge=0.0,
        le=1.0,
        description="Threshold used by the fixed policy",
    )
    grid: Optional[List[float]] = Field(None, min_length=1, description="Search grid of the tuned policy")
    objective: Literal["local", "fused"] = Field("local", description="Validation score the tuned policy maximizes")

    @field_validator("grid")
    @classmethod
    def _grid_in_range(cls, grid):
        if grid is not None and any(not 0.0 <= mu <= 1.0 for mu in grid):
            raise ValueError("grid values must lie in [0, 1]")
        return grid


class SplitConfig(_Section):
    ratio: float = Field(default_factory=lambda: default("split", "ratio"), gt=0.0, lt=1.0)
    seed: Optional[int] = Field(None, ge=0, description="Overrides the top-level seed for the split stream")


class ShortlistConfig(_Section):
    cheap: Optional[str] = Field(None, description="Cheap score; defaults to the first global score")
    budgets: List[PositiveInt] = Field(min_length=1, description="Expensive evaluations per query to try")


class ZeroShotConfig(_Section):
    calibrators: str = Field(description="Directory of calibrators fitted on another dataset")


class ExperimentsConfig(_Section):
    ablation: bool = Field(True, description="Fused accuracy of every non-empty subset of scores")
    mu_curve: bool = Field(True, description="Test accuracy at every fixed mu of the grid")
    calibration_sizes: List[PositiveInt] = Field(
        default_factory=list, description="Validation subsample sizes for the calibration-size curve"
    )
    topk: List[PositiveInt] = Field(default_factory=lambda: list(default("report", "topk")))


class PipelineConfig(_Section):
    """A complete experiment: inputs, calibration, thresholds, fusion and evaluation settings."""

    scores: List[ScoreSource] = Field(min_length=1)
    labels: LabelsConfig
    calibration: CalibrationConfig = Field(default_factory=CalibrationConfig)
    mu: MuPolicy = Field(default_factory=MuPolicy)
    fusion: Optional[Dict[str, float]] = Field(None, description="Weights per score name; equal weights if omitted")
    split: SplitConfig = Field(default_factory=SplitConfig)
    shortlist: Optional[ShortlistConfig] = None
    zero_shot: Optional[ZeroShotConfig] = None
    experiments: ExperimentsConfig = Field(default_factory=ExperimentsConfig)
    seed: int = Field(0, ge=0, description="Root of every random stream")

    _base_dir: Path = PrivateAttr(default_factory=Path.cwd)

    @model_validator(mode="after")
    def _cross_check(self):
        names = [source.name for source in self.scores]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate score names: {names}")
        if self.fusion is not None and set(self.fusion) != set(names):
            raise ValueError(f"fusion weights name {sorted(self.fusion)}, scores are {sorted(names)}")
        if self.shortlist is not None:
            cheap = self.shortlist.cheap
            if cheap is None and not self.global_sources:
                raise ValueError("shortlist needs a cheap score and no global score is configured")
            if cheap is not None and cheap not in names:
                raise ValueError(f"shortlist cheap score {cheap!r} is not configured")
        if self.zero_shot is not None and self.mu.policy == "tuned":
            raise ValueError("zero-shot runs use the imported calibrators' mu; tuning is not possible")
        return self

    @property
    def base_dir(self) -> Path:
        return self._base_dir

    @property
    def global_sources(self) -> List[ScoreSource]:
        return [source for source in self.scores if source.type == "global"]

    @property
    def local_sources(self) -> List[ScoreSource]:
        return [source for source in self.scores if source.type == "local"]

    @property
    def split_seed(self) -> int:
        return self.seed if self.split.seed is None else self.split.seed

    @property
    def cheap_score(self) -> Optional[str]:
        if self.shortlist is None:
            return None
        return self.shortlist.cheap or self.global_sources[0].name

    def resolve(self, path: Union[str, Path]) -> Path:
        """Paths inside the document are relative to the document's directory."""
        path = Path(path)
        return path if path.is_absolute() else self._base_dir / path

    def referenced_files(self) -> List[Path]:
        files = [self.labels.query, self.labels.database]
        for source in self.scores:
            files.extend(f for f in (source.query, source.database, source.matches) if f)
        return [self.resolve(f) for f in files]

    def with_overrides(
        self,
        seed: Optional[int] = None,
        mu: Optional[float] = None,
        budget: Optional[int] = None,
        calibration: Optional[str] = None,
        zero_shot: Optional[Union[str, Path]] = None,
    ) -> "PipelineConfig":
        """A re-validated copy with command-line overrides applied."""
        document = self.model_dump(mode="json", exclude_none=True)
        if seed is not None:
            document["seed"] = seed
            document.get("split", {}).pop("seed", None)
        if mu is not None:
            document["mu"] = {**document.get("mu", {}), "policy": "fixed", "value": mu}
        if budget is not None:
            shortlist = document.get("shortlist") or {}
            document["shortlist"] = {**shortlist, "budgets": [budget]}
        if calibration is not None:
            document["calibration"] = {"method": calibration}
        if zero_shot is not None:
            document["zero_shot"] = {"calibrators": os.path.abspath(zero_shot)}
            if document.get("mu", {}).get("policy") == "tuned":
                document["mu"]["policy"] = "fixed"
        config = validated(PipelineConfig, **document)
        config._base_dir = self._base_dir
        return config

    def echo(self) -> Dict[str, Any]:
        """The document as configured, with no machine-specific absolute paths."""
        document = self.model_dump(mode="json", exclude_none=True)
        if self.zero_shot is not None:
            document["zero_shot"]["calibrators"] = Path(self.zero_shot.calibrators).name
        return document


def load_pipeline_config(path: Union[str, Path], check_files: bool = True) -> PipelineConfig:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            document = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"cannot read pipeline config {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"pipeline config {path} is not valid YAML: {e}") from e
    if not isinstance(document, dict):
        raise ConfigError(f"pipeline config {path} must be a mapping")

    config = validated(PipelineConfig, **document)
    config._base_dir = path.resolve().parent
    if check_files:
        missing = [str(f) for f in config.referenced_files() if not f.is_file()]
        if missing:
            raise ConfigError(f"pipeline config references missing files: {', '.join(missing)}")
    logger.info(f"Loaded pipeline config {path} ({len(config.scores)} scores)")
    return config
