"""
Synthetic re-identification benchmark.

Every identity gets a random unit prototype. Its items are the prototype
plus Gaussian noise (sigma), renormalized; a share of each identity's items
goes to the database, the rest are queries. Every (query, database) pair gets
a Poisson number of local matches. A match is "high" (confidence above
0.5 + delta/2) with probability inlier_rate for same-identity pairs and
outlier_rate otherwise; all other matches are "low" (below 0.5 - delta/2).

Confidences are whole multiples of 1e-6, so match files round-trip exactly.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveInt

from fusecal.config import default
from fusecal.core.random_streams import SYNTH, stream
from fusecal.models.catalog import CatalogRole, ItemCatalog
from fusecal.models.embeddings import EmbeddingMatrix
from fusecal.models.matches import MatchRecordSet
from fusecal.repositories.embedding_file import write_embedding_file
from fusecal.repositories.label_file import write_label_file
from fusecal.repositories.match_file import write_match_file

logger = logging.getLogger(__name__)

MICRO = 1_000_000

FILE_NAMES = {
    "query_labels": "query_labels.csv",
    "database_labels": "database_labels.csv",
    "query_embeddings": "query.femb",
    "database_embeddings": "database.femb",
    "matches": "matches.csv",
    "config": "pipeline.yaml",
}


def _from_defaults(key: str):
    return lambda: default("synthetic", key)


class SyntheticParams(BaseModel):
    """Generator settings; unset fields come from the packaged defaults."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_identities: PositiveInt = Field(default_factory=_from_defaults("n_identities"))
    items_per_identity: int = Field(
        default_factory=_from_defaults("items_per_identity"),
        ge=2,
        description="Items per identity; at least one lands in the database and one among the queries",
    )
    dims: PositiveInt = Field(default_factory=_from_defaults("dims"))
    sigma: float = Field(default_factory=_from_defaults("sigma"), ge=0.0, allow_inf_nan=False)
    delta: float = Field(default_factory=_from_defaults("delta"), gt=0.0, lt=1.0, description="Gap between low and high confidences")
    matches_per_pair: float = Field(default_factory=_from_defaults("matches_per_pair"), gt=0.0, allow_inf_nan=False)
    inlier_rate: float = Field(default_factory=_from_defaults("inlier_rate"), ge=0.0, le=1.0)
    outlier_rate: float = Field(default_factory=_from_defaults("outlier_rate"), ge=0.0, le=1.0)
    database_fraction: float = Field(default_factory=_from_defaults("database_fraction"), gt=0.0, lt=1.0)
    seed: int = Field(default_factory=_from_defaults("seed"), ge=0)

    @property
    def database_items_per_identity(self) -> int:
        share = int(math.floor(self.items_per_identity * self.database_fraction + 0.5))
        return min(self.items_per_identity - 1, max(1, share))


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    params: SyntheticParams
    query_catalog: ItemCatalog
    db_catalog: ItemCatalog
    query_embeddings: EmbeddingMatrix
    db_embeddings: EmbeddingMatrix
    matches: MatchRecordSet


def _catalogs(params: SyntheticParams):
    n_db = params.database_items_per_identity
    id_width = len(str(params.n_identities - 1))
    item_width = len(str(params.items_per_identity - 1))
    database, query = [], []
    for i in range(params.n_identities):
        identity = f"id{i:0{id_width}d}"
        for j in range(params.items_per_identity):
            item = (f"{identity}_{j:0{item_width}d}", identity)
            (database if j < n_db else query).append(item)
    return ItemCatalog.from_pairs(query, CatalogRole.QUERY), ItemCatalog.from_pairs(database, CatalogRole.DATABASE)


def _confidence_bounds(delta: float):
    high_start = int(math.floor((0.5 + delta / 2) * MICRO)) + 1
    low_stop = int(math.ceil((0.5 - delta / 2) * MICRO)) - 1
    return high_start, low_stop


def generate_dataset(params: SyntheticParams) -> SyntheticDataset:
    rng = stream(params.seed, SYNTH)
    n_db = params.database_items_per_identity

    prototypes = rng.standard_normal((params.n_identities, params.dims))
    prototypes /= np.linalg.norm(prototypes, axis=1, keepdims=True)
    noise = rng.standard_normal((params.n_identities, params.items_per_identity, params.dims))
    vectors = prototypes[:, None, :] + params.sigma * noise
    vectors /= np.linalg.norm(vectors, axis=2, keepdims=True)
    # embeddings live on disk as float32; generate what a reader would see
    vectors = vectors.astype(np.float32).astype(np.float64)

    query_catalog, db_catalog = _catalogs(params)
    db_vectors = vectors[:, :n_db].reshape(-1, params.dims)
    query_vectors = vectors[:, n_db:].reshape(-1, params.dims)

    query_identity = np.repeat(np.arange(params.n_identities), params.items_per_identity - n_db)
    db_identity = np.repeat(np.arange(params.n_identities), n_db)
    n_query, n_database = query_identity.size, db_identity.size
    same = (query_identity[:, None] == db_identity[None, :]).ravel()

    counts = rng.poisson(params.matches_per_pair, size=n_query * n_database)
    codes = np.repeat(np.arange(n_query * n_database, dtype=np.int64), counts)
    high_rate = np.where(same[codes], params.inlier_rate, params.outlier_rate)
    high = rng.random(codes.size) < high_rate
    high_start, low_stop = _confidence_bounds(params.delta)
    micro = np.where(
        high,
        rng.integers(high_start, MICRO + 1, size=codes.size),
        rng.integers(0, low_stop + 1, size=codes.size),
    )
    matches = MatchRecordSet(codes // n_database, codes % n_database, micro / MICRO, n_query, n_database)

    logger.info(
        f"Generated {n_query} queries x {n_database} database items "
        f"({params.n_identities} identities, {len(matches)} matches)"
    )
    return SyntheticDataset(
        params=params,
        query_catalog=query_catalog,
        db_catalog=db_catalog,
        query_embeddings=EmbeddingMatrix(query_vectors, catalog_ref=FILE_NAMES["query_labels"]),
        db_embeddings=EmbeddingMatrix(db_vectors, catalog_ref=FILE_NAMES["database_labels"]),
        matches=matches,
    )


def pipeline_document(params: SyntheticParams) -> Dict:
    """A ready-to-run pipeline document for the generated files."""
    return {
        "seed": params.seed,
        "labels": {"query": FILE_NAMES["query_labels"], "database": FILE_NAMES["database_labels"]},
        "scores": [
            {
                "name": "global",
                "type": "global",
                "query": FILE_NAMES["query_embeddings"],
                "database": FILE_NAMES["database_embeddings"],
            },
            {"name": "local", "type": "local", "matches": FILE_NAMES["matches"]},
        ],
        "calibration": {"method": "isotonic_pchip"},
        "mu": {"policy": "tuned", "objective": "local"},
        "split": {"ratio": default("split", "ratio")},
        "shortlist": {"cheap": "global", "budgets": [1, 3, 10]},
        "experiments": {"calibration_sizes": [2, 5, 10]},
    }


def write_dataset(dataset: SyntheticDataset, out_dir: Union[str, Path]) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {key: out_dir / name for key, name in FILE_NAMES.items()}

    write_label_file(paths["query_labels"], dataset.query_catalog)
    write_label_file(paths["database_labels"], dataset.db_catalog)
    write_embedding_file(paths["query_embeddings"], dataset.query_embeddings)
    write_embedding_file(paths["database_embeddings"], dataset.db_embeddings)
    write_match_file(paths["matches"], dataset.matches, dataset.query_catalog, dataset.db_catalog)

    settings = ", ".join(f"{key}={value}" for key, value in dataset.params.model_dump().items())
    header = f"# synthetic benchmark: {settings}\n"
    body = yaml.safe_dump(pipeline_document(dataset.params), sort_keys=False, default_flow_style=False)
    paths["config"].write_text(header + body, encoding="utf-8")
    logger.info(f"Wrote synthetic benchmark to {out_dir}")
    return paths


def generate_synthetic(params: Optional[SyntheticParams] = None, out_dir: Union[str, Path, None] = None) -> SyntheticDataset:
    """Generate a benchmark and, when ``out_dir`` is given, write it with its pipeline.yaml."""
    dataset = generate_dataset(params or SyntheticParams())
    if out_dir is not None:
        write_dataset(dataset, out_dir)
    return dataset


if __name__ == "__main__":
    demo = generate_synthetic(SyntheticParams(n_identities=5, items_per_identity=4, seed=1))
    print(f"Queries: {len(demo.query_catalog)}, database items: {len(demo.db_catalog)}")
    print(f"Matches: {len(demo.matches)}")
    grouped = demo.matches.as_mapping()
    for (q, d), confidences in list(grouped.items())[:5]:
        same = demo.query_catalog.identity_of(q) == demo.db_catalog.identity_of(d)
        print(f"- pair ({q}, {d}) same={same}: {confidences}")
