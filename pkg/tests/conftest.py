import numpy as np
import pytest

from fusecal.config.pipeline import PipelineConfig
from fusecal.core.processing import PipelineInputs
from fusecal.models.catalog import CatalogRole, ItemCatalog
from fusecal.services.synthetic import SyntheticParams, generate_dataset, pipeline_document


def make_catalogs(query_identities, db_identities):
    query = ItemCatalog.from_pairs(
        [(f"q{i}", identity) for i, identity in enumerate(query_identities)], CatalogRole.QUERY
    )
    database = ItemCatalog.from_pairs(
        [(f"d{i}", identity) for i, identity in enumerate(db_identities)], CatalogRole.DATABASE
    )
    return query, database


def synthetic_config(params: SyntheticParams, **changes) -> PipelineConfig:
    """Pipeline config for an in-memory synthetic dataset; sections in ``changes`` replace the defaults."""
    document = pipeline_document(params)
    document.update(changes)
    return PipelineConfig(**document)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_catalogs():
    return make_catalogs(["A", "B"], ["A", "B", "C"])


@pytest.fixture(scope="session")
def small_params():
    return SyntheticParams(n_identities=8, items_per_identity=4, dims=8, sigma=0.2, delta=0.6, seed=3)


@pytest.fixture(scope="session")
def small_dataset(small_params):
    return generate_dataset(small_params)


@pytest.fixture(scope="session")
def small_inputs(small_dataset):
    return PipelineInputs.from_synthetic(small_dataset)
