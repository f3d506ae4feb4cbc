import numpy as np
import pytest

from smartjourney.dataset import build_dataset, synth_series
from smartjourney.gbdt import BoostingConfig
from smartjourney.training import TrainConfig, train_model


@pytest.fixture(scope="session")
def synth_rows():
    """30 days of deterministic synthetic hourly rows for one district."""
    return synth_series(seed=11, days=30, base=1000.0, district="TUZLA")


@pytest.fixture(scope="session")
def small_dataset(synth_rows):
    return build_dataset(synth_rows)


@pytest.fixture(scope="session")
def quick_gbdt_artifact(small_dataset):
    """A small but real trained gbdt artifact shared across tests."""
    config = TrainConfig(
        model_type="gbdt",
        district="TUZLA",
        seed=5,
        boosting=BoostingConfig(num_rounds=40),
    )
    return train_model(small_dataset, config, created_at="2024-01-01T00:00:00Z")


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
