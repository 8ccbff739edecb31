import os

import numpy as np
import pytest

from models.dataset import Dataset
from tests.factories import make_dataset


def pytest_collection_modifyitems(config, items):
    if os.getenv("GEOCV_RUN_SLOW") == "1":
        return
    skip_slow = pytest.mark.skip(reason="set GEOCV_RUN_SLOW=1 to run slow acceptance tests")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def dataset():
    return make_dataset()


@pytest.fixture
def separable_dataset():
    """Label is 1 exactly where the first feature is positive, with a gap of width 2 around zero."""
    d = make_dataset(n=150, seed=3)
    X = d.X.copy()
    X[:, 0] = np.sign(X[:, 0]) * (1.0 + np.abs(X[:, 0]))
    label = (X[:, 0] > 0).astype(np.int64)
    return Dataset(ids=d.ids, lon=d.lon, lat=d.lat, year=d.year, label=label, X=X, feature_names=d.feature_names)
