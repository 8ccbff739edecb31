import numpy as np

from models.dataset import Dataset


def make_dataset(n=200, seed=0, n_features=3, bbox=(10.0, 55.0, 16.0, 58.6), years=(2003, 2018),
                 prevalence=0.3, signal=0.0, ids=None) -> Dataset:
    """Random records; with signal > 0 the label depends on the first feature."""
    rng = np.random.default_rng(seed)
    lon = rng.uniform(bbox[0], bbox[2], n)
    lat = rng.uniform(bbox[1], bbox[3], n)
    X = rng.normal(size=(n, n_features))
    if signal > 0:
        label = (X[:, 0] * signal + rng.normal(size=n) > 0).astype(np.int64)
    else:
        label = (rng.random(n) < prevalence).astype(np.int64)
    label[0], label[1] = 0, 1
    return Dataset(
        ids=np.arange(n) if ids is None else ids,
        lon=lon,
        lat=lat,
        year=rng.integers(years[0], years[1] + 1, n),
        label=label,
        X=X,
        feature_names=[f"f{j}" for j in range(n_features)],
    )
