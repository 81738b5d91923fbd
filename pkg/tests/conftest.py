import numpy as np
import pytest

from lucidtab import dataset as ds_mod
from lucidtab import preprocess

WDBC_PATH = "data/wdbc.csv"


@pytest.fixture(scope="session")
def wdbc():
    d, _ = ds_mod.load_csv(WDBC_PATH)
    return ds_mod.encode_labels(d)


@pytest.fixture(scope="session")
def wdbc_split(wdbc):
    train, test, idx = ds_mod.train_test_split(wdbc, 0.2, 42)
    return train, test, idx


@pytest.fixture(scope="session")
def wdbc_standardized(wdbc_split):
    train, test, _ = wdbc_split
    plan = preprocess.fit_plan(train, preprocess.parse_steps("zscore"))
    return preprocess.apply_plan(plan, train), preprocess.apply_plan(plan, test)


def make_dataset(X, y=None, names=None):
    """Small synthetic Dataset for unit tests."""
    X = np.asarray(X, dtype=np.float64)
    names = names or [f"f{j}" for j in range(X.shape[1])]
    records = [
        ds_mod.Record(id=str(i), features=X[i], label=None if y is None else ("M" if y[i] else "B"))
        for i in range(X.shape[0])
    ]
    labels = np.empty(0, dtype=np.int64) if y is None else np.asarray(y, dtype=np.int64)
    return ds_mod.Dataset(records=records, feature_names=list(names), labels=labels)
