import numpy as np
import pytest
from hypothesis import settings

from deeplbp.evaluation import Dataset, write_dataset

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def blob_dataset(per_class=6, size=24, seed=0):
    """Two easily separated classes: smooth gradients versus salt noise."""
    rng = np.random.default_rng(seed)
    images, labels = [], []
    for _ in range(per_class):
        yy, xx = np.mgrid[0:size, 0:size]
        images.append(np.clip(xx * 4 + rng.normal(0, 1, (size, size)), 0, 255).round())
        labels.append(0)
        images.append(rng.integers(0, 256, (size, size)).astype(float))
        labels.append(1)
    return Dataset(images, labels, ["gradient", "noise"])


@pytest.fixture
def small_dataset():
    return blob_dataset()


@pytest.fixture
def dataset_dir(tmp_path, small_dataset):
    root = tmp_path / "data"
    write_dataset(small_dataset, root)
    return root
