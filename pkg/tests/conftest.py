import numpy as np
import pytest

from distnn import Dataset


@pytest.fixture
def line_data() -> Dataset:
    """Four points on a line whose distance order from x=-1 is the row order."""
    return Dataset(
        features=np.array([[0.0], [1.0], [2.0], [3.0]]),
        response=np.array([2.0, 4.0, 6.0, 8.0]),
    )


def random_dataset(rng: np.random.Generator, n: int, d: int) -> Dataset:
    return Dataset(
        features=rng.normal(size=(n, d)),
        response=rng.normal(size=n),
    )
