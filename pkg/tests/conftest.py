import numpy as np
import pytest

from crossview.catalog import default_catalog

from _generators import small_catalog


@pytest.fixture
def catalog():
    return small_catalog()


@pytest.fixture
def street_catalog():
    return default_catalog()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
