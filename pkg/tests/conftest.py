import itertools
import warnings

import numpy as np
import pytest
from hypothesis import settings

from ctables.core import OutsideHypothesisWarning

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_hypothesis_warning():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", OutsideHypothesisWarning)
        yield


def brute_force_tables(row, col):
    """Every non-negative integer matrix with the given line sums, by scanning a box.

    Deliberately naive and independent of the library's enumerator.
    """
    m, n = len(row), len(col)
    ranges = [range(min(row[i], col[j]) + 1) for i in range(m) for j in range(n)]
    found = []
    for flat in itertools.product(*ranges):
        x = np.array(flat).reshape(m, n)
        if tuple(x.sum(axis=1)) == tuple(row) and tuple(x.sum(axis=0)) == tuple(col):
            found.append(x)
    return found
