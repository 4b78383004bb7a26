import numpy as np
import pytest

import lotkit as lk
from lotkit.transport import CostMatrix, cost_matrix


def make_cloud(rng, n, d, spread=1.0, shift=0.0):
    return lk.uniform_measure(spread * rng.normal(size=(n, d)) + shift)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def two_cloud_fixture():
    """The unit-scale 2-cloud instance used by the Sinkhorn contract tests.

    Two seeded Gaussian clouds (20 and 25 points, spread 2, shifted apart),
    with the squared-distance cost rescaled so its median is exactly 1.
    """
    gen = np.random.default_rng(7)
    src = lk.uniform_measure(2.0 * gen.normal(size=(20, 2)))
    dst = lk.uniform_measure(2.0 * gen.normal(size=(25, 2)) + np.array([4.0, 0.5]))
    raw = cost_matrix(src, dst, 2)
    M = CostMatrix(raw.entries / float(np.median(raw.entries)), 2)
    return src, dst, M
