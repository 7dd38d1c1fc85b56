import numpy as np
import pytest

from matrixflow.block_layout import DTYPES


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_dense(rng, rows, cols, dtype):
    """Random operand covering the full value range of integer kinds."""
    if dtype.is_integer:
        info = np.iinfo(dtype.np)
        return rng.integers(
            info.min, int(info.max) + 1, size=(rows, cols), dtype=np.int64
        ).astype(dtype.np)
    return rng.uniform(-1.0, 1.0, size=(rows, cols)).astype(dtype.np)


ALL_DTYPES = tuple(DTYPES.values())
