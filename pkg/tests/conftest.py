import numpy as np
import pytest

from morphtag import tensor as T


@pytest.fixture
def float64_mode():
    """Run a test with the engine in 64-bit mode (gradient checking)."""
    T.set_default_dtype(np.float64)
    yield
    T.set_default_dtype(np.float32)
