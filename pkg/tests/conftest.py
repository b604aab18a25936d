import numpy as np
import pytest


@pytest.fixture(scope="session")
def fig3():
    """Band-structure reference parameters: base angle and embedding scales."""
    return {
        "theta0": float(np.arcsin(0.588)),
        "t0": 0.9 / np.sqrt(2),
        "t1": 0.8 / np.sqrt(2),
    }
