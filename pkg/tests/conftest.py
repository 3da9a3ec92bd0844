import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@st.composite
def pd_matrices(draw, p=None, low=0.2, high=5.0):
    """Random PD matrix from a drawn orthogonal frame and bounded spectrum."""
    if p is None:
        p = draw(st.integers(1, 4))
    seed = draw(st.integers(0, 2**32 - 1))
    gen = np.random.default_rng(seed)
    q, _ = np.linalg.qr(gen.standard_normal((p, p)))
    w = np.array([draw(st.floats(low, high)) for _ in range(p)])
    return (q * w) @ q.T


@pytest.fixture
def gen():
    return np.random.default_rng(2024)
