import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def bio_test_set():
    # simulating the bioreactor test pool takes ~15 s; share it across modules
    from hybrid_im.sampling import build_test_set
    from hybrid_im.systems import bioreactor
    return build_test_set(bioreactor(), 10_000, 0)


@pytest.fixture(scope="session")
def ln_test_set():
    from hybrid_im.sampling import build_test_set
    from hybrid_im.systems import ln_example
    return build_test_set(ln_example(), 10_000, 0)
