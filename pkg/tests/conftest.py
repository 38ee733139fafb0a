import random

import pytest

from coverpipe import djcrypto, envelope


@pytest.fixture(scope="session")
def toy_keys():
    """512-bit test keys; every scheme invariant must hold at this size."""
    rng = random.Random(0xC0FFEE)
    return djcrypto.keygen(512, 2, rng)


@pytest.fixture(scope="session")
def prod_keys():
    """Production-size 2048-bit keys, generated once per session."""
    rng = random.Random(0xFEED)
    return djcrypto.keygen(2048, 9, rng)


@pytest.fixture(scope="session")
def env_keys():
    return envelope.env_keygen(random.Random(5))
