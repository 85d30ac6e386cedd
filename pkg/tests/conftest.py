import sys
from pathlib import Path

import pytest

from tays.numerics import ToyModelConfig, init_model

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def model():
    return init_model(ToyModelConfig())


@pytest.fixture(scope="session")
def tiny_model():
    return init_model(ToyModelConfig(d_model=16, n_heads=2, n_layers=2, vocab_size=12, seed=3))
