import os
import sys
import warnings

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), ".."))

warnings.filterwarnings("ignore", message=".*TBB.*")

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def config_path(name):
    return os.path.join(CONFIG_DIR, name)
