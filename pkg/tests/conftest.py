import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def equal_mass_report():
    from orbitmin.minimize import ProblemSpec, minimize

    return minimize(ProblemSpec(m=1.0, theta=0.053 * np.pi, variant="prograde", n_nodes=241))
