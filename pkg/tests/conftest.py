import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hppca import NoiseGroups, PopulationProblem, RngStream, SignalModel, random_stiefel


@pytest.fixture(scope="session")
def ref_lambdas():
    return np.array([5.0, 3.5, 2.0])


@pytest.fixture(scope="session")
def ref_groups():
    return NoiseGroups(sizes=(200, 800), variances=(1.0, 6.0))


def make_model(d, lambdas, seed=0, stream=0):
    q = random_stiefel(d, len(lambdas), RngStream(seed, stream))
    return SignalModel(q_truth=q, lambdas=np.asarray(lambdas, dtype=np.float64))


def make_population(d, lambdas, groups, seed=0, stream=0):
    return PopulationProblem.from_model(make_model(d, lambdas, seed, stream), groups)
