import numpy as np
import pytest

from panocalib.synthdata import REFERENCE_POSE, standard_dataset


@pytest.fixture(scope="session")
def clean_data():
    return standard_dataset()


@pytest.fixture(scope="session")
def truth():
    return REFERENCE_POSE


def perturbed(pose, seed, angle=0.2, shift=0.3):
    rng = np.random.default_rng(seed)
    delta = np.concatenate([rng.uniform(-angle, angle, 3), rng.uniform(-shift, shift, 3)])
    return type(pose).from_vector(pose.as_vector() + delta)
