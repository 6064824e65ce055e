import numpy as np
import pytest

from tvacal import LogitsDataset, SynthSpec, generate
from tvacal.synthetic import generate_split


@pytest.fixture(scope="session")
def calibrated_small():
    return generate(SynthSpec(n_classes=10, n_samples=4000, scale=2.0, tau=1.0, seed=3))


@pytest.fixture(scope="session")
def overconfident_split():
    """(cal, test) with logits sharpened by tau = 2.5."""
    return generate_split(SynthSpec(n_classes=10, n_samples=6000, scale=2.0, tau=2.5, seed=11), 3000)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def dataset_with_accuracy(n, n_correct, n_classes=3, seed=0):
    """Random logits whose argmax is correct on exactly ``n_correct`` rows."""
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(n, n_classes))
    pred = np.argmax(z, axis=1)
    labels = pred.copy()
    wrong = rng.permutation(n)[: n - n_correct]
    labels[wrong] = (pred[wrong] + 1) % n_classes
    return LogitsDataset(z, labels)
