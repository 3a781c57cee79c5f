import sys

import numpy as np
import pytest

from sigtrade.policy import LinearPolicy, TrainingSet
from sigtrade.signature import DualVector


def random_training_set(seed, n=50, count=5, order=3, payoff_scale=1.0):
    """Random-walk paths with payoffs equal to a noisy copy of the path."""
    rng = np.random.default_rng(seed)
    times = np.linspace(0.0, 1.0, n + 1)
    values = np.cumsum(rng.normal(scale=0.3, size=(count, n + 1)), axis=1)
    payoffs = payoff_scale * (values + 0.1 * rng.normal(size=values.shape))
    return TrainingSet.from_paths(times, values, payoffs, order=order)


def random_policy(training, seed, scale=0.3, threshold=0.05, sharpness=20.0):
    rng = np.random.default_rng(seed)
    coef = rng.normal(scale=scale / training.graded_length, size=training.graded_length)
    return LinearPolicy(DualVector(training.dimension, training.order, coef), threshold, sharpness, training.normalizer)


@pytest.fixture
def small_set():
    return random_training_set(0)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is not None and module.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in module.RESULTS:
            terminalreporter.write_line(line)
