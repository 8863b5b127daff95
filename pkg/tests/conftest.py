import pytest

from utils.montecarlo import MonteCarloConfig
from utils.tail_model import ReferenceDistribution, TailFunction


@pytest.fixture
def exponential():
    return ReferenceDistribution.exponential(1.0)


@pytest.fixture
def weibull():
    return ReferenceDistribution.weibull(2.0, 1.0)


@pytest.fixture
def pareto():
    return ReferenceDistribution.pareto(3.0)


@pytest.fixture
def subweibull_tail():
    return TailFunction.sub_weibull(2.0, 1.0)


@pytest.fixture
def small_mc():
    """A Monte Carlo budget small enough for the default test run."""
    return MonteCarloConfig(n_samples=20_000, seed=12345, batch_size=5_000)


@pytest.fixture
def tail_csv(tmp_path):
    def write(text, name="tail.csv"):
        path = tmp_path / name
        path.write_text(text)
        return path
    return write
