import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stochsdp.core import MatrixTuple, ProblemData, ScenarioSet, Spectrahedron
from stochsdp.instances import diag_instance, nonattainment_instance

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def diag():
    return diag_instance()


@pytest.fixture
def example1():
    return nonattainment_instance()


def diag_recourse(n=1, c=None, T=None, tau=3.0, W_scale=1.0):
    """Recourse ``phi(t) = |t| / W_scale`` lifted to an n x n first stage."""
    c = np.zeros((n, n)) if c is None else c
    T = [np.zeros((n, n))] if T is None else T
    return ProblemData(
        c=c,
        q=np.eye(2),
        T=T,
        W=[W_scale * np.diag([1.0, -1.0])],
        X=Spectrahedron.trace_ball(n, tau),
    )


def two_scenarios(z1=1.0, z2=-1.0, p1=0.5):
    return ScenarioSet(np.array([p1, 1 - p1]), np.array([[z1], [z2]]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
