import pytest
from hypothesis import settings

from atocftp import build_joint_model, build_model

settings.register_profile("ci", max_examples=60, deadline=None)
settings.load_profile("ci")


def pos_instance(service="single-server(1)"):
    """I=2, C=(3,3), lambda_1 = lambda_2 = lambda_12 = 0.3."""
    return build_model((3, 3), {(0,): 0.3, (1,): 0.3, (0, 1): 0.3}, service)


def joint_instance(caps=(2, 2), rate=0.1, mu=1.0):
    return build_joint_model(caps, {(0,): rate, (1,): rate, (0, 1): rate}, mu)


@pytest.fixture
def small_model():
    return pos_instance()


@pytest.fixture
def joint3():
    return build_joint_model((2, 2, 2), {(0,): 0.3, (1, 2): 0.2, (0, 1, 2): 0.2, (2,): 0.1}, 1.0)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for tag in sorted(RESULTS, key=lambda t: int(t[2:])):
            terminalreporter.write_line(RESULTS[tag])
