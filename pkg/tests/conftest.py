import pytest
from hypothesis import HealthCheck, settings

from twinloss import ParamSet

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=25,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def theta_a():
    # reference operating point A: bright squeezing, moderate dark counts
    return ParamSet(eta1=0.39202, eta2=0.38206, r=1.3000, nu1=0.03419, nu2=0.06568)


@pytest.fixture(scope="session")
def theta_b():
    # reference operating point B: lower transmission, no dark counts
    return ParamSet(eta1=0.28730, eta2=0.28621, r=1.3425)
