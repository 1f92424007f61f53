import pytest

from sinkbond import DiscountCurve, JDCEVParams


@pytest.fixture
def fitted_params() -> JDCEVParams:
    """Calibrated parameters of a high-yield issuer with volatile equity."""
    return JDCEVParams(lambda0=0.004, sigma=2.8199, beta=-0.6, z0=30.0)


@pytest.fixture
def calm_params() -> JDCEVParams:
    """Parameters whose lattice never reaches the default boundary over a few years."""
    return JDCEVParams(lambda0=0.004, sigma=1.0, beta=-0.5, z0=100.0)


@pytest.fixture
def flat_curve() -> DiscountCurve:
    return DiscountCurve.flat(0.02)


@pytest.fixture
def zero_curve() -> DiscountCurve:
    return DiscountCurve.flat(0.0)
