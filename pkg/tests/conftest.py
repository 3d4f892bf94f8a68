import pytest

from shootscale import IntegratorSettings, PerturbedGelfand, TraceOptions, trace


@pytest.fixture(scope="session")
def settings():
    return IntegratorSettings()


@pytest.fixture(scope="session")
def pg022_curve(settings):
    """Traced perturbed-Gelfand curve at eps=0.22 over the default range."""
    return trace(PerturbedGelfand(0.22), 2, 1e-3, 200.0,
                 TraceOptions(), settings)


@pytest.fixture(scope="session")
def pg022_folds(pg022_curve):
    return pg022_curve.turning_points
