import numpy as np
import pytest

from flrchange.fgrid import FunctionalSeries, make_grid
from flrchange.simulate import generate, scenario_presets


@pytest.fixture(scope="session")
def s1_200():
    """Scenario 1, n=200, one change at 100."""
    return generate(scenario_presets("S1", 200, c_beta=1.0, seed=0))


@pytest.fixture(scope="session")
def s1_400():
    return generate(scenario_presets("S1", 400, c_beta=1.0, seed=1))


def noiseless(series, truth):
    """Same covariates, responses without noise."""
    w = series.grid.weights
    y = np.array([(series.X[j] * w) @ truth.slope_at(j + 1) for j in range(series.n)])
    return FunctionalSeries(y, series.X, series.grid)


@pytest.fixture(scope="session")
def s1_200_clean(s1_200):
    series, truth = s1_200
    return noiseless(series, truth), truth


@pytest.fixture
def small_series():
    """Small dense random instance with a full-rank covariate design."""
    rng = np.random.default_rng(11)
    grid = make_grid(30)
    X = rng.standard_normal((80, 30))
    y = rng.standard_normal(80)
    return FunctionalSeries(y, X, grid)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
