import numpy as np
import pytest

from wellglm.dataset import WellSeries

CRITERIA_RESULTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_RESULTS:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


@pytest.fixture
def small_well():
    return WellSeries(
        well_id="KA01/KP01",
        day=np.arange(5),
        temps=np.array([[650.0, 300.0], [800.0, 310.0], [700.0, np.nan], [690.0, 330.0], [720.0, 340.0]]),
        temp_labels=("THERMOCOUPLE 1", "THERMOCOUPLE 2"),
        fluid_prod=np.array([10.0, 11.0, 12.0, 13.0, 14.0]),
        gas_prod=np.array([100.0, np.nan, 120.0, np.nan, 140.0]),
    )
