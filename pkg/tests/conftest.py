from pathlib import Path

import pytest

from forensic_lr.population_db import PopulationTable

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def toy_table():
    return PopulationTable(
        "CEPH",
        {
            "D3S1358": {"14": 0.1, "15": 0.3, "16": 0.4, "17": 0.2},
            "vWA": {"16": 0.2, "17": 0.3, "18": 0.5},
        },
        {"D3S1358": 400, "vWA": 400},
    )


ACCEPTANCE_LOG: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LOG:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LOG:
            terminalreporter.write_line(line)
