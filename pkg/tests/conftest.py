from pathlib import Path

import pytest

from mortstat.media import read_counts_csv

DATA = Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def uk():
    return read_counts_csv(DATA / "uk.csv")


@pytest.fixture(scope="session")
def usa():
    return read_counts_csv(DATA / "usa.csv")


@pytest.fixture(scope="session")
def data_dir():
    return DATA


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        verdict, detail = RESULTS[n]
        terminalreporter.write_line(f"{verdict} criterion {n}: {detail}")
