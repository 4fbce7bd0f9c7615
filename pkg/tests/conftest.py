import numpy as np
import pytest

from cbt.features import FilterBankConfig, build_filter_bank


@pytest.fixture(scope="session")
def default_bank():
    return build_filter_bank(FilterBankConfig())


@pytest.fixture(scope="session")
def small_bank():
    return build_filter_bank(FilterBankConfig(image_side=33))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.OUTCOMES:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
