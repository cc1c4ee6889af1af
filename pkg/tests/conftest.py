import numpy as np
import pytest

from acbc.config import example_config
from acbc.pipeline import run_scenario, run_synthesize

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record_acceptance():
    """Record one pass/fail line per acceptance criterion for the summary."""

    def record(k: int, passed: bool, detail: str) -> None:
        _ACCEPTANCE[k] = (bool(passed), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[k]
        terminalreporter.write_line(f"ACCEPTANCE {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def case1_cfg():
    return example_config("case1")


@pytest.fixture(scope="session")
def case2_cfg():
    return example_config("case2")


@pytest.fixture(scope="session")
def case1_synth(case1_cfg):
    return run_synthesize(case1_cfg)


@pytest.fixture(scope="session")
def case1_scenario(case1_cfg):
    return run_scenario(case1_cfg)


@pytest.fixture(scope="session")
def case1_scenario_det(case1_cfg):
    return run_scenario(case1_cfg.with_overrides("scenario", path="deterministic"))


@pytest.fixture(scope="session")
def case2_synth(case2_cfg):
    return run_synthesize(case2_cfg.with_overrides("synthesis", varpi_sweep=[0.005, 0.002]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


REFERENCE_P = np.array(
    [[20.1130, 12.1850, 1.2337], [12.1850, 22.0934, 2.7004], [1.2337, 2.7004, 0.8938]]
)
