import numpy as np
import pytest

from uwsec.config import default_config
from uwsec.mdp import build_model, policy_iteration, value_iteration


@pytest.fixture(scope="session")
def cfg():
    return default_config()


@pytest.fixture(scope="session")
def model(cfg):
    return build_model(cfg)


@pytest.fixture(scope="session")
def pi_result(model):
    return policy_iteration(model, 1e-6)


@pytest.fixture(scope="session")
def vi_result(model):
    return value_iteration(model, 1e-6)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def report(capsys):
    """Print one PASS/FAIL line for an acceptance criterion and remember it for the summary."""

    def emit(ok: bool, label: str, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        _ACCEPTANCE.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
