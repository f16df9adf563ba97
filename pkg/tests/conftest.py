import numpy as np
import pytest

from spectral_levy import EstimateConfig, ExperimentConfig, LevyModel, run_experiment

# fixed once; never changed to make a run pass
MASTER_SEED = 20120103

ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture(scope="session")
def cp_model():
    return LevyModel.compound_poisson(1.0)


@pytest.fixture(scope="session")
def gamma_model():
    return LevyModel.gamma_process(0.4)


@pytest.fixture(scope="session")
def cp_mc(cp_model):
    cfg = ExperimentConfig(cp_model, 10**4, 1.0, 300, [0.5, 1.0, 2.0], EstimateConfig(),
                           master_seed=MASTER_SEED)
    return run_experiment(cfg)


@pytest.fixture(scope="session")
def gamma_mc(gamma_model):
    cfg = ExperimentConfig(gamma_model, 10**5, 1.0, 300, [0.5, 1.0, 2.0], EstimateConfig(),
                           master_seed=MASTER_SEED)
    return run_experiment(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
