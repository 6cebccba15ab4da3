import numpy as np
import pytest

_acceptance_results: dict[str, str] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when == "call" and item.get_closest_marker("acceptance"):
        _acceptance_results[item.name] = report.outcome


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _acceptance_results.items():
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"{status} {name}")

from icurisk import (
    GeneratorConfig,
    SmoteConfig,
    apply_standardizer,
    encode,
    fit_standardizer,
    generate_synthetic_cohort,
    train_test_split,
)
from icurisk.resample import smote_nc


@pytest.fixture(scope="session")
def small_cohort():
    """Complete (no missing values) synthetic cohort for pipeline tests."""
    config = GeneratorConfig(n=400, prevalence=0.2, seed=11,
                             missing_height_rate=0.0, missing_weight_rate=0.0)
    return generate_synthetic_cohort(config)


@pytest.fixture(scope="session")
def encoded(small_cohort):
    return encode(small_cohort)


@pytest.fixture(scope="session")
def std_split(encoded):
    train, test = train_test_split(encoded, 0.25, stratified=True, seed=7)
    state = fit_standardizer(train)
    return apply_standardizer(state, train), apply_standardizer(state, test), state


@pytest.fixture(scope="session")
def balanced_train(std_split):
    train_s, _, _ = std_split
    return smote_nc(train_s, SmoteConfig(seed=3)).matrix


@pytest.fixture()
def rng():
    return np.random.default_rng(0)
