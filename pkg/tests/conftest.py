import numpy as np
import pytest

from eass.synth import SyntheticSpec, generate_synthetic


@pytest.fixture(scope="session")
def small_dataset():
    """Three transformers, eight weeks of warm-up and one evaluation week."""
    return generate_synthetic(SyntheticSpec(n_transformers=3, days=63, seed=7))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def record_criterion():
    """Register the one-line verdict for an acceptance criterion."""

    def record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[number] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
