import numpy as np
import pytest

from clams.datagen import generate_training_set
from clams.separability import TrainConfig, train


@pytest.fixture(scope="session")
def model():
    """Small surrogate-trained model, good enough for directional checks."""
    data = generate_training_set(1500, mc_samples=1000, seed=11)
    return train(data, TrainConfig(n_trees=150), with_cv=False)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one status line per acceptance criterion for the terminal summary."""
    def record(number, status, detail):
        line = f"criterion {number:>2}: {status:<4} {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
