import numpy as np
import pytest

from chaosveil import corpus
from chaosveil.imagecore import Image


@pytest.fixture(scope="session")
def textures():
    return corpus.corpus()


@pytest.fixture(scope="session")
def small_cover():
    return corpus.natural_texture(99, 128)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_image(rng, h, w):
    return Image(rng.integers(0, 256, size=(h, w), dtype=np.uint8))


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion(capsys):
    """Record one PASS/FAIL line for an acceptance criterion."""
    def record(number, title, ok, detail=""):
        line = f"AC{number:02d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
