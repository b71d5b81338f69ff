import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("lab", max_examples=60, deadline=None)
settings.load_profile("lab")


def line_index(space, label: int) -> int:
    """Vertex index of the line vertex with integer label ``label``."""
    return space.graph.labels.index(str(label))


def on_line(space, values_by_label: dict) -> np.ndarray:
    f = np.zeros(space.vertex_count)
    for lab, val in values_by_label.items():
        f[line_index(space, lab)] = val
    return f


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
