import numpy as np
import pytest

from apextrack.core import GridSpec, Heatmap, SizeMap


@pytest.fixture
def grid64():
    return GridSpec(64, 64, 4)


@pytest.fixture
def grid128():
    return GridSpec(128, 128, 4)


def one_hot(grid, cells, size=(16.0, 24.0)):
    """Heatmap with the given ``{(col, row): value}`` entries and a constant size map."""
    hm = np.zeros((grid.rows, grid.cols, 1), dtype=np.float32)
    for (col, row), value in cells.items():
        hm[row, col, 0] = value
    sz = np.zeros((grid.rows, grid.cols, 2), dtype=np.float32)
    sz[:, :] = size
    return Heatmap(grid, hm), SizeMap(grid, sz)


ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, ok, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {title}: {detail}")
