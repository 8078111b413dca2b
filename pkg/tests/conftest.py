import numpy as np
import pytest

from l1pca.data import DataSet
from l1pca.manifold import random_stiefel


def random_instance(rng, d_max=8, K_max=3, N_max=40):
    """Gaussian data with a random subspace basis; ``K < d``."""
    d = int(rng.integers(2, d_max + 1))
    K = int(rng.integers(1, min(K_max, d - 1) + 1))
    N = int(rng.integers(max(K + 1, 3), N_max + 1))
    data = DataSet(rng.standard_normal((d, N)))
    return data, K, random_stiefel(d, K, rng)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary -------------------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    item_marker = _ITEM_MARKERS.get(report.nodeid)
    if item_marker is None:
        return
    number, title = item_marker
    failed = report.failed
    if report.when == "call" or failed:
        prev = _CRITERIA.get(number, (title, True))
        _CRITERIA[number] = (title, prev[1] and not failed)


_ITEM_MARKERS = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            _ITEM_MARKERS[item.nodeid] = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}")
