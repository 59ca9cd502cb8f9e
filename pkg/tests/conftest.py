import numpy as np
import pytest

from longterm.data import CombinedDataset


def make_dataset(n_per_stratum=3, d=1, T=3, mu=2, seed=0):
    """Small valid dataset with every (group, arm) stratum populated."""
    rng = np.random.default_rng(seed)
    groups, arms = [], []
    for g in ("E", "O"):
        for a in (0, 1):
            groups += [g] * n_per_stratum
            arms += [a] * n_per_stratum
    n = len(groups)
    group = np.array(groups)
    y = np.where(group == "E", np.nan, rng.normal(size=n))
    return CombinedDataset(group, np.array(arms), rng.normal(size=(n, d)), rng.normal(size=(n, T)), y, mu)


@pytest.fixture
def small_dataset():
    return make_dataset()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
