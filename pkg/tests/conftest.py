import numpy as np
import pytest

from posmaps import maps as mp
from posmaps import states as st

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_density(d_a, d_b, rng, rank=None):
    return st.random_state(d_a, d_b, rank=rank, seed=rng)


def maps_for_dim(d):
    """Builtin decompositions available in dimension ``d``."""
    out = [
        mp.reduction(d),
        mp.transposition(d),
        mp.minimal_transposition_decomposition(d),
        mp.reduction_preset(d, 3),
        mp.canonical_decomposition(mp.transposition(d).choi),
    ]
    if d == 2:
        out.append(mp.reduction_preset(2, 1))
    if d % 2 == 0 and d >= 4:
        out.append(mp.breuer_hall(d))
        out.append(mp.canonical_decomposition(mp.breuer_hall(d).choi))
    for k in range(1, d - 1):
        out.append(mp.generalized_choi(d, k))
    return out
