import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.register_profile("thorough", deadline=None, max_examples=1000)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture
def golden_dir():
    return GOLDEN


@st.composite
def step_fns(draw, lo=-1.0, hi=1.0, max_jumps=4, mesh=None, values=None, avoid_zero=False):
    """Random step functions; jumps on ``mesh`` when given.

    ``avoid_zero`` keeps jumps off the origin, as processes require.
    """
    from sargmax_lab.skorohod import StepFn1D

    if mesh is None:
        inner = st.floats(lo + 1e-3, hi - 1e-3, allow_nan=False)
    else:
        k = int(round((hi - lo) / mesh))
        inner = st.integers(1, k - 1).map(lambda i: float(np.round(lo + i * mesh, 12)))
    raw = sorted(set(draw(st.lists(inner, max_size=max_jumps))))
    # warps are stored in doubles, so jumps closer than this cannot be
    # aligned independently by any representable warp
    gap = 1e-9 * (hi - lo)
    jumps = []
    for x in raw:
        if avoid_zero and abs(x) <= gap:
            continue
        if x - lo > gap and hi - x > gap and (not jumps or x - jumps[-1] > gap):
            jumps.append(x)
    vals_st = values or st.integers(-3, 3).map(float)
    vals = draw(st.lists(vals_st, min_size=len(jumps) + 1, max_size=len(jumps) + 1))
    return StepFn1D((lo, hi), jumps, vals)


# one line per acceptance criterion, repeated at the end of the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
