"""Shared fixtures: the toy oracle configuration and its (expensive) results."""

import numpy as np
import pytest

from dispatch_mcd import checks
from dispatch_mcd.horizon import McdGrid, brute_force_long_term, optimize_mcd


@pytest.fixture(scope="session")
def toy_plan():
    return checks.toy_plan()


@pytest.fixture(scope="session")
def toy_optimized(toy_plan):
    """Optimal MCD schedule on the 3-period oracle config (shared: ~30 s)."""
    return optimize_mcd(toy_plan, McdGrid(dc_usd_per_mwh=0.05, cmax_usd_per_mwh=25.0))


@pytest.fixture(scope="session")
def toy_brute_force(toy_plan):
    """Exhaustive allocation search on the oracle config (shared: ~25 s)."""
    return brute_force_long_term(toy_plan, grid_points=26)
