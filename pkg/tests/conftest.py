from __future__ import annotations

import numpy as np
import pytest

from resid_arb.synthetic import make_panel


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)


@pytest.fixture(scope="session")
def reversal_panel():
    """A panel with genuine short-term reversal for end-to-end runs."""
    return make_panel(n_dates=220, n_assets=24, rho=-0.15, staggered=True, seed=11)
