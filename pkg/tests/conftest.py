import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from stationary_light.model import Grid, PhysicalParams, gaussian_spin, retrieve_initial_fields


def gaussian_case(L0=2.0, a=2.0, n_xi=241, tau_max=4.0, extent=12.0, d_tau=None):
    grid = Grid.centered(extent * L0, n_xi, tau_max, d_tau=d_tau)
    init = retrieve_initial_fields(gaussian_spin(L0, 0.0, grid))
    return PhysicalParams(a), grid, init


@pytest.fixture
def small_case():
    return gaussian_case()
