import numpy as np
import pytest

from trajkit.models import TavisCummingsParams, build_tavis_cummings, tc_initial_state


@pytest.fixture(scope="session")
def tc_small():
    """Shared small Tavis-Cummings model (N=3, Mmax=6) in the time-crystal phase."""
    params = TavisCummingsParams(n_spins=3, omega=0.06, coupling=0.2, mmax=6)
    model = build_tavis_cummings(params)
    init = tc_initial_state(params, "psi0")
    return params, model, init


def random_state(dim, rng):
    psi = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return psi / np.linalg.norm(psi)
