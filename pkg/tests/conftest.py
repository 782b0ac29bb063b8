import numpy as np
import pytest

from hyperjump.config import scenario_paper_v
from hyperjump.kernel import solve_kernels
from hyperjump.model import Mode, Profile

REF_LAMBDA = np.array([0.0081, 0.0037, 0.0065])
REF_Q = np.array([-12.29, -3.0, 8.45])
REF_R = np.array([0.0011, -0.1601, 0.0034])


def constant_mode(sigma=(0.02, -0.01, 0.015), lam=(0.3, 0.5, 0.7), mu=0.6, q=(0, 0, 0), r=(0, 0, 0)):
    """Constant Sigma-+ only; with q = 0 the kernels have a closed form."""
    return Mode(np.array(lam), mu, sigma_mp=Profile.constant(np.array([sigma])),
                q_bound=np.array(q, float), r_bound=np.array(r, float))


@pytest.fixture(scope="session")
def ref():
    return scenario_paper_v()


@pytest.fixture(scope="session")
def ref_kernels(ref):
    cfg, _, nominal = ref
    return solve_kernels(nominal, cfg.grid.n_cells)
