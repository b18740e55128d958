import numpy as np
import pytest

from chns.mesh import build_uniform_mesh
from chns.fem import build_space
from chns.scheme import Params, build_operators


@pytest.fixture(scope="session")
def mesh4():
    return build_uniform_mesh(4, 4)


@pytest.fixture(scope="session")
def spaces4(mesh4):
    return build_space(mesh4, "p1"), build_space(mesh4, "p2"), build_space(mesh4, "p2vec")


@pytest.fixture(scope="session")
def coarsen_params():
    return Params(mobility=0.0001, lam=0.02, nu=1.0, eps=0.01, gamma=1.0,
                  c1=1.0, c2=0.1, tau=1e-3, t_end=1.0)


@pytest.fixture(scope="session")
def small_ops(spaces4, coarsen_params):
    p1, _, p2v = spaces4
    return build_operators(p1, p2v, coarsen_params)


# -- shared expensive runs for the acceptance suite ------------------------

@pytest.fixture(scope="session")
def convergence_results():
    """Levels 4/8/16 of the manufactured study plus per-step diagnostics."""
    from chns.experiments import run_convergence

    diag = {"min_disc_scaled": np.inf}

    def on_step(state, report):
        scale = max(report.a1 ** 2, abs(4.0 * report.a2 * report.a0), 1e-300)
        diag["min_disc_scaled"] = min(diag["min_disc_scaled"],
                                      report.discriminant / scale)

    records = run_convergence([4, 8, 16], Params(), on_step=on_step)
    return records, diag


@pytest.fixture(scope="session")
def stability_runs():
    """Coarsening setup at nx=32 for tau in {1e-3, 1e-2, 1e-1}, run to T=1."""
    from chns.experiments import run_stability_sweep

    return run_stability_sweep([1e-3, 1e-2, 1e-1], seed=2024, nx=32, t_end=1.0)
