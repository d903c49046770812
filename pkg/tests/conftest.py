import numpy as np
import pytest

import dceqed as dq

FIG1A = dict(epsilon=2e-3, x=0.0, g1=4e-2, g2=4e-2, Delta1=0.0, Delta2=0.0)
FIG2A = dict(epsilon=2e-3, g1=4e-2, g2=3e-2, Delta1=0.4, Delta2=0.45)
FIG2B = dict(epsilon=2e-3, g1=4e-2, g2=3e-2, Delta1=0.22, Delta2=-0.2)


def fig2a_params() -> dq.ModelParams:
    p = dq.ModelParams(x=0.0, **FIG2A)
    return p.replace(x=p.delta(1) + p.delta(2))


def fig2b_params() -> dq.ModelParams:
    p = dq.ModelParams(x=0.0, **FIG2B)
    return p.replace(x=-0.5 * (p.Delta1 + p.delta(1) + p.Delta2 + p.delta(2)))


def random_state(basis: dq.BasisIndex, seed: int = 0) -> dq.StateVector:
    rng = np.random.default_rng(seed)
    data = rng.normal(size=basis.dimension) + 1j * rng.normal(size=basis.dimension)
    data /= np.linalg.norm(data)
    return dq.StateVector(data, basis, frame="lab")


@pytest.fixture(scope="session")
def fig1a_run():
    """Full numeric run of the balanced x = 0 resonance to eps_t = 5.

    Shared by the flow-comparison, amplitude-ratio, suppression-baseline and
    modulation-mode tests; states are kept for amplitude extraction.
    """
    params = dq.ModelParams(**FIG1A)
    basis = dq.build_basis(256)
    state0 = dq.init_state("g", "g", 0, basis)
    options = dq.EvolverOptions(store_states=True)
    return dq.evolve(state0, params, 5.0 / params.epsilon, options)


@pytest.fixture(scope="session")
def fig1a_flow():
    params = dq.ModelParams(**FIG1A)
    return dq.equal_coupling_flow(5.0 / params.epsilon, params.q, 500, n_samples=500)
