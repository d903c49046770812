"""Measurable quantities and health diagnostics for states and tables.

The photon-number and atomic-population observables are invariant under the
diagonal frame phases, so they can be evaluated in either frame.  Quadrature
variances are not: the squeezing axes are stationary only in the interaction
picture rotating at eta/2, which is the frame the analytic variance formulas
refer to.
"""

from dataclasses import dataclass, fields

import numpy as np

from .model import AmplitudeTable, StateVector, EXCITATIONS_BLOCK

# Truncation-tail window: probability weight in the top tenth of Fock levels.
TAIL_FRACTION = 0.1
TAIL_WARN = 1e-6
TAIL_FAIL = 1e-3


@dataclass
class ObservableRecord:
    """All scalar observables and diagnostics at one sample time."""

    t: float
    eps_t: float
    mean_n: float
    P_e1: float
    P_e2: float
    P_e1e2: float
    P_g1e2: float
    P_g1: float
    var_Xplus: float
    var_Xminus: float
    norm_error: float
    parity_leakage: float
    truncation_tail: float

    def as_tuple(self):
        return tuple(getattr(self, f.name) for f in fields(self))


def _block_weights(state) -> np.ndarray:
    """|amplitude|^2 per (block, m); accepts StateVector or AmplitudeTable."""
    if isinstance(state, StateVector):
        return np.abs(state.blocks()) ** 2
    if isinstance(state, AmplitudeTable):
        return np.stack([np.abs(state.family(f)) ** 2 for f in "abcd"])
    raise TypeError(f"expected StateVector or AmplitudeTable, got {type(state)!r}")


def mean_photon(state) -> float:
    """Mean photon number sum_m m*(|a_m|^2 + |b_m|^2 + |c_m|^2 + |d_m|^2)."""
    w = _block_weights(state)
    return float(np.sum(np.arange(w.shape[1]) * w.sum(axis=0)))


def excitation_probabilities(state) -> dict[str, float]:
    """Marginal and joint atomic excitation probabilities."""
    p = _block_weights(state).sum(axis=1)  # gg, ge, eg, ee
    return {
        "P_e1": float(p[2] + p[3]),
        "P_e2": float(p[1] + p[3]),
        "P_e1e2": float(p[3]),
        "P_g1e2": float(p[1]),
        "P_g1": float(p[0] + p[1]),
    }


def quadrature_variances(state, ops=None) -> dict[str, float]:
    """Variances of X+ = (a + adag)/sqrt(2) and X- = (a - adag)/(sqrt(2) i).

    Evaluated through <a>, <a^2> and <n> matrix elements on the given state;
    for interaction-frame states these are the stationary squeezing axes.
    ``ops`` is accepted for convenience but not required.
    """
    if isinstance(state, AmplitudeTable):
        B = np.stack([state.family(f) for f in "abcd"])
    else:
        B = state.blocks()
    M = B.shape[1]
    m = np.arange(M)
    nbar = float(np.sum(m * np.abs(B) ** 2))
    sq1 = np.sqrt(m[1:])
    a_mean = complex(np.sum(B[:, :-1].conj() * sq1 * B[:, 1:]))
    c2 = np.sqrt((m[:-2] + 1.0) * (m[:-2] + 2.0))
    a2_mean = complex(np.sum(B[:, :-2].conj() * c2 * B[:, 2:]))
    xp_mean = np.sqrt(2.0) * a_mean.real
    xm_mean = np.sqrt(2.0) * a_mean.imag
    xp2 = 0.5 * (2.0 * a2_mean.real + 2.0 * nbar + 1.0)
    xm2 = 0.5 * (1.0 + 2.0 * nbar - 2.0 * a2_mean.real)
    return {
        "var_Xplus": float(xp2 - xp_mean**2),
        "var_Xminus": float(xm2 - xm_mean**2),
    }


def state_parity(s1: str, s2: str, m: int) -> int:
    """Total-excitation parity of a basis state: (m + #excited atoms) mod 2."""
    return (m + (s1 == "e") + (s2 == "e")) % 2


def health_diagnostics(state, reference_parity: int | None = None) -> dict[str, float]:
    """Norm error, parity leakage and truncation tail of a state.

    Photons are created in pairs and the exchange couplings conserve the
    total excitation number, so the parity of n + (excited atoms) is an exact
    constant of motion; any weight in the wrong sector measures integrator
    corruption.  ``reference_parity`` defaults to the even sector.
    """
    w = _block_weights(state)
    M = w.shape[1]
    norm_error = abs(float(w.sum()) - 1.0)
    if reference_parity is None:
        reference_parity = 0
    m_parity = np.arange(M) % 2
    leak = 0.0
    for k in range(4):
        sector = (m_parity + EXCITATIONS_BLOCK[k]) % 2
        leak += float(w[k][sector != reference_parity].sum())
    n_tail = max(1, int(np.ceil(TAIL_FRACTION * M)))
    tail = float(w[:, M - n_tail:].sum())
    return {
        "norm_error": norm_error,
        "parity_leakage": leak,
        "truncation_tail": tail,
    }


def record_from_state(
    state, t: float, epsilon: float, reference_parity: int | None = None
) -> ObservableRecord:
    """Bundle all observables of one state into an ObservableRecord."""
    health = health_diagnostics(state, reference_parity)
    probs = excitation_probabilities(state)
    quads = quadrature_variances(state)
    return ObservableRecord(
        t=t,
        eps_t=epsilon * t,
        mean_n=mean_photon(state),
        **probs,
        **quads,
        **health,
    )
