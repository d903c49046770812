"""Exact time evolution under the modulated two-atom cavity Hamiltonian.

The lab-frame Hamiltonian is

    H(t) = omega_t*n + sum_j [ Omega_j/2 sz_j + g_j (a sp_j + adag sm_j) ]
           - i*chi_t*(a^2 - adag^2)

with omega_t = 1 + epsilon*sin(eta*t), eta = 2*(1+x), Omega_j = 1 - Delta_j
and chi_t = (4 omega_t)^{-1} d omega_t / dt (exactly) or its first-order
form 2 q cos(eta t) with q = epsilon*(1+x)/4.

``evolve`` integrates the Schrodinger equation i d|Psi>/dt = H(t)|Psi>
without approximations; internally the state is propagated in the exactly
equivalent interaction picture (see :mod:`dceqed._kernel`) and converted
back to the lab frame at the sample times.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

from . import _kernel
from .model import (
    BasisIndex,
    ModelParams,
    OperatorSet,
    StateVector,
    AmplitudeTable,
    SZ1_BLOCK,
    SZ2_BLOCK,
)
from .observables import (
    ObservableRecord,
    TAIL_FAIL,
    TAIL_WARN,
    record_from_state,
    state_parity,
)

MODULATION_MODES = ("exact", "first_order")
OMEGA_N_MODES = ("time_dependent", "static")
INTEGRATORS = ("rk4", "adaptive")

# dt * (fastest relevant rotating-frame frequency, ~2) must stay <= 0.1
MAX_DT = 0.05


class EvolverError(RuntimeError):
    """Numerical-health failure during time evolution."""


class NormDriftError(EvolverError):
    pass


class TruncationOverflowError(EvolverError):
    pass


@dataclass(frozen=True)
class EvolverOptions:
    """Integration controls.

    ``sample_eps_dt`` is the spacing of observable samples in dimensionless
    time epsilon*t (overridden by ``sample_stride`` in raw steps if given).
    ``norm_tol`` is the squared-norm budget: the run aborts if the norm error
    exceeds 10*norm_tol.  The truncation tail aborts the run above
    ``tail_fail`` unless ``tail_action`` says otherwise.
    """

    dt: float = 0.01
    sample_eps_dt: float = 0.01
    sample_stride: int | None = None
    modulation: str = "exact"
    omega_n: str = "time_dependent"
    integrator: str = "rk4"
    adaptive_tol: float = 1e-10
    norm_tol: float = 1e-8
    tail_warn: float = TAIL_WARN
    tail_fail: float = TAIL_FAIL
    tail_action: str = "raise"  # "raise" | "warn" | "ignore"
    store_states: bool = False
    backend: str = "auto"  # "auto" | "numba" | "numpy"

    def __post_init__(self):
        if not 0 < self.dt <= MAX_DT:
            raise ValueError(
                f"dt = {self.dt} outside (0, {MAX_DT}]: the sampling of the "
                "modulation at frequency ~2 requires dt*2 <= 0.1"
            )
        if self.modulation not in MODULATION_MODES:
            raise ValueError(f"modulation must be one of {MODULATION_MODES}")
        if self.omega_n not in OMEGA_N_MODES:
            raise ValueError(f"omega_n must be one of {OMEGA_N_MODES}")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if self.tail_action not in ("raise", "warn", "ignore"):
            raise ValueError("tail_action must be 'raise', 'warn' or 'ignore'")

    def replace(self, **kw) -> "EvolverOptions":
        return replace(self, **kw)


@dataclass
class Trajectory:
    """Sampled observables (and optionally states) of one evolution."""

    params: ModelParams
    options: EvolverOptions
    initial_parity: int
    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    records: list[ObservableRecord] = field(default_factory=list)
    states: list[StateVector] | None = None
    final_state: StateVector | None = None
    warnings: list[str] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    @property
    def eps_t(self) -> np.ndarray:
        return self.column("eps_t")


def modulation_chi(t, params: ModelParams, modulation: str = "exact"):
    """Squeezing-pump coefficient chi_t of the lab-frame Hamiltonian."""
    eta = params.eta
    if modulation == "exact":
        # (4 omega_t)^{-1} d omega_t/dt for omega_t = 1 + eps sin(eta t)
        return (
            params.epsilon * eta * np.cos(eta * t)
            / (4.0 * (1.0 + params.epsilon * np.sin(eta * t)))
        )
    return 2.0 * params.q * np.cos(eta * t)


def hamiltonian_at(
    t: float,
    params: ModelParams,
    ops: OperatorSet,
    options: EvolverOptions | None = None,
) -> sparse.csr_matrix:
    """Assemble the lab-frame H(t) as a sparse Hermitian matrix."""
    options = options or EvolverOptions()
    if options.omega_n == "time_dependent":
        w = 1.0 + params.epsilon * math.sin(params.eta * t)
    else:
        w = 1.0
    chi = modulation_chi(t, params, options.modulation)
    O1 = 1.0 - params.Delta1
    O2 = 1.0 - params.Delta2
    H = (
        w * ops.n
        + 0.5 * O1 * ops.sz1
        + 0.5 * O2 * ops.sz2
        + params.g1 * (ops.a @ ops.sp1 + ops.adag @ ops.sm1)
        + params.g2 * (ops.a @ ops.sp2 + ops.adag @ ops.sm2)
        - 1j * chi * (ops.a2 - ops.adag2)
    )
    return H.tocsr()


def rotating_generator_at(
    t: float,
    params: ModelParams,
    ops: OperatorSet,
    options: EvolverOptions | None = None,
) -> sparse.csr_matrix:
    """Generator actually integrated: e^{iKt} H(t) e^{-iKt} - K.

    K = (eta/2)*(n + sz1/2 + sz2/2).  Exposed for tests; ``evolve`` uses the
    equivalent banded kernel.
    """
    options = options or EvolverOptions()
    eta = params.eta
    if options.omega_n == "time_dependent":
        w = 1.0 + params.epsilon * math.sin(eta * t) - eta / 2.0
    else:
        w = 1.0 - eta / 2.0
    chi = modulation_chi(t, params, options.modulation)
    ph = np.exp(-1j * eta * t)
    H = (
        w * ops.n
        - 0.5 * (params.Delta1 + params.x) * ops.sz1
        - 0.5 * (params.Delta2 + params.x) * ops.sz2
        + params.g1 * (ops.a @ ops.sp1 + ops.adag @ ops.sm1)
        + params.g2 * (ops.a @ ops.sp2 + ops.adag @ ops.sm2)
        - 1j * chi * (ph * ops.a2 - np.conj(ph) * ops.adag2)
    )
    return H.tocsr()


def _frame_phase_exponent(basis: BasisIndex, params: ModelParams) -> np.ndarray:
    """Eigenvalues of K = (eta/2)(n + sz1/2 + sz2/2) on the flat basis."""
    M = basis.n_fock
    m = np.arange(M, dtype=np.float64)
    halfeta = params.eta / 2.0
    out = np.empty(4 * M)
    for k in range(4):
        out[k * M:(k + 1) * M] = halfeta * (m + 0.5 * SZ1_BLOCK[k] + 0.5 * SZ2_BLOCK[k])
    return out


def to_lab_frame(state: StateVector, t: float, params: ModelParams) -> StateVector:
    """Apply Psi = exp(-i K t) phi to an interaction-frame state."""
    if state.frame != "interaction":
        raise ValueError(f"expected interaction-frame state, got {state.frame!r}")
    K = _frame_phase_exponent(state.basis, params)
    return StateVector(np.exp(-1j * K * t) * state.data, state.basis, "lab")


def to_interaction_frame(state: StateVector, t: float, params: ModelParams) -> StateVector:
    """Apply phi = exp(+i K t) Psi to a lab-frame state."""
    if state.frame != "lab":
        raise ValueError(f"expected lab-frame state, got {state.frame!r}")
    K = _frame_phase_exponent(state.basis, params)
    return StateVector(np.exp(1j * K * t) * state.data, state.basis, "interaction")


def to_interaction_amplitudes(
    state: StateVector, t: float, params: ModelParams
) -> AmplitudeTable:
    """Slowly-varying amplitudes a_m, b_m, c_m, d_m of a lab-frame state.

    Beyond the frame rotation at eta/2 this strips the explicit phases
    e^{i x m t} and the block phases e^{-i(2x+Delta1+Delta2)t/2} (gg),
    e^{-+i(Delta1-Delta2)t/2} (ge/eg), e^{+i(2x+Delta1+Delta2)t/2} (ee), so
    the result is directly comparable to the closed-form regime solutions.
    All factors are pure phases: the total probability is preserved exactly.
    """
    if state.frame != "lab":
        raise ValueError(
            f"to_interaction_amplitudes expects a lab-frame state, got {state.frame!r}"
        )
    phi = to_interaction_frame(state, t, params)
    M = state.basis.n_fock
    m = np.arange(M)
    xm = np.exp(-1j * params.x * m * t)
    sum_phase = 0.5 * (2.0 * params.x + params.Delta1 + params.Delta2) * t
    diff_phase = 0.5 * (params.Delta1 - params.Delta2) * t
    B = phi.blocks()
    return AmplitudeTable(
        a=B[0] * xm * np.exp(1j * sum_phase),
        b=B[1] * xm * np.exp(1j * diff_phase),
        c=B[2] * xm * np.exp(-1j * diff_phase),
        d=B[3] * xm * np.exp(-1j * sum_phase),
    )


def _sample_stride(options: EvolverOptions, params: ModelParams, total_steps: int) -> int:
    if options.sample_stride is not None:
        return max(1, int(options.sample_stride))
    if params.epsilon != 0.0:
        stride = int(round(options.sample_eps_dt / (abs(params.epsilon) * options.dt)))
    else:
        stride = int(round(0.5 / options.dt))
    return max(1, min(stride, max(total_steps, 1)))


def evolve(
    state0: StateVector,
    params: ModelParams,
    t_final: float,
    options: EvolverOptions | None = None,
    t0: float = 0.0,
) -> Trajectory:
    """Integrate i d|Psi>/dt = H(t)|Psi> from ``t0`` to ``t_final``.

    ``state0`` must be a normalized lab-frame state at time ``t0``.  Sampled
    states are stored in the lab frame; the quadrature entries of the records
    refer to the interaction picture (stationary squeezing axes).  The run
    aborts with :class:`NormDriftError` or :class:`TruncationOverflowError`
    when the health monitors exceed their budgets.
    """
    options = options or EvolverOptions()
    if state0.frame != "lab":
        raise ValueError("evolve expects a lab-frame initial state")
    if abs(state0.norm2() - 1.0) > 1e-9:
        raise ValueError("initial state is not normalized")
    if t_final == t0:
        raise ValueError("t_final must differ from t0")

    basis = state0.basis
    direction = 1.0 if t_final > t0 else -1.0
    span = abs(t_final - t0)
    nsteps_total = max(1, int(round(span / options.dt)))
    dt = direction * span / nsteps_total
    stride = _sample_stride(options, params, nsteps_total)

    s1, s2, m0 = basis.labels(int(np.argmax(np.abs(state0.data))))
    parity0 = state_parity(s1, s2, m0)

    traj = Trajectory(params=params, options=options, initial_parity=parity0)
    if options.store_states:
        traj.states = []

    coefs = _kernel.pack_coefs(params, options.modulation, options.omega_n)
    phi = to_interaction_frame(state0, t0, params).data.copy()

    times = [t0]
    rec0 = record_from_state(
        StateVector(phi, basis, "interaction"), t0, params.epsilon, parity0
    )
    traj.records.append(rec0)
    if options.store_states is True:
        traj.states.append(state0.copy())

    if options.integrator == "adaptive":
        _run_adaptive(traj, phi, t0, t_final, basis, coefs, options, params, times)
    else:
        _run_fixed(traj, phi, t0, dt, nsteps_total, stride, basis, coefs, options, params, times)

    traj.times = np.array(times)
    final_phi = StateVector(phi, basis, "interaction")
    traj.final_state = to_lab_frame(final_phi, times[-1], params)
    return traj


def _health_gate(traj, rec, options, t):
    if rec.norm_error > 10.0 * options.norm_tol:
        raise NormDriftError(
            f"norm error {rec.norm_error:.3e} exceeds budget "
            f"{10.0 * options.norm_tol:.1e} at t = {t:.6g}; reduce dt or "
            "adaptive tolerance"
        )
    if rec.truncation_tail > options.tail_fail:
        msg = (
            f"truncation tail {rec.truncation_tail:.3e} exceeds "
            f"{options.tail_fail:.1e} at t = {t:.6g}: increase n_max"
        )
        if options.tail_action == "raise":
            raise TruncationOverflowError(msg)
        if options.tail_action == "warn" and not traj.warnings:
            traj.warnings.append(msg)
    elif rec.truncation_tail > options.tail_warn and not traj.warnings:
        traj.warnings.append(
            f"truncation tail {rec.truncation_tail:.3e} above warn level "
            f"{options.tail_warn:.1e} at t = {t:.6g}"
        )


def _record_sample(traj, phi, basis, params, t, options, times):
    rec = record_from_state(
        StateVector(phi, basis, "interaction"), t, params.epsilon, traj.initial_parity
    )
    traj.records.append(rec)
    times.append(t)
    if traj.states is not None:
        lab = to_lab_frame(StateVector(phi.copy(), basis, "interaction"), t, params)
        traj.states.append(lab)
    _health_gate(traj, rec, options, t)


def _run_fixed(traj, phi, t0, dt, nsteps_total, stride, basis, coefs, options, params, times):
    stepper = _kernel.Stepper(basis.n_fock, coefs, backend=options.backend)
    done = 0
    while done < nsteps_total:
        n = min(stride, nsteps_total - done)
        # t recomputed from the step count so sampling does not accumulate error
        stepper.advance(phi, t0 + done * dt, n, dt)
        done += n
        _record_sample(traj, phi, basis, params, t0 + done * dt, options, times)


def _run_adaptive(traj, phi, t0, t_final, basis, coefs, options, params, times):
    from scipy.integrate import solve_ivp

    stepper = _kernel.Stepper(basis.n_fock, coefs, backend="numpy")
    span = t_final - t0
    n_samples = max(2, int(round(abs(params.epsilon * span) / options.sample_eps_dt)))
    t_eval = np.linspace(t0, t_final, n_samples + 1)
    sol = solve_ivp(
        stepper.rhs,
        (t0, t_final),
        phi,
        t_eval=t_eval,
        method="DOP853",
        rtol=options.adaptive_tol,
        atol=options.adaptive_tol,
    )
    if not sol.success:  # pragma: no cover - scipy failure path
        raise EvolverError(f"adaptive integrator failed: {sol.message}")
    for i in range(1, sol.t.size):
        phi_i = sol.y[:, i]
        if i == sol.t.size - 1:
            phi[:] = phi_i
        _record_sample(traj, phi_i.copy(), basis, params, float(sol.t[i]), options, times)
