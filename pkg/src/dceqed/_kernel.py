"""Fixed-step RK4 kernel for the modulated two-atom cavity problem.

The integration variable is the interaction-picture state phi(t) related to
the lab-frame state by Psi(t) = exp(-i*t*K)*phi(t) with
K = (eta/2)*(n + sz1/2 + sz2/2).  The transformation is exact (a diagonal
phase), but it removes the large omega*n rotation from the generator, which
would otherwise force prohibitively small steps: what remains has spectral
radius of order max(|Delta_j|, |x|*n_max, epsilon*n_max, g*sqrt(n_max))
instead of n_max.

In this frame the generator is

    H_K(t) = sum_j [ g_j (a sp_j + adag sm_j) - (Delta_j + x)/2 * sz_j ]
             + w(t)*n - i*chi(t)*(e^{-i eta t} a^2 - e^{+i eta t} adag^2)

with w(t) = omega_t - eta/2 (or 1 - eta/2 = -x when the omega_t*n term is
frozen to n) and chi(t) either the exact (4 omega_t)^{-1} d omega_t/dt or its
first-order form 2 q cos(eta t).

The hot loop is compiled with numba when available; a vectorized numpy
fallback implements identical arithmetic.  Both are deterministic for a
fixed backend.  Coefficients are passed as a flat float64 array so the
compiled signature stays stable:

    coefs = [g1, g2, Delta1, Delta2, x, epsilon, eta, exact_chi, omega_td]
"""

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dep, but keep a fallback
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap

C_G1, C_G2, C_D1, C_D2, C_X, C_EPS, C_ETA, C_EXACT_CHI, C_OMEGA_TD = range(9)


def pack_coefs(params, modulation: str, omega_n: str) -> np.ndarray:
    """Flatten model parameters and evolver mode switches for the kernel."""
    return np.array(
        [
            params.g1, params.g2, params.Delta1, params.Delta2,
            params.x, params.epsilon, params.eta,
            1.0 if modulation == "exact" else 0.0,
            1.0 if omega_n == "time_dependent" else 0.0,
        ],
        dtype=np.float64,
    )


@njit(cache=True)
def _rhs_jit(t, psi, out, M, coefs, sq1):
    g1 = coefs[C_G1]
    g2 = coefs[C_G2]
    x = coefs[C_X]
    eps = coefs[C_EPS]
    eta = coefs[C_ETA]
    st = math.sin(eta * t)
    ct = math.cos(eta * t)
    w = eps * st - x if coefs[C_OMEGA_TD] != 0.0 else -x
    if coefs[C_EXACT_CHI] != 0.0:
        chi = eps * eta * ct / (4.0 * (1.0 + eps * st))
    else:
        chi = 2.0 * (eps * (1.0 + x) / 4.0) * ct
    # squeeze-term phases: -i*chi*(e^{-i eta t} a^2 - e^{+i eta t} adag^2)
    fa2 = -1j * chi * complex(ct, -st)
    fad2 = 1j * chi * complex(ct, st)
    h1 = -(coefs[C_D1] + x) / 2.0
    h2 = -(coefs[C_D2] + x) / 2.0
    for k in range(4):
        z1 = 1.0 if k >= 2 else -1.0
        z2 = 1.0 if (k & 1) == 1 else -1.0
        base = k * M
        hz = h1 * z1 + h2 * z2
        for m in range(M):
            acc = (w * m + hz) * psi[base + m]
            if m + 2 < M:
                acc = acc + fa2 * sq1[m + 1] * sq1[m + 2] * psi[base + m + 2]
            if m >= 2:
                acc = acc + fad2 * sq1[m] * sq1[m - 1] * psi[base + m - 2]
            out[base + m] = acc
    for pair in range(2):
        # atom 1 couples blocks gg<->eg and ge<->ee
        gb = pair * M
        eb = (pair + 2) * M
        for m in range(M - 1):
            out[eb + m] += g1 * sq1[m + 1] * psi[gb + m + 1]
            out[gb + m + 1] += g1 * sq1[m + 1] * psi[eb + m]
        # atom 2 couples blocks gg<->ge and eg<->ee
        gb = (2 * pair) * M
        eb = (2 * pair + 1) * M
        for m in range(M - 1):
            out[eb + m] += g2 * sq1[m + 1] * psi[gb + m + 1]
            out[gb + m + 1] += g2 * sq1[m + 1] * psi[eb + m]
    for i in range(4 * M):
        out[i] = -1j * out[i]


@njit(cache=True)
def _advance_jit(psi, t0, nsteps, dt, M, coefs, sq1, k1, k2, k3, k4, tmp):
    n = 4 * M
    for s in range(nsteps):
        t = t0 + s * dt
        _rhs_jit(t, psi, k1, M, coefs, sq1)
        for i in range(n):
            tmp[i] = psi[i] + 0.5 * dt * k1[i]
        _rhs_jit(t + 0.5 * dt, tmp, k2, M, coefs, sq1)
        for i in range(n):
            tmp[i] = psi[i] + 0.5 * dt * k2[i]
        _rhs_jit(t + 0.5 * dt, tmp, k3, M, coefs, sq1)
        for i in range(n):
            tmp[i] = psi[i] + dt * k3[i]
        _rhs_jit(t + dt, tmp, k4, M, coefs, sq1)
        for i in range(n):
            psi[i] += (dt / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


def rhs_numpy(t, psi, coefs, sq1, out=None):
    """Vectorized rotating-frame RHS; same arithmetic as the jit kernel.

    Also serves as the callable for the adaptive scipy integrator.
    """
    M = (len(psi)) // 4
    if out is None:
        out = np.empty_like(psi)
    g1, g2 = coefs[C_G1], coefs[C_G2]
    x, eps, eta = coefs[C_X], coefs[C_EPS], coefs[C_ETA]
    st, ct = math.sin(eta * t), math.cos(eta * t)
    w = eps * st - x if coefs[C_OMEGA_TD] != 0.0 else -x
    if coefs[C_EXACT_CHI] != 0.0:
        chi = eps * eta * ct / (4.0 * (1.0 + eps * st))
    else:
        chi = 2.0 * (eps * (1.0 + x) / 4.0) * ct
    fa2 = -1j * chi * complex(ct, -st)
    fad2 = 1j * chi * complex(ct, st)
    h1 = -(coefs[C_D1] + x) / 2.0
    h2 = -(coefs[C_D2] + x) / 2.0

    P = psi.reshape(4, M)
    O = out.reshape(4, M)
    m = np.arange(M)
    z1 = np.array([-1.0, -1.0, 1.0, 1.0])
    z2 = np.array([-1.0, 1.0, -1.0, 1.0])
    O[:] = (w * m)[None, :] * P + (h1 * z1 + h2 * z2)[:, None] * P
    c2 = sq1[1:M - 1] * sq1[2:M]
    O[:, :M - 2] += fa2 * c2[None, :] * P[:, 2:]
    O[:, 2:] += fad2 * c2[None, :] * P[:, :M - 2]
    s1 = sq1[1:M]
    for pair in range(2):
        gb, eb = pair, pair + 2
        O[eb, :M - 1] += g1 * s1 * P[gb, 1:]
        O[gb, 1:] += g1 * s1 * P[eb, :M - 1]
        gb, eb = 2 * pair, 2 * pair + 1
        O[eb, :M - 1] += g2 * s1 * P[gb, 1:]
        O[gb, 1:] += g2 * s1 * P[eb, :M - 1]
    out *= -1j
    return out


def advance_numpy(psi, t0, nsteps, dt, coefs, sq1, work):
    k1, k2, k3, k4, tmp = work
    for s in range(nsteps):
        t = t0 + s * dt
        rhs_numpy(t, psi, coefs, sq1, out=k1)
        np.multiply(k1, 0.5 * dt, out=tmp)
        tmp += psi
        rhs_numpy(t + 0.5 * dt, tmp, coefs, sq1, out=k2)
        np.multiply(k2, 0.5 * dt, out=tmp)
        tmp += psi
        rhs_numpy(t + 0.5 * dt, tmp, coefs, sq1, out=k3)
        np.multiply(k3, dt, out=tmp)
        tmp += psi
        rhs_numpy(t + dt, tmp, coefs, sq1, out=k4)
        k2 *= 2.0
        k3 *= 2.0
        k1 += k2
        k1 += k3
        k1 += k4
        k1 *= dt / 6.0
        psi += k1
    return psi


class Stepper:
    """Reusable RK4 stepper over a fixed basis size and parameter set."""

    def __init__(self, n_fock: int, coefs: np.ndarray, backend: str = "auto"):
        if backend == "auto":
            backend = "numba" if HAVE_NUMBA else "numpy"
        if backend == "numba" and not HAVE_NUMBA:
            raise RuntimeError("numba backend requested but numba is unavailable")
        self.backend = backend
        self.M = n_fock
        self.coefs = np.asarray(coefs, dtype=np.float64)
        # sqrt table long enough for the a^2 band at the top level
        self.sq1 = np.sqrt(np.arange(n_fock + 2, dtype=np.float64))
        dim = 4 * n_fock
        self.work = tuple(np.empty(dim, dtype=np.complex128) for _ in range(5))

    def advance(self, psi: np.ndarray, t0: float, nsteps: int, dt: float) -> None:
        """Advance ``psi`` in place by ``nsteps`` RK4 steps of size ``dt``."""
        if self.backend == "numba":
            _advance_jit(psi, t0, nsteps, dt, self.M, self.coefs, self.sq1, *self.work)
        else:
            advance_numpy(psi, t0, nsteps, dt, self.coefs, self.sq1, self.work)

    def rhs(self, t: float, psi: np.ndarray) -> np.ndarray:
        return rhs_numpy(t, psi, self.coefs, self.sq1)
