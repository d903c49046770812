"""Model parameters, truncated tensor-product basis, states and operators.

The system is one cavity mode with a harmonically modulated eigenfrequency
coupled to two stationary two-level atoms.  Everything is expressed in units
of the unperturbed cavity frequency (omega0 = 1).  The instantaneous cavity
frequency is omega_t = 1 + epsilon*sin(eta*t) with modulation frequency
eta = 2*(1 + x), where x is a small resonance shift.

The Hilbert space is spanned by |s1> (x) |s2> (x) |m> with s_j in {g, e} and
Fock level m = 0..n_max (hard truncation).  Flat ordering is (s1, s2, m) with
m fastest-varying, blocks in the order gg, ge, eg, ee; the four blocks carry
the amplitude families a_m (gg), b_m (ge), c_m (eg), d_m (ee).
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

ATOM_LABELS = ("g", "e")
BLOCK_NAMES = ("a", "b", "c", "d")  # gg, ge, eg, ee

# sigma_j^z eigenvalues per block (gg, ge, eg, ee)
SZ1_BLOCK = np.array([-1.0, -1.0, 1.0, 1.0])
SZ2_BLOCK = np.array([-1.0, 1.0, -1.0, 1.0])
# number of excited atoms per block, used for total-excitation parity
EXCITATIONS_BLOCK = np.array([0, 1, 1, 2])


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters in units of the unperturbed cavity frequency.

    Parameters
    ----------
    epsilon : float
        Dimensionless modulation amplitude of the cavity frequency.
    x : float
        Resonance shift; the modulation frequency is eta = 2*(1 + x).
    g1, g2 : float
        Atom-field coupling constants (real).
    Delta1, Delta2 : float
        Atomic detunings Delta_j = 1 - Omega_j, with Omega_j the atomic
        transition frequency.
    """

    epsilon: float
    x: float = 0.0
    g1: float = 0.0
    g2: float = 0.0
    Delta1: float = 0.0
    Delta2: float = 0.0

    omega0: float = field(default=1.0, init=False, repr=False)

    def __post_init__(self):
        for name in ("epsilon", "x", "g1", "g2", "Delta1", "Delta2"):
            v = getattr(self, name)
            if not np.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
        if abs(self.epsilon) >= 1.0:
            raise ValueError(f"|epsilon| must be < 1, got {self.epsilon}")
        if abs(self.epsilon) > 0.1:
            warnings.warn(
                f"epsilon = {self.epsilon}: the weak-modulation treatment "
                "assumes |epsilon| << 1 (|epsilon| <= 0.1 recommended)",
                stacklevel=2,
            )

    @property
    def eta(self) -> float:
        """Modulation frequency eta = 2*(1 + x)."""
        return 2.0 * (1.0 + self.x)

    @property
    def q(self) -> float:
        """Effective squeezing drive amplitude q = epsilon*(1 + x)/4."""
        return self.epsilon * (1.0 + self.x) / 4.0

    @property
    def G(self) -> float:
        """Combined coupling G = sqrt(g1^2 + g2^2)."""
        return float(np.hypot(self.g1, self.g2))

    def Delta(self, j: int) -> float:
        if j not in (1, 2):
            raise ValueError(f"atom index must be 1 or 2, got {j}")
        return self.Delta1 if j == 1 else self.Delta2

    def g(self, j: int) -> float:
        if j not in (1, 2):
            raise ValueError(f"atom index must be 1 or 2, got {j}")
        return self.g1 if j == 1 else self.g2

    def delta(self, j: int) -> float:
        """Dispersive shift delta_j = g_j^2 / Delta_j (requires Delta_j != 0)."""
        D = self.Delta(j)
        if D == 0.0:
            raise ValueError(f"delta_{j} undefined: Delta_{j} = 0")
        return self.g(j) ** 2 / D

    def zeta(self, j: int) -> float:
        """Dispersive amplitude ratio zeta_j = g_j / Delta_j (requires Delta_j != 0)."""
        D = self.Delta(j)
        if D == 0.0:
            raise ValueError(f"zeta_{j} undefined: Delta_{j} = 0")
        return self.g(j) / D

    def xi(self, j: int) -> float:
        """Weak-coupling ratio xi_j = g_j / (2 q) (requires q != 0)."""
        if self.q == 0.0:
            raise ValueError(f"xi_{j} undefined: q = 0 (no modulation)")
        return self.g(j) / (2.0 * self.q)

    def replace(self, **kw) -> "ModelParams":
        vals = {
            "epsilon": self.epsilon, "x": self.x, "g1": self.g1,
            "g2": self.g2, "Delta1": self.Delta1, "Delta2": self.Delta2,
        }
        vals.update(kw)
        return ModelParams(**vals)


@dataclass(frozen=True)
class BasisIndex:
    """Bijection between (s1, s2, m) labels and flat indices.

    Flat index = (2*i1 + i2)*(n_max + 1) + m with i_j = 0 for g, 1 for e.
    Atom states are outermost, the Fock index m is fastest-varying, so each
    of the four atomic blocks holds a contiguous Fock ladder.
    """

    n_max: int

    def __post_init__(self):
        if not isinstance(self.n_max, (int, np.integer)) or self.n_max < 2:
            raise ValueError(
                f"n_max must be an integer >= 2 (two-photon processes need "
                f"m = 2), got {self.n_max!r}"
            )

    @property
    def n_fock(self) -> int:
        return self.n_max + 1

    @property
    def dimension(self) -> int:
        return 4 * (self.n_max + 1)

    def index(self, s1: str, s2: str, m: int) -> int:
        if s1 not in ATOM_LABELS or s2 not in ATOM_LABELS:
            raise ValueError(f"atom labels must be 'g' or 'e', got {s1!r}, {s2!r}")
        if not 0 <= m <= self.n_max:
            raise ValueError(f"Fock index m = {m} outside 0..{self.n_max}")
        block = 2 * ATOM_LABELS.index(s1) + ATOM_LABELS.index(s2)
        return block * self.n_fock + m

    def labels(self, i: int) -> tuple[str, str, int]:
        if not 0 <= i < self.dimension:
            raise ValueError(f"flat index {i} outside 0..{self.dimension - 1}")
        block, m = divmod(i, self.n_fock)
        return ATOM_LABELS[block // 2], ATOM_LABELS[block % 2], m


class StateVector:
    """Complex amplitudes on a :class:`BasisIndex`, tagged with a frame.

    ``frame`` is ``"lab"`` for the physical wavefunction or ``"interaction"``
    for the picture rotating at eta/2, in which the analytic solutions are
    written.  The four atomic blocks are exposed as views ``a``, ``b``, ``c``,
    ``d`` for gg, ge, eg, ee.
    """

    __slots__ = ("data", "basis", "frame")

    def __init__(self, data: np.ndarray, basis: BasisIndex, frame: str = "lab"):
        data = np.asarray(data, dtype=np.complex128)
        if data.shape != (basis.dimension,):
            raise ValueError(
                f"amplitude array has shape {data.shape}, expected "
                f"({basis.dimension},)"
            )
        if frame not in ("lab", "interaction"):
            raise ValueError(f"frame must be 'lab' or 'interaction', got {frame!r}")
        self.data = data
        self.basis = basis
        self.frame = frame

    def block(self, name: str) -> np.ndarray:
        """View of one atomic block ('a' = gg, 'b' = ge, 'c' = eg, 'd' = ee)."""
        k = BLOCK_NAMES.index(name)
        M = self.basis.n_fock
        return self.data[k * M:(k + 1) * M]

    @property
    def a(self) -> np.ndarray:
        return self.block("a")

    @property
    def b(self) -> np.ndarray:
        return self.block("b")

    @property
    def c(self) -> np.ndarray:
        return self.block("c")

    @property
    def d(self) -> np.ndarray:
        return self.block("d")

    def amplitude(self, s1: str, s2: str, m: int) -> complex:
        return complex(self.data[self.basis.index(s1, s2, m)])

    def norm2(self) -> float:
        """Squared norm <psi|psi>."""
        return float(np.vdot(self.data, self.data).real)

    def copy(self) -> "StateVector":
        return StateVector(self.data.copy(), self.basis, self.frame)

    def blocks(self) -> np.ndarray:
        """Amplitudes reshaped to (4, n_max + 1), blocks gg, ge, eg, ee."""
        return self.data.reshape(4, self.basis.n_fock)


@dataclass(frozen=True)
class AmplitudeTable:
    """Slowly-varying amplitude families a_m, b_m, c_m, d_m.

    These are the amplitudes of the interaction-picture wavefunction with the
    explicit resonance phases stripped off, directly comparable to the
    closed-form solutions of the resonance regimes.  All four arrays share
    one Fock range m = 0..len-1.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        n = len(self.a)
        if not (len(self.b) == len(self.c) == len(self.d) == n):
            raise ValueError("amplitude families must have equal length")

    @property
    def n_fock(self) -> int:
        return len(self.a)

    def family(self, name: str) -> np.ndarray:
        return getattr(self, name)

    def norm2(self) -> float:
        return float(sum(np.sum(np.abs(f) ** 2) for f in (self.a, self.b, self.c, self.d)))

    def mean_n(self) -> float:
        m = np.arange(self.n_fock)
        w = sum(np.abs(f) ** 2 for f in (self.a, self.b, self.c, self.d))
        return float(np.sum(m * w))

    def to_state(self, basis: BasisIndex, frame: str = "interaction") -> StateVector:
        """Embed the table into a state on ``basis`` (zero-padded/truncated)."""
        M = basis.n_fock
        data = np.zeros(4 * M, dtype=np.complex128)
        n = min(M, self.n_fock)
        for k, f in enumerate((self.a, self.b, self.c, self.d)):
            data[k * M:k * M + n] = f[:n]
        return StateVector(data, basis, frame)


def build_basis(n_max: int) -> BasisIndex:
    """Construct the flat basis for Fock truncation ``n_max`` (>= 2)."""
    return BasisIndex(int(n_max))


@dataclass(frozen=True)
class OperatorSet:
    """Sparse matrices for the elementary operators on the flat basis.

    The annihilation operator is hard-truncated: adag|n_max> = 0, hence
    [a, adag] = 1 on every Fock level except the top one, where it equals
    -n_max (truncation artifact; the tail monitor guards against it).
    """

    basis: BasisIndex
    a: sparse.csr_matrix
    adag: sparse.csr_matrix
    n: sparse.csr_matrix
    a2: sparse.csr_matrix
    adag2: sparse.csr_matrix
    sz1: sparse.csr_matrix
    sz2: sparse.csr_matrix
    sp1: sparse.csr_matrix
    sm1: sparse.csr_matrix
    sp2: sparse.csr_matrix
    sm2: sparse.csr_matrix
    identity: sparse.csr_matrix


def _kron3(A, B, C):
    return sparse.kron(sparse.kron(A, B, format="csr"), C, format="csr")


def build_operators(basis: BasisIndex) -> OperatorSet:
    """Build all elementary operators on the truncated flat basis."""
    M = basis.n_fock
    a_f = sparse.diags(np.sqrt(np.arange(1, M)), offsets=1, format="csr")
    ad_f = a_f.conj().T.tocsr()
    I2 = sparse.identity(2, format="csr")
    IM = sparse.identity(M, format="csr")
    # atomic order (g, e): sigma^z = |e><e| - |g><g|
    sz = sparse.diags([-1.0, 1.0], format="csr")
    sp = sparse.csr_matrix(np.array([[0.0, 0.0], [1.0, 0.0]]))  # |e><g|
    sm = sp.conj().T.tocsr()

    a = _kron3(I2, I2, a_f)
    adag = _kron3(I2, I2, ad_f)
    return OperatorSet(
        basis=basis,
        a=a,
        adag=adag,
        n=(adag @ a).tocsr(),
        a2=(a @ a).tocsr(),
        adag2=(adag @ adag).tocsr(),
        sz1=_kron3(sz, I2, IM),
        sz2=_kron3(I2, sz, IM),
        sp1=_kron3(sp, I2, IM),
        sm1=_kron3(sm, I2, IM),
        sp2=_kron3(I2, sp, IM),
        sm2=_kron3(I2, sm, IM),
        identity=sparse.identity(basis.dimension, format="csr"),
    )


def init_state(s1: str, s2: str, m: int, basis: BasisIndex) -> StateVector:
    """Unit-norm basis state |s1>|s2>|m> in the lab frame."""
    data = np.zeros(basis.dimension, dtype=np.complex128)
    data[basis.index(s1, s2, m)] = 1.0
    return StateVector(data, basis, frame="lab")
