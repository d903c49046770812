"""Resonance-regime catalog and closed-form solutions.

Weak harmonic modulation of the cavity frequency pumps photon pairs only
near specific modulation frequencies eta = 2*(1 + x).  Which x values are
resonant, and what dynamics follows, depends on how the two atoms relate to
the field:

* both atoms resonant (Delta_j = 0): two-photon resonances at
  2x = -alpha*G*L2(beta) built on the dressed m = 2 multiplet, plus (for
  equal couplings) a multiphoton resonance at x = 0 governed by a slow flow
  of even-Fock amplitudes;
* second atom far detuned: two-photon resonances shifted by the dispersive
  pull of atom 2, 2x = (3/2)*delta2 +- G2;
* both atoms far detuned: multiphoton squeezing at x = delta1 + delta2,
  or pure pair excitation of the atoms at 2x = -sum(Delta_j + delta_j);
* atoms weakly coupled on the scale of the modulation: parametric
  amplification with the atoms as passive monitors.

Spectral quantities: rho = 2 g1 g2 / G^2,
R_m = sqrt(1 + 4 rho^2 m(m-1))/2, L_m(+-) = sqrt(m - 1/2 +- R_m),
V_m(+-) = (1 -+ 2 R_m) / (2 rho sqrt(m(m-1))), R(+-) = sqrt(2 +- 1/R_2)/2.

Validity margins follow one convention: a requirement "u much smaller than
v" passes when v/u >= 10 and warns when v/u >= 5; below that it fails.
"""

import cmath
import math
import warnings as _warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.linalg import expm

from .model import AmplitudeTable, BasisIndex, ModelParams, OperatorSet, StateVector

PASS_RATIO = 10.0
WARN_RATIO = 5.0
PAIR_MARGIN_PASS = 50.0   # |sum(Delta_j + 3 delta_j)| / q for pair excitation
PAIR_MARGIN_WARN = 25.0
RATE_MIN = 0.05           # two-photon branches slower than this are not useful
HORIZON_WARN = 0.5        # |delta1|*t beyond which dispersive forms degrade
HORIZON_FAIL = 1.0
EQ_TOL = 1e-9             # tolerance for structural float equalities
ZETA_MAX = 0.2            # second-order dispersive expansion validity

BEHAVIOR_TWO_PHOTON = "at most two photons"
BEHAVIOR_MULTIPHOTON = "multiphoton"
BEHAVIOR_ATOMS_ONLY = "atomic excitations only"


class RegimeId(str, Enum):
    EMPTY_CAVITY = "EMPTY_CAVITY"
    TWO_PHOTON_RESONANT = "TWO_PHOTON_RESONANT"
    EQUAL_COUPLING_X0 = "EQUAL_COUPLING_X0"
    SECOND_ATOM_DISPERSIVE = "SECOND_ATOM_DISPERSIVE"
    DISPERSIVE_SQUEEZING = "DISPERSIVE_SQUEEZING"
    DOUBLE_EXCITATION = "DOUBLE_EXCITATION"
    MIXED_RESONANT_DISPERSIVE = "MIXED_RESONANT_DISPERSIVE"
    DOUBLE_WEAK = "DOUBLE_WEAK"

    def __str__(self):  # pragma: no cover - cosmetic
        return self.value


@dataclass(frozen=True)
class ValidityCheck:
    """One operationalized inequality with its measured ratio and verdict."""

    name: str
    ratio: float
    verdict: str  # "pass" | "warn" | "fail"


def much_less(
    name: str,
    small: float,
    big: float,
    pass_ratio: float = PASS_RATIO,
    warn_ratio: float = WARN_RATIO,
) -> ValidityCheck:
    """Check |small| << |big| with the standard margin convention."""
    small, big = abs(small), abs(big)
    ratio = math.inf if small == 0.0 else big / small
    if ratio >= pass_ratio:
        verdict = "pass"
    elif ratio >= warn_ratio:
        verdict = "warn"
    else:
        verdict = "fail"
    return ValidityCheck(name=name, ratio=ratio, verdict=verdict)


def worst_verdict(checks) -> str:
    order = {"fail": 0, "warn": 1, "pass": 2}
    if not checks:
        return "pass"
    return min((c.verdict for c in checks), key=lambda v: order[v])


# ---------------------------------------------------------------------------
# spectral quantities of the resonant Tavis-Cummings multiplets


@dataclass(frozen=True)
class SpectralQuantities:
    """Dressed-multiplet quantities at Fock excitation level m.

    ``V_plus``/``V_minus`` are None for a single coupled atom (rho = 0),
    where the double-excitation admixture is singular/absent.  ``r_plus``
    and ``r_minus`` are the vacuum pump rates of the two m = 2 branches.
    """

    m: int
    g1: float
    g2: float
    rho: float
    R_m: float
    L_plus: float
    L_minus: float
    V_plus: float | None
    V_minus: float | None
    R2: float
    r_plus: float
    r_minus: float

    @property
    def singular_V(self) -> bool:
        return self.V_plus is None


def spectral_quantities(m: int, g1: float, g2: float) -> SpectralQuantities:
    """Evaluate rho, R_m, L_m(+-), V_m(+-) and the pump rates R(+-)."""
    if m < 2:
        raise ValueError(f"level quantities need m >= 2, got m = {m}")
    G2sq = g1 * g1 + g2 * g2
    if G2sq == 0.0:
        raise ValueError("g1 = g2 = 0: no coupled atom, spectral quantities undefined")
    rho = 2.0 * g1 * g2 / G2sq
    mm1 = float(m * (m - 1))
    R_m = 0.5 * math.sqrt(1.0 + 4.0 * rho * rho * mm1)
    L_plus = math.sqrt(m - 0.5 + R_m)
    L_minus = math.sqrt(max(m - 0.5 - R_m, 0.0))
    if rho == 0.0:
        V_plus = V_minus = None
    else:
        V_plus = (1.0 - 2.0 * R_m) / (2.0 * rho * math.sqrt(mm1))
        V_minus = (1.0 + 2.0 * R_m) / (2.0 * rho * math.sqrt(mm1))
    R2 = 0.5 * math.sqrt(1.0 + 8.0 * rho * rho)
    r_plus = 0.5 * math.sqrt(2.0 + 1.0 / R2)
    r_minus = 0.5 * math.sqrt(max(2.0 - 1.0 / R2, 0.0))
    return SpectralQuantities(
        m=m, g1=g1, g2=g2, rho=rho, R_m=R_m, L_plus=L_plus, L_minus=L_minus,
        V_plus=V_plus, V_minus=V_minus, R2=R2, r_plus=r_plus, r_minus=r_minus,
    )


# ---------------------------------------------------------------------------
# regime catalog


@dataclass(frozen=True)
class RegimeDescriptor:
    """One resonance regime instantiated for a concrete parameter set."""

    regime: RegimeId
    x: float
    branch: str = ""
    checks: tuple[ValidityCheck, ...] = ()
    behavior: str = BEHAVIOR_MULTIPHOTON
    rate: float | None = None
    horizon_t: float | None = None
    initial_state: tuple[str, str, int] = ("g", "g", 0)
    notes: str = ""

    @property
    def verdict(self) -> str:
        return worst_verdict(self.checks)


@dataclass(frozen=True)
class OmittedRegime:
    regime: RegimeId
    branch: str
    reason: str


@dataclass
class CatalogResult:
    descriptors: list[RegimeDescriptor]
    omitted: list[OmittedRegime]

    def find(self, regime: RegimeId | str, branch: str | None = None):
        regime = RegimeId(regime)
        return [
            d for d in self.descriptors
            if d.regime == regime and (branch is None or d.branch == branch)
        ]


def _sign_str(s: int) -> str:
    return "+" if s > 0 else "-"


def resonance_catalog(params: ModelParams) -> CatalogResult:
    """Enumerate the resonance regimes meaningful for ``params``.

    Structurally inapplicable regimes are listed in ``omitted`` with a
    reason; applicable ones carry their resonance shift x, validity checks
    and a qualitative behavior tag.
    """
    out: list[RegimeDescriptor] = []
    omitted: list[OmittedRegime] = []
    eps, g1, g2 = params.epsilon, params.g1, params.g2
    D1, D2 = params.Delta1, params.Delta2
    G = params.G
    q = params.q
    atoms_resonant = abs(D1) <= EQ_TOL and abs(D2) <= EQ_TOL

    # empty cavity
    if g1 == 0.0 and g2 == 0.0:
        out.append(RegimeDescriptor(
            regime=RegimeId.EMPTY_CAVITY, x=0.0,
            behavior=BEHAVIOR_MULTIPHOTON, rate=abs(eps),
            notes="mean photon number sinh^2(eps*t/2) at x = 0",
        ))
    else:
        omitted.append(OmittedRegime(RegimeId.EMPTY_CAVITY, "", "atom couplings present"))

    # two-photon resonances on the dressed m = 2 multiplet
    if G > 0.0 and atoms_resonant:
        sq2 = spectral_quantities(2, g1, g2)
        sq4 = spectral_quantities(4, g1, g2)
        for beta in (+1, -1):
            L2 = sq2.L_plus if beta > 0 else sq2.L_minus
            L4 = sq4.L_plus if beta > 0 else sq4.L_minus
            rate = sq2.r_plus if beta > 0 else sq2.r_minus
            bstr = _sign_str(beta)
            if L2 == 0.0:
                omitted.append(OmittedRegime(
                    RegimeId.TWO_PHOTON_RESONANT, f"beta={bstr}",
                    "branch merges into the x = 0 multiphoton resonance "
                    "(equal couplings)",
                ))
                continue
            if rate < RATE_MIN:
                omitted.append(OmittedRegime(
                    RegimeId.TWO_PHOTON_RESONANT, f"beta={bstr}",
                    f"pump rate R = {rate:.3g} below {RATE_MIN}: dynamics too "
                    "slow to be useful",
                ))
                continue
            checks = (
                much_less("epsilon << G", eps, G),
                much_less("q << G|L4 - L2| (level separation)", q, G * abs(L4 - L2)),
            )
            for alpha in (+1, -1):
                out.append(RegimeDescriptor(
                    regime=RegimeId.TWO_PHOTON_RESONANT,
                    x=-alpha * G * L2 / 2.0,
                    branch=_sign_str(alpha) + bstr,
                    checks=checks,
                    behavior=BEHAVIOR_TWO_PHOTON,
                    rate=rate,
                    notes=f"ground-state return probability cos^2(q t R) with R = {rate:.6g}",
                ))
    else:
        omitted.append(OmittedRegime(
            RegimeId.TWO_PHOTON_RESONANT, "",
            "requires both atoms resonant (Delta_j = 0) and G > 0",
        ))

    # equal-coupling multiphoton resonance at x = 0
    if atoms_resonant and G > 0.0 and abs(abs(g1) - abs(g2)) <= EQ_TOL:
        out.append(RegimeDescriptor(
            regime=RegimeId.EQUAL_COUPLING_X0, x=0.0,
            checks=(
                much_less("q << G", q, G),
                much_less("|g2 - g1| << epsilon", abs(g2) - abs(g1), eps),
            ),
            behavior=BEHAVIOR_MULTIPHOTON, rate=abs(eps),
            notes="slow flow of even-Fock amplitudes; both atoms excite together",
        ))
    else:
        omitted.append(OmittedRegime(
            RegimeId.EQUAL_COUPLING_X0, "",
            "requires resonant atoms with |g1| = |g2| > 0",
        ))

    # second atom dispersive, first atom resonant
    if abs(D1) <= EQ_TOL and abs(D2) > EQ_TOL and g1 != 0.0 and g2 != 0.0:
        d2 = params.delta(2)
        G2 = math.sqrt(2.0 * g1 * g1 + 0.25 * d2 * d2)
        checks = (
            much_less("g2 << |Delta2|", g2, D2),
            much_less("|delta2| << |g1|", d2, g1),
            much_less("epsilon << g1", eps, g1),
        )
        for s in (+1, -1):
            out.append(RegimeDescriptor(
                regime=RegimeId.SECOND_ATOM_DISPERSIVE,
                x=(1.5 * d2 + s * G2) / 2.0,
                branch=_sign_str(s),
                checks=checks,
                behavior=BEHAVIOR_TWO_PHOTON,
                rate=math.sqrt(max(1.0 + s * d2 / (2.0 * G2), 0.0)),
            ))
    else:
        omitted.append(OmittedRegime(
            RegimeId.SECOND_ATOM_DISPERSIVE, "",
            "requires Delta1 = 0, Delta2 != 0 and both couplings nonzero",
        ))

    # both atoms dispersive
    if abs(D1) > EQ_TOL and abs(D2) > EQ_TOL and G > 0.0:
        d1, d2 = params.delta(1), params.delta(2)
        z2sum = params.zeta(1) ** 2 + params.zeta(2) ** 2
        out.append(RegimeDescriptor(
            regime=RegimeId.DISPERSIVE_SQUEEZING, x=d1 + d2,
            checks=(
                much_less("g1 << |Delta1|", g1, D1),
                much_less("g2 << |Delta2|", g2, D2),
            ),
            behavior=BEHAVIOR_MULTIPHOTON,
            rate=4.0 * q * (1.0 - z2sum),
            horizon_t=(HORIZON_WARN / abs(d1)) if d1 != 0.0 else None,
            notes="atomic populations track the photon number: P_ej = zeta_j^2 <n>",
        ))
        pair_detuning = D1 + D2 + 3.0 * (d1 + d2)
        out.append(RegimeDescriptor(
            regime=RegimeId.DOUBLE_EXCITATION,
            x=-0.5 * (D1 + d1 + D2 + d2),
            checks=(
                much_less("g1 << |Delta1|", g1, D1),
                much_less("g2 << |Delta2|", g2, D2),
                much_less("|Delta1 + Delta2| << max|Delta_j|",
                          D1 + D2, max(abs(D1), abs(D2))),
                much_less("q << |sum(Delta_j + 3 delta_j)|", q, pair_detuning,
                          pass_ratio=PAIR_MARGIN_PASS, warn_ratio=PAIR_MARGIN_WARN),
            ),
            behavior=BEHAVIOR_ATOMS_ONLY,
            rate=2.0 * q * params.zeta(1) * params.zeta(2),
            notes="field stays near vacuum; both atoms excite jointly",
        ))
    else:
        omitted.append(OmittedRegime(
            RegimeId.DISPERSIVE_SQUEEZING, "",
            "requires both detunings nonzero",
        ))
        omitted.append(OmittedRegime(
            RegimeId.DOUBLE_EXCITATION, "",
            "requires both detunings nonzero",
        ))

    # first atom resonant but weak, second dispersive
    if abs(D1) <= EQ_TOL and abs(D2) > EQ_TOL and g2 != 0.0 and q != 0.0:
        d2 = params.delta(2)
        xi1 = g1 / (2.0 * q)
        z2 = params.zeta(2)
        out.append(RegimeDescriptor(
            regime=RegimeId.MIXED_RESONANT_DISPERSIVE, x=d2,
            checks=(
                much_less("g1 << epsilon", g1, eps),
                much_less("g2 << |Delta2|", g2, D2),
            ),
            behavior=BEHAVIOR_MULTIPHOTON,
            rate=4.0 * q * (1.0 + xi1 * xi1 - z2 * z2),
            initial_state=("e", "g", 0),
            notes="atom 1 starts excited and monitors via its ground-state "
                  "probability P_g1 = xi1^2 <n>",
        ))
    else:
        omitted.append(OmittedRegime(
            RegimeId.MIXED_RESONANT_DISPERSIVE, "",
            "requires Delta1 = 0, a dispersive second atom and q != 0",
        ))

    # both atoms weakly coupled compared to the modulation
    if atoms_resonant and eps != 0.0:
        out.append(RegimeDescriptor(
            regime=RegimeId.DOUBLE_WEAK, x=0.0,
            checks=(much_less("G << epsilon", G, eps),),
            behavior=BEHAVIOR_MULTIPHOTON,
            rate=abs(eps),
            notes="parametric amplification with weakly dressed atoms",
        ))
    else:
        omitted.append(OmittedRegime(
            RegimeId.DOUBLE_WEAK, "",
            "requires resonant atoms and nonzero modulation",
        ))

    return CatalogResult(descriptors=out, omitted=omitted)


# ---------------------------------------------------------------------------
# two-photon closed forms (both atoms resonant)


@dataclass(frozen=True)
class TwoPhotonSolution:
    """Closed-form state at a two-photon resonance 2x = -alpha*G*L2(beta)."""

    t: float
    alpha: int
    beta: int
    a0: complex
    F2: complex
    x_resonance: float
    rate: float
    table: AmplitudeTable
    checks: tuple[ValidityCheck, ...]
    warnings: tuple[str, ...] = ()

    @property
    def verdict(self) -> str:
        return worst_verdict(self.checks)


def _require_sign(s: int, name: str):
    if s not in (+1, -1):
        raise ValueError(f"{name} must be +1 or -1, got {s!r}")


def two_photon_amplitudes(
    t: float, params: ModelParams, alpha: int, beta: int
) -> TwoPhotonSolution:
    """Periodic two-photon solution from the vacuum at a dressed resonance.

    The only slowly-varying amplitudes are a0 = cos(q t R(beta)) and the
    m = 2 dressed-multiplet coefficient F2 = R(beta) sin(q t R(beta))/sqrt(2);
    the state is reconstructed on Fock levels 0..2.  Margin violations are
    reported in ``checks``/``warnings``, not raised.
    """
    _require_sign(alpha, "alpha")
    _require_sign(beta, "beta")
    if abs(params.Delta1) > EQ_TOL or abs(params.Delta2) > EQ_TOL:
        raise ValueError("two-photon closed forms require Delta1 = Delta2 = 0")
    g1, g2 = params.g1, params.g2
    G = params.G
    if G == 0.0:
        raise ValueError("two-photon resonance requires at least one coupled atom")
    sq2 = spectral_quantities(2, g1, g2)
    sq4 = spectral_quantities(4, g1, g2)
    L2 = sq2.L_plus if beta > 0 else sq2.L_minus
    L4 = sq4.L_plus if beta > 0 else sq4.L_minus
    rate = sq2.r_plus if beta > 0 else sq2.r_minus

    equal = abs(abs(g1) - abs(g2)) <= EQ_TOL
    single = g1 == 0.0 or g2 == 0.0
    if beta < 0 and equal:
        raise ValueError(
            "beta = -1 branch is degenerate (L2 = 0) for equal couplings: "
            "it merges into the x = 0 multiphoton resonance"
        )
    if beta < 0 and single:
        raise ValueError(
            "beta = -1 branch has zero pump rate for a single coupled atom"
        )

    q = params.q
    x_res = -alpha * G * L2 / 2.0
    checks = [
        much_less("epsilon << G", params.epsilon, G),
        much_less("q << G|L4 - L2|", q, G * abs(L4 - L2)),
    ]
    warn: list[str] = []
    if rate < RATE_MIN:
        warn.append(f"pump rate R = {rate:.3g} < {RATE_MIN}: very slow dynamics")
    if not math.isclose(params.x, x_res, rel_tol=1e-9, abs_tol=1e-12):
        warn.append(
            f"params.x = {params.x:.6g} differs from the branch resonance "
            f"x = {x_res:.6g}; the closed forms assume exact resonance"
        )

    a0 = math.cos(q * t * rate)
    F2 = rate * math.sin(q * t * rate) / math.sqrt(2.0)
    phase = cmath.exp(1j * alpha * G * L2 * t)

    a2 = F2 * phase
    if single:
        V2 = 0.0
        d0 = 0.0j
        if g2 == 0.0:
            b1 = 0.0j
            c1 = -alpha * F2 * phase
        else:
            b1 = -alpha * F2 * phase
            c1 = 0.0j
    elif equal:
        r = 1.0 if g1 * g2 > 0 else -1.0
        V2 = sq2.V_plus
        d0 = -V2 * F2 * phase
        b1 = -(r / 2.0) * alpha * L2 * F2 * phase
        c1 = -(1.0 / 2.0) * alpha * L2 * F2 * phase
    else:
        V2 = sq2.V_plus if beta > 0 else sq2.V_minus
        d0 = -V2 * F2 * phase
        common = alpha * L2 * F2 * phase * G
        b1 = common / (g1 * g1 - g2 * g2) * (g2 / math.sqrt(2.0) + g1 * V2)
        c1 = common / (g2 * g2 - g1 * g1) * (g1 / math.sqrt(2.0) + g2 * V2)

    table = AmplitudeTable(
        a=np.array([a0, 0.0, a2], dtype=complex),
        b=np.array([0.0, b1, 0.0], dtype=complex),
        c=np.array([0.0, c1, 0.0], dtype=complex),
        d=np.array([d0, 0.0, 0.0], dtype=complex),
    )
    return TwoPhotonSolution(
        t=t, alpha=alpha, beta=beta, a0=complex(a0), F2=complex(F2),
        x_resonance=x_res, rate=rate, table=table,
        checks=tuple(checks), warnings=tuple(warn),
    )


# ---------------------------------------------------------------------------
# equal-coupling x = 0 slow flow


class FlowTailError(RuntimeError):
    """The top retained even-Fock amplitude grew too large: increase m_max."""


@dataclass(frozen=True)
class SlowFlowState:
    """Even-Fock slow-flow coefficients Y_m at one time (odd m are zero)."""

    t: float
    Y: np.ndarray          # Y[k] is the coefficient of even level m = 2k
    r: float               # coupling-sign ratio g2/g1 = +-1
    empty_cavity: bool = False

    @property
    def m_values(self) -> np.ndarray:
        return 2 * np.arange(len(self.Y))

    def weighted_norm(self) -> float:
        """Physical norm of the reconstructed state (exactly conserved)."""
        Y2 = self.Y**2
        if self.empty_cavity:
            return float(Y2.sum())
        m = self.m_values.astype(float)
        w = np.ones_like(m)
        w[1:] = 1.0 + m[1:] / (m[1:] - 1.0)
        return float((w * Y2).sum())


@dataclass
class FlowTrajectory:
    q: float
    r: float
    empty_cavity: bool
    times: np.ndarray
    Y: np.ndarray  # shape (n_samples, K)

    def state_at(self, i: int) -> SlowFlowState:
        return SlowFlowState(
            t=float(self.times[i]), Y=self.Y[i], r=self.r,
            empty_cavity=self.empty_cavity,
        )

    @property
    def final(self) -> SlowFlowState:
        return self.state_at(len(self.times) - 1)

    def mean_n(self) -> np.ndarray:
        return np.array([
            reconstruct_state_from_flow(self.state_at(i)).mean_n()
            for i in range(len(self.times))
        ])


def flow_coefficients(m: np.ndarray, empty_cavity: bool = False):
    """Gain/loss coefficients of the even-level flow dY_m/dt.

    dY_m/dt = q*(A_m Y_{m-2} - B_m Y_{m+2}) with
    A_m = sqrt(m(m-1))*(2m-3)/(2m-1) and
    B_m = sqrt((m+1)(m+2))*(m-1)/(m+1)*(2m+1)/(2m-1); both fractions tend to
    one for m >> 1, where the flow becomes the empty-cavity amplitude flow
    (obtained exactly with ``empty_cavity=True``).
    """
    m = np.asarray(m, dtype=float)
    if empty_cavity:
        A = np.sqrt(m * (m - 1.0))
        B = np.sqrt((m + 1.0) * (m + 2.0))
    else:
        A = np.sqrt(m * (m - 1.0)) * (2.0 * m - 3.0) / (2.0 * m - 1.0)
        B = (np.sqrt((m + 1.0) * (m + 2.0))
             * (m - 1.0) / (m + 1.0) * (2.0 * m + 1.0) / (2.0 * m - 1.0))
    return A, B


def equal_coupling_flow(
    t_final: float,
    q: float,
    m_max: int,
    r: float = 1.0,
    dt: float | None = None,
    n_samples: int = 200,
    empty_cavity: bool = False,
    tail_limit: float = 1e-6,
) -> FlowTrajectory:
    """Integrate the x = 0 slow flow from Y_m(0) = r*delta_{m,0}.

    Fixed-step RK4 with q*dt <= 1e-3 by default.  Raises
    :class:`FlowTailError` when |Y_{m_max}|^2 exceeds ``tail_limit``.
    """
    if m_max % 2 != 0 or m_max < 20:
        raise ValueError(f"m_max must be even and >= 20, got {m_max}")
    if q <= 0.0:
        raise ValueError(f"q must be positive, got {q}")
    if r not in (1.0, -1.0, 1, -1):
        raise ValueError(f"coupling ratio r must be +-1, got {r}")
    if dt is None:
        dt = 1e-3 / q
    K = m_max // 2 + 1
    m = 2.0 * np.arange(K)
    A, B = flow_coefficients(m, empty_cavity)
    A[0] = 0.0

    def rhs(Y):
        d = np.zeros_like(Y)
        d[1:] += A[1:] * Y[:-1]
        d[:-1] -= B[:-1] * Y[1:]
        return q * d

    Y = np.zeros(K)
    Y[0] = float(r)
    nsteps = max(1, int(math.ceil(t_final / dt)))
    stride = max(1, nsteps // max(n_samples, 1))
    h = t_final / nsteps
    times = [0.0]
    samples = [Y.copy()]
    for s in range(nsteps):
        k1 = rhs(Y)
        k2 = rhs(Y + 0.5 * h * k1)
        k3 = rhs(Y + 0.5 * h * k2)
        k4 = rhs(Y + h * k3)
        Y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if (s + 1) % stride == 0 or s == nsteps - 1:
            if Y[-1] ** 2 > tail_limit:
                raise FlowTailError(
                    f"|Y_{m_max}|^2 = {Y[-1]**2:.3e} > {tail_limit:.1e} at "
                    f"t = {(s + 1) * h:.6g}: increase m_max"
                )
            times.append((s + 1) * h)
            samples.append(Y.copy())
    return FlowTrajectory(
        q=q, r=float(r), empty_cavity=empty_cavity,
        times=np.array(times), Y=np.array(samples),
    )


def reconstruct_state_from_flow(flow: SlowFlowState) -> AmplitudeTable:
    """Amplitude table of the x = 0 resonance state from flow coefficients.

    a_m = r*Y_m on even levels, b = c = 0, and the double-excitation family
    d_{m-2} = -sqrt(m/(m-1))*Y_m, so |d_{m-2}|^2/|a_m|^2 = m/(m-1) holds
    identically.  In ``empty_cavity`` mode the coefficients are plain field
    amplitudes: a_m = Y_m and d = 0.
    """
    K = len(flow.Y)
    n_fock = 2 * (K - 1) + 1
    a = np.zeros(n_fock, dtype=complex)
    b = np.zeros(n_fock, dtype=complex)
    c = np.zeros(n_fock, dtype=complex)
    d = np.zeros(n_fock, dtype=complex)
    m_even = 2 * np.arange(K)
    if flow.empty_cavity:
        a[m_even] = flow.Y
    else:
        a[m_even] = flow.r * flow.Y
        m = m_even[1:].astype(float)
        d[m_even[1:] - 2] = -np.sqrt(m / (m - 1.0)) * flow.Y[1:]
    return AmplitudeTable(a=a, b=b, c=c, d=d)


# ---------------------------------------------------------------------------
# second atom dispersive (first atom resonant)


@dataclass(frozen=True)
class SecondAtomDispersiveSolution:
    """Closed-form amplitudes at 2x = (3/2)*delta2 + branch*G2."""

    t: float
    branch: int
    a0: complex
    a2: complex
    b1: complex
    c1: complex
    d0: complex
    x_resonance: float
    G2: float
    checks: tuple[ValidityCheck, ...]
    warnings: tuple[str, ...] = ()

    @property
    def table(self) -> AmplitudeTable:
        return AmplitudeTable(
            a=np.array([self.a0, 0.0, self.a2]),
            b=np.array([0.0, self.b1, 0.0]),
            c=np.array([0.0, self.c1, 0.0]),
            d=np.array([self.d0, 0.0, 0.0]),
        )

    @property
    def verdict(self) -> str:
        return worst_verdict(self.checks)


def second_atom_dispersive_amplitudes(
    t: float, params: ModelParams, branch: int
) -> SecondAtomDispersiveSolution:
    """Two-photon solution with atom 1 resonant and atom 2 far detuned.

    The detuned atom drags the resonance to 2x = (3/2)*delta2 +- G2 with
    G2 = sqrt(2 g1^2 + delta2^2/4) and acquires only O(zeta2) admixtures
    b1 = sqrt(2)*zeta2*e^{-i Delta2 t} a2, d0 = zeta2*e^{-i Delta2 t} c1.
    Margin violations are warn-tagged.
    """
    _require_sign(branch, "branch")
    if abs(params.Delta1) > EQ_TOL:
        raise ValueError("this regime requires atom 1 resonant (Delta1 = 0)")
    if params.Delta2 == 0.0 or params.g2 == 0.0:
        raise ValueError("this regime requires a dispersively coupled atom 2")
    if params.g1 == 0.0:
        raise ValueError("this regime requires atom 1 coupled (g1 != 0)")
    g1 = params.g1
    d2 = params.delta(2)
    z2 = params.zeta(2)
    G2 = math.sqrt(2.0 * g1 * g1 + 0.25 * d2 * d2)
    x_res = (1.5 * d2 + branch * G2) / 2.0
    checks = (
        much_less("g2 << |Delta2|", params.g2, params.Delta2),
        much_less("|delta2| << |g1|", d2, g1),
    )
    warn = []
    if not math.isclose(params.x, x_res, rel_tol=1e-9, abs_tol=1e-12):
        warn.append(
            f"params.x = {params.x:.6g} differs from the branch resonance "
            f"x = {x_res:.6g}"
        )

    q = params.q
    mu2 = 1.0 + branch * d2 / (2.0 * G2)
    mu = math.sqrt(mu2)
    a0 = math.cos(q * t * mu)
    amp = mu * math.sin(q * t * mu) / math.sqrt(2.0)
    common = cmath.exp(-1.5j * d2 * t)
    osc = cmath.exp(-1j * branch * G2 * t)
    a2 = common * amp * osc
    c1 = (G2 / (math.sqrt(2.0) * g1)) * common * amp * branch * (
        1.0 - branch * d2 / (2.0 * G2)
    ) * osc
    b1 = math.sqrt(2.0) * z2 * cmath.exp(-1j * params.Delta2 * t) * a2
    d0 = z2 * cmath.exp(-1j * params.Delta2 * t) * c1
    return SecondAtomDispersiveSolution(
        t=t, branch=branch, a0=complex(a0), a2=a2, b1=b1, c1=c1, d0=d0,
        x_resonance=x_res, G2=G2, checks=checks, warnings=tuple(warn),
    )


# ---------------------------------------------------------------------------
# dispersive regime (both atoms far detuned)


def _check_dispersive(params: ModelParams):
    if params.Delta1 == 0.0 or params.Delta2 == 0.0:
        raise ValueError("dispersive regime requires Delta1 != 0 and Delta2 != 0")
    for j in (1, 2):
        if abs(params.zeta(j)) > ZETA_MAX:
            raise ValueError(
                f"|zeta_{j}| = {abs(params.zeta(j)):.3g} > {ZETA_MAX}: outside "
                "the second-order dispersive expansion"
            )


def dispersive_effective_hamiltonian(
    params: ModelParams, ops: OperatorSet
) -> sparse.csr_matrix:
    """Second-order effective Hamiltonian for two far-detuned atoms.

    Contains the dressed number term -(x + delta1*sz1 + delta2*sz2)*n, the
    dressed atomic splittings, the cavity-mediated exchange
    -zeta1*zeta2*(Delta1+Delta2)/2*(sp1 sm2 + h.c.), the joint pair
    excitation 2iq*zeta1*zeta2*(sp1 sp2 - h.c.) and the squeezing drive
    -iq*((1 + zeta1^2 sz1 + zeta2^2 sz2) a^2 - h.c.).
    """
    _check_dispersive(params)
    d1, d2 = params.delta(1), params.delta(2)
    z1, z2 = params.zeta(1), params.zeta(2)
    q, x = params.q, params.x
    D1, D2 = params.Delta1, params.Delta2
    X = ops.identity + z1 * z1 * ops.sz1 + z2 * z2 * ops.sz2
    H = (
        -(x * ops.n + d1 * (ops.sz1 @ ops.n) + d2 * (ops.sz2 @ ops.n))
        - 0.5 * (D1 + x + d1) * ops.sz1
        - 0.5 * (D2 + x + d2) * ops.sz2
        - z1 * z2 * 0.5 * (D1 + D2) * (ops.sp1 @ ops.sm2 + ops.sm1 @ ops.sp2)
        + 2j * q * z1 * z2 * (ops.sp1 @ ops.sp2 - ops.sm1 @ ops.sm2)
        - 1j * q * (X @ ops.a2 - X @ ops.adag2)
    )
    return H.tocsr()


def squeezed_vacuum_fock(r_arg: float, n_max: int) -> np.ndarray:
    """Fock amplitudes of exp[(r/2)(adag^2 - a^2)]|0> up to n_max.

    Even levels only: amp_{2k} = sqrt(sech r) * sqrt((2k)!)/(2^k k!) tanh^k r,
    evaluated by a stable ratio recursion.
    """
    amps = np.zeros(n_max + 1)
    th = math.tanh(r_arg)
    amps[0] = 1.0 / math.sqrt(math.cosh(r_arg))
    for k in range(1, n_max // 2 + 1):
        amps[2 * k] = amps[2 * k - 2] * th * math.sqrt((2 * k - 1) / (2.0 * k))
    return amps


def _dispersive_dressing(params: ModelParams, ops: OperatorSet) -> np.ndarray:
    """Dense U = exp(Y) with Y = adag (zeta2 sm2 + zeta1 sm1) - h.c."""
    z1, z2 = params.zeta(1), params.zeta(2)
    Y = ops.adag @ (z2 * ops.sm2 + z1 * ops.sm1)
    Y = (Y - Y.conj().T).toarray()
    return expm(Y)


def dispersive_state(
    t: float, params: ModelParams, basis: BasisIndex, ops: OperatorSet | None = None
) -> StateVector:
    """State-level dispersive solution Udag * squeeze(1 - zeta^2) |gg0>.

    Interaction-frame state for the resonance x = delta1 + delta2; used to
    cross-check the closed-form observables (quadratures in particular).
    """
    from .model import build_operators

    _check_dispersive(params)
    ops = ops or build_operators(basis)
    z2sum = params.zeta(1) ** 2 + params.zeta(2) ** 2
    r_arg = 2.0 * (1.0 - z2sum) * params.q * t
    data = np.zeros(basis.dimension, dtype=complex)
    data[:basis.n_fock] = squeezed_vacuum_fock(r_arg, basis.n_max)
    U = _dispersive_dressing(params, ops)
    return StateVector(U.conj().T @ data, basis, frame="interaction")


@dataclass(frozen=True)
class DispersiveObservables:
    """Closed-form observables at the squeezing resonance x = delta1 + delta2.

    ``p_e1e2_order`` is the magnitude scale of the joint excitation (it is
    fourth order in zeta and not predicted in closed form).  ``horizon`` is
    "ok" for |delta1|*t <= 0.5, "warn" up to 1.0, "fail" beyond.
    """

    t: float
    mean_n: float
    P_e1: float
    P_e2: float
    var_Xplus: float
    var_Xminus: float
    p_e1e2_order: float
    horizon: str


def dispersive_observables(t: float, params: ModelParams) -> DispersiveObservables:
    """Evaluate the dispersive-squeezing closed forms at time ``t``.

    <n> = (1 - zeta^2) sinh^2[2 q t (1 - zeta^2)], P_ej = zeta_j^2 <n>,
    var(X+-) = (zeta^2 + (1 - zeta^2) exp[+-4 q t (1 - zeta^2)])/2 with
    zeta^2 = zeta1^2 + zeta2^2.
    """
    _check_dispersive(params)
    d1, d2 = params.delta(1), params.delta(2)
    if not math.isclose(params.x, d1 + d2, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(
            f"dispersive squeezing requires x = delta1 + delta2 = {d1 + d2:.6g}, "
            f"got x = {params.x:.6g}"
        )
    z1, z2 = params.zeta(1), params.zeta(2)
    z2sum = z1 * z1 + z2 * z2
    s = 2.0 * params.q * t * (1.0 - z2sum)
    mean_n = (1.0 - z2sum) * math.sinh(s) ** 2
    ht = abs(d1) * t
    horizon = "ok" if ht <= HORIZON_WARN else ("warn" if ht <= HORIZON_FAIL else "fail")
    return DispersiveObservables(
        t=t,
        mean_n=mean_n,
        P_e1=z1 * z1 * mean_n,
        P_e2=z2 * z2 * mean_n,
        var_Xplus=0.5 * (z2sum + (1.0 - z2sum) * math.exp(2.0 * s)),
        var_Xminus=0.5 * (z2sum + (1.0 - z2sum) * math.exp(-2.0 * s)),
        p_e1e2_order=z1 ** 4,
        horizon=horizon,
    )


@dataclass(frozen=True)
class DoubleExcitationResult:
    """Joint atomic excitation at the pair resonance 2x = -sum(Delta_j + delta_j)."""

    t: float
    p_e1e2: float
    rate: float
    peak: float
    t_peak: float
    field_near_vacuum: bool
    checks: tuple[ValidityCheck, ...]

    @property
    def verdict(self) -> str:
        return worst_verdict(self.checks)


def double_excitation_probability(t: float, params: ModelParams) -> DoubleExcitationResult:
    """P_{e1,e2}(t) = (1 - zeta1^2 - zeta2^2) sin^2(2 q t zeta1 zeta2).

    Valid when the squeezing term is far off-resonant,
    |sum(Delta_j + 3 delta_j)| >> q; then the field remains near vacuum and
    only the joint atomic excitation is driven, at rate 2 q zeta1 zeta2.
    """
    _check_dispersive(params)
    d1, d2 = params.delta(1), params.delta(2)
    x_res = -0.5 * (params.Delta1 + d1 + params.Delta2 + d2)
    if not math.isclose(params.x, x_res, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(
            f"pair-excitation resonance requires x = {x_res:.6g}, got {params.x:.6g}"
        )
    z1, z2 = params.zeta(1), params.zeta(2)
    rate = 2.0 * params.q * z1 * z2
    detuning = params.Delta1 + params.Delta2 + 3.0 * (d1 + d2)
    checks = (
        much_less("q << |sum(Delta_j + 3 delta_j)|", params.q, detuning,
                  pass_ratio=PAIR_MARGIN_PASS, warn_ratio=PAIR_MARGIN_WARN),
    )
    peak = 1.0 - z1 * z1 - z2 * z2
    return DoubleExcitationResult(
        t=t,
        p_e1e2=peak * math.sin(rate * t) ** 2,
        rate=rate,
        peak=peak,
        t_peak=math.pi / (2.0 * abs(rate)) if rate != 0.0 else math.inf,
        field_near_vacuum=True,
        checks=checks,
    )


# ---------------------------------------------------------------------------
# mixed regime: atom 1 resonant and weak, atom 2 dispersive


@dataclass(frozen=True)
class MixedRegimeObservables:
    """Closed forms for the x = delta2 resonance started from |e1 g2 0>.

    P_g1 is the ground-state probability of atom 1; the cross probability
    P_{g1,e2} vanishes to second order in (xi1, zeta2).
    """

    t: float
    mean_n: float
    P_g1: float
    P_e2: float
    var_Xplus: float
    var_Xminus: float
    initial_state: tuple[str, str, int]
    checks: tuple[ValidityCheck, ...]

    @property
    def verdict(self) -> str:
        return worst_verdict(self.checks)


def mixed_regime_observables(t: float, params: ModelParams) -> MixedRegimeObservables:
    """<n> = (1 - xi1^2 - zeta2^2) sinh^2[2 q (1 + xi1^2 - zeta2^2) t], etc.

    Requires Delta1 = 0, a dispersive atom 2 and x = delta2; atom 1 is
    weakly coupled on the modulation scale (g1 << epsilon) and monitors the
    growth through P_g1 = xi1^2 <n>.
    """
    if abs(params.Delta1) > EQ_TOL:
        raise ValueError("mixed regime requires Delta1 = 0")
    if params.Delta2 == 0.0 or params.g2 == 0.0:
        raise ValueError("mixed regime requires a dispersive second atom")
    d2 = params.delta(2)
    if not math.isclose(params.x, d2, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError(f"mixed regime requires x = delta2 = {d2:.6g}, got {params.x:.6g}")
    xi1 = params.xi(1)
    z2 = params.zeta(2)
    checks = (
        much_less("g1 << epsilon", params.g1, params.epsilon),
        much_less("g2 << |Delta2|", params.g2, params.Delta2),
    )
    A = 1.0 - xi1 * xi1 - z2 * z2
    s = 2.0 * params.q * (1.0 + xi1 * xi1 - z2 * z2) * t
    mean_n = A * math.sinh(s) ** 2
    return MixedRegimeObservables(
        t=t,
        mean_n=mean_n,
        P_g1=xi1 * xi1 * mean_n,
        P_e2=z2 * z2 * mean_n,
        var_Xplus=0.5 * (xi1 * xi1 + z2 * z2) + 0.5 * A * math.exp(2.0 * s),
        var_Xminus=0.5 * (xi1 * xi1 + z2 * z2) + 0.5 * A * math.exp(-2.0 * s),
        initial_state=("e", "g", 0),
        checks=checks,
    )


# ---------------------------------------------------------------------------
# both atoms weakly coupled


def double_weak_effective_hamiltonian(
    params: ModelParams, ops: OperatorSet
) -> sparse.csr_matrix:
    """Effective generator for two weakly coupled resonant atoms at x = 0.

    H = iq[(1 + xi1^2 sz1 + xi2^2 sz2) adag^2 - 2 xi1 xi2 sp1 sp2 - h.c.]
    with xi_j = g_j/(2q): parametric photon growth plus a joint atomic
    pair-excitation channel of element -2iq*xi1*xi2.
    """
    if abs(params.x) > EQ_TOL or abs(params.Delta1) > EQ_TOL or abs(params.Delta2) > EQ_TOL:
        raise ValueError("double-weak regime requires x = Delta1 = Delta2 = 0")
    if params.q == 0.0:
        raise ValueError("double-weak regime requires nonzero modulation")
    check = much_less("G << epsilon", params.G, params.epsilon)
    if check.verdict == "fail":
        raise ValueError(
            f"G/epsilon margin too small (epsilon/G = {1.0 / check.ratio if check.ratio else 0:.3g}"
            f"^-1, ratio = {check.ratio:.3g} < {WARN_RATIO}): couplings are not weak"
        )
    xi1, xi2 = params.xi(1), params.xi(2)
    q = params.q
    X = ops.identity + xi1 * xi1 * ops.sz1 + xi2 * xi2 * ops.sz2
    H = 1j * q * (
        X @ ops.adag2 - X @ ops.a2
        - 2.0 * xi1 * xi2 * (ops.sp1 @ ops.sp2 - ops.sm1 @ ops.sm2)
    )
    return H.tocsr()
