"""Acceptance suite: one test per criterion, one printed verdict line each.

Expensive trajectories are computed once in module/session fixtures and
shared.  Known-unattainable checks are implemented exactly as specified and
allowed to fail; the analysis lives in the project notes, not in weakened
tolerances.
"""

import math
import time

import numpy as np
import pytest

import dceqed as dq
from conftest import FIG1A, fig2a_params, fig2b_params, random_state


def report(criterion: str, ok: bool, detail: str):
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {criterion}: {detail}"


def run_to(params, eps_t_final, n_max, dt=0.01, initial=("g", "g", 0), **opts):
    basis = dq.build_basis(n_max)
    state0 = dq.init_state(*initial, basis)
    options = dq.EvolverOptions(dt=dt, **opts)
    return dq.evolve(state0, params, eps_t_final / abs(params.epsilon), options)


@pytest.fixture(scope="module")
def empty_cavity_run():
    params = dq.ModelParams(epsilon=2e-3, x=0.0)
    basis = dq.build_basis(200)
    state0 = dq.init_state("g", "g", 0, basis)
    t0 = time.perf_counter()
    traj = dq.evolve(state0, params, 4.0 / params.epsilon, dq.EvolverOptions())
    return traj, time.perf_counter() - t0


@pytest.fixture(scope="module")
def suppression_runs():
    base = dq.ModelParams(**FIG1A)
    detuned = run_to(base.replace(x=4 * base.epsilon), 4.0, 100)
    disbalanced = run_to(base.replace(g2=base.g1 + 4 * base.epsilon), 4.0, 100)
    return detuned, disbalanced


@pytest.fixture(scope="module")
def single_atom_two_photon_run():
    g1 = 4e-2
    params = dq.ModelParams(epsilon=2e-3, x=g1 / math.sqrt(2.0), g1=g1)
    t_final = 2 * (2 * math.pi / params.q)  # two ground-state-return periods
    basis = dq.build_basis(12)
    state0 = dq.init_state("g", "g", 0, basis)
    options = dq.EvolverOptions(dt=0.02, store_states=True)
    return dq.evolve(state0, params, t_final, options)


@pytest.fixture(scope="module")
def equal_coupling_two_photon_run():
    g1 = 4e-2
    params = dq.ModelParams(epsilon=2e-3, x=g1 * math.sqrt(1.5), g1=g1, g2=g1)
    rate = math.sqrt(2.0 / 3.0)
    t_final = 2 * (2 * math.pi / (params.q * rate))
    basis = dq.build_basis(12)
    state0 = dq.init_state("g", "g", 0, basis)
    options = dq.EvolverOptions(dt=0.02, store_states=True)
    return dq.evolve(state0, params, t_final, options)


@pytest.fixture(scope="module")
def fig2a_run():
    params = fig2a_params()
    z2 = params.zeta(1) ** 2 + params.zeta(2) ** 2
    # run to the unit squeeze argument 2 q t (1 - zeta^2) = 1 (eps_t ~ 2.0),
    # the working point of the regime's derived example; the paper-quoted
    # horizon |delta1| t < 0.5 ends before mean_n ever reaches 0.2, so the
    # mean_n > 0.2 window below is the meaningful resolution of the criterion
    t_final = 1.0 / (2 * params.q * (1 - z2))
    basis = dq.build_basis(100)
    state0 = dq.init_state("g", "g", 0, basis)
    return dq.evolve(state0, params, t_final, dq.EvolverOptions())


@pytest.fixture(scope="module")
def fig2b_run():
    params = fig2b_params()
    rate = 2 * params.q * params.zeta(1) * params.zeta(2)
    t_final = 1.15 * math.pi / (2 * abs(rate))
    basis = dq.build_basis(15)
    state0 = dq.init_state("g", "g", 0, basis)
    return dq.evolve(state0, params, t_final, dq.EvolverOptions(dt=0.02))


class TestCriterion1EmptyCavity:
    def test_growth_law_and_runtime(self, empty_cavity_run):
        traj, elapsed = empty_cavity_run
        et = traj.eps_t
        mean_n = traj.column("mean_n")
        mask = (et >= 0.5) & (et <= 4.0)
        ref = np.sinh(et[mask] / 2.0) ** 2
        dev = float(np.max(np.abs(mean_n[mask] - ref) / ref))
        n4 = mean_n[int(np.argmin(np.abs(et - 4.0)))]
        ok = dev < 0.01 and elapsed < 60.0
        report(
            "1 empty-cavity law", ok,
            f"max rel dev {dev:.2%} (tol 1%), <n>(eps_t=4) = {n4:.3f} "
            f"(sinh^2(2) = {math.sinh(2)**2:.3f}), runtime {elapsed:.1f}s (< 60s)",
        )


class TestCriterion2BalancedResonance:
    def test_2a_flow_reconstruction_agreement(self, fig1a_run, fig1a_flow):
        mean_flow = fig1a_flow.mean_n()
        devs = []
        for idx in range(len(fig1a_run.times)):
            n_num = fig1a_run.records[idx].mean_n
            if n_num <= 0.1:
                continue
            n_an = float(np.interp(fig1a_run.times[idx], fig1a_flow.times, mean_flow))
            devs.append(abs(n_an - n_num) / n_num)
        dev = max(devs)
        report(
            "2a flow vs numeric", dev < 0.05,
            f"max rel dev {dev:.2%} over {len(devs)} samples with <n> > 0.1 (tol 5%)",
        )

    def test_2b_positive_time_shift_fit(self, fig1a_run):
        et = fig1a_run.eps_t
        mean_n = fig1a_run.column("mean_n")
        below = np.all(
            mean_n[(et >= 0.5)] < np.sinh(et[(et >= 0.5)] / 2.0) ** 2
        )
        window = (et >= 2.0) & (et <= 5.0)
        etw, nw = et[window], mean_n[window]

        def max_resid(tau):
            pred = np.sinh(np.clip(etw - tau, 0.0, None) / 2.0) ** 2
            return float(np.max(np.abs(pred - nw) / nw))

        taus = np.linspace(0.0, 3.0, 1201)
        resids = [max_resid(tau) for tau in taus]
        i = int(np.argmin(resids))
        tau, resid = taus[i], resids[i]
        ok = below and tau > 0.0 and resid < 0.10
        report(
            "2b shifted growth-law fit", ok,
            f"below empty-cavity curve: {below}; best shift eps*t0 = {tau:.2f} "
            f"(> 0); max rel residual on eps_t in [2,5]: {resid:.2%} (tol 10%)",
        )

    def test_2c_double_excitation_amplitude_ratios(self, fig1a_run):
        params = fig1a_run.params
        idx = int(np.argmin(np.abs(fig1a_run.eps_t - 2.0)))
        state = fig1a_run.states[idx]
        table = dq.to_interaction_amplitudes(state, fig1a_run.times[idx], params)
        r2 = abs(table.d[0]) ** 2 / abs(table.a[2]) ** 2
        r4 = abs(table.d[2]) ** 2 / abs(table.a[4]) ** 2
        ok = abs(r2 - 2.0) / 2.0 < 0.10 and abs(r4 - 4.0 / 3.0) / (4.0 / 3.0) < 0.10
        report(
            "2c |d|^2/|a|^2 ratios", ok,
            f"m=2: {r2:.3f} (expect 2), m=4: {r4:.3f} (expect 4/3 = 1.333) at "
            "eps_t = 2 (tol 10%)",
        )


class TestCriterion3Suppression:
    def test_detuning_and_disbalance_suppression(self, fig1a_run, suppression_runs):
        i4 = int(np.argmin(np.abs(fig1a_run.eps_t - 4.0)))
        baseline = fig1a_run.records[i4].mean_n
        detuned, disbalanced = suppression_runs
        nx = detuned.records[-1].mean_n
        ng = disbalanced.records[-1].mean_n
        ok = nx < 0.1 * baseline and ng < 0.1 * baseline
        report(
            "3 suppression", ok,
            f"baseline <n>(4) = {baseline:.3f}; x = 4 eps gives {nx:.2e} "
            f"({nx / baseline:.1%}), g2 - g1 = 4 eps gives {ng:.2e} "
            f"({ng / baseline:.1%}) (tol < 10%)",
        )


def _p0_series(traj):
    return np.array([abs(s.amplitude("g", "g", 0)) ** 2 for s in traj.states])


class TestCriterion4SingleAtomCeiling:
    def test_two_photon_ceiling_and_return_law(self, single_atom_two_photon_run):
        traj = single_atom_two_photon_run
        q = traj.params.q
        mean_max = float(traj.column("mean_n").max())
        p0 = _p0_series(traj)
        pred = np.cos(q * traj.times) ** 2
        dev = float(np.abs(p0 - pred).max())
        ok = mean_max <= 2.1 and dev < 0.05
        report(
            "4 single-atom two-photon ceiling", ok,
            f"max <n> = {mean_max:.3f} (<= 2.1) over two periods; "
            f"max |P0 - cos^2(qt)| = {dev:.3f} (tol 0.05)",
        )


class TestCriterion5EqualCouplingCeiling:
    def test_two_photon_branch(self, equal_coupling_two_photon_run):
        traj = equal_coupling_two_photon_run
        q = traj.params.q
        rate = math.sqrt(2.0 / 3.0)
        mean_max = float(traj.column("mean_n").max())
        p0 = _p0_series(traj)
        pred = np.cos(rate * q * traj.times) ** 2
        dev = float(np.abs(p0 - pred).max())
        ok = mean_max <= 2.1 and dev < 0.05
        report(
            "5 equal-coupling two-photon branch", ok,
            f"max <n> = {mean_max:.3f} (<= 2.1); "
            f"max |P0 - cos^2(sqrt(2/3) qt)| = {dev:.3f} (tol 0.05)",
        )


class TestCriterion6DispersiveSqueezing:
    def _window(self, traj):
        mean_n = traj.column("mean_n")
        return mean_n > 0.2

    def test_6a_population_ratios(self, fig2a_run):
        p = fig2a_run.params
        z1sq, z2sq = p.zeta(1) ** 2, p.zeta(2) ** 2
        w = self._window(fig2a_run)
        mean_n = traj_n = fig2a_run.column("mean_n")[w]
        r1 = fig2a_run.column("P_e1")[w] / traj_n
        r2 = fig2a_run.column("P_e2")[w] / traj_n
        d1 = float(np.max(np.abs(r1 - z1sq)) / z1sq)
        d2 = float(np.max(np.abs(r2 - z2sq)) / z2sq)
        ok = d1 < 0.20 and d2 < 0.20
        report(
            "6a dispersive population ratios", ok,
            f"P_e1/<n> within {d1:.1%} of zeta1^2 = 0.01, P_e2/<n> within "
            f"{d2:.1%} of zeta2^2 = {z2sq:.2e} (tol 20%) wherever <n> > 0.2",
        )

    def test_6b_double_excitation_small(self, fig2a_run):
        p = fig2a_run.params
        z1 = p.zeta(1)
        w = self._window(fig2a_run)
        pe12 = fig2a_run.column("P_e1e2")[w]
        bound = 5 * z1**4 * fig2a_run.column("mean_n")[w] ** 2 + 1e-4
        margin = float(np.max(pe12 / bound))
        report(
            "6b joint excitation bound", margin < 1.0,
            f"max P_e1e2/(5 zeta1^4 <n>^2 + 1e-4) = {margin:.2f} (< 1)",
        )

    def test_6c_analytic_mean_photon(self, fig2a_run):
        p = fig2a_run.params
        w = self._window(fig2a_run)
        ts = fig2a_run.times[w]
        n_num = fig2a_run.column("mean_n")[w]
        n_an = np.array([dq.dispersive_observables(t, p).mean_n for t in ts])
        dev = float(np.max(np.abs(n_an - n_num) / n_num))
        report(
            "6c dispersive growth law", dev < 0.15,
            f"analytic vs numeric <n> max rel dev {dev:.2%} (tol 15%) up to "
            f"eps_t = {fig2a_run.eps_t[-1]:.2f}",
        )


class TestCriterion7DoubleExcitation:
    def test_field_stays_near_vacuum(self, fig2b_run):
        pe12 = fig2b_run.column("P_e1e2")
        ipk = int(np.argmax(pe12))
        n_max = float(fig2b_run.column("mean_n")[: ipk + 1].max())
        report(
            "7 field near vacuum", n_max < 0.1,
            f"max <n> = {n_max:.3f} (< 0.1) up to the first P_e1e2 peak",
        )

    def test_first_peak_matches_pair_rabi_law(self, fig2b_run):
        p = fig2b_run.params
        pe12 = fig2b_run.column("P_e1e2")
        ipk = int(np.argmax(pe12))
        peak_num = float(pe12[ipk])
        t_num = float(fig2b_run.times[ipk])
        ref = dq.double_excitation_probability(0.0, p)
        peak_an = ref.peak
        dev = abs(peak_num - peak_an) / peak_an
        report(
            "7 pair-excitation first peak", dev < 0.10,
            f"numeric peak {peak_num:.3f} at eps_t = {p.epsilon * t_num:.1f} vs "
            f"analytic {peak_an:.3f} at eps_t = {p.epsilon * ref.t_peak:.1f}: "
            f"rel dev {dev:.1%} (tol 10%); the formula-tuned x misses a "
            "higher-order shift ~5e-5 comparable to the pair Rabi rate",
        )


class TestCriterion8Invariants:
    DRAWS = [
        dict(epsilon=2e-3, x=0.0, g1=0.04, g2=0.04),
        dict(epsilon=5e-3, x=0.003, g1=0.02, g2=0.01, Delta1=0.3, Delta2=-0.2),
        dict(epsilon=1e-3, x=-0.02, g1=0.05, g2=0.0, Delta1=0.0, Delta2=0.4),
        dict(epsilon=8e-3, x=0.01, g1=0.0, g2=0.03, Delta1=-0.45, Delta2=0.0),
        dict(epsilon=2e-3, x=0.006, g1=0.04, g2=0.03, Delta1=0.4, Delta2=0.45),
    ]

    def test_8a_norm_and_parity(self):
        worst_norm = worst_parity = 0.0
        for kw in self.DRAWS:
            traj = run_to(dq.ModelParams(**kw), 0.2, 16, tail_action="ignore")
            worst_norm = max(worst_norm, max(r.norm_error for r in traj.records))
            worst_parity = max(worst_parity, max(r.parity_leakage for r in traj.records))
        ok = worst_norm <= 1e-8 and worst_parity <= 1e-8
        report(
            "8a norm/parity", ok,
            f"worst norm error {worst_norm:.1e}, worst parity leakage "
            f"{worst_parity:.1e} over {len(self.DRAWS)} parameter draws (tol 1e-8)",
        )

    def test_8b_hermiticity(self):
        worst = 0.0
        ops = dq.build_operators(dq.build_basis(10))
        for kw in self.DRAWS:
            p = dq.ModelParams(**kw)
            for t in (0.0, 1.7, 23.4):
                H = dq.hamiltonian_at(t, p, ops)
                worst = max(worst, abs((H - H.conj().T)).max())
        p2a = fig2a_params()
        Hd = dq.dispersive_effective_hamiltonian(p2a, ops)
        worst = max(worst, abs((Hd - Hd.conj().T)).max())
        pw = dq.ModelParams(epsilon=2e-2, x=0.0, g1=1e-3, g2=1e-3)
        Hw = dq.double_weak_effective_hamiltonian(pw, ops)
        worst = max(worst, abs((Hw - Hw.conj().T)).max())
        report(
            "8b Hermiticity", worst <= 1e-13,
            f"max |H - H^dag| element = {worst:.1e} over all assembled "
            "generators (tol 1e-13)",
        )

    def test_8c_frame_invariance(self):
        basis = dq.build_basis(12)
        worst = 0.0
        for seed, kw in enumerate(self.DRAWS):
            p = dq.ModelParams(**kw)
            state = random_state(basis, seed=seed)
            phi = dq.to_interaction_frame(state, 11.3 + seed, p)
            worst = max(worst, abs(dq.mean_photon(phi) - dq.mean_photon(state)))
            pa, pb = (dq.excitation_probabilities(s) for s in (state, phi))
            worst = max(worst, max(abs(pa[k] - pb[k]) for k in pa))
        report(
            "8c frame invariance", worst <= 1e-12,
            f"max change of <n>/populations under the frame map: {worst:.1e}",
        )

    def test_8d_uncertainty_product(self, fig2a_run):
        prods = (fig2a_run.column("var_Xplus") * fig2a_run.column("var_Xminus"))
        basis = dq.build_basis(12)
        rand = [
            dq.quadrature_variances(random_state(basis, seed=s)) for s in range(10)
        ]
        prods = np.concatenate(
            [prods, [q["var_Xplus"] * q["var_Xminus"] for q in rand]]
        )
        worst = float(prods.min())
        report(
            "8d uncertainty product", worst >= 0.25 * (1 - 1e-6),
            f"min var(X+)var(X-) = {worst:.6f} (>= 0.25)",
        )

    def test_8e_step_halving(self):
        params = dq.ModelParams(**FIG1A)
        basis = dq.build_basis(100)
        state0 = dq.init_state("g", "g", 0, basis)
        T = 2.0 / params.epsilon
        n1 = dq.evolve(state0, params, T, dq.EvolverOptions(dt=0.01)).records[-1].mean_n
        n2 = dq.evolve(state0, params, T, dq.EvolverOptions(dt=0.005)).records[-1].mean_n
        rel = abs(n1 - n2) / n2
        report(
            "8e dt halving", rel < 1e-4,
            f"<n>(eps_t=2) changes by {rel:.2e} when dt halves (tol 1e-4)",
        )


class TestCriterion9LimitConsistency:
    def test_second_atom_vanishing_coupling(self):
        g1, g2, D2 = 0.04, 1e-6, 0.45
        p = dq.ModelParams(epsilon=2e-3, x=0.0, g1=g1, g2=g2, Delta2=D2)
        d2 = p.delta(2)
        G2 = math.sqrt(2 * g1**2 + d2**2 / 4)
        p = p.replace(x=(1.5 * d2 + G2) / 2)
        single = dq.ModelParams(epsilon=2e-3, x=g1 / math.sqrt(2), g1=g1)
        worst = abs(p.x - g1 / math.sqrt(2))
        z2 = abs(p.zeta(2))
        residual_b = 0.0
        for qt in np.linspace(0.0, 2 * math.pi, 13):
            t = qt / p.q
            sol = dq.second_atom_dispersive_amplitudes(t, p, branch=+1)
            ref = dq.two_photon_amplitudes(t, single, alpha=-1, beta=+1)
            worst = max(
                worst,
                abs(sol.a0 - ref.a0),
                abs(sol.a2 - ref.table.a[2]),
                abs(sol.c1 - ref.table.c[1]),
            )
            residual_b = max(residual_b, abs(sol.b1), abs(sol.d0))
        ok = worst < 1e-6 and residual_b <= 2 * math.sqrt(2) * z2
        report(
            "9 single-atom limit", ok,
            f"max coefficient deviation {worst:.1e} (tol 1e-6) at g2 = 1e-6; "
            f"residual atom-2 amplitudes {residual_b:.1e} = O(zeta2 = {z2:.1e})",
        )
