import numpy as np
import pytest

import dceqed as dq
from dceqed.model import ATOM_LABELS


class TestModelParams:
    def test_derived_quantities(self):
        p = dq.ModelParams(epsilon=2e-3, x=0.1)
        assert p.q == pytest.approx(2e-3 * 1.1 / 4, rel=1e-15)
        assert p.eta == pytest.approx(2.2, rel=1e-15)
        p = dq.ModelParams(epsilon=1e-3, g1=3e-2, g2=4e-2)
        assert p.G == pytest.approx(5e-2, rel=1e-14)

    def test_dispersive_accessors(self):
        p = dq.ModelParams(epsilon=2e-3, g1=0.04, g2=0.03, Delta1=0.4, Delta2=0.45)
        assert p.delta(1) == pytest.approx(0.004)
        assert p.delta(2) == pytest.approx(0.002)
        assert p.zeta(1) == pytest.approx(0.1)
        assert p.zeta(2) == pytest.approx(1 / 15)

    def test_accessors_reject_zero_detuning(self):
        p = dq.ModelParams(epsilon=2e-3, g1=0.04)
        with pytest.raises(ValueError, match="Delta_1"):
            p.delta(1)
        with pytest.raises(ValueError, match="Delta_2"):
            p.zeta(2)

    def test_xi_rejects_zero_q(self):
        p = dq.ModelParams(epsilon=0.0, g1=0.04)
        with pytest.raises(ValueError, match="q = 0"):
            p.xi(1)

    def test_large_epsilon_warns(self):
        with pytest.warns(UserWarning, match="weak-modulation"):
            dq.ModelParams(epsilon=0.2)
        with pytest.raises(ValueError):
            dq.ModelParams(epsilon=1.5)


class TestBasis:
    def test_dimension_counting(self):
        assert dq.build_basis(2).dimension == 12
        assert dq.build_basis(150).dimension == 604

    def test_round_trip_all_indices(self):
        basis = dq.build_basis(5)
        seen = set()
        for i in range(basis.dimension):
            s1, s2, m = basis.labels(i)
            assert basis.index(s1, s2, m) == i
            seen.add((s1, s2, m))
        assert len(seen) == basis.dimension

    def test_specific_round_trip(self):
        basis = dq.build_basis(10)
        i = basis.index("g", "e", 3)
        assert basis.labels(i) == ("g", "e", 3)

    def test_ordering_m_fastest(self):
        basis = dq.build_basis(4)
        assert basis.index("g", "g", 0) == 0
        assert basis.index("g", "g", 1) == 1
        assert basis.index("g", "e", 0) == 5
        assert basis.index("e", "g", 0) == 10
        assert basis.index("e", "e", 4) == 19

    def test_rejects_small_n_max(self):
        for bad in (1, 0, -3):
            with pytest.raises(ValueError):
                dq.build_basis(bad)

    def test_rejects_out_of_range(self):
        basis = dq.build_basis(3)
        with pytest.raises(ValueError):
            basis.index("g", "g", 4)
        with pytest.raises(ValueError):
            basis.labels(basis.dimension)


@pytest.fixture(scope="module")
def ops():
    return dq.build_operators(dq.build_basis(6))


class TestOperators:

    def test_ladder_element(self, ops):
        basis = ops.basis
        i1 = basis.index("g", "g", 1)
        i2 = basis.index("g", "g", 2)
        assert ops.a[i1, i2] == pytest.approx(np.sqrt(2), rel=1e-15)

    def test_number_operator(self, ops):
        basis = ops.basis
        for m in range(basis.n_max + 1):
            for s1 in ATOM_LABELS:
                i = basis.index(s1, "g", m)
                assert ops.n[i, i] == pytest.approx(m)

    def test_adag_is_conjugate_transpose(self, ops):
        assert (abs(ops.adag - ops.a.conj().T)).max() == 0.0
        assert (abs(ops.adag2 - ops.a2.conj().T)).max() == 0.0

    def test_hard_truncation(self, ops):
        basis = ops.basis
        top = basis.index("g", "g", basis.n_max)
        col = ops.adag[:, top]
        assert abs(col).max() == 0.0

    def test_commutator_truncation_artifact(self, ops):
        basis = ops.basis
        comm = (ops.a @ ops.adag - ops.n).toarray()
        M = basis.n_fock
        for k in range(4):
            block = np.diag(comm)[k * M:(k + 1) * M]
            assert np.allclose(block[:-1], 1.0, atol=1e-14)
            assert block[-1] == pytest.approx(-basis.n_max)
        off = comm - np.diag(np.diag(comm))
        assert abs(off).max() == 0.0

    def test_sigma_z_action(self, ops):
        basis = ops.basis
        state = dq.init_state("e", "g", 3, basis)
        out = ops.sz1 @ state.data
        np.testing.assert_allclose(out, state.data)
        out2 = ops.sz2 @ state.data
        np.testing.assert_allclose(out2, -state.data)

    def test_atom_operators_commute(self, ops):
        c = ops.sp1 @ ops.sm2 - ops.sm2 @ ops.sp1
        assert abs(c).max() == 0.0
        c2 = ops.sp2 @ ops.a - ops.a @ ops.sp2
        assert abs(c2).max() == 0.0


class TestInitState:
    def test_ground_state(self):
        basis = dq.build_basis(4)
        s = dq.init_state("g", "g", 0, basis)
        assert s.frame == "lab"
        assert s.norm2() == 1.0
        assert s.data[basis.index("g", "g", 0)] == 1.0

    def test_mixed_regime_initial_state(self):
        basis = dq.build_basis(4)
        s = dq.init_state("e", "g", 0, basis)
        assert s.amplitude("e", "g", 0) == 1.0
        assert s.norm2() == 1.0

    def test_out_of_range_rejected(self):
        basis = dq.build_basis(4)
        with pytest.raises(ValueError):
            dq.init_state("g", "g", 5, basis)

    def test_block_views(self):
        basis = dq.build_basis(3)
        s = dq.init_state("e", "e", 2, basis)
        assert s.d[2] == 1.0
        assert np.all(s.a == 0) and np.all(s.b == 0) and np.all(s.c == 0)
