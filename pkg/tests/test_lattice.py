import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ballistic_lab.exceptions import ValidationError
from ballistic_lab.lattice import (
    LimitPeriodicFamily,
    PeriodicJacobi,
    WavePacket,
    build_truncation,
    coefficient_distance,
    commutator_operator,
    dump_operator,
    load_operator,
    packet_moment,
)

from conftest import jacobi_operators


class TestPeriodicJacobi:
    def test_rejects_bad_input(self):
        with pytest.raises(ValidationError):
            PeriodicJacobi(0, [], [])
        with pytest.raises(ValidationError):
            PeriodicJacobi(2, [1.0, 0.0], [0.0, 0.0])
        with pytest.raises(ValidationError):
            PeriodicJacobi(2, [1.0], [0.0, 0.0])
        with pytest.raises(ValidationError):
            PeriodicJacobi(1, [np.inf], [0.0])

    def test_class_bound(self):
        J = PeriodicJacobi(2, [0.5, 1.0], [0.3, -1.2])
        assert J.norm_bound == pytest.approx(1.2 + 2.0)
        assert J.class_bound == pytest.approx(3.2)
        assert J.in_class(3.2) and not J.in_class(3.0)
        assert PeriodicJacobi(1, [0.1], [0.0]).class_bound == pytest.approx(10.0)

    def test_site_convention(self):
        J = PeriodicJacobi(2, [1.0, 2.0], [5.0, 6.0])
        assert J.a_at(1) == 1.0 and J.a_at(2) == 2.0 and J.a_at(0) == 2.0 and J.a_at(-1) == 1.0
        assert J.b_at(3) == 5.0

    def test_json_round_trip(self):
        J = PeriodicJacobi(3, [1.0, 0.5, 2.0], [0.1, 0.2, -0.3])
        assert load_operator(dump_operator(J)) == J
        assert json.loads(dump_operator(J)) == {"q": 3, "a": [1.0, 0.5, 2.0], "b": [0.1, 0.2, -0.3]}

    def test_immutable(self):
        J = PeriodicJacobi.free(2)
        with pytest.raises(ValueError):
            J.a[0] = 3.0


class TestFamily:
    def stages(self):
        return [
            PeriodicJacobi(1, [1.0], [0.0]),
            PeriodicJacobi(2, [1.0, 1.0], [0.1, -0.1]),
            PeriodicJacobi(4, [1.0] * 4, [0.1, -0.1, 0.1, -0.1]),
        ]

    def test_divisibility_enforced(self):
        st = self.stages()
        with pytest.raises(ValidationError):
            LimitPeriodicFamily([st[1], st[1]], 1.0)
        with pytest.raises(ValidationError):
            LimitPeriodicFamily([st[1], PeriodicJacobi.free(3)], 1.0)
        with pytest.raises(ValidationError):
            LimitPeriodicFamily(st, 1.0, kappa=10.0)
        with pytest.raises(ValidationError):
            LimitPeriodicFamily(st, 0.0)

    def test_time_scales_exact(self):
        F = LimitPeriodicFamily(self.stages(), 1.0, kappa=11, c0=6)
        assert F.time_scales() == [str(6**22), str(6**44)]
        assert np.all(np.diff(F.log10_time_scales()) > 0)

    def test_time_scales_non_integral(self):
        F = LimitPeriodicFamily(self.stages()[:2], 1.0, kappa=10.5, c0=2.5)
        s = F.time_scales()[0]
        mant, exp = s.split("e+")
        assert float(mant) * 10 ** int(exp) == pytest.approx(2.5**21, rel=1e-12)

    def test_stage_distances(self):
        F = LimitPeriodicFamily(self.stages(), 1.0)
        d = F.stage_distances()
        assert d[-1] == 0.0
        assert d[0] == pytest.approx(0.3)

    def test_round_trip(self):
        F = LimitPeriodicFamily(self.stages(), 1.5, 12.0, 7.0)
        G = load_operator(dump_operator(F))
        assert isinstance(G, LimitPeriodicFamily)
        assert G.periods == [1, 2, 4] and G.eta == 1.5 and G.c0 == 7.0


class TestTruncation:
    def test_free_n1(self):
        T = build_truncation(PeriodicJacobi.free(1), 1)
        np.testing.assert_array_equal(T.to_dense(), [[0, 1, 0], [1, 0, 1], [0, 1, 0]])

    def test_alignment(self):
        # site 1 carries a_1 = 1: bonds (-2,-1),(−1,0),(0,1),(1,2) carry a_{-2},a_{-1},a_0,a_1
        T = build_truncation(PeriodicJacobi(2, [1.0, 2.0], [0.0, 0.0]), 2)
        np.testing.assert_array_equal(T.offdiag, [2.0, 1.0, 2.0, 1.0])
        assert T.sites.tolist() == [-2, -1, 0, 1, 2]

    def test_n0_and_negative(self):
        J = PeriodicJacobi(2, [1.0, 1.0], [3.0, 4.0])
        T = build_truncation(J, 0)
        assert T.to_dense().tolist() == [[4.0]]  # site 0 carries b_0 = b_q
        with pytest.raises(ValidationError):
            build_truncation(J, -1)

    def test_family_uses_deepest(self):
        st = [PeriodicJacobi.free(1), PeriodicJacobi(2, [1.0, 1.0], [0.5, -0.5])]
        T = build_truncation(LimitPeriodicFamily(st, 1.0), 3)
        assert T.diag.tolist() == [0.5, -0.5, 0.5, -0.5, 0.5, -0.5, 0.5]

    @given(jacobi_operators(), st.integers(1, 40))
    def test_norm_within_class_bound(self, J, N):
        T = build_truncation(J, N)
        assert np.max(np.abs(T.eigensystem[0])) <= J.class_bound + 1e-12

    @given(jacobi_operators(), st.integers(1, 6))
    def test_periodic_coefficients(self, J, k):
        T = build_truncation(J, k * J.q)
        d = T.diag
        assert np.array_equal(d[J.q :], d[: -J.q])


class TestCommutator:
    def test_free_delta(self):
        T = build_truncation(PeriodicJacobi.free(1), 5)
        A = commutator_operator(T)
        e0 = np.zeros(T.size)
        e0[5] = 1.0
        out = A @ e0
        assert out[4] == 1j and out[6] == -1j
        assert np.count_nonzero(out) == 2

    def test_shift_invariance(self):
        T = build_truncation(PeriodicJacobi(2, [1.0, 0.5], [0.2, 0.7]), 6)
        assert (commutator_operator(T) - commutator_operator(T.shifted(3.0))).nnz == 0

    def test_norm_free(self):
        T = build_truncation(PeriodicJacobi.free(1), 600)
        A = commutator_operator(T).toarray()
        assert np.max(np.abs(np.linalg.eigvalsh(A))) == pytest.approx(2.0, abs=1e-4)

    @given(jacobi_operators(), st.integers(1, 20))
    def test_hermitian_zero_diag(self, J, N):
        A = commutator_operator(build_truncation(J, N)).toarray()
        assert np.allclose(A, A.conj().T, atol=0)
        assert np.all(np.diag(A) == 0)
        assert np.max(np.abs(np.linalg.eigvalsh(A))) <= 2 * J.a.max() + 1e-12


class TestPackets:
    def test_moment_examples(self):
        assert packet_moment(WavePacket.delta(0), 2) == 1.0
        assert packet_moment(WavePacket.delta(5), 2) == 26.0
        phi = WavePacket.from_sites({1: 2**-0.5, -1: 2**-0.5})
        assert packet_moment(phi, 1) == pytest.approx(2.0)
        with pytest.raises(ValidationError):
            packet_moment(phi, 0)

    @given(
        st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False), min_size=1, max_size=8),
        st.integers(-20, 20),
        st.floats(0.1, 4.0),
    )
    def test_moment_dominates_norm(self, amps, off, p):
        phi = WavePacket(off, np.array(amps))
        assert packet_moment(phi, p) >= phi.norm() ** 2 * (1 - 1e-12)

    def test_arithmetic(self):
        a = WavePacket(0, [1.0, 2.0])
        b = WavePacket(1, [1.0, 1.0])
        assert (a - b).amplitudes.tolist() == [1.0, 1.0, -1.0]
        assert (a + b).support == (0, 2)
        assert a.inner(b) == 2.0
        assert (2 * a).norm() == pytest.approx(2 * np.sqrt(5))
        assert a.position().amplitudes.tolist() == [0.0, 2.0]

    def test_on_window_escape(self):
        with pytest.raises(ValidationError):
            WavePacket(5, [1.0]).on_window(-2, 2)


def test_coefficient_distance():
    J1 = PeriodicJacobi(2, [1.0, 1.0], [0.0, 0.0])
    J2 = PeriodicJacobi(3, [1.0, 1.1, 1.0], [0.0, 0.0, 0.05])
    assert coefficient_distance(J1, J2) == pytest.approx(0.3)
    assert coefficient_distance(J1, J1) == 0.0
