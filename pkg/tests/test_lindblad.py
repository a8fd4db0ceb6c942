import numpy as np
import pytest
import scipy.linalg as sla

from starkprobe.lindblad import (
    DensityMatrix,
    build_liouvillian,
    devectorize,
    propagate,
    trace_distance,
    vectorize,
)
from starkprobe.model import LatticeSpec, build_stark, middle_site, site_state


def random_density(rng, dim):
    A = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    rho = A @ A.conj().T
    return rho / np.trace(rho).real


class TestVectorization:
    def test_columnwise_order(self):
        rho = np.array([["a", "c"], ["b", "d"]], dtype=object)
        # numeric stand-in with distinguishable entries
        m = np.array([[1.0, 3.0], [2.0, 4.0]])
        assert np.array_equal(vectorize(m), [1.0, 2.0, 3.0, 4.0])
        assert rho is not None

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        rho = random_density(rng, 5)
        assert np.array_equal(devectorize(vectorize(rho)), rho)

    def test_devectorize_rejects_non_square_length(self):
        with pytest.raises(ValueError):
            devectorize(np.arange(5, dtype=complex))

    def test_sandwich_identity(self):
        # vec(A rho B) = (B^T kron A) vec(rho), the rule behind Eq.-style
        # vectorized generators; checked on random triples.
        rng = np.random.default_rng(42)
        for _ in range(5):
            A, rho, B = (rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
                         for _ in range(3))
            direct = vectorize(A @ rho @ B)
            kron = np.kron(B.T, A) @ vectorize(rho)
            assert np.abs(direct - kron).max() < 1e-12


class TestDensityMatrix:
    def test_valid(self):
        dm = DensityMatrix(np.diag([0.25, 0.75]).astype(complex))
        assert dm.dim == 2
        assert dm.purity() == pytest.approx(0.625)

    def test_rejects_bad_trace(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.diag([0.5, 0.6]))

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.array([[0.5, 0.1], [0.3, 0.5]]))

    def test_rejects_negative_eigenvalue(self):
        with pytest.raises(ValueError):
            DensityMatrix(np.diag([1.2, -0.2]))

    def test_from_pure(self):
        dm = DensityMatrix.from_pure(np.array([1.0, 1.0j]) / np.sqrt(2))
        assert dm.purity() == pytest.approx(1.0)


class TestLiouvillian:
    def test_unitary_spectrum_is_bohr_frequencies(self):
        spec = LatticeSpec(4, 1.0, 0.3, 0.0)
        gen = build_liouvillian(spec).entries
        w = np.linalg.eigvalsh(build_stark(spec).entries)
        expected = np.sort_complex((-1j * (np.subtract.outer(w, w))).flatten())
        got = np.sort_complex(sla.eigvals(gen))
        assert np.abs(np.sort(got.imag) - np.sort(expected.imag)).max() < 1e-10
        assert np.abs(got.real).max() < 1e-10

    def test_two_site_pure_dephasing_rate(self):
        # J = 0: the coherence obeys d rho_12/dt = -gamma rho_12, so -gamma
        # must appear in the spectrum on the coherence subspace.
        gen = build_liouvillian(LatticeSpec(2, 1e-12, 0.0, 1.0)).entries
        w = np.sort(sla.eigvals(gen).real)
        assert np.abs(w - np.array([-1.0, -1.0, 0.0, 0.0])).max() < 1e-9

    @pytest.mark.parametrize("L", [2, 4, 7, 10])
    def test_cptp_spectrum_nonpositive(self, L):
        gen = build_liouvillian(LatticeSpec(L, 1.0, 0.2, 0.3)).entries
        assert sla.eigvals(gen).real.max() < 1e-10

    def test_trace_preservation_functional(self):
        spec = LatticeSpec(5, 1.0, 0.1, 0.4)
        gen = build_liouvillian(spec).entries
        rng = np.random.default_rng(1)
        vec_id = vectorize(np.eye(5, dtype=complex))
        for _ in range(4):
            v = vectorize(random_density(rng, 5))
            assert abs(np.vdot(vec_id, gen @ v)) < 1e-10


class TestPropagate:
    def test_matches_unitary_at_gamma_zero(self):
        spec = LatticeSpec(8, 1.0, 0.2, 0.0)
        psi0 = site_state(8, middle_site(8))
        rho0 = DensityMatrix.from_pure(psi0)
        times = [1.0, 3.0, 7.0]
        out = propagate(rho0, spec, times)
        H = build_stark(spec).entries
        for t, dm in zip(times, out):
            U = sla.expm(-1j * H * t)
            exact = U @ rho0.entries @ U.conj().T
            assert trace_distance(dm, exact) < 1e-9

    def test_diagonal_state_stationary_without_hopping(self):
        spec = LatticeSpec(3, 1e-14, 0.5, 0.8)
        rho0 = DensityMatrix(np.diag([0.2, 0.5, 0.3]).astype(complex))
        out = propagate(rho0, spec, [2.0, 10.0])
        for dm in out:
            assert trace_distance(dm, rho0) < 1e-9

    def test_two_site_analytic_coherence(self):
        # oracle: rho_12(t) = 0.5 exp(-gamma t) exp(-i h (1-2) t)
        gamma, h = 0.5, 0.7
        spec = LatticeSpec(2, 1e-14, h, gamma)
        plus = np.array([1.0, 1.0]) / np.sqrt(2)
        times = np.array([0.5, 1.0, 2.5])
        out = propagate(DensityMatrix.from_pure(plus), spec, times)
        for t, dm in zip(times, out):
            expected = 0.5 * np.exp(-gamma * t) * np.exp(-1j * h * (1 - 2) * t)
            assert abs(dm.entries[0, 1] - expected) < 1e-10

    def test_trace_and_purity_behavior(self):
        spec = LatticeSpec(10, 1.0, 0.1, 0.3)
        rho0 = DensityMatrix.from_pure(site_state(10, 5))
        times = np.linspace(2.0, 40.0, 20)
        out = propagate(rho0, spec, times)
        purities = [dm.purity() for dm in out]
        for dm in out:
            assert abs(np.trace(dm.entries) - 1.0) < 1e-10
        assert all(p2 <= p1 + 1e-10 for p1, p2 in zip(purities, purities[1:]))

    def test_semigroup_property(self):
        spec = LatticeSpec(6, 1.0, 0.25, 0.15)
        rho0 = DensityMatrix.from_pure(site_state(6, 3))
        direct = propagate(rho0, spec, [7.0])[0]
        mid = propagate(rho0, spec, [3.0])[0]
        chained = propagate(mid, spec, [4.0])[0]
        assert trace_distance(direct, chained) < 1e-9

    def test_uniform_grid_single_exponential_consistency(self):
        # the gap cache must give the same answer as one-shot propagation
        spec = LatticeSpec(5, 1.0, 0.3, 0.2)
        rho0 = DensityMatrix.from_pure(site_state(5, 3))
        grid = propagate(rho0, spec, np.arange(1.0, 11.0))
        oneshot = propagate(rho0, spec, [10.0])[0]
        assert trace_distance(grid[-1], oneshot) < 1e-10

    def test_rejects_unsorted_times(self):
        spec = LatticeSpec(3, 1.0, 0.1, 0.1)
        rho0 = DensityMatrix(np.eye(3, dtype=complex) / 3)
        with pytest.raises(ValueError):
            propagate(rho0, spec, [2.0, 1.0])
        with pytest.raises(ValueError):
            propagate(rho0, spec, [-1.0, 1.0])

    def test_positivity_loss_on_anti_dissipative_generator(self):
        # reversing the dissipator sign amplifies coherences until an
        # eigenvalue dives below the hard floor
        from starkprobe.errors import PositivityLoss

        spec = LatticeSpec(2, 1.0, 0.0, 0.8)
        unitary = build_liouvillian(LatticeSpec(2, 1.0, 0.0, 0.0)).entries
        dissipator = build_liouvillian(spec).entries - unitary
        bad = unitary - dissipator
        plus = np.array([1.0, 1.0]) / np.sqrt(2)
        with pytest.raises(PositivityLoss):
            propagate(DensityMatrix.from_pure(plus), spec, [5.0], generator=bad)
