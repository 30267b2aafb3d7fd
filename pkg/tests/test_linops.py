import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trajkit.ensembles import TrajectoryRecord
from trajkit.errors import TruncationError
from trajkit.linops import (
    TruncationPolicy,
    build_boson_ops,
    build_spin_ops,
    tensor,
    validate_truncation,
)


class TestSpinOps:
    def test_single_spin_is_pauli_over_two(self):
        s = build_spin_ops(1)
        assert np.allclose(np.diag(s.sz), [-0.5, 0.5])
        assert np.allclose(s.sp, [[0, 0], [1, 0]])

    def test_two_spins_ladder_amplitude(self):
        s = build_spin_ops(2)
        # S+|S=1, m=-1> = sqrt(2) |m=0>
        psi = np.array([1.0, 0.0, 0.0], dtype=complex)
        out = s.sp @ psi
        assert np.allclose(out, [0.0, np.sqrt(2.0), 0.0])

    def test_casimir_n4_by_diagonalization(self):
        s = build_spin_ops(4)
        s2 = s.sx @ s.sx + s.sy @ s.sy + s.sz @ s.sz
        eigs = np.linalg.eigvalsh(s2)
        assert np.allclose(eigs, 6.0, atol=1e-12)  # S(S+1) = 2*3

    @settings(deadline=None, max_examples=25)
    @given(st.integers(min_value=1, max_value=40))
    def test_su2_algebra(self, n):
        s = build_spin_ops(n)
        scale = np.linalg.norm(s.sx)
        comm = s.sx @ s.sy - s.sy @ s.sx
        assert np.abs(comm - 1j * s.sz).max() <= 1e-12 * max(scale, 1.0)
        assert np.abs(s.sp - s.sm.conj().T).max() == 0.0
        casimir = s.sx @ s.sx + s.sy @ s.sy + s.sz @ s.sz
        spin = 0.5 * n
        assert np.allclose(casimir, spin * (spin + 1) * np.eye(n + 1), atol=1e-10)

    def test_hermiticity(self):
        s = build_spin_ops(5)
        for op in (s.sx, s.sy, s.sz):
            assert np.abs(op - op.conj().T).max() < 1e-14

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            build_spin_ops(0)


class TestBosonOps:
    def test_mmax1_matrix(self):
        b = build_boson_ops(1)
        assert np.allclose(b.a, [[0, 1], [0, 0]])

    def test_number_diagonal(self):
        b = build_boson_ops(3)
        assert np.allclose(b.n, np.diag([0, 1, 2, 3]))
        assert np.allclose(b.adag @ b.a, b.n)

    def test_commutator_breaks_only_at_edge(self):
        b = build_boson_ops(5)
        comm = b.a @ b.adag - b.adag @ b.a
        defect = comm - np.eye(6)
        # truncation shows up only in the last diagonal entry ([a,a†]|5> = -5|5>)
        assert abs(defect[5, 5] + 6.0) < 1e-12
        defect[5, 5] = 0.0
        assert np.abs(defect).max() < 1e-12

    def test_lowering_action(self):
        b = build_boson_ops(4)
        for m in range(1, 5):
            e = np.zeros(5)
            e[m] = 1.0
            out = b.a @ e
            assert abs(out[m - 1] - np.sqrt(m)) < 1e-15
        vac = np.zeros(5)
        vac[0] = 1.0
        assert np.abs(b.a @ vac).max() == 0.0

    def test_rejects_small_cutoff(self):
        with pytest.raises(ValueError):
            build_boson_ops(0)


def test_tensor_embedding():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    b = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    left = tensor(a, np.eye(4)) @ tensor(np.eye(3), b)
    assert np.abs(left - tensor(a, b)).max() < 1e-12


class TestTruncation:
    def _record(self, series, times=None):
        series = np.asarray(series, dtype=float)
        times = np.arange(series.size, dtype=float) if times is None else times
        return TrajectoryRecord(seed=0, times=times,
                                observables={"edge_occupation": series},
                                jump_times=np.array([]),
                                jump_channels=np.array([]))

    def test_vacuum_passes_with_zero(self):
        policy = TruncationPolicy(mmax=4, epsilon=1e-5, n_scale=4)
        report = validate_truncation(self._record(np.zeros(10)), policy)
        assert report.passed and report.max_occupation == 0.0

    def test_default_epsilon_matches_acceptance_threshold(self):
        assert TruncationPolicy(mmax=4).epsilon == 1e-5

    def test_fail_reports_max_and_time(self):
        policy = TruncationPolicy(mmax=4, epsilon=1e-5)
        series = np.array([0.0, 2e-5, 5e-4, 1e-6])
        report = validate_truncation(self._record(series), policy)
        assert not report.passed
        assert report.max_occupation == 5e-4
        assert report.time_of_max == 2.0

    def test_missing_channel_raises(self):
        rec = TrajectoryRecord(seed=0, times=np.arange(3.0), observables={},
                               jump_times=np.array([]), jump_channels=np.array([]))
        with pytest.raises(TruncationError):
            validate_truncation(rec, TruncationPolicy(mmax=4))

    def test_chi_is_cutoff_to_size_ratio(self):
        policy = TruncationPolicy(mmax=9, n_scale=10)
        assert policy.chi == 1.0


@pytest.mark.slow
def test_doubling_cutoff_changes_observables_below_ten_epsilon():
    """Truncation regression on a driven Tavis-Cummings oracle run."""
    from trajkit.lindblad import DensityMatrix, evolve_density_matrix
    from trajkit.models import (TavisCummingsParams, build_tavis_cummings,
                                tc_initial_state)

    grid = np.linspace(0.0, 6.0, 13)
    results = {}
    for mmax in (6, 12):
        params = TavisCummingsParams(n_spins=3, omega=0.06, coupling=0.2,
                                     mmax=mmax)
        model = build_tavis_cummings(params)
        rho0 = DensityMatrix.from_pure(tc_initial_state(params, "psi0").amplitudes)
        results[mmax] = evolve_density_matrix(rho0, model, grid, 2e-3)
    eps = 1e-5
    r6 = results[6].meta
    # the small-cutoff run must itself satisfy the policy for the bound to apply
    assert results[6].observables["edge_occupation"].max() <= eps
    for name in ("m_z", "n_ph", "m_q", "S_E"):
        diff = np.abs(results[6].observables[name] - results[12].observables[name])
        assert diff.max() < 10.0 * eps, name
