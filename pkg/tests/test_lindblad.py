import numpy as np
import pytest
import scipy.linalg

from trajkit.errors import IntegratorError
from trajkit.jump import JumpChannel, ModelSpec
from trajkit.lindblad import (
    DensityMatrix,
    evolve_density_matrix,
    lindblad_rhs,
    liouvillian_matrix,
    steady_state,
)
from trajkit.linops import build_boson_ops, build_spin_ops
from trajkit.models import (
    SuperradiantParams,
    TavisCummingsParams,
    build_superradiant,
    build_tavis_cummings,
    superradiant_initial_state,
    tc_initial_state,
)
from trajkit.observables import Channel

from conftest import random_state


class TestRhs:
    def test_free_model_gives_zero(self):
        model = ModelSpec(np.zeros((4, 4)), [], dims=(4,))
        rng = np.random.default_rng(0)
        psi = random_state(4, rng)
        rho = np.outer(psi, psi.conj())
        assert np.abs(lindblad_rhs(rho, model)).max() == 0.0

    def test_dark_state_of_photon_decay(self, tc_small):
        # H = 0 (Omega = lambda = 0), only L = a: vacuum x all-up is dark
        params = TavisCummingsParams(n_spins=4, omega=0.0, coupling=0.0, mmax=5)
        model = build_tavis_cummings(params)
        psi = tc_initial_state(params, "psi0").amplitudes
        rho = np.outer(psi, psi.conj())
        assert np.abs(lindblad_rhs(rho, model)).max() < 1e-14

    def test_rhs_is_traceless(self, tc_small):
        _, model, _ = tc_small
        rng = np.random.default_rng(1)
        m = rng.standard_normal((model.dim, model.dim)) * (1 + 1j)
        rho = m @ m.conj().T
        rho /= np.trace(rho)
        assert abs(np.trace(lindblad_rhs(rho, model))) < 1e-12

    def test_matches_branch_enumeration(self, tc_small):
        # oracle: exhaustive one-step average over jump/no-jump branches,
        # E[rho'] = U rho U^dag + dt sum_i kappa_i L rho L^dag + O(dt^2)
        _, model, _ = tc_small
        rng = np.random.default_rng(2)
        m = rng.standard_normal((model.dim, model.dim)) * (1 + 0.5j)
        rho = m @ m.conj().T
        rho /= np.trace(rho)
        dt = 1e-5
        u = scipy.linalg.expm(-1j * dt * model.h_nh)
        avg = u @ rho @ u.conj().T
        for j in model.jumps:
            avg += dt * j.rate * (j.op @ rho @ j.op.conj().T)
        finite = (avg - rho) / dt
        rhs = lindblad_rhs(rho, model)
        scale = np.abs(rhs).max()
        assert np.abs(finite - rhs).max() < 50 * dt * max(scale, 1.0)

    def test_shape_mismatch(self, tc_small):
        _, model, _ = tc_small
        with pytest.raises(ValueError, match="shape"):
            lindblad_rhs(np.eye(3), model)


class TestEvolve:
    def test_rabi_oscillation_exact(self):
        # kappa = 0, H = Omega S_x, single spin: <sigma_z>(t) = cos(Omega t)
        omega = 0.7
        spin = build_spin_ops(1)
        model = ModelSpec(
            omega * spin.sx, [],
            channels=[Channel("m_z", "linear",
                              diag=spin.m_values.astype(float), scale=2.0)],
            dims=(2,),
        )
        rho0 = DensityMatrix(np.diag([0.0, 1.0]).astype(complex))  # |up>
        grid = np.linspace(0, 10, 41)
        res = evolve_density_matrix(rho0, model, grid, 1e-3)
        assert np.abs(res.observables["m_z"] - np.cos(omega * grid)).max() < 1e-8

    def test_trace_conserved_over_1000_steps(self, tc_small):
        _, model, init = tc_small
        rho0 = DensityMatrix.from_pure(init.amplitudes)
        grid = np.linspace(0, 2.0, 5)
        res = evolve_density_matrix(rho0, model, grid, 2e-3)  # 1000 steps
        assert abs(np.trace(res.final) - 1.0) < 1e-8

    def test_invariants_at_grid_points(self, tc_small):
        _, model, init = tc_small
        rho0 = DensityMatrix.from_pure(init.amplitudes)
        grid = np.linspace(0, 1.0, 3)
        res = evolve_density_matrix(rho0, model, grid, 1e-3)
        DensityMatrix(res.final).validate()

    def test_positivity_monitor_triggers_on_coarse_step(self):
        bos = build_boson_ops(6)
        model = ModelSpec(np.zeros((7, 7)), [JumpChannel(bos.a, 40.0, "a")],
                          channels=[], dims=(7,))
        psi = np.zeros(7, dtype=complex)
        psi[6] = 1.0
        rho0 = DensityMatrix.from_pure(psi)
        with pytest.raises(IntegratorError):
            evolve_density_matrix(rho0, model, np.array([0.0, 0.5]), 0.05)

    def test_superradiant_relaxes_toward_low_mz(self):
        params = SuperradiantParams(n_spins=4, omega=0.5, temperature=0.0)
        model = build_superradiant(params)
        rho0 = DensityMatrix.from_pure(
            superradiant_initial_state(params).amplitudes
        )
        grid = np.linspace(0, 30, 31)
        res = evolve_density_matrix(rho0, model, grid, 1e-3)
        mz = res.observables["m_z"]
        assert mz[0] == pytest.approx(1.0)
        assert mz[-1] < 0.0
        # stationary by the end
        assert abs(mz[-1] - mz[-3]) < 5e-3

    def test_superradiant_relaxation_matches_trajectories(self):
        from trajkit.jump import run_ensemble

        params = SuperradiantParams(n_spins=4, omega=0.5, temperature=0.0)
        model = build_superradiant(params)
        init = superradiant_initial_state(params)
        grid = np.linspace(0, 12, 25)
        res = run_ensemble(model, init, grid, 5e-4, n_traj=512, master_seed=13)
        oracle = evolve_density_matrix(DensityMatrix.from_pure(init.amplitudes),
                                       model, grid, 1e-3)
        for name in ("m_x", "m_y", "m_z"):
            diff = np.abs(res.mean[name][1:] - oracle.observables[name][1:])
            assert np.all(diff < 3.5 * res.stderr[name][1:] + 1e-4), name

    def test_tc_stationary_phase_plateau(self):
        # low drive: magnetization settles to a stationary negative plateau
        params = TavisCummingsParams(n_spins=4, omega=0.01, coupling=0.2, mmax=6)
        model = build_tavis_cummings(params)
        rho0 = DensityMatrix.from_pure(tc_initial_state(params, "psi0").amplitudes)
        grid = np.linspace(0, 120, 61)
        res = evolve_density_matrix(rho0, model, grid, 2e-3)
        mz = res.observables["m_z"]
        tail = mz[grid > 90]
        assert np.ptp(tail) < 1e-2
        assert tail.mean() < 0.0


class TestSteadyState:
    def test_detailed_balance_ladder_ratios(self):
        # Omega = 0: adjacent Dicke populations in ratio kappa_+/kappa_-
        for n, t in ((8, 1.0), (10, 0.5)):
            params = SuperradiantParams(n_spins=n, omega=0.0, temperature=t)
            rho = steady_state(build_superradiant(params))
            pops = np.real(np.diag(rho.matrix))
            ratios = pops[1:] / pops[:-1]
            want = params.kappa_plus / params.kappa_minus
            assert np.allclose(ratios, want, rtol=1e-6)
            beta = 1.0 / t
            assert want == pytest.approx(np.exp(-beta * params.bath_energy))

    def test_liouvillian_annihilates_steady_state(self, tc_small):
        _, model, _ = tc_small
        rho = steady_state(model)
        assert np.abs(lindblad_rhs(rho.matrix, model)).max() < 1e-8

    def test_superoperator_matches_matrix_form(self, tc_small):
        _, model, _ = tc_small
        rng = np.random.default_rng(3)
        m = rng.standard_normal((model.dim, model.dim)) * (1 + 1j)
        rho = m @ m.conj().T
        rho /= np.trace(rho)
        sup = liouvillian_matrix(model)
        via_sup = (sup @ rho.reshape(-1)).reshape(model.dim, model.dim)
        assert np.abs(via_sup - lindblad_rhs(rho, model)).max() < 1e-10

    def test_superoperator_size_limit(self):
        model = ModelSpec(np.zeros((100, 100)), [], dims=(100,))
        with pytest.raises(ValueError, match="exceeds"):
            liouvillian_matrix(model)
