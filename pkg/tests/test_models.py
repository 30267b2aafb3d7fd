import math

import numpy as np
import pytest

from trajkit.gaussian import LatticeModelSpec
from trajkit.linops import build_boson_ops, build_spin_ops, tensor
from trajkit.models import (
    BoseHubbardParams,
    SuperradiantParams,
    TavisCummingsParams,
    build_bh_dimer_exact,
    build_bh_lattice,
    build_superradiant,
    build_tavis_cummings,
    choose_cutoff,
    classify_mean_field_phase,
    dimer_critical_drives,
    integrate_mean_field,
    mean_field_rhs,
    spin_coherent_dicke,
    tc_initial_state,
    tc_transition_scan,
)
from trajkit.observables import Channel, evaluate_channels_pure


class TestTavisCummings:
    def test_zero_couplings_zero_hamiltonian(self):
        params = TavisCummingsParams(n_spins=3, omega=0.0, coupling=0.0, mmax=4)
        model = build_tavis_cummings(params)
        assert np.abs(model.h).max() == 0.0
        assert len(model.jumps) == 1 and model.jumps[0].label == "a"

    def test_commutes_with_casimir(self):
        params = TavisCummingsParams(n_spins=3, omega=0.3, coupling=0.7, mmax=4)
        model = build_tavis_cummings(params)
        s = build_spin_ops(3)
        s2 = tensor(s.sx @ s.sx + s.sy @ s.sy + s.sz @ s.sz, np.eye(5))
        comm = model.h @ s2 - s2 @ model.h
        assert np.abs(comm).max() < 1e-12

    def test_hamiltonian_matches_hand_built(self):
        params = TavisCummingsParams(n_spins=2, omega=0.4, coupling=0.6, mmax=3)
        model = build_tavis_cummings(params)
        s = build_spin_ops(2)
        b = build_boson_ops(3)
        want = 0.4 * tensor(s.sp + s.sm, np.eye(4))
        want += (0.6 / math.sqrt(2)) * (tensor(s.sm, b.adag) + tensor(s.sp, b.a))
        assert np.abs(model.h - want).max() < 1e-14

    def test_invalid_params_rejected(self):
        with pytest.raises(ValueError):
            TavisCummingsParams(n_spins=0, omega=0.1, coupling=0.1)
        with pytest.raises(ValueError):
            TavisCummingsParams(n_spins=2, omega=-0.1, coupling=0.1)


class TestSuperradiant:
    def test_zero_temperature_single_channel(self):
        params = SuperradiantParams(n_spins=6, omega=0.5, temperature=0.0)
        model = build_superradiant(params)
        assert len(model.jumps) == 1 and model.jumps[0].label == "S-"
        assert params.kappa_plus == 0.0

    def test_detailed_balance_ratio_exact(self):
        # beta Omega_B = ln 2  ->  kappa_+/kappa_- = 1/2 exactly
        t = 1.0 / math.log(2.0)
        params = SuperradiantParams(n_spins=4, omega=0.1, temperature=t)
        assert params.kappa_plus / params.kappa_minus == pytest.approx(0.5,
                                                                       abs=1e-14)

    def test_rate_normalization(self):
        params = SuperradiantParams(n_spins=10, omega=0.1, temperature=2.0)
        s = 5.0
        nb = params.n_beta
        assert params.kappa_minus == pytest.approx((1 + nb) / s)
        assert params.kappa_plus == pytest.approx(nb / s)

    def test_negative_temperature_rejected(self):
        with pytest.raises(ValueError):
            SuperradiantParams(n_spins=4, omega=0.1, temperature=-1.0)


class TestBoseHubbard:
    def test_scaling_round_trip(self):
        p = BoseHubbardParams(detuning=-1.5, u_tilde=2.0, f_tilde=2.7,
                              hopping=2.5, n_scale=40.0)
        assert p.u_physical * p.n_scale == pytest.approx(p.u_tilde)
        assert np.allclose(p.f_physical / math.sqrt(p.n_scale),
                           [p.f_tilde, -p.f_tilde])

    def test_normal_mode_frequencies(self):
        p = BoseHubbardParams(detuning=-1.5, u_tilde=2.0, f_tilde=1.0,
                              hopping=2.5)
        assert p.mode_frequencies == (1.5 - 2.5, 1.5 + 2.5)

    def test_exact_dimer_matches_hand_built_operators(self):
        p = BoseHubbardParams(detuning=-1.4, u_tilde=2.0, f_tilde=0.3,
                              hopping=-2.5, n_scale=4.0, mmax=3)
        model = build_bh_dimer_exact(p)
        b = build_boson_ops(3)
        eye = np.eye(4)
        a1, a2 = tensor(b.a, eye), tensor(eye, b.a)
        u = p.u_tilde / p.n_scale
        f = math.sqrt(p.n_scale) * p.f_tilde
        # hand-built: -Delta n_i + U/2 adag^2 a^2 + F_i (adag + a) - J hopping
        h = (
            1.4 * (a1.conj().T @ a1 + a2.conj().T @ a2)
            + 0.5 * u * (a1.conj().T @ a1.conj().T @ a1 @ a1
                         + a2.conj().T @ a2.conj().T @ a2 @ a2)
            + f * (a1.conj().T + a1) - f * (a2.conj().T + a2)
            + 2.5 * (a1.conj().T @ a2 + a2.conj().T @ a1)
        )
        assert np.abs(model.h - h).max() < 1e-12
        assert [j.label for j in model.jumps] == ["a1", "a2"]

    def test_lattice_spec_physical_units(self):
        p = BoseHubbardParams(detuning=-1.5, u_tilde=2.0, f_tilde=2.7,
                              hopping=2.5, n_scale=100.0)
        lat = build_bh_lattice(p)
        assert isinstance(lat, LatticeModelSpec)
        assert lat.kerr[0] == pytest.approx(0.02)
        assert lat.drive[0] == pytest.approx(27.0)
        assert lat.hopping[0, 1] == pytest.approx(2.5)


class TestMeanField:
    def test_tc_rhs_matches_stated_equations(self):
        params = TavisCummingsParams(n_spins=1, omega=0.3, coupling=0.8, mmax=1)
        my, mz, mq = 0.3, -0.7, 0.5
        dy = mean_field_rhs("tc", (my, mz, mq), params)
        s2 = math.sqrt(2.0)
        assert dy[0] == pytest.approx(-2 * 0.3 * mz - s2 * 0.8 * mq * mz)
        assert dy[1] == pytest.approx(2 * 0.3 * my + s2 * 0.8 * mq * my)
        assert dy[2] == pytest.approx(-0.8 / s2 * my - 0.5 * mq)

    def test_tc_poles_fixed_without_drive(self):
        params = TavisCummingsParams(n_spins=1, omega=0.0, coupling=0.8, mmax=1)
        for mz in (1.0, -1.0):
            dy = mean_field_rhs("tc", (0.0, mz, 0.0), params)
            assert np.abs(dy).max() == 0.0

    def test_superradiant_rhs_bitwise_t_independent(self):
        state = (0.21, -0.43, 0.62)
        rhs = {}
        for t in (0.0, 5.0):
            params = SuperradiantParams(n_spins=8, omega=0.9, temperature=t)
            rhs[t] = mean_field_rhs("superradiant", state, params)
        assert np.array_equal(rhs[0.0], rhs[5.0])

    def test_superradiant_rescaled_terms(self):
        params = SuperradiantParams(n_spins=8, omega=0.9, temperature=2.0)
        state = np.array([0.21, -0.43, 0.62])
        base = mean_field_rhs("superradiant", state, params)
        resc = mean_field_rhs("superradiant", state, params,
                              rescaled_temperature=True)
        beta = 0.5
        extra = np.array([-2 / beta * state[0], -2 / beta * state[1],
                          -4 / beta * state[2]])
        assert np.allclose(resc - base, extra, atol=1e-14)

    def test_dimer_vacuum_fixed_point_without_drive(self):
        p = BoseHubbardParams(detuning=-1.5, u_tilde=2.0, f_tilde=0.0,
                              hopping=2.5)
        dy = mean_field_rhs("bh-dimer", np.zeros(2, complex), p)
        assert np.abs(dy).max() == 0.0

    def test_tc_cylinder_conserved(self):
        params = TavisCummingsParams(n_spins=1, omega=0.06, coupling=0.2, mmax=1)
        t, y = integrate_mean_field("tc", params, (0.6, 0.8, -0.3), 1000.0)
        radius = y[0].real**2 + y[1].real**2
        assert np.abs(radius - 1.0).max() < 1e-8

    def test_dimer_scaling_invariance(self):
        # (U, F, alpha) -> (U/s, sqrt(s) F, sqrt(s) alpha) leaves the flow
        base = BoseHubbardParams(detuning=-1.5, u_tilde=2.0, f_tilde=1.2,
                                 hopping=2.5, n_scale=1.0)
        scaled = BoseHubbardParams(detuning=-1.5, u_tilde=2.0, f_tilde=1.2,
                                   hopping=2.5, n_scale=9.0)
        y0 = np.array([0.1 + 0.2j, -0.3 + 0.05j])
        t1, a = integrate_mean_field("bh-dimer", base, y0, 6.0)
        t2, b = integrate_mean_field("bh-dimer", scaled, 3.0 * y0, 6.0)
        assert np.abs(b / 3.0 - a).max() < 1e-9

    def test_classification_stationary_vs_time_crystal(self):
        low = TavisCummingsParams(n_spins=1, omega=0.01, coupling=0.2, mmax=1)
        high = TavisCummingsParams(n_spins=1, omega=0.07, coupling=0.2, mmax=1)
        cls_low = classify_mean_field_phase(low, horizon=1500.0, n_samples=8)
        cls_high = classify_mean_field_phase(high, horizon=1500.0, n_samples=8)
        assert cls_low.phase == "stationary"
        assert cls_low.order_parameter <= 0.0
        assert cls_high.phase == "time-crystal"
        assert cls_high.order_parameter > 0.0

    def test_bistable_phase_detected(self):
        params = TavisCummingsParams(n_spins=1, omega=0.5, coupling=0.8, mmax=1)
        cls = classify_mean_field_phase(params, horizon=2000.0, n_samples=16)
        assert cls.phase == "bistable"

    def test_transition_scan_small_coupling(self):
        omegas = np.arange(0.02, 0.06, 0.005)
        got = tc_transition_scan(0.2, omegas, (0.0, 1.0, 0.0), horizon=2500.0)
        assert got == pytest.approx(0.04, abs=0.005)


class TestDimerStability:
    def test_ssb_window_edges(self):
        p = BoseHubbardParams(detuning=-1.5, u_tilde=2.0, f_tilde=2.7,
                              hopping=2.5)
        edges = dimer_critical_drives(p, 1.9, 3.5)
        assert len(edges) == 2
        assert edges[0] == pytest.approx(2.26, abs=0.02)
        assert edges[1] == pytest.approx(3.14, abs=0.02)


class TestInitialStates:
    def test_spin_coherent_direction(self):
        n = 12
        direction = (0.0, 0.6, -0.8)
        psi = spin_coherent_dicke(n, direction)
        s = build_spin_ops(n)
        chans = [
            Channel("m_x", "linear", op=s.sx, scale=2.0 / n),
            Channel("m_y", "linear", op=s.sy, scale=2.0 / n),
            Channel("m_z", "linear", diag=s.m_values.astype(float), scale=2.0 / n),
        ]
        vals = evaluate_channels_pure(chans, psi[:, None])
        assert vals["m_x"][0] == pytest.approx(0.0, abs=1e-12)
        assert vals["m_y"][0] == pytest.approx(0.6, abs=1e-12)
        assert vals["m_z"][0] == pytest.approx(-0.8, abs=1e-12)

    def test_psi0_product_state(self):
        params = TavisCummingsParams(n_spins=4, omega=0.1, coupling=0.2, mmax=5)
        psi = tc_initial_state(params, "psi0")
        model = build_tavis_cummings(params)
        vals = evaluate_channels_pure(model.channels, psi.amplitudes[:, None])
        assert vals["m_z"][0] == pytest.approx(1.0)
        assert vals["n_ph"][0] == pytest.approx(0.0)

    def test_psi1_first_moments(self):
        params = TavisCummingsParams(n_spins=6, omega=0.5, coupling=0.8, mmax=24)
        psi = tc_initial_state(params, "psi1")
        model = build_tavis_cummings(params)
        vals = evaluate_channels_pure(model.channels, psi.amplitudes[:, None])
        nrm = math.hypot(0.7, 0.71)
        assert vals["m_y"][0] == pytest.approx(-0.7 / nrm, abs=1e-6)
        assert vals["m_z"][0] == pytest.approx(-0.71 / nrm, abs=1e-6)
        assert vals["m_q"][0] == pytest.approx(-1.0, abs=1e-6)
        assert vals["m_p"][0] == pytest.approx(0.0, abs=1e-9)


@pytest.mark.slow
def test_choose_cutoff_returns_passing_policy():
    params = TavisCummingsParams(n_spins=3, omega=0.06, coupling=0.2)
    grid = np.linspace(0, 5, 11)
    frozen, policy, max_occ = choose_cutoff(params, grid, 2e-3, n_probe=16,
                                            seed=5)
    assert frozen.mmax == policy.mmax
    assert max_occ <= params.epsilon
    assert policy.chi == pytest.approx((policy.mmax + 1) / 3)
