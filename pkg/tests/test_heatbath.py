"""Heat-bath samplers, collision chains, drift and correlation laws."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from nelsonlab import (
    BathConfig,
    MassPair,
    correlation_for_constant_speed,
    nelson_energy_ledger,
    projector_mean_estimate,
    run_bath,
    sample_bath_velocity,
    sample_correlated_bath,
    sample_events,
    sample_phi,
    sample_tau,
    single_step_moments,
    substream,
)
from nelsonlab.heatbath import incident_potential, ledger_batch


class TestSamplePhi:
    def test_unit_norm(self, rng):
        phi = sample_phi(rng, 500)
        assert np.max(np.abs(np.linalg.norm(phi, axis=1) - 1.0)) < 1e-12

    def test_projector_mean_is_isotropic_third(self):
        p = projector_mean_estimate(1_000_000, substream(5, 1))
        assert np.max(np.abs(p - np.eye(3) / 3.0)) < 5e-3

    def test_fixed_seed_reproducible(self):
        a = sample_phi(substream(99, 2), 16)
        b = sample_phi(substream(99, 2), 16)
        assert np.array_equal(a, b)


class TestProjectorMean:
    def test_single_draw_is_rank_one(self):
        p = projector_mean_estimate(1, substream(3, 0))
        assert_allclose(p @ p, p, atol=1e-12)
        eigs = np.sort(np.linalg.eigvalsh(p))
        assert_allclose(eigs, [0.0, 0.0, 1.0], atol=1e-12)

    def test_trace_is_one(self):
        for n in (1, 2, 7, 100):
            p = projector_mean_estimate(n, substream(4, n))
            assert abs(np.trace(p) - 1.0) < 1e-12

    def test_requires_positive_n(self):
        with pytest.raises(ValueError):
            projector_mean_estimate(0, substream(1, 0))


class TestSampleTau:
    def test_moments(self):
        taus = sample_tau(1.0, substream(6, 0), size=200_000)
        n = taus.size
        assert abs(taus.mean() - 1.0) < 3.0 * taus.std(ddof=1) / np.sqrt(n)
        inv = 1.0 / taus
        assert abs(inv.mean() - 2.0) < 3.0 * inv.std(ddof=1) / np.sqrt(n)

    def test_scales_with_mean(self):
        taus = sample_tau(4.0, substream(6, 1), size=100_000)
        assert abs(taus.mean() - 4.0) < 0.1

    def test_invalid_tau_bar(self):
        with pytest.raises(ValueError):
            sample_tau(0.0, substream(1, 0))
        with pytest.raises(ValueError):
            sample_tau(-2.0, substream(1, 0))


class TestBathVelocity:
    def test_fixed_speed_exact(self, rng):
        w = sample_bath_velocity(rng, 1.7, "isotropic-fixed-speed", 400)
        assert np.max(np.abs(np.linalg.norm(w, axis=1) - 1.7)) < 1e-12

    def test_maxwellian_second_moment(self):
        w = sample_bath_velocity(substream(7, 0), 1.3, "maxwellian", 200_000)
        sq = np.sum(w**2, axis=1)
        assert abs(sq.mean() - 1.69) < 3.0 * sq.std(ddof=1) / np.sqrt(sq.size)

    def test_isotropy(self):
        w = sample_bath_velocity(substream(7, 1), 1.0,
                                 "isotropic-fixed-speed", 200_000)
        se = 1.0 / np.sqrt(3.0 * w.shape[0])
        assert np.max(np.abs(w.mean(axis=0))) < 3.0 * se

    def test_mean_shift(self):
        w = sample_bath_velocity(substream(7, 2), 1.0, "maxwellian", 50_000,
                                 mean=(2.0, 0.0, -1.0))
        assert_allclose(w.mean(axis=0), [2.0, 0.0, -1.0], atol=0.02)

    def test_invalid_inputs(self, rng):
        with pytest.raises(ValueError):
            sample_bath_velocity(rng, -1.0)
        with pytest.raises(ValueError):
            sample_bath_velocity(rng, 1.0, "lattice")


class TestCorrelatedBath:
    def test_zero_target_is_isotropic_bath(self):
        a = sample_correlated_bath([1.0, 0.0, 0.0], 0.0, 1.0,
                                   substream(8, 0), 64)
        b = sample_bath_velocity(substream(8, 0), 1.0, size=64)
        assert np.array_equal(a, b)

    def test_full_alignment(self, rng):
        v = np.array([0.0, 2.0, 0.0])
        w = sample_correlated_bath(v, 1.0, 3.0, rng, 32)
        assert_allclose(w, np.tile([0.0, 3.0, 0.0], (32, 1)), atol=1e-12)

    def test_target_correlation_exact_for_fixed_speed(self, rng):
        v = np.array([0.5, -0.5, 1.0])
        w = sample_correlated_bath(v, 0.5, 2.0, rng, 5000)
        assert np.max(np.abs(np.linalg.norm(w, axis=1) - 2.0)) < 1e-12
        measured = np.mean(w @ v) / (np.linalg.norm(v) * 2.0)
        assert abs(measured - 0.5) < 1e-12  # exact by construction

    def test_zero_velocity_with_target_rejected(self, rng):
        with pytest.raises(ValueError):
            sample_correlated_bath([0.0, 0.0, 0.0], 0.3, 1.0, rng)

    def test_target_out_of_range(self, rng):
        with pytest.raises(ValueError):
            sample_correlated_bath([1.0, 0.0, 0.0], 1.5, 1.0, rng)


class TestRunBath:
    def test_no_collisions_reflects_initial_state(self):
        config = BathConfig(masses=MassPair.from_gamma2(0.1), c_w=1.0,
                            n_collisions=0, seed=1, tau_bar=1.0,
                            v0=(0.5, 0.0, 0.0))
        s = run_bath(config)
        assert s.n == 0
        assert_allclose(s.mean_v, [0.5, 0.0, 0.0])
        assert_allclose(s.final_v, [0.5, 0.0, 0.0])
        assert s.e_v2 == 0.25

    def test_single_step_drift_toward_bath_mean(self):
        # From rest, one collision drifts the mean by gs * E[w].
        masses = MassPair.from_gamma2(0.01)
        u = np.array([1.0, 0.0, 0.0])
        config = BathConfig(masses=masses, c_w=1.0, n_collisions=1, seed=2,
                            tau_bar=1.0, mode="paper", bath_mean=tuple(u))
        m = single_step_moments(config, 100_000)
        gs = masses.gamma_sin_theta
        assert np.all(np.abs(m.mean_dv - gs * u) <= 3.0 * m.se_dv)
        # The small-mass shorthand 2 gamma^2 u is close but not exact.
        assert_allclose(gs, 2.0 * 0.01 / 1.01, rtol=1e-15)
        assert abs(gs - 0.02) < 2.5e-4

    def test_physical_mode_drift_carries_projector_mean(self):
        masses = MassPair.from_gamma2(0.04)
        v0 = (0.9, -0.6, 0.3)
        config = BathConfig(masses=masses, c_w=1.0, n_collisions=1, seed=3,
                            tau_bar=1.0, mode="physical", v0=v0)
        m = single_step_moments(config, 200_000)
        p_mean = projector_mean_estimate(200_000, substream(3, 50))
        predicted = masses.gamma_sin_theta * (p_mean @ (np.zeros(3) - np.array(v0)))
        assert np.all(np.abs(m.mean_dv - predicted) <= 4.0 * m.se_dv)

    def test_paper_mode_equilibrates(self):
        config = BathConfig(masses=MassPair.from_gamma2(0.01), c_w=1.0,
                            n_collisions=100_000, seed=4, tau_bar=1.0,
                            mode="paper")
        s = run_bath(config)
        assert 0.95 <= s.energy_ratio <= 1.05
        assert s.rho**2 <= 1.0 + 4.0 * max(s.rho_se, 1e-6)

    def test_physical_mode_equilibrates(self):
        config = BathConfig(masses=MassPair.from_gamma2(0.02), c_w=1.0,
                            n_collisions=60_000, seed=5, tau_bar=1.0,
                            mode="physical")
        s = run_bath(config)
        assert 0.85 <= s.energy_ratio <= 1.15
        assert s.n_spot_checked == 600

    def test_deterministic_summary(self):
        config = BathConfig(masses=MassPair.from_gamma2(0.05), c_w=1.0,
                            n_collisions=5000, seed=6, tau_bar=1.0)
        a = run_bath(config)
        b = run_bath(config)
        assert np.array_equal(a.final_v, b.final_v)
        assert a.e_v2 == b.e_v2

    def test_trajectory_record(self):
        config = BathConfig(masses=MassPair.from_gamma2(0.1), c_w=1.0,
                            n_collisions=50, seed=7, tau_bar=2.0,
                            record_trajectory=True)
        s = run_bath(config)
        assert s.trajectory["v"].shape == (51, 3)
        assert s.trajectory["time"].shape == (51,)
        assert s.trajectory["time"][0] == 0.0
        assert np.all(np.diff(s.trajectory["time"]) > 0)

    def test_correlated_chain_tracks_target(self):
        config = BathConfig(masses=MassPair.from_gamma2(1e-4), c_w=1.0,
                            n_collisions=20_000, seed=8, tau_bar=1.0,
                            mode="paper", v0=(0.5, 0.0, 0.0),
                            target_correlation=0.5)
        s = run_bath(config)
        # The balance correlation for |v| = 0.5 c_w keeps the speed fixed.
        assert abs(np.linalg.norm(s.final_v) - 0.5) < 0.05
        assert abs(s.rho - 0.5) < 0.01

    def test_invalid_configuration(self):
        masses = MassPair.from_gamma2(0.1)
        with pytest.raises(ValueError):
            BathConfig(masses=masses, c_w=-1.0, n_collisions=1, seed=0,
                       tau_bar=1.0)
        with pytest.raises(ValueError):
            BathConfig(masses=masses, c_w=1.0, n_collisions=1, seed=0,
                       tau_bar=1.0, mode="hybrid")
        with pytest.raises(ValueError):
            BathConfig(masses=masses, c_w=1.0, n_collisions=1, seed=0,
                       tau_bar=1.0, target_correlation=2.0)


class TestWorkerInvariance:
    def test_single_step_moments(self):
        config = BathConfig(masses=MassPair.from_gamma2(0.01), c_w=1.0,
                            n_collisions=1, seed=9, tau_bar=1.0,
                            v0=(0.2, 0.1, 0.0))
        a = single_step_moments(config, 30_000, workers=1)
        b = single_step_moments(config, 30_000, workers=4)
        assert np.array_equal(a.mean_dv, b.mean_dv)
        assert a.mean_v2_out == b.mean_v2_out

    def test_sample_events(self):
        masses = MassPair.from_gamma2(0.02)
        a = sample_events(10_000, masses, 1.0, 10, workers=1)
        b = sample_events(10_000, masses, 1.0, 10, workers=3)
        assert np.array_equal(a.v2, b.v2)
        assert np.array_equal(a.Phi, b.Phi)


class TestCorrelationSweep:
    def test_recovers_speed_ratio(self):
        rows = correlation_for_constant_speed(
            MassPair.from_gamma2(1e-4), 1.0, (0.5,), seed=11, n_samples=5000)
        row = rows[0]
        assert row.converged
        assert abs(row.solved_rho - 0.5) <= 0.02
        assert abs(row.solved_rho - row.exact_rho) < 1e-3
        assert_allclose(row.exact_cross_moment,
                        row.exact_rho * 1.0 * 0.5, rtol=1e-10)

    def test_zero_speed_row(self):
        rows = correlation_for_constant_speed(
            MassPair.from_gamma2(1e-4), 1.0, (0.0,), seed=11)
        assert rows[0].solved_rho == 0.0
        assert rows[0].converged

    def test_physical_mode_also_converges(self):
        rows = correlation_for_constant_speed(
            MassPair.from_gamma2(1e-4), 1.0, (0.75,), seed=12,
            n_samples=5000, mode="physical")
        assert rows[0].converged
        # With axis projection each collision exchanges a third of the
        # momentum on average; the balance correlation stays near |v|/c_w.
        assert abs(rows[0].solved_rho - 0.75) <= 0.03


class TestEventSampling:
    def test_events_satisfy_collision_invariants(self):
        batch = sample_events(2000, MassPair.from_gamma2(0.09), 1.0, seed=13)
        for i in range(0, 2000, 211):
            batch.event(i).check()

    def test_paper_mode_conserves(self):
        masses = MassPair.from_gamma2(0.3)
        batch = sample_events(4000, masses, 1.0, seed=14, mode="paper")
        g2 = masses.gamma2
        mom = batch.v2 + g2 * batch.w2 - batch.v1 - g2 * batch.w1
        assert np.max(np.abs(mom)) < 1e-12
        energy = (np.sum(batch.v2**2, axis=1) + g2 * np.sum(batch.w2**2, axis=1)
                  - np.sum(batch.v1**2, axis=1) - g2 * np.sum(batch.w1**2, axis=1))
        assert np.max(np.abs(energy)) < 1e-12
        assert np.all(batch.Phi == 0.0)

    def test_default_main_speed_is_stationary(self):
        masses = MassPair.from_gamma2(0.01)
        batch = sample_events(200_000, masses, 1.0, seed=15)
        e_v1 = np.mean(np.sum(batch.v1**2, axis=1))
        e_v2 = np.mean(np.sum(batch.v2**2, axis=1))
        gain = np.sum(batch.v2**2, axis=1) - np.sum(batch.v1**2, axis=1)
        se = gain.std(ddof=1) / np.sqrt(gain.size)
        assert abs(e_v2 - e_v1) < 3.0 * se


class TestIncidentPotential:
    def test_ledger_split(self):
        # Replacing the incident pair by its expectation reproduces the
        # mean conserved energy split into main terms plus a constant.
        masses = MassPair(M=2.0, m=0.5)
        batch = sample_events(20_000, masses, 1.2, seed=16)
        terms = ledger_batch(batch)
        v_inc = incident_potential(batch)
        assert_allclose(
            v_inc,
            0.5 * masses.m * np.mean(terms["sym_inc"] + terms["osm_inc"]),
            rtol=1e-14)
        mean_h = 0.5 * np.mean(
            masses.M * np.sum(batch.v1**2, axis=1)
            + masses.m * np.sum(batch.w1**2, axis=1))
        main_part = 0.5 * masses.M * np.mean(terms["sym_main"]
                                             + terms["osm_main"])
        assert_allclose(main_part + v_inc, mean_h, rtol=1e-12)

    def test_matches_scalar_ledger(self):
        masses = MassPair.from_gamma2(0.25)
        batch = sample_events(64, masses, 1.0, seed=17)
        terms = ledger_batch(batch)
        for i in (0, 13, 63):
            ledger = nelson_energy_ledger(batch.event(i))
            assert_allclose(terms["sym_main"][i], ledger.sym_main, rtol=1e-14)
            assert_allclose(terms["osm_inc"][i], ledger.osm_inc, rtol=1e-14)
