"""Acceptance suite: every defining identity as an executable criterion.

Each criterion is a pure function of (seed, workers) returning a
CriterionResult; the CLI ``selftest`` subcommand runs them and prints one
pass/fail line each.  Criteria derive their streams from (seed, tag), so
running a subset never changes the numbers of the others.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import kstest, kstwobign

from .collision import MassPair, collide, nelson_energy_ledger
from .eigenframe import (
    minkowski_statistical_residual,
    relativistic_mass_ratio,
    time_dilation_ratio,
)
from .heatbath import (
    BathConfig,
    correlation_for_constant_speed,
    run_bath,
    sample_events,
    sample_tau,
    single_step_moments,
)
from .nelson import (
    DiffusionConfig,
    energy_mc,
    energy_quadrature,
    evolve_ensemble,
    madelung_residual,
    osmotic_residual,
    two_particle_energy,
)
from .rng import substream
from .waves import free_gaussian_packet, harmonic_ground_state, plane_wave

EXACT_TOL = 1e-12


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    observed: float
    bound: float
    detail: str


def _result(number, name, passed, observed, bound, detail) -> CriterionResult:
    return CriterionResult(number, name, bool(passed), float(observed),
                           float(bound), detail)


def _random_event_arrays(seed: int, n: int = 10_000) -> dict:
    """Vectorized random collisions with per-event mass ratios.

    Computes the block-projection and incremental update forms
    independently so their agreement is itself a check.
    """
    rng = substream(seed, 101)
    g2 = rng.uniform(1e-4, 1.0, n)
    phi = rng.standard_normal((n, 3))
    phi /= np.linalg.norm(phi, axis=1, keepdims=True)
    v1 = rng.uniform(-10.0, 10.0, (n, 3))
    w1 = rng.uniform(-10.0, 10.0, (n, 3))

    gs = (2.0 * g2 / (1.0 + g2))[:, None]
    sg = (2.0 / (1.0 + g2))[:, None]
    sin_t = (2.0 * np.sqrt(g2) / (1.0 + g2))[:, None]

    pv1 = np.sum(phi * v1, axis=1, keepdims=True) * phi
    pw1 = np.sum(phi * w1, axis=1, keepdims=True) * phi
    v2_block = v1 - gs * pv1 + gs * pw1
    w2_block = sg * pv1 + w1 - sg * pw1

    kick = np.sum(phi * (w1 - v1), axis=1, keepdims=True) * phi
    v2_update = v1 + gs * kick
    w2_update = w1 - sg * kick

    Phi = sin_t * ((v1 - w1) - (pv1 - pw1))
    return {
        "g2": g2, "phi": phi, "v1": v1, "w1": w1,
        "v2": v2_block, "w2": w2_block,
        "v2_alt": v2_update, "w2_alt": w2_update, "Phi": Phi,
    }


def _head_on_example() -> tuple:
    masses = MassPair(M=4.0, m=1.0)
    event = collide([1.0, 0.0, 0.0], [-1.0, 0.0, 0.0], [1.0, 0.0, 0.0], masses)
    return masses, event


def criterion_1_conservation(seed: int, workers: int) -> CriterionResult:
    ev = _random_event_arrays(seed)
    g2 = ev["g2"][:, None]
    scale = 1.0 + np.max(np.abs(np.concatenate([ev["v1"], ev["w1"]], axis=1)),
                         axis=1, keepdims=True)
    mom = np.abs((ev["v2"] + g2 * ev["w2"]) - (ev["v1"] + g2 * ev["w1"])) / scale
    sq = lambda x: np.sum(x * x, axis=1)
    energy = np.abs((sq(ev["v2"]) + ev["g2"] * sq(ev["w2"]))
                    - (sq(ev["v1"]) + ev["g2"] * sq(ev["w1"]))) / scale[:, 0]**2
    forms = np.abs(np.concatenate([ev["v2"] - ev["v2_alt"],
                                   ev["w2"] - ev["w2_alt"]], axis=1)) / scale
    worst = max(float(mom.max()), float(energy.max()), float(forms.max()))
    # Spot-check a subset through the scalar operator as well.
    for i in range(0, len(ev["g2"]), 100):
        event = collide(ev["v1"][i], ev["w1"][i], ev["phi"][i],
                        MassPair.from_gamma2(float(ev["g2"][i])))
        event.check()
        worst = max(worst, float(np.max(np.abs(event.v2 - ev["v2"][i]))
                                 / scale[i, 0]))
    return _result(1, "conservation-suite", worst < EXACT_TOL, worst, EXACT_TOL,
                   f"10^4 random events, worst relative residual {worst:.3e}")


def criterion_2_energy_ledger(seed: int, workers: int) -> CriterionResult:
    ev = _random_event_arrays(seed)
    sq = lambda x: np.sum(x * x, axis=1)
    total = (0.25 * sq(ev["v2"] + ev["v1"]) + 0.25 * sq(ev["v2"] - ev["v1"])
             + ev["g2"] * (0.25 * sq(ev["w2"] + ev["w1"])
                           + 0.25 * sq(ev["w2"] - ev["w1"])))
    reference = sq(ev["v1"]) + ev["g2"] * sq(ev["w1"])
    worst = float(np.max(np.abs(total - reference) / np.maximum(reference, 1.0)))

    _, event = _head_on_example()
    ledger = nelson_energy_ledger(event)
    hand = abs(ledger.total - 1.25)
    pieces = (abs(ledger.sym_main - 0.36) + abs(ledger.osm_main - 0.16)
              + abs(0.25 * (ledger.sym_inc + ledger.osm_inc) - 0.73))
    worst = max(worst, hand, pieces)
    return _result(2, "energy-ledger", worst < EXACT_TOL, worst, EXACT_TOL,
                   f"ledger total == |v1|^2 + gamma^2 |w1|^2; "
                   f"hand case 1.25 off by {hand:.2e}")


def criterion_3_eigenframe(seed: int, workers: int) -> CriterionResult:
    ev = _random_event_arrays(seed)
    g2 = ev["g2"]
    gamma = np.sqrt(g2)
    scale = 1.0 + np.max(np.abs(np.concatenate([ev["v1"], ev["w1"]], axis=1)),
                         axis=1)
    sq = lambda x: np.sum(x * x, axis=1)

    phi_orth = np.abs(np.sum(ev["Phi"] * (ev["v2"] - ev["v1"]), axis=1)) / scale**2

    a = (ev["v1"] + g2[:, None] * ev["w1"]) / (1.0 + g2[:, None])
    g = (ev["w1"] - ev["v1"]) / (1.0 + g2[:, None])
    g_perp = (ev["v2"] - ev["w2"]) / (1.0 + g2[:, None])
    norm_gap = np.abs(sq(g) - sq(g_perp)) / np.maximum(sq(g), 1.0)
    perp_gap = np.max(np.abs(g_perp - g - ev["Phi"] / gamma[:, None]),
                      axis=1) / scale

    # Eigenvector relations of the exchange matrix on (a, a) and
    # (-gamma^2 g, g), eigenvalues +1 and -1.
    cos_t = (1.0 - g2) / (1.0 + g2)
    gsin = 2.0 * g2 / (1.0 + g2)
    sing = 2.0 / (1.0 + g2)
    eig1 = np.max(np.abs(
        np.concatenate([(cos_t + gsin - 1.0)[:, None] * a,
                        (sing - cos_t - 1.0)[:, None] * a], axis=1)), axis=1) / scale
    # Top row: cos*(-g2 g) + gamma sin(theta)*g must equal +g2 g; bottom
    # row: (sin/gamma)*(-g2 g) - cos*g must equal -g.
    eig2_top = cos_t[:, None] * (-g2[:, None] * g) + gsin[:, None] * g - g2[:, None] * g
    eig2_bot = sing[:, None] * (-g2[:, None] * g) - cos_t[:, None] * g + g
    eig2 = np.max(np.abs(np.concatenate([eig2_top, eig2_bot], axis=1)),
                  axis=1) / scale

    frame = np.abs((sq(ev["w2"] - a) - sq(ev["v2"] - a))
                   - (sq(ev["w1"] - a) - sq(ev["v1"] - a))) / scale**2

    worst = max(float(phi_orth.max()), float(norm_gap.max()),
                float(perp_gap.max()), float(eig1.max()), float(eig2.max()),
                float(frame.max()))
    return _result(3, "eigenframe-identities", worst < EXACT_TOL, worst,
                   EXACT_TOL,
                   f"Phi orthogonality, |g|=|g_perp|, g_perp=g+Phi/gamma, "
                   f"eigenvectors, frame identity; worst {worst:.3e}")


def criterion_4_minkowski_statistics(seed: int, workers: int) -> CriterionResult:
    masses = MassPair.from_gamma2(0.01)
    independent = sample_events(100_000, masses, 1.0, seed, mode="physical",
                                workers=workers)
    rep = minkowski_statistical_residual(independent)
    margin_zero = abs(rep.statistical_residual) / (3.0 * rep.statistical_se)

    correlated = sample_events(100_000, masses, 1.0, seed + 1,
                               main_fixed_speed=0.4, target_correlation=0.8,
                               mode="physical", workers=workers)
    rep_c = minkowski_statistical_residual(correlated)
    gap = abs(rep_c.statistical_residual - rep_c.predicted_residual)
    margin_corr = gap / (3.0 * rep_c.statistical_se)
    nonzero = abs(rep_c.statistical_residual) / rep_c.statistical_se

    passed = (margin_zero < 1.0 and margin_corr < 1.0
              and rep_c.identity_gap < 1e-10 and nonzero > 10.0)
    worst = max(margin_zero, margin_corr)
    return _result(4, "minkowski-statistics", passed, worst, 1.0,
                   f"independent bath residual {rep.statistical_residual:.2e} "
                   f"(SE {rep.statistical_se:.2e}); correlated-bath identity gap "
                   f"{rep_c.identity_gap:.2e}, residual/SE {nonzero:.1f}")


def criterion_5_equilibration(seed: int, workers: int) -> CriterionResult:
    masses = MassPair.from_gamma2(0.01)
    config = BathConfig(masses=masses, c_w=1.0, n_collisions=100_000,
                        seed=seed, tau_bar=1.0, mode="paper",
                        bath_kind="isotropic-fixed-speed")
    summary = run_bath(config)
    ratio = summary.energy_ratio

    drift_cfg = BathConfig(masses=masses, c_w=1.0, n_collisions=1,
                           seed=seed + 1, tau_bar=1.0, mode="paper",
                           v0=(0.4, -0.3, 0.2))
    moments = single_step_moments(drift_cfg, 100_000, workers=workers)
    diff = np.abs(moments.mean_dv - moments.predicted_dv)
    margin = float(np.max(diff / (3.0 * moments.se_dv)))

    passed = 0.95 <= ratio <= 1.05 and margin < 1.0
    return _result(5, "heat-bath-equilibration", passed,
                   max(abs(ratio - 1.0), margin), 1.0,
                   f"stationary M E|v|^2 / (m c_w^2) = {ratio:.4f}; "
                   f"one-step drift off by {float(np.max(diff)):.2e} "
                   f"(<= {float(np.max(3.0 * moments.se_dv)):.2e})")


def criterion_6_speed_correlation(seed: int, workers: int) -> CriterionResult:
    masses = MassPair.from_gamma2(1e-4)
    rows = correlation_for_constant_speed(masses, 1.0,
                                          (0.25, 0.5, 0.75, 0.9), seed,
                                          n_samples=20_000, mode="paper")
    worst = max(abs(r.solved_rho - r.predicted_rho) for r in rows)
    converged = all(r.converged for r in rows)
    detail = ", ".join(f"{r.speed_ratio:g}->{r.solved_rho:.4f}" for r in rows)
    return _result(6, "speed-correlation-law", converged and worst <= 0.02,
                   worst, 0.02, f"solved bath correlations: {detail}")


def criterion_7_collision_times(seed: int, workers: int) -> CriterionResult:
    rng = substream(seed, 107)
    taus = sample_tau(1.0, rng, size=1_000_000)
    n = taus.size
    mean_gap = abs(taus.mean() - 1.0)
    mean_se = taus.std(ddof=1) / math.sqrt(n)
    inv = 1.0 / taus
    inv_gap = abs(inv.mean() - 2.0)
    inv_se = inv.std(ddof=1) / math.sqrt(n)
    margin = max(mean_gap / (3.0 * mean_se), inv_gap / (3.0 * inv_se))
    return _result(7, "collision-time-model", margin < 1.0, margin, 1.0,
                   f"E[tau] = {taus.mean():.5f} (target 1), "
                   f"E[1/tau] = {inv.mean():.5f} (target 2)")


def criterion_8_nelson_stationarity(seed: int, workers: int) -> CriterionResult:
    wave = harmonic_ground_state(mass=1.0, eta=1.0, omega=1.0, dim=1)
    config = DiffusionConfig(wave=wave, n_particles=100_000, t0=0.0, t1=5.0,
                             dt=1e-3, seed=seed, n_snapshots=11,
                             workers=workers)
    snapshots = evolve_ensemble(config)
    V = wave.matched_potential

    final = snapshots[-1].positions[:, 0]
    ks = kstest(final, lambda q: wave.cdf(q, snapshots[-1].t)).statistic
    ks_bound = float(kstwobign.isf(0.01)) / math.sqrt(len(final))

    grid = np.linspace(-5.0, 5.0, 1001)
    mad = float(np.max(np.abs(madelung_residual(wave, V, grid[:, None], 1.0))))

    energies = energy_mc(snapshots, wave, V)
    energy_margin = max(abs(p.value - 0.5) / (3.0 * p.se) for p in energies)

    osm = osmotic_residual(snapshots, wave)

    passed = (ks < ks_bound and mad < 1e-8 and energy_margin < 1.0
              and osm.scaled_norm < 0.05)
    worst = max(ks / ks_bound, mad / 1e-8, energy_margin,
                osm.scaled_norm / 0.05)
    return _result(8, "nelson-stationarity", passed, worst, 1.0,
                   f"KS {ks:.5f} (< {ks_bound:.5f}), wave-condition residual "
                   f"{mad:.1e}, energy within 3 SE of 0.5 at all "
                   f"{len(energies)} snapshots, osmotic residual "
                   f"{osm.scaled_norm:.4f}")


def criterion_9_energy_dual_form(seed: int, workers: int) -> CriterionResult:
    models = [
        harmonic_ground_state(mass=1.0, eta=1.0, omega=1.0, dim=1),
        harmonic_ground_state(mass=1.0, eta=1.0, omega=1.0, dim=3),
        free_gaussian_packet(mass=1.0, eta=1.0, width=1.0, velocity=0.7),
        plane_wave(mass=1.0, eta=1.0, velocity=0.8, length=10.0),
    ]
    worst = 0.0
    for wave in models:
        V = wave.matched_potential
        e_fields = energy_quadrature(wave, V, tau_bar=2.5, method="fields")
        e_wavefn = energy_quadrature(wave, V, tau_bar=2.5, method="wavefunction")
        worst = max(worst, abs(e_fields - e_wavefn) / max(1.0, abs(e_fields)))
    ground = energy_quadrature(models[0], models[0].matched_potential)
    worst = max(worst, abs(ground - 0.5))
    return _result(9, "energy-dual-form", worst < 1e-8, worst, 1e-8,
                   f"field/wavefunction quadratures agree on all catalog "
                   f"models; 1D ground energy {ground:.10f}")


def criterion_10_two_particle(seed: int, workers: int) -> CriterionResult:
    main = DiffusionConfig(
        wave=harmonic_ground_state(mass=1.0, eta=1.0, omega=1.0, dim=1),
        n_particles=40_000, t0=0.0, t1=2.0, dt=1e-3, seed=seed,
        tau_bar=5.0, n_snapshots=9, workers=workers)
    incident = DiffusionConfig(
        wave=harmonic_ground_state(mass=0.25, eta=1.0, omega=2.0, dim=1),
        n_particles=40_000, t0=0.0, t1=2.0, dt=1e-3, seed=seed + 1,
        tau_bar=4.0, n_snapshots=9, workers=workers)
    report = two_particle_energy(main, incident)
    margins = np.abs(report.total_energy - report.quadrature_total) \
        / (3.0 * report.total_se)
    additivity = float(np.max(margins))
    cross_bound = 3.0 / math.sqrt(min(main.n_particles, incident.n_particles))
    cross_ok = abs(report.cross_correlation) < cross_bound
    passed = additivity < 1.0 and cross_ok
    return _result(10, "two-particle-additivity", passed,
                   max(additivity, abs(report.cross_correlation) / cross_bound),
                   1.0,
                   f"total within 3 SE of quadrature sum "
                   f"{report.quadrature_total:.4f} at all snapshots; "
                   f"energy cross-correlation {report.cross_correlation:.4f}")


def criterion_11_relativity(seed: int, workers: int) -> CriterionResult:
    checks = [
        (time_dilation_ratio([0, 0, 0], [0.6, 0, 0], 1.0), 1.25),
        (time_dilation_ratio([0, 0, 0], [0, 1.5, 0], 2.5), 1.25),
        (time_dilation_ratio([0, 0, 0], [0.8, 0, 0], 1.0), 5.0 / 3.0),
        (time_dilation_ratio([0.3, 0, 0], [0.3, 0, 0], 1.0), 1.0),
        (relativistic_mass_ratio([0.6, 0, 0], 1.0), 1.25),
        (relativistic_mass_ratio([0, 0, 0], 1.0), 1.0),
    ]
    worst = max(abs(got - want) / want for got, want in checks)
    return _result(11, "relativity-evaluators", worst < 1e-15, worst, 1e-15,
                   f"time dilation and mass ratio reproduce exact values, "
                   f"worst relative error {worst:.2e}")


def criterion_12_determinism(seed: int, workers: int) -> CriterionResult:
    from .cli import _render

    masses = MassPair.from_gamma2(0.01)
    cfg = BathConfig(masses=masses, c_w=1.0, n_collisions=1, seed=seed,
                     tau_bar=1.0, mode="physical", v0=(0.3, 0.1, -0.2))
    a = single_step_moments(cfg, 20_000, workers=1)
    b = single_step_moments(cfg, 20_000, workers=4)
    same_moments = (np.array_equal(a.mean_dv, b.mean_dv)
                    and np.array_equal(a.se_dv, b.se_dv))

    ev1 = sample_events(20_000, masses, 1.0, seed, workers=1)
    ev3 = sample_events(20_000, masses, 1.0, seed, workers=3)
    same_events = np.array_equal(ev1.v2, ev3.v2) and np.array_equal(ev1.w2, ev3.w2)

    wave = harmonic_ground_state()
    dc = lambda w: DiffusionConfig(wave=wave, n_particles=2000, t0=0.0,
                                   t1=0.2, dt=1e-3, seed=seed, n_snapshots=3,
                                   workers=w)
    s1 = evolve_ensemble(dc(1))
    s2 = evolve_ensemble(dc(2))
    same_ensemble = np.array_equal(s1[-1].positions, s2[-1].positions)

    rows = [{"x": a.mean_dv[0], "y": float(np.sum(ev1.v2))}]
    meta = {"tool": "nelsonlab", "seed": seed}
    same_bytes = (_render(rows, "csv", meta) == _render(rows, "csv", meta)
                  and _render(rows, "json", meta) == _render(rows, "json", meta))

    passed = same_moments and same_events and same_ensemble and same_bytes
    return _result(12, "determinism", passed, 0.0 if passed else 1.0, 0.0,
                   "replica moments, event samples, ensembles and rendered "
                   "outputs are bit-identical across worker counts")


CRITERIA = {
    1: criterion_1_conservation,
    2: criterion_2_energy_ledger,
    3: criterion_3_eigenframe,
    4: criterion_4_minkowski_statistics,
    5: criterion_5_equilibration,
    6: criterion_6_speed_correlation,
    7: criterion_7_collision_times,
    8: criterion_8_nelson_stationarity,
    9: criterion_9_energy_dual_form,
    10: criterion_10_two_particle,
    11: criterion_11_relativity,
    12: criterion_12_determinism,
}


def run_criteria(seed: int, workers: int = 1,
                 criteria: list[int] | None = None) -> list[CriterionResult]:
    numbers = sorted(set(criteria)) if criteria else sorted(CRITERIA)
    unknown = [n for n in numbers if n not in CRITERIA]
    if unknown:
        raise ValueError(f"unknown criteria {unknown}; valid: 1..12")
    return [CRITERIA[n](seed, workers) for n in numbers]
