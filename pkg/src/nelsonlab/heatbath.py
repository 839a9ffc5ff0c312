"""Monte Carlo heat bath: repeated collisions of a main particle.

A main particle of mass ``M`` collides ``n`` times with freshly drawn
incident particles of mass ``m`` whose speeds satisfy ``E|w|^2 = c_w^2``.
Two collision treatments are available:

* ``physical`` -- each collision happens along a uniformly random unit
  axis, exchanging only the axis components.
* ``paper`` -- the axis projector is replaced by the identity, so the 1D
  exchange matrix acts on the full velocity vectors.  Under this branch
  the scalar drift and equilibration laws hold exactly:
  ``E[v2] - E[v1] = (2 gamma^2/(1+gamma^2)) (E[w1] - E[v1])`` and the
  stationary state satisfies ``M E|v|^2 = m c_w^2``.

The two modes differ by the mean projector factor: uniformly random axes
give ``E[P(phi)] = I/3``, not the identity, so the physical drift carries
an extra measured factor of E[P].

All draws come from streams derived from (seed, tag, index); results are
reproducible bit for bit regardless of the worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .collision import EventBatch, MassPair, collide, collide_batch
from .rng import TAG_BATH, TAG_EVENTS, TAG_REPLICA, substream
from .stats import batch_se, raw_correlation

BATH_KINDS = ("isotropic-fixed-speed", "maxwellian")
MODES = ("physical", "paper")

# Replica ensembles and event samples are always split into this many
# chunks with independent streams; the worker count only controls how
# many chunks run concurrently, never the result.
N_CHUNKS = 16


def _unit_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def sample_phi(rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Uniformly distributed unit collision axes (normalized Gaussians)."""
    if size is None:
        return _unit_rows(rng.standard_normal(3))
    return _unit_rows(rng.standard_normal((size, 3)))


def sample_tau(tau_bar: float, rng: np.random.Generator,
               size: int | None = None) -> float | np.ndarray:
    """Inter-collision times, Gamma(shape 2, scale tau_bar/2).

    The shape-2 law gives E[tau] = tau_bar and E[1/tau] = 2/tau_bar.
    """
    if not np.isfinite(tau_bar) or tau_bar <= 0:
        raise ValueError(f"tau_bar must be positive and finite, got {tau_bar}")
    out = rng.gamma(2.0, tau_bar / 2.0, size=size)
    return float(out) if size is None else out


def sample_bath_velocity(rng: np.random.Generator, c_w: float,
                         bath_kind: str = "isotropic-fixed-speed",
                         size: int | None = None,
                         mean=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Incident velocities with E|w|^2 = c_w^2 around an optional mean drift."""
    if c_w <= 0:
        raise ValueError(f"c_w must be positive, got {c_w}")
    n = 1 if size is None else size
    if bath_kind == "isotropic-fixed-speed":
        w = c_w * sample_phi(rng, n)
    elif bath_kind == "maxwellian":
        w = rng.standard_normal((n, 3)) * (c_w / np.sqrt(3.0))
    else:
        raise ValueError(f"unknown bath_kind {bath_kind!r}")
    w = w + np.asarray(mean, dtype=float)
    return w[0] if size is None else w


def sample_correlated_bath(v, target_correlation: float, c_w: float,
                           rng: np.random.Generator,
                           size: int | None = None) -> np.ndarray:
    """Incident velocities with |w| = c_w and a set alignment to ``v``.

    ``w = rho c_w v_hat + sqrt(1-rho^2) c_w u`` with ``u`` isotropic unit
    noise orthogonalized against ``v_hat``, so for a fixed-speed main
    particle the raw correlation of v with w equals the target exactly in
    expectation.
    """
    if abs(target_correlation) > 1:
        raise ValueError(f"target_correlation must lie in [-1, 1], got {target_correlation}")
    if c_w <= 0:
        raise ValueError(f"c_w must be positive, got {c_w}")
    v = np.asarray(v, dtype=float)
    speed = float(np.linalg.norm(v))
    if speed == 0.0:
        if target_correlation != 0.0:
            raise ValueError("cannot target a nonzero correlation against a zero velocity")
        return sample_bath_velocity(rng, c_w, size=size)
    n = 1 if size is None else size
    v_hat = v / speed
    z = rng.standard_normal((n, 3))
    perp = z - np.outer(z @ v_hat, v_hat)
    u = _unit_rows(perp)
    w = target_correlation * c_w * v_hat + np.sqrt(1.0 - target_correlation**2) * c_w * u
    return w[0] if size is None else w


def projector_mean_estimate(n: int, rng: np.random.Generator) -> np.ndarray:
    """Monte Carlo mean of P(phi) over ``n`` uniform axes (-> I/3)."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    phi = sample_phi(rng, n)
    return (phi.T @ phi) / n


@dataclass
class BathConfig:
    """Configuration of one heat-bath run."""

    masses: MassPair
    c_w: float
    n_collisions: int
    seed: int
    tau_bar: float
    bath_kind: str = "isotropic-fixed-speed"
    mode: str = "physical"
    v0: tuple[float, float, float] = (0.0, 0.0, 0.0)
    bath_mean: tuple[float, float, float] = (0.0, 0.0, 0.0)
    target_correlation: float | None = None
    burn_in: float = 0.1
    record_trajectory: bool = False
    spot_check_fraction: float = 0.01

    def __post_init__(self):
        if self.bath_kind not in BATH_KINDS:
            raise ValueError(f"bath_kind must be one of {BATH_KINDS}, got {self.bath_kind!r}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.c_w <= 0:
            raise ValueError(f"c_w must be positive, got {self.c_w}")
        if self.n_collisions < 0:
            raise ValueError(f"n_collisions must be >= 0, got {self.n_collisions}")
        if not np.isfinite(self.tau_bar) or self.tau_bar <= 0:
            raise ValueError(f"tau_bar must be positive, got {self.tau_bar}")
        if self.target_correlation is not None and abs(self.target_correlation) > 1:
            raise ValueError(f"target_correlation must lie in [-1, 1], got {self.target_correlation}")
        if not 0.0 <= self.burn_in < 1.0:
            raise ValueError(f"burn_in must lie in [0, 1), got {self.burn_in}")


@dataclass
class StatSummary:
    """Moment and correlation summary of one heat-bath run."""

    n: int
    seed: int
    mode: str
    mean_v: np.ndarray
    e_v2: float
    e_v2_se: float
    mean_w: np.ndarray
    e_w2: float
    cross_vw: float
    cross_vw_se: float
    rho: float
    rho_se: float
    drift_mean: np.ndarray
    drift_se: np.ndarray
    energy_ratio: float
    initial_v: np.ndarray
    final_v: np.ndarray
    tau_mean: float
    n_spot_checked: int
    trajectory: dict | None = field(default=None, repr=False)


def _physical_chain(v0: np.ndarray, w: np.ndarray, phi: np.ndarray,
                    gs: float) -> np.ndarray:
    """Sequential axis-projected collisions; returns the (n+1, 3) states."""
    n = w.shape[0]
    states = np.empty((n + 1, 3))
    states[0] = v0
    vx, vy, vz = (float(c) for c in v0)
    w_list = w.tolist()
    phi_list = phi.tolist()
    for k in range(n):
        px, py, pz = phi_list[k]
        wx, wy, wz = w_list[k]
        dot = px * (wx - vx) + py * (wy - vy) + pz * (wz - vz)
        vx += gs * dot * px
        vy += gs * dot * py
        vz += gs * dot * pz
        states[k + 1] = (vx, vy, vz)
    return states


def _paper_chain(v0: np.ndarray, w: np.ndarray, gs: float) -> np.ndarray:
    """Identity-projector chain v' = (1-gs) v + gs w, run as a linear filter."""
    n = w.shape[0]
    states = np.empty((n + 1, 3))
    states[0] = v0
    for i in range(3):
        states[1:, i], _ = lfilter([gs], [1.0, -(1.0 - gs)], w[:, i],
                                   zi=[(1.0 - gs) * v0[i]])
    return states


def _correlated_chain(v0: np.ndarray, z: np.ndarray, phi: np.ndarray | None,
                      config: BathConfig) -> tuple[np.ndarray, np.ndarray]:
    """Chain with the bath re-aligned to the current velocity every step."""
    rho_t = config.target_correlation
    c_w = config.c_w
    gs = config.masses.gamma_sin_theta
    n = z.shape[0]
    states = np.empty((n + 1, 3))
    states[0] = v0
    w_out = np.empty((n, 3))
    v = v0.astype(float).copy()
    for k in range(n):
        speed = float(np.linalg.norm(v))
        if speed == 0.0:
            raise ValueError("cannot target a nonzero correlation against a zero velocity")
        v_hat = v / speed
        perp = z[k] - (z[k] @ v_hat) * v_hat
        u = perp / np.linalg.norm(perp)
        wk = rho_t * c_w * v_hat + np.sqrt(1.0 - rho_t**2) * c_w * u
        w_out[k] = wk
        if phi is None:
            v = v + gs * (wk - v)
        else:
            dot = float(phi[k] @ (wk - v))
            v = v + gs * dot * phi[k]
        states[k + 1] = v
    return states, w_out


def run_bath(config: BathConfig) -> StatSummary:
    """Run the collision chain and summarize its moments.

    Per-collision samples pair the pre-collision state ``v_k`` with the
    incident draw ``w_k``; moments are taken over the post-burn-in pairs.
    A deterministic 1% subset of collisions is re-checked against the full
    collision operator.
    """
    masses = config.masses
    n = config.n_collisions
    rng = substream(config.seed, TAG_BATH)
    v0 = np.asarray(config.v0, dtype=float)

    taus = sample_tau(config.tau_bar, rng, size=n) if n else np.zeros(0)
    phi = sample_phi(rng, n) if (config.mode == "physical" and n) else None

    if n == 0:
        w = np.zeros((0, 3))
        states = v0[None, :]
    elif config.target_correlation is not None and config.target_correlation != 0.0:
        z = rng.standard_normal((n, 3))
        states, w = _correlated_chain(v0, z, phi, config)
    else:
        w = sample_bath_velocity(rng, config.c_w, config.bath_kind, n,
                                 mean=config.bath_mean)
        if config.mode == "paper":
            states = _paper_chain(v0, w, masses.gamma_sin_theta)
        else:
            states = _physical_chain(v0, w, phi, masses.gamma_sin_theta)

    n_checked = _spot_check(config, states, w, phi)

    burn = int(np.floor(config.burn_in * n))
    v_samples = states[burn:n] if n else states
    w_samples = w[burn:n] if n else np.zeros((1, 3))

    v2_series = np.sum(v_samples**2, axis=1)
    w2_series = np.sum(w_samples**2, axis=1)
    vw_series = np.sum(v_samples * w_samples, axis=1) if n else np.zeros(1)
    drift = states[1:] - states[:-1] if n else np.zeros((1, 3))

    e_v2 = float(np.mean(v2_series))
    e_w2 = float(np.mean(w2_series))
    rho = raw_correlation(v_samples, w_samples) if n else 0.0
    rho_se = _rho_batch_se(v_samples, w_samples) if n else 0.0

    trajectory = None
    if config.record_trajectory:
        trajectory = {
            "time": np.concatenate([[0.0], np.cumsum(taus)]),
            "v": states,
            "w": w,
        }

    return StatSummary(
        n=n,
        seed=config.seed,
        mode=config.mode,
        mean_v=v_samples.mean(axis=0),
        e_v2=e_v2,
        e_v2_se=batch_se(v2_series),
        mean_w=w_samples.mean(axis=0),
        e_w2=e_w2,
        cross_vw=float(np.mean(vw_series)),
        cross_vw_se=batch_se(vw_series),
        rho=rho,
        rho_se=rho_se,
        drift_mean=drift.mean(axis=0),
        drift_se=np.array([batch_se(drift[:, i]) for i in range(3)]),
        energy_ratio=e_v2 / (masses.gamma2 * config.c_w**2),
        initial_v=v0,
        final_v=states[-1].copy(),
        tau_mean=float(np.mean(taus)) if n else 0.0,
        n_spot_checked=n_checked,
        trajectory=trajectory,
    )


def _rho_batch_se(v: np.ndarray, w: np.ndarray, n_batches: int = 16) -> float:
    n = v.shape[0]
    if n < 2 * n_batches:
        return float("nan")
    per = n // n_batches
    rhos = [
        raw_correlation(v[i * per:(i + 1) * per], w[i * per:(i + 1) * per])
        for i in range(n_batches)
    ]
    return float(np.std(rhos, ddof=1) / np.sqrt(n_batches))


def _spot_check(config: BathConfig, states: np.ndarray, w: np.ndarray,
                phi: np.ndarray | None) -> int:
    """Re-run a deterministic subset of collisions through the full operator."""
    n = config.n_collisions
    if n == 0 or config.spot_check_fraction <= 0:
        return 0
    stride = max(1, int(round(1.0 / config.spot_check_fraction)))
    idx = np.arange(0, n, stride)
    masses = config.masses
    g2 = masses.gamma2
    sg = masses.sin_theta_over_gamma
    for k in idx:
        v1, w1, v2 = states[k], w[k], states[k + 1]
        if phi is not None:
            event = collide(v1, w1, phi[k], masses)
            if not np.allclose(event.v2, v2, rtol=0, atol=1e-10 * max(1.0, np.max(np.abs(v2)))):
                raise AssertionError(f"chain step {k} disagrees with collision operator")
            event.check()
        else:
            w2 = w1 - sg * (w1 - v1)
            p_err = np.max(np.abs((v2 + g2 * w2) - (v1 + g2 * w1)))
            e_err = abs((v2 @ v2 + g2 * (w2 @ w2)) - (v1 @ v1 + g2 * (w1 @ w1)))
            scale = max(1.0, float(np.max(np.abs([v1, w1])))) ** 2
            if p_err > 1e-10 * scale or e_err > 1e-10 * scale:
                raise AssertionError(f"identity-axis step {k} violates conservation")
    return len(idx)


def _chunk_sizes(n: int, k: int = N_CHUNKS) -> list[int]:
    base = n // k
    sizes = [base + (1 if i < n % k else 0) for i in range(k)]
    return [s for s in sizes if s > 0]


def _run_chunks(fn, sizes: Sequence[int], workers: int) -> list:
    """Evaluate fn(chunk_index, size) for each chunk, merging in chunk order."""
    if workers <= 1:
        return [fn(i, s) for i, s in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(len(sizes)), sizes))


@dataclass(frozen=True)
class StepMoments:
    """Moments of the one-collision velocity change over replicas."""

    n: int
    mean_dv: np.ndarray
    se_dv: np.ndarray
    mean_v2_out: float
    se_v2_out: float
    predicted_dv: np.ndarray  # identity-projector law gs * (E[w] - v0)


def single_step_moments(config: BathConfig, n_replicas: int,
                        workers: int = 1) -> StepMoments:
    """Replicate a single collision ``n_replicas`` times from ``config.v0``.

    Used to measure the one-step drift law; replicas are split into fixed
    chunks with independent streams so the result does not depend on the
    worker count.
    """
    masses = config.masses
    v0 = np.asarray(config.v0, dtype=float)
    gs = masses.gamma_sin_theta

    def chunk(i: int, size: int):
        rng = substream(config.seed, TAG_REPLICA, i)
        if config.target_correlation is not None:
            w = sample_correlated_bath(v0, config.target_correlation, config.c_w,
                                       rng, size)
        else:
            w = sample_bath_velocity(rng, config.c_w, config.bath_kind, size,
                                     mean=config.bath_mean)
        if config.mode == "paper":
            dv = gs * (w - v0)
        else:
            phi = sample_phi(rng, size)
            dv = gs * (np.sum(phi * (w - v0), axis=1, keepdims=True)) * phi
        v2 = np.sum((v0 + dv) ** 2, axis=1)
        return (dv.sum(axis=0), (dv**2).sum(axis=0), v2.sum(), (v2**2).sum(), size)

    parts = _run_chunks(chunk, _chunk_sizes(n_replicas), workers)
    s1 = sum(p[0] for p in parts)
    s2 = sum(p[1] for p in parts)
    e1 = sum(p[2] for p in parts)
    e2 = sum(p[3] for p in parts)
    n = sum(p[4] for p in parts)
    mean_dv = s1 / n
    var_dv = np.maximum(s2 / n - mean_dv**2, 0.0)
    mean_v2 = e1 / n
    var_v2 = max(e2 / n - mean_v2**2, 0.0)
    return StepMoments(
        n=n,
        mean_dv=mean_dv,
        se_dv=np.sqrt(var_dv / n),
        mean_v2_out=mean_v2,
        se_v2_out=float(np.sqrt(var_v2 / n)),
        predicted_dv=gs * (np.asarray(config.bath_mean, dtype=float) - v0),
    )


@dataclass(frozen=True)
class CorrelationRow:
    """One row of the constant-speed correlation sweep."""

    speed_ratio: float
    solved_rho: float         # bath correlation keeping E|v2|^2 = |v1|^2
    predicted_rho: float      # small-mass law |v| / c_w
    exact_rho: float          # closed-form root of the energy balance
    exact_cross_moment: float  # E[v1.w1] from the pre-asymptotic formula
    converged: bool


def exact_balance_correlation(speed: float, c_w: float, masses: MassPair) -> float:
    """Closed-form bath correlation holding the main-particle speed steady.

    Root of the identity-projector energy balance
    ``0 = E|v2|^2 - E|v1|^2`` with ``E|v1|^2 = speed^2``, ``E|w1|^2 = c_w^2``:

        rho = ((2 - gs) speed^2 - gs c_w^2) / (2 (1 - gs) c_w speed)

    where ``gs = gamma sin(theta)``.  Tends to speed/c_w as gamma -> 0.
    """
    gs = masses.gamma_sin_theta
    return ((2.0 - gs) * speed**2 - gs * c_w**2) / (2.0 * (1.0 - gs) * c_w * speed)


def correlation_for_constant_speed(masses: MassPair, c_w: float,
                                   speed_ratios: Sequence[float], seed: int,
                                   n_samples: int = 20000, mode: str = "paper",
                                   bisect_iters: int = 40) -> list[CorrelationRow]:
    """Solve for the bath correlation that keeps the main speed constant.

    For each speed the measured post-collision energy change is driven to
    zero by bisection over the target correlation in [0, 1], using common
    random numbers across bisection iterates.  A non-bracketing response
    yields a non-converged row instead of an error.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    rows = []
    for j, ratio in enumerate(speed_ratios):
        speed = ratio * c_w
        if speed == 0.0:
            # At rest the bath has no preferred direction to correlate with.
            rows.append(CorrelationRow(0.0, 0.0, 0.0, 0.0, 0.0, True))
            continue
        v = np.array([speed, 0.0, 0.0])
        v_hat = v / speed
        rng = substream(seed, TAG_EVENTS, j)
        z = rng.standard_normal((n_samples, 3))
        perp = z - np.outer(z @ v_hat, v_hat)
        u = _unit_rows(perp)
        phi = sample_phi(rng, n_samples) if mode == "physical" else None
        gs = masses.gamma_sin_theta

        def energy_gap(rho_t: float) -> float:
            w = rho_t * c_w * v_hat + np.sqrt(1.0 - rho_t**2) * c_w * u
            if phi is None:
                v2 = v + gs * (w - v)
            else:
                v2 = v + gs * np.sum(phi * (w - v), axis=1, keepdims=True) * phi
            return float(np.mean(np.sum(v2**2, axis=1))) - speed**2

        lo, hi = 0.0, 1.0
        f_lo, f_hi = energy_gap(lo), energy_gap(hi)
        if f_lo > 0.0 or f_hi < 0.0:
            rows.append(CorrelationRow(ratio, float("nan"), ratio,
                                       exact_balance_correlation(speed, c_w, masses),
                                       float("nan"), False))
            continue
        for _ in range(bisect_iters):
            mid = 0.5 * (lo + hi)
            if energy_gap(mid) < 0.0:
                lo = mid
            else:
                hi = mid
        root = 0.5 * (lo + hi)
        rows.append(CorrelationRow(
            speed_ratio=ratio,
            solved_rho=root,
            predicted_rho=ratio,
            exact_rho=exact_balance_correlation(speed, c_w, masses),
            exact_cross_moment=((2.0 - gs) * speed**2 - gs * c_w**2)
            / (2.0 * (1.0 - gs)),
            converged=True,
        ))
    return rows


def sample_events(n: int, masses: MassPair, c_w: float, seed: int, *,
                  bath_kind: str = "isotropic-fixed-speed",
                  main_rms_speed: float | None = None,
                  main_fixed_speed: float | None = None,
                  target_correlation: float | None = None,
                  mode: str = "physical", workers: int = 1) -> EventBatch:
    """Draw ``n`` independent collision events against the bath.

    The main-particle velocity is isotropic; by default its rms speed is
    the stationary value gamma*c_w, so an uncorrelated bath neither heats
    nor cools the main particle on average.  Identity-projector events
    (``mode='paper'``) carry a zero axis and a zero off-axis correction.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    if main_rms_speed is not None and main_fixed_speed is not None:
        raise ValueError("give at most one of main_rms_speed / main_fixed_speed")
    rms = masses.gamma * c_w if (main_rms_speed is None and main_fixed_speed is None) \
        else main_rms_speed

    def chunk(i: int, size: int):
        rng = substream(seed, TAG_EVENTS, i)
        if main_fixed_speed is not None:
            v1 = main_fixed_speed * sample_phi(rng, size)
        else:
            v1 = rng.standard_normal((size, 3)) * (rms / np.sqrt(3.0))
        if target_correlation is not None:
            speeds = np.linalg.norm(v1, axis=1, keepdims=True)
            v_hats = v1 / speeds
            z = rng.standard_normal((size, 3))
            perp = z - np.sum(z * v_hats, axis=1, keepdims=True) * v_hats
            u = _unit_rows(perp)
            w1 = target_correlation * c_w * v_hats \
                + np.sqrt(1.0 - target_correlation**2) * c_w * u
        else:
            w1 = sample_bath_velocity(rng, c_w, bath_kind, size)
        if mode == "physical":
            phi = sample_phi(rng, size)
            batch = collide_batch(v1, w1, phi, masses)
            return batch.phi, batch.v1, batch.w1, batch.v2, batch.w2, batch.Phi
        gs = masses.gamma_sin_theta
        sg = masses.sin_theta_over_gamma
        rel = w1 - v1
        return (np.zeros((size, 3)), v1, w1, v1 + gs * rel, w1 - sg * rel,
                np.zeros((size, 3)))

    parts = _run_chunks(chunk, _chunk_sizes(n), workers)
    cols = [np.concatenate([p[i] for p in parts]) for i in range(6)]
    return EventBatch(masses=masses, phi=cols[0], v1=cols[1], w1=cols[2],
                      v2=cols[3], w2=cols[4], Phi=cols[5])


def incident_potential(batch: EventBatch) -> float:
    """Non-random replacement of the incident ledger terms.

    Averaging the incident symmetric+osmotic energy over events gives the
    constant ``(m/2) E[|(w2+w1)/2|^2 + |(w2-w1)/2|^2]`` that stands in for
    the incident particle when it is treated as a potential.
    """
    sym = 0.25 * np.sum((batch.w2 + batch.w1) ** 2, axis=1)
    osm = 0.25 * np.sum((batch.w2 - batch.w1) ** 2, axis=1)
    return float(0.5 * batch.masses.m * np.mean(sym + osm))


def ledger_batch(batch: EventBatch) -> dict[str, np.ndarray]:
    """Per-event ledger terms for a whole batch (unit main mass)."""
    sq = lambda x: np.sum(x * x, axis=1)
    return {
        "sym_main": 0.25 * sq(batch.v2 + batch.v1),
        "osm_main": 0.25 * sq(batch.v2 - batch.v1),
        "sym_inc": 0.25 * sq(batch.w2 + batch.w1),
        "osm_inc": 0.25 * sq(batch.w2 - batch.w1),
    }
