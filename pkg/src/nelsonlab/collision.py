"""Elastic two-particle collision operator and its energy bookkeeping.

A main particle (mass ``M``, velocity ``v``) and an incident particle
(mass ``m``, velocity ``w``) exchange momentum and energy along a single
unit axis ``phi``; motion orthogonal to the axis is untouched.  With the
mass ratio ``gamma^2 = m/M`` the exchange along the axis is governed by
the 2x2 matrix

    [[cos(theta), gamma*sin(theta)],
     [sin(theta)/gamma, -cos(theta)]]

with sin(theta) = 2*gamma/(1+gamma^2) and cos(theta) = (1-gamma^2)/(1+gamma^2).
The full 3D update carries an off-axis correction
``Phi = sin(theta) * (I - phi phi^T)(v1 - w1)`` that is orthogonal to the
main particle's velocity change.

Everything here is a pure function of its inputs; values are freely
shareable across threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Exact identities (conservation laws, algebraic-form agreement) are
# asserted at this relative tolerance: double precision with ~50 flops
# per event.  Tests may override it locally.
REL_TOL = 1e-12

# Unit axes farther than this from norm 1 are rejected instead of being
# silently renormalized; silent fixing of badly non-unit axes hides
# caller bugs.
AXIS_NORM_TOL = 1e-9


def as_vec3(value, name: str = "vector") -> np.ndarray:
    """Coerce to a finite float vector of shape (3,)."""
    v = np.asarray(value, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"{name} must have shape (3,), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} must be finite, got {v}")
    return v


def _scale(*vectors: np.ndarray) -> float:
    """Magnitude floor used for relative comparisons."""
    return max(1.0, *(float(np.max(np.abs(v))) for v in vectors))


@dataclass(frozen=True)
class MassPair:
    """Main mass ``M`` and incident mass ``m`` with derived exchange angles.

    ``sin_theta / gamma`` is stored as ``2 / (1 + gamma^2)`` so the light
    incident limit gamma -> 0 stays finite.
    """

    M: float
    m: float

    def __post_init__(self):
        if not (np.isfinite(self.M) and np.isfinite(self.m)):
            raise ValueError(f"masses must be finite, got M={self.M}, m={self.m}")
        if self.M <= 0 or self.m <= 0:
            raise ValueError(f"masses must be positive, got M={self.M}, m={self.m}")

    @classmethod
    def from_gamma2(cls, gamma2: float, M: float = 1.0) -> "MassPair":
        """Build from the squared mass ratio gamma^2 = m/M."""
        if not np.isfinite(gamma2) or gamma2 <= 0:
            raise ValueError(f"gamma2 must be positive and finite, got {gamma2}")
        return cls(M=M, m=gamma2 * M)

    @property
    def gamma2(self) -> float:
        return self.m / self.M

    @property
    def gamma(self) -> float:
        return np.sqrt(self.gamma2)

    @property
    def sin_theta(self) -> float:
        return 2.0 * self.gamma / (1.0 + self.gamma2)

    @property
    def cos_theta(self) -> float:
        return (1.0 - self.gamma2) / (1.0 + self.gamma2)

    @property
    def gamma_sin_theta(self) -> float:
        """gamma * sin(theta) = 2*gamma^2/(1+gamma^2), the main-particle gain."""
        return 2.0 * self.gamma2 / (1.0 + self.gamma2)

    @property
    def sin_theta_over_gamma(self) -> float:
        """sin(theta)/gamma = 2/(1+gamma^2), the incident-particle gain."""
        return 2.0 / (1.0 + self.gamma2)


class Projector:
    """Rank-1 projector ``P = phi phi^T`` onto a unit collision axis."""

    __slots__ = ("phi",)

    def __init__(self, phi):
        phi = as_vec3(phi, "phi")
        norm = float(np.linalg.norm(phi))
        if abs(norm - 1.0) > AXIS_NORM_TOL:
            raise ValueError(
                f"collision axis must be a unit vector (|phi| = {norm!r}); "
                f"renormalization is only applied within {AXIS_NORM_TOL:g}"
            )
        self.phi = phi / norm

    @property
    def matrix(self) -> np.ndarray:
        return np.outer(self.phi, self.phi)

    def along(self, v: np.ndarray) -> np.ndarray:
        """Component of ``v`` along the axis, P v."""
        return (self.phi @ v) * self.phi

    def reject(self, v: np.ndarray) -> np.ndarray:
        """Component of ``v`` orthogonal to the axis, (I - P) v."""
        return v - self.along(v)


def collision_matrix(masses: MassPair) -> np.ndarray:
    """The 2x2 exchange matrix acting on (main, incident) axis components.

    It is an involution with determinant -1 and preserves the quadratic
    form diag(1, gamma^2), which encodes momentum and energy conservation.
    """
    return np.array(
        [
            [masses.cos_theta, masses.gamma * masses.sin_theta],
            [masses.sin_theta_over_gamma, -masses.cos_theta],
        ]
    )


def collide_1d(u1: float, s1: float, masses: MassPair) -> tuple[float, float]:
    """One-dimensional exchange of the axis components (u1, s1) -> (u2, s2)."""
    if not (np.isfinite(u1) and np.isfinite(s1)):
        raise ValueError(f"axis components must be finite, got ({u1}, {s1})")
    u2 = masses.cos_theta * u1 + masses.gamma * masses.sin_theta * s1
    s2 = masses.sin_theta_over_gamma * u1 - masses.cos_theta * s1
    return float(u2), float(s2)


@dataclass(frozen=True)
class CollisionEvent:
    """One elastic collision: inputs, outputs, axis, and the Phi correction."""

    masses: MassPair
    phi: np.ndarray
    v1: np.ndarray
    w1: np.ndarray
    v2: np.ndarray
    w2: np.ndarray
    Phi: np.ndarray

    def momentum(self, side: str = "pre") -> np.ndarray:
        """Total momentum M v + m w for the chosen side ('pre' or 'post')."""
        v, w = self._side(side)
        return self.masses.M * v + self.masses.m * w

    def energy(self, side: str = "pre") -> float:
        """Total kinetic energy (M|v|^2 + m|w|^2)/2 for the chosen side."""
        v, w = self._side(side)
        return 0.5 * float(self.masses.M * v @ v + self.masses.m * w @ w)

    def _side(self, side: str) -> tuple[np.ndarray, np.ndarray]:
        if side == "pre":
            return self.v1, self.w1
        if side == "post":
            return self.v2, self.w2
        raise ValueError(f"side must be 'pre' or 'post', got {side!r}")

    def check(self, tol: float = REL_TOL) -> dict[str, float]:
        """Residuals of the event invariants, all expected below ``tol``.

        Raises ValueError when any invariant is violated.
        """
        scale = _scale(self.v1, self.w1, self.v2, self.w2)
        g2 = self.masses.gamma2
        residuals = {
            "momentum": float(
                np.max(np.abs(self.momentum("post") - self.momentum("pre")))
            )
            / (self.masses.M * scale),
            "energy": abs(self.energy("post") - self.energy("pre"))
            / (self.masses.M * scale**2),
            "phi_orthogonality": abs(float(self.Phi @ (self.v2 - self.v1))) / scale**2,
            "momentum_transfer": float(
                np.max(np.abs(g2 * (self.w2 - self.w1) + (self.v2 - self.v1)))
            )
            / scale,
            "orthogonal_main": float(
                np.max(np.abs(_reject(self.phi, self.v2) - _reject(self.phi, self.v1)))
            )
            / scale,
            "orthogonal_incident": float(
                np.max(np.abs(_reject(self.phi, self.w2) - _reject(self.phi, self.w1)))
            )
            / scale,
        }
        bad = {k: r for k, r in residuals.items() if r > tol}
        if bad:
            raise ValueError(f"collision invariants violated: {bad}")
        return residuals


def _reject(phi: np.ndarray, v: np.ndarray) -> np.ndarray:
    return v - (phi @ v) * phi


def collide(v1, w1, phi, masses: MassPair) -> CollisionEvent:
    """Apply the collision operator to (v1, w1) along axis ``phi``.

    Computes the incremental update form
    ``v2 = v1 + gamma sin(theta) P (w1 - v1)`` (exact identity when the
    relative velocity vanishes) and cross-checks the equivalent
    block-projection form against it to ``REL_TOL`` on every call.
    """
    axis = phi if isinstance(phi, Projector) else Projector(phi)
    v1 = as_vec3(v1, "v1")
    w1 = as_vec3(w1, "w1")
    gs = masses.gamma_sin_theta
    sg = masses.sin_theta_over_gamma

    kick = axis.along(w1 - v1)
    v2 = v1 + gs * kick
    w2 = w1 - sg * kick

    # Cross-check against the block-projection form.
    pv1 = axis.along(v1)
    pw1 = axis.along(w1)
    v2_alt = v1 - gs * pv1 + gs * pw1
    w2_alt = sg * pv1 + w1 - sg * pw1
    scale = _scale(v1, w1)
    forms_gap = max(
        float(np.max(np.abs(v2 - v2_alt))), float(np.max(np.abs(w2 - w2_alt)))
    )
    if forms_gap > REL_TOL * scale:
        raise ArithmeticError(
            f"update and block collision forms disagree by {forms_gap:g}"
        )

    Phi = masses.sin_theta * axis.reject(v1 - w1)
    return CollisionEvent(
        masses=masses, phi=axis.phi, v1=v1, w1=w1, v2=v2, w2=w2, Phi=Phi
    )


def total_momentum(event: CollisionEvent, side: str = "pre") -> np.ndarray:
    return event.momentum(side)


def total_energy(event: CollisionEvent, side: str = "pre") -> float:
    return event.energy(side)


@dataclass(frozen=True)
class EnergyLedger:
    """Symmetric/osmotic split of the conserved energy, per unit main mass.

    ``total`` equals ``2 H / M = |v1|^2 + gamma^2 |w1|^2`` for every valid
    event.  The four terms are exposed separately so the incident pair can
    be replaced by its expectation (a non-random incident potential)
    downstream.
    """

    sym_main: float
    osm_main: float
    sym_inc: float
    osm_inc: float
    gamma2: float

    @property
    def total(self) -> float:
        return self.sym_main + self.osm_main + self.gamma2 * (
            self.sym_inc + self.osm_inc
        )


def nelson_energy_ledger(event: CollisionEvent) -> EnergyLedger:
    """Decompose the event energy into symmetric and osmotic squares."""
    half_sum_v = 0.5 * (event.v2 + event.v1)
    half_dif_v = 0.5 * (event.v2 - event.v1)
    half_sum_w = 0.5 * (event.w2 + event.w1)
    half_dif_w = 0.5 * (event.w2 - event.w1)
    return EnergyLedger(
        sym_main=float(half_sum_v @ half_sum_v),
        osm_main=float(half_dif_v @ half_dif_v),
        sym_inc=float(half_sum_w @ half_sum_w),
        osm_inc=float(half_dif_w @ half_dif_w),
        gamma2=event.masses.gamma2,
    )


@dataclass(frozen=True)
class EventBatch:
    """Vectorized set of collisions sharing one mass pair.

    ``phi`` rows are the unit axes; ``Phi`` rows the off-axis corrections.
    """

    masses: MassPair
    phi: np.ndarray
    v1: np.ndarray
    w1: np.ndarray
    v2: np.ndarray
    w2: np.ndarray
    Phi: np.ndarray

    def __len__(self) -> int:
        return self.v1.shape[0]

    def event(self, i: int) -> CollisionEvent:
        """Materialize event ``i`` as a scalar CollisionEvent."""
        return CollisionEvent(
            masses=self.masses,
            phi=self.phi[i],
            v1=self.v1[i],
            w1=self.w1[i],
            v2=self.v2[i],
            w2=self.w2[i],
            Phi=self.Phi[i],
        )


def collide_batch(v1: np.ndarray, w1: np.ndarray, phi: np.ndarray,
                  masses: MassPair) -> EventBatch:
    """Vectorized collision of (n, 3) velocity arrays along (n, 3) unit axes."""
    v1 = np.asarray(v1, dtype=float)
    w1 = np.asarray(w1, dtype=float)
    phi = np.asarray(phi, dtype=float)
    gs = masses.gamma_sin_theta
    sg = masses.sin_theta_over_gamma
    rel = w1 - v1
    along = np.sum(phi * rel, axis=1, keepdims=True) * phi
    v2 = v1 + gs * along
    w2 = w1 - sg * along
    Phi = -masses.sin_theta * (rel - along)
    return EventBatch(masses=masses, phi=phi, v1=v1, w1=w1, v2=v2, w2=w2, Phi=Phi)
