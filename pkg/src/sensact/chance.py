"""Distribution-free chance-constraint machinery.

The multivariate Chebyshev inequality bounds the probability mass outside
the ellipsoid {x : (x - mu)' P^-1 (x - mu) <= alpha^2} by n_x / alpha^2,
so alpha = sqrt(n_x / delta) guarantees violation probability at most
delta. Box constraints are shrunk by the ellipsoid exactly (per-face
support functions realize the Pontryagin difference for boxes); the
bounding-sphere radius is reported as the conservative variant.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .exceptions import DimensionError, DomainError
from .covariance import steady_augmented_cov, steady_mean_phases
from .plant import GainSet, SystemModel, TargetSpec, mode_matrices

__all__ = [
    "ChanceSpec",
    "BoxConstraint",
    "PhaseVerdict",
    "ChanceReport",
    "chebyshev_alpha",
    "confidence_radius",
    "ellipsoid_support",
    "verify_chance",
]


def chebyshev_alpha(n_x: int, delta: float) -> float:
    """Confidence scale alpha = sqrt(n_x / delta)."""
    if n_x < 1:
        raise DomainError("constrained dimension must be at least 1")
    if not 0.0 < delta < 1.0:
        raise DomainError("violation budget delta must lie in (0, 1)")
    return float(np.sqrt(n_x / delta))


@dataclass(frozen=True)
class ChanceSpec:
    """Violation budget and the dimension it applies to."""

    delta: float
    n_x: int

    def __post_init__(self):
        chebyshev_alpha(self.n_x, self.delta)  # validates both fields

    @property
    def alpha(self) -> float:
        return chebyshev_alpha(self.n_x, self.delta)


@dataclass(frozen=True)
class BoxConstraint:
    """Axis-aligned box |x_i| <= b_i on the selected state components.

    half_width applies to every constrained component unless
    per_component overrides it; components lists the state indices the
    box constrains (None means all of them).
    """

    half_width: float
    per_component: tuple = None
    components: tuple = None

    def __post_init__(self):
        if self.per_component is not None:
            pc = tuple(float(v) for v in self.per_component)
            if any(v <= 0 for v in pc):
                raise DomainError("box half-widths must be positive")
            object.__setattr__(self, "per_component", pc)
        elif self.half_width <= 0:
            raise DomainError("box half-width must be positive")
        if self.components is not None:
            object.__setattr__(self, "components", tuple(int(i) for i in self.components))

    def resolve(self, n: int):
        """Return (indices, half-widths) for an n-dimensional state."""
        idx = tuple(range(n)) if self.components is None else self.components
        if any(i < 0 or i >= n for i in idx):
            raise DimensionError("box component index out of range")
        if self.per_component is not None:
            if len(self.per_component) != len(idx):
                raise DimensionError("per-component widths do not match component count")
            return idx, np.asarray(self.per_component)
        return idx, np.full(len(idx), float(self.half_width))


def confidence_radius(p, alpha: float) -> float:
    """Radius of the smallest origin-centered sphere containing the
    ellipsoid {x : x' P^-1 x <= alpha^2}, namely alpha * sqrt(lambda_max(P))."""
    p = linalg.check_psd(p, "P")
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    return float(alpha * np.sqrt(np.max(np.linalg.eigvalsh(p))))


def ellipsoid_support(p, alpha: float, direction) -> float:
    """Support function alpha * sqrt(a' P a) of the Chebyshev ellipsoid in
    direction a. Well defined for singular P (no inverse is formed)."""
    p = linalg.check_psd(p, "P")
    a = np.asarray(direction, dtype=float).ravel()
    if a.shape != (p.shape[0],):
        raise DimensionError("direction dimension does not match P")
    if not np.any(a):
        raise DomainError("support direction must be nonzero")
    if alpha <= 0:
        raise DomainError("alpha must be positive")
    return float(alpha * np.sqrt(max(a @ p @ a, 0.0)))


@dataclass(frozen=True)
class PhaseVerdict:
    phase: int
    radius: float            # bounding-sphere radius of the phase ellipsoid
    margins: tuple           # per-face slack b_i - |mu_i| - support_i
    face_pass: bool          # exact per-face (Pontryagin) test
    sphere_pass: bool        # conservative bounding-sphere test


@dataclass(frozen=True)
class ChanceReport:
    delta: float
    alpha: float
    phases: tuple

    @property
    def passes(self) -> bool:
        return all(ph.face_pass for ph in self.phases)

    @property
    def sphere_passes(self) -> bool:
        return all(ph.sphere_pass for ph in self.phases)

    @property
    def min_radius(self) -> float:
        return min(ph.radius for ph in self.phases)

    @property
    def max_radius(self) -> float:
        return max(ph.radius for ph in self.phases)

    def to_dict(self) -> dict:
        return {
            "delta": self.delta,
            "alpha": self.alpha,
            "passes": self.passes,
            "sphere_passes": self.sphere_passes,
            "phases": [
                {
                    "phase": ph.phase,
                    "radius": ph.radius,
                    "margins": list(ph.margins),
                    "face_pass": ph.face_pass,
                    "sphere_pass": ph.sphere_pass,
                }
                for ph in self.phases
            ],
        }


def verify_chance(s, model: SystemModel, gains: GainSet, box: BoxConstraint,
                  delta: float, mean_phases=None) -> ChanceReport:
    """Steady-state chance-constraint verification for a schedule.

    For every phase k and every box face +-e_i the exact test requires

        |mu_i| + alpha * sqrt(P_ii) <= b_i

    on the constrained components of the steady state covariance; passing
    every face at every phase certifies the chance constraint in steady
    state. The bounding-sphere verdict (radius + |mu|_inf <= min b_i) is
    recorded alongside as the conservative variant.

    mean_phases defaults to the steady periodic mean (zero for an origin
    target with no feedforward).
    """
    mm = mode_matrices(model, gains)
    _, state_covs = steady_augmented_cov(s, model, gains)  # validates admissibility
    n = model.n
    period = state_covs.period
    idx, widths = box.resolve(n)
    alpha = chebyshev_alpha(len(idx), delta)

    if mean_phases is None:
        mean_phases = steady_mean_phases(mm, s, TargetSpec.origin(n, model.m))
    mean_phases = np.asarray(mean_phases, dtype=float)
    if mean_phases.shape != (period, n):
        raise DimensionError(f"mean_phases must have shape {(period, n)}")

    sel = np.ix_(idx, idx)
    verdicts = []
    for k in range(period):
        p_c = state_covs[k][sel]
        mu_c = mean_phases[k][list(idx)]
        radius = confidence_radius(p_c, alpha)
        supports = alpha * np.sqrt(np.clip(np.diag(p_c), 0.0, None))
        margins = widths - np.abs(mu_c) - supports
        sphere_ok = radius + np.max(np.abs(mu_c), initial=0.0) <= np.min(widths)
        verdicts.append(
            PhaseVerdict(
                phase=k,
                radius=radius,
                margins=tuple(float(v) for v in margins),
                face_pass=bool(np.all(margins >= 0.0)),
                sphere_pass=bool(sphere_ok),
            )
        )
    return ChanceReport(delta=float(delta), alpha=alpha, phases=tuple(verdicts))
