"""Pure-jump Levy drivers with finitely many jump sizes.

A driver is described by a linear drift, an optional Brownian coefficient,
and an atomic jump measure ``sum_i alpha_i * delta_{beta_i}``: jumps of
size ``beta_i`` arrive as independent Poisson streams with rate
``alpha_i``.  Every moment integral against the jump measure reduces to a
finite sum, so everything computed here is exact up to rounding.

Drift conventions.  With ``compensated=False`` (the default) ``drift_b``
is the slope of the piecewise-linear part of the path between jumps and
``E[L_1] = drift_b + sum_i alpha_i * beta_i``.  With ``compensated=True``
the spec is quoted in truncated form: jumps with ``|beta| <= 1`` are
compensated, so the simulated slope between jumps is
``drift_b - sum_{|beta|<=1} alpha*beta`` and
``E[L_1] = drift_b + sum_{|beta|>1} alpha*beta``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DuplicateJumpSize, NonpositiveIntensity, ZeroJumpSize


@dataclass(frozen=True)
class LevySpec:
    """Driver specification as written in a config file.

    Parameters
    ----------
    drift_b:
        Linear drift coefficient (per unit time).
    sigma:
        Brownian coefficient of the driver itself, >= 0.  Zero for the
        pure-jump setting required by the comparison checks.
    atoms:
        Tuple of ``(jump_size, intensity)`` pairs.  Jump sizes must be
        nonzero and pairwise distinct, intensities strictly positive.
    compensated:
        Drift quoting convention, see module docstring.
    """

    drift_b: float = 0.0
    sigma: float = 0.0
    atoms: tuple[tuple[float, float], ...] = ()
    compensated: bool = False


@dataclass(frozen=True)
class ValidatedLevySpec:
    """A :class:`LevySpec` that passed validation, with derived flags."""

    drift_b: float
    sigma: float
    atoms: tuple[tuple[float, float], ...]
    compensated: bool
    m_atoms: int
    continuous_part: bool

    @property
    def jump_sizes(self) -> np.ndarray:
        return np.array([b for b, _ in self.atoms], dtype=float)

    @property
    def intensities(self) -> np.ndarray:
        return np.array([a for _, a in self.atoms], dtype=float)

    @property
    def total_intensity(self) -> float:
        return float(sum(a for _, a in self.atoms))


def validate_levy_spec(spec: LevySpec | ValidatedLevySpec) -> ValidatedLevySpec:
    """Check a driver spec and annotate it with atom count and flags.

    Raises
    ------
    ZeroJumpSize, DuplicateJumpSize, NonpositiveIntensity
        For malformed atom lists.
    ValueError
        For nonfinite drift or negative sigma.
    """
    if isinstance(spec, ValidatedLevySpec):
        spec = LevySpec(spec.drift_b, spec.sigma, spec.atoms, spec.compensated)
    if not np.isfinite(spec.drift_b):
        raise ValueError(f"drift must be finite, got {spec.drift_b}")
    if not np.isfinite(spec.sigma) or spec.sigma < 0.0:
        raise ValueError(f"sigma must be finite and >= 0, got {spec.sigma}")
    seen: set[float] = set()
    for beta, alpha in spec.atoms:
        if not (np.isfinite(beta) and np.isfinite(alpha)):
            raise ValueError(f"atom ({beta}, {alpha}) is not finite")
        if beta == 0.0:
            raise ZeroJumpSize("jump size 0 is not allowed; use sigma for a continuous part")
        if alpha <= 0.0:
            raise NonpositiveIntensity(f"intensity {alpha} for jump size {beta} must be > 0")
        if beta in seen:
            raise DuplicateJumpSize(f"jump size {beta} appears more than once")
        seen.add(beta)
    return ValidatedLevySpec(
        drift_b=float(spec.drift_b),
        sigma=float(spec.sigma),
        atoms=tuple((float(b), float(a)) for b, a in spec.atoms),
        compensated=bool(spec.compensated),
        m_atoms=len(spec.atoms),
        continuous_part=spec.sigma > 0.0,
    )


@dataclass(frozen=True)
class MomentTable:
    """Raw jump-measure moments and drift summaries.

    ``raw_moments[i] = sum_k alpha_k * beta_k**i`` (index 0 is the total
    jump intensity).  ``mean_l1`` is ``E[L_1]`` under the spec's drift
    convention; ``effective_drift`` is the transport coefficient of the
    associated backward PDE and coincides with ``mean_l1``.
    """

    raw_moments: np.ndarray
    mean_l1: float
    effective_drift: float
    compensated: bool


def linear_drift(spec: ValidatedLevySpec) -> float:
    """Slope of the path between jumps (what the simulator integrates)."""
    if not spec.compensated:
        return spec.drift_b
    b = spec.jump_sizes
    a = spec.intensities
    small = np.abs(b) <= 1.0
    return spec.drift_b - float(np.sum(a[small] * b[small]))


def levy_moments(spec: ValidatedLevySpec, max_order: int) -> MomentTable:
    """Raw moments of the jump measure up to ``max_order``, plus E[L_1].

    The sums are evaluated in closed form over the atoms, with no
    quadrature error.
    """
    if max_order < 1:
        raise ValueError(f"max_order must be >= 1, got {max_order}")
    if spec.m_atoms:
        b = spec.jump_sizes
        a = spec.intensities
        mom = np.array([float(np.sum(a * b**i)) for i in range(max_order + 1)])
    else:
        mom = np.zeros(max_order + 1)
    mean = linear_drift(spec) + mom[1]
    return MomentTable(
        raw_moments=mom,
        mean_l1=mean,
        effective_drift=mean,
        compensated=spec.compensated,
    )
