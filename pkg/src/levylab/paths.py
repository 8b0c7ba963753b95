"""Forward path simulation: Brownian driver, jump paths with exact per-step
jump records, clamp-reflected state, and the increasing clock A.

All randomness flows from one master seed through named SeedSequence spawn
keys (see :func:`derived_rng`), so an ensemble is bit-reproducible for a
fixed (spec, grid, seed, n_paths) and independent streams never overlap.

Within a doubly stochastic ensemble the Brownian driver B is one shared
path: conditional expectations in the backward solver are taken over the
jump randomness with B frozen, so every Monte Carlo path of an ensemble
sees the same B realization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InitialPointOutsideDomain, NonMonotoneUserTable
from .levy import LevySpec, ValidatedLevySpec, linear_drift, validate_levy_spec
from .teugels import TeugelsBasis, teugels_increments

# stream ids for the seed tree: (master_seed, outer_sample, stream)
STREAM_LEVY = 0
STREAM_BROWNIAN = 1
STREAM_COMPARISON = 2

A_MODES = ("identity-time", "local-time", "user-table")


def derived_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Generator for a named stream of the master seed's derivation tree."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=tuple(key)))


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid 0 = t_0 < ... < t_n = horizon."""

    horizon: float
    n_steps: int

    def __post_init__(self):
        if not (self.horizon > 0.0 and np.isfinite(self.horizon)):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)


def boundary_direction(x, theta: float):
    """Inward direction e: +1 at -theta, -1 at +theta, 0 inside.

    Clamped states sit exactly on +-theta, so the equality tests are safe.
    """
    x = np.asarray(x, dtype=float)
    return np.where(x <= -theta, 1.0, np.where(x >= theta, -1.0, 0.0))


def simulate_brownian(grid: TimeGrid, rng: np.random.Generator, n_paths: int | None = None) -> np.ndarray:
    """Brownian node values; B_0 = 0, increments i.i.d. N(0, dt)."""
    shape = (grid.n_steps,) if n_paths is None else (n_paths, grid.n_steps)
    inc = rng.normal(0.0, np.sqrt(grid.dt), size=shape)
    out = np.zeros(shape[:-1] + (grid.n_steps + 1,))
    out[..., 1:] = np.cumsum(inc, axis=-1)
    return out


def simulate_jump_counts(
    spec: ValidatedLevySpec, grid: TimeGrid, rng: np.random.Generator, n_paths: int
) -> np.ndarray:
    """Per-step jump counts per atom, shape [n_paths, n_steps, n_atoms].

    For each atom the total count over the horizon is Poisson(alpha * T)
    and the jump times are uniform, binned into the grid's steps.
    """
    n = grid.n_steps
    counts = np.zeros((n_paths, n, spec.m_atoms), dtype=np.int64)
    pvals = np.full(n, 1.0 / n)
    for a in range(spec.m_atoms):
        alpha = spec.atoms[a][1]
        totals = rng.poisson(alpha * grid.horizon, size=n_paths)
        counts[:, :, a] = rng.multinomial(totals, pvals)
    return counts


def assemble_levy_paths(
    spec: ValidatedLevySpec,
    grid: TimeGrid,
    counts: np.ndarray,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Node values of the driver built from per-step jump counts.

    L = (linear drift per the compensation flag) * t + jump sums, plus a
    sigma-scaled Brownian part drawn from ``rng`` when the spec has one.
    """
    n_paths = counts.shape[0]
    jump_sum = counts @ spec.jump_sizes if spec.m_atoms else np.zeros(counts.shape[:2])
    L = np.zeros((n_paths, grid.n_steps + 1))
    L[:, 1:] = np.cumsum(jump_sum, axis=1)
    L += linear_drift(spec) * grid.nodes[None, :]
    if spec.continuous_part:
        if rng is None:
            raise ValueError("an rng is required to draw the driver's continuous part")
        L += spec.sigma * simulate_brownian(grid, rng, n_paths)
    return L


def jump_record_from_counts(counts2d: np.ndarray, jump_sizes: np.ndarray) -> list[tuple[int, float]]:
    """Expand a [n_steps, n_atoms] count array into (step, size) pairs."""
    record: list[tuple[int, float]] = []
    steps, atoms = np.nonzero(counts2d)
    for s, a in zip(steps, atoms):
        record.extend([(int(s), float(jump_sizes[a]))] * int(counts2d[s, a]))
    record.sort(key=lambda item: item[0])
    return record


def simulate_levy(
    spec: LevySpec | ValidatedLevySpec, grid: TimeGrid, rng: np.random.Generator
) -> tuple[np.ndarray, list[tuple[int, float]]]:
    """One driver path plus its exhaustive jump record."""
    spec = validate_levy_spec(spec)
    counts = simulate_jump_counts(spec, grid, rng, 1)
    L = assemble_levy_paths(spec, grid, counts, rng)
    return L[0], jump_record_from_counts(counts[0], spec.jump_sizes)


def simulate_reflected_x(
    sigma_x: Callable[[np.ndarray], np.ndarray],
    theta: float,
    x0: float,
    levy_path: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Clamp-projected Euler state on [-theta, theta] with its local time.

    Each step proposes ``X + sigma_x(X) * dL`` (jumps within the step are
    aggregated into dL, matching the left-limit integrand) and projects
    onto the interval; the projection distance is absorbed into the
    nondecreasing local time |eta|.  In dimension one the projection is
    the exact one-step Skorokhod map.
    """
    if not (-theta <= x0 <= theta):
        raise InitialPointOutsideDomain(f"x0={x0} outside [-{theta}, {theta}]")
    L = np.asarray(levy_path, dtype=float)
    squeeze = L.ndim == 1
    if squeeze:
        L = L[None, :]
    n_paths, n_nodes = L.shape
    dL = np.diff(L, axis=1)
    X = np.empty((n_paths, n_nodes))
    eta = np.zeros((n_paths, n_nodes))
    X[:, 0] = x0
    for k in range(n_nodes - 1):
        proposal = X[:, k] + np.asarray(sigma_x(X[:, k]), dtype=float) * dL[:, k]
        clamped = np.clip(proposal, -theta, theta)
        X[:, k + 1] = clamped
        eta[:, k + 1] = eta[:, k] + np.abs(proposal - clamped)
    if squeeze:
        return X[0], eta[0]
    return X, eta


def assemble_A(
    mode: str,
    grid: TimeGrid,
    eta_abs: np.ndarray | None = None,
    table: np.ndarray | None = None,
) -> np.ndarray:
    """The increasing clock A: identity time, boundary local time, or a table."""
    if mode == "identity-time":
        if eta_abs is not None:
            return np.broadcast_to(grid.nodes, eta_abs.shape).copy()
        return grid.nodes.copy()
    if mode == "local-time":
        if eta_abs is None:
            raise ValueError("local-time mode needs the simulated |eta|")
        return np.array(eta_abs, dtype=float, copy=True)
    if mode == "user-table":
        if table is None:
            raise ValueError("user-table mode needs a table")
        A = np.asarray(table, dtype=float)
        if A.shape[-1] != grid.n_steps + 1:
            raise NonMonotoneUserTable("table length does not match the grid")
        if np.any(A[..., 0] != 0.0):
            raise NonMonotoneUserTable("A must start at 0")
        if np.any(np.diff(A, axis=-1) < 0.0):
            raise NonMonotoneUserTable("A must be nondecreasing")
        return A.copy()
    raise ValueError(f"unknown A mode {mode!r}; expected one of {A_MODES}")


def skorokhod_minimality_gap(
    X: np.ndarray, V: np.ndarray, eta_abs: np.ndarray, theta: float
) -> float:
    """Discrete variational-inequality functional of the reflection.

    Sums (X_k - V_k) * n(X_k) * d|eta| over steps, with n the outward
    normal (n = -e), and returns the minimum over paths.  For the clamp
    scheme every term is nonnegative for any comparison path V with values
    in [-theta, theta], because |eta| only grows while X sits exactly on
    the boundary.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    eta = np.atleast_2d(np.asarray(eta_abs, dtype=float))
    d_eta = np.diff(eta, axis=-1)
    normal = -boundary_direction(X[..., 1:], theta)
    terms = (X[..., 1:] - V[..., 1:]) * normal * d_eta
    return float(np.min(np.sum(terms, axis=-1)))


def unit_coefficient(x):
    """Default forward coefficient sigma_x(x) = 1."""
    return np.ones_like(np.asarray(x, dtype=float))


@dataclass
class PathBundle:
    """One simulated scenario on a time grid.

    ``jump_record`` lists every jump as a (step index, size) pair;
    ``eta_sign`` holds the inward direction e(X) at each node (zero away
    from the boundary); ``dH`` holds the per-step orthonormal martingale
    increments, columns beyond the basis rank exactly zero.
    """

    grid: TimeGrid
    B: np.ndarray
    L: np.ndarray
    jump_record: list[tuple[int, float]]
    X: np.ndarray
    eta_abs: np.ndarray
    eta_sign: np.ndarray
    A: np.ndarray
    dH: np.ndarray


@dataclass
class PathEnsemble:
    """A stack of scenarios sharing one frozen Brownian path B."""

    grid: TimeGrid
    spec: ValidatedLevySpec
    basis: TeugelsBasis
    theta: float
    x0: float
    B: np.ndarray
    L: np.ndarray
    jump_counts: np.ndarray
    X: np.ndarray
    eta_abs: np.ndarray
    A: np.ndarray
    dH: np.ndarray

    @property
    def n_paths(self) -> int:
        return self.L.shape[0]

    def bundle(self, p: int) -> PathBundle:
        return PathBundle(
            grid=self.grid,
            B=self.B.copy(),
            L=self.L[p].copy(),
            jump_record=jump_record_from_counts(self.jump_counts[p], self.spec.jump_sizes),
            X=self.X[p].copy(),
            eta_abs=self.eta_abs[p].copy(),
            eta_sign=np.asarray(boundary_direction(self.X[p], self.theta)),
            A=self.A[p].copy(),
            dH=self.dH[p].copy(),
        )


def simulate_ensemble(
    spec: LevySpec | ValidatedLevySpec,
    grid: TimeGrid,
    basis: TeugelsBasis,
    n_paths: int,
    master_seed: int,
    theta: float,
    x0: float,
    sigma_x: Callable[[np.ndarray], np.ndarray] | None = None,
    a_mode: str = "local-time",
    a_table: np.ndarray | None = None,
    outer_index: int = 0,
) -> PathEnsemble:
    """Simulate a doubly stochastic ensemble for one outer Brownian sample.

    Streams: (master_seed, outer_index, STREAM_LEVY) drives the jump part
    and the driver's own continuous part; (master_seed, outer_index,
    STREAM_BROWNIAN) drives the shared backward Brownian path.
    """
    spec = validate_levy_spec(spec)
    sigma_x = sigma_x or unit_coefficient
    rng_levy = derived_rng(master_seed, outer_index, STREAM_LEVY)
    rng_b = derived_rng(master_seed, outer_index, STREAM_BROWNIAN)
    counts = simulate_jump_counts(spec, grid, rng_levy, n_paths)
    L = assemble_levy_paths(spec, grid, counts, rng_levy)
    B = simulate_brownian(grid, rng_b)
    X, eta = simulate_reflected_x(sigma_x, theta, x0, L)
    A = assemble_A(a_mode, grid, eta_abs=eta, table=a_table)
    dH = teugels_increments(counts, grid, spec, basis, levy_path=L)
    return PathEnsemble(
        grid=grid,
        spec=spec,
        basis=basis,
        theta=theta,
        x0=x0,
        B=B,
        L=L,
        jump_counts=counts,
        X=X,
        eta_abs=eta,
        A=A,
        dH=dH,
    )
