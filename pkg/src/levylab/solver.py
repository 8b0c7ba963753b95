"""Backward least-squares Monte Carlo solver for the reflected equations.

Scheme
------
One explicit backward sweep per frozen Brownian sample.  At step k (from
the node k+1 down to k), with dt the step and dA, dB, dH the step
increments of the clock, the frozen Brownian path and the orthonormal
martingales:

1. regress  Y_{k+1} + f(t_{k+1}, X_{k+1}, Y_{k+1}, Z_{k+1}) dt
            + phi(t_{k+1}, X_{k+1}, Y_{k+1}) dA_k          on basis(X_k),
   giving yhat0; the doubly stochastic term is added outside the
   regression, yhat = yhat0 + g(t_k, X_k, yhat0) dB_k, because dB_k is a
   frozen (path-independent) number under the ensemble's conditioning;
2. regress  (Y_{k+1} - yhat0) dH(i)_k  on basis(X_k) and divide by dt to
   estimate Z(i)_k (justified by the strong orthonormality
   <H(i), H(j)>_t = delta_ij t).  Centering by the X_k-measurable yhat0
   leaves the conditional expectation of Y_{k+1} dH(i)_k unchanged, since
   the increments have zero conditional mean, but removes the 1/dt noise
   amplification on thin regression cells; components beyond the basis
   rank are exact zeros;
3. apply the obstacle.  Projection mode: Y_k = max(yhat, S_k) with
   dK_k = (yhat - S_k)^-.  Penalization mode with parameter n: the
   one-step penalty equation Y = yhat + n dt (Y - S_k)^- is solved in
   closed form (resolvent step), Y_k = (yhat + n dt S_k) / (1 + n dt) on
   {yhat < S_k}; the explicit variant n dt (yhat - S_k)^- diverges once
   n dt > 2, so the resolvent form is used for every n.

The regression basis is an intercept, a boundary-layer indicator and
standardized monomials in X up to the configured degree.  Structurally
constant columns are dropped silently; a genuinely rank-deficient design
is reduced from the highest degree down, with a warning.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import SingularRegression, SingularRegressionWarning, TerminalBelowObstacle
from .paths import PathEnsemble
from .problems import ProblemSpec

PROJECTION = None  # sentinel value of SolverConfig.penalization


@dataclass(frozen=True)
class SolverConfig:
    """Knobs of the backward sweep.

    ``penalization`` is a positive penalty parameter, or ``None`` for
    projection mode (the limit of the penalty scheme).  ``boundary_layer``
    is the width of the near-wall indicator column; ``None`` means
    theta / 10.  ``n_paths`` must be at least ten times the regression
    basis dimension.
    """

    n_paths: int
    penalization: float | None = PROJECTION
    degree: int = 4
    boundary_layer: float | None = None
    outer_b_samples: int = 1
    master_seed: int = 0
    terminal_tol: float = 1e-9

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.penalization is not None and not self.penalization > 0.0:
            raise ValueError("penalization must be positive or None (projection)")
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        if self.outer_b_samples < 1:
            raise ValueError("outer_b_samples must be >= 1")

    @property
    def basis_dim(self) -> int:
        return self.degree + 2  # intercept + degree monomials + layer indicator


@dataclass
class EnsembleSolution:
    """Pathwise solution arrays for one frozen Brownian sample.

    ``Y``, ``K``, ``y_pre`` and ``S`` are [path, node]; ``Z`` is
    [path, node, component] with exact zeros beyond ``rank``; ``dK`` is the
    per-step push [path, step].  ``y_pre`` is the pre-push (left limit)
    estimate at each node, which the Skorokhod residual is built from.
    """

    penalization: float | None
    rank: int
    Y: np.ndarray
    Z: np.ndarray
    K: np.ndarray
    dK: np.ndarray
    y_pre: np.ndarray
    S: np.ndarray
    A: np.ndarray
    dt: float
    y0_value: float
    y0_se: float
    skorokhod_residual: float = 0.0
    penetration_norm: float = 0.0
    apriori_norms: dict = field(default_factory=dict)


def regression_design(
    x: np.ndarray, degree: int, theta: float, layer_width: float
) -> np.ndarray:
    """Design matrix [1, layer indicator, x~, x~^2, ..., x~^degree].

    x~ is the standardized state.  Columns that are structurally constant
    across the ensemble (collapsed state, empty or full boundary layer)
    are omitted; dropping them is degeneracy of the data, not an error.
    """
    cols = [np.ones_like(x)]
    in_layer = np.abs(x) >= theta - layer_width
    frac = float(np.mean(in_layer))
    if 0.0 < frac < 1.0:
        cols.append(in_layer.astype(float))
    sd = float(np.std(x))
    if sd > 1e-13 and degree >= 1:
        xs = (x - float(np.mean(x))) / sd
        for d in range(1, degree + 1):
            cols.append(xs**d)
    return np.column_stack(cols)


def _regress(design: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Least-squares fitted values, reducing the design on rank deficiency."""
    ncol = design.shape[1]
    while True:
        sub = design[:, :ncol]
        try:
            coef, _, rank, _ = np.linalg.lstsq(sub, targets, rcond=None)
        except np.linalg.LinAlgError as exc:
            raise SingularRegression(f"least-squares solve failed: {exc}") from exc
        if rank == ncol or ncol == 1:
            if ncol < design.shape[1]:
                warnings.warn(
                    f"rank-deficient regression design; reduced to {ncol} columns",
                    SingularRegressionWarning,
                )
            return sub @ coef
        ncol -= 1


def solve_penalized(
    problem: ProblemSpec, config: SolverConfig, ens: PathEnsemble
) -> EnsembleSolution:
    """Backward sweep over one ensemble (one frozen Brownian sample).

    Raises :class:`TerminalBelowObstacle` when S_T > xi on some path, and
    ``ValueError`` when the ensemble is too small for the basis.
    """
    grid = ens.grid
    n = grid.n_steps
    dt = grid.dt
    t = grid.nodes
    n_paths = ens.n_paths
    if n_paths != config.n_paths:
        raise ValueError(f"ensemble has {n_paths} paths, config declares {config.n_paths}")
    if n_paths < 10 * config.basis_dim:
        raise ValueError(
            f"n_paths={n_paths} is below 10 * basis dimension ({10 * config.basis_dim})"
        )
    X = ens.X
    A = ens.A
    dH = ens.dH
    dB = np.diff(ens.B)
    m = dH.shape[2]
    rank = ens.basis.rank
    layer = config.boundary_layer if config.boundary_layer is not None else problem.theta / 10.0

    S = np.asarray(problem.obstacle(t[None, :], X), dtype=float)
    xi = np.asarray(problem.terminal(X[:, -1]), dtype=float)
    worst = float(np.min(xi - S[:, -1]))
    if worst < -config.terminal_tol:
        raise TerminalBelowObstacle(
            f"terminal value falls below the obstacle by {-worst:.3e} on some path"
        )

    Y = np.empty((n_paths, n + 1))
    y_pre = np.empty((n_paths, n + 1))
    Z = np.zeros((n_paths, n + 1, m))
    dK = np.zeros((n_paths, n))
    Y[:, n] = xi
    y_pre[:, n] = xi

    pen = config.penalization
    target0 = xi
    for k in range(n - 1, -1, -1):
        fk = np.asarray(problem.f(t[k + 1], X[:, k + 1], Y[:, k + 1], Z[:, k + 1, :]), dtype=float)
        phik = np.asarray(problem.phi(t[k + 1], X[:, k + 1], Y[:, k + 1]), dtype=float)
        target = Y[:, k + 1] + fk * dt + phik * (A[:, k + 1] - A[:, k])
        design = regression_design(X[:, k], config.degree, problem.theta, layer)
        yhat0 = _regress(design, target[:, None])[:, 0]
        if rank:
            centered = (Y[:, k + 1] - yhat0)[:, None] * dH[:, k, :rank]
            Z[:, k, :rank] = _regress(design, centered) / dt
        gk = np.asarray(problem.g(t[k], X[:, k], yhat0), dtype=float)
        yhat = yhat0 + gk * dB[k]
        y_pre[:, k] = yhat
        s = S[:, k]
        if pen is PROJECTION:
            push = np.maximum(s - yhat, 0.0)
        else:
            push = (pen * dt / (1.0 + pen * dt)) * np.maximum(s - yhat, 0.0)
        Y[:, k] = yhat + push
        dK[:, k] = push
        if k == 0:
            target0 = target

    K = np.zeros((n_paths, n + 1))
    K[:, 1:] = np.cumsum(dK, axis=1)

    sol = EnsembleSolution(
        penalization=pen,
        rank=rank,
        Y=Y,
        Z=Z,
        K=K,
        dK=dK,
        y_pre=y_pre,
        S=S,
        A=A,
        dt=dt,
        y0_value=float(np.mean(Y[:, 0])),
        y0_se=float(np.std(target0, ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0,
    )
    sol.skorokhod_residual = skorokhod_residual(sol)
    sol.penetration_norm = penetration_norm(sol)
    sol.apriori_norms = _solution_norms(sol)
    return sol


def skorokhod_residual(sol: EnsembleSolution, s_values: np.ndarray | None = None) -> float:
    """Mean over paths of |sum_k (y_pre_k - S_k) dK_k|.

    The pre-push (left limit) estimate is the value the push acts on, so
    this is the discrete complementarity gap: zero when K only grows on
    the contact set.  The absolute value makes the diagnostic nonnegative
    in both obstacle modes.
    """
    S = sol.S if s_values is None else np.asarray(s_values, dtype=float)
    n = sol.dK.shape[1]
    per_path = np.sum((sol.y_pre[:, :n] - S[:, :n]) * sol.dK, axis=1)
    return float(np.mean(np.abs(per_path)))


def penetration_norm(sol: EnsembleSolution) -> float:
    """max over nodes of mean over paths of ((Y - S)^-)^2."""
    pen_sq = np.maximum(sol.S - sol.Y, 0.0) ** 2
    return float(np.max(np.mean(pen_sq, axis=0)))


def _solution_norms(sol: EnsembleSolution) -> dict:
    dA = np.diff(sol.A, axis=1)
    sup_y2 = float(np.mean(np.max(sol.Y**2, axis=1)))
    y2_dA = float(np.mean(np.sum(sol.Y[:, :-1] ** 2 * dA, axis=1)))
    z2_dt = float(np.mean(np.sum(np.sum(sol.Z**2, axis=2)[:, :-1], axis=1) * sol.dt))
    kT2 = float(np.mean(sol.K[:, -1] ** 2))
    return {
        "sup_y2": sup_y2,
        "y2_dA": y2_dA,
        "z2_dt": z2_dt,
        "kT2": kT2,
        "total": sup_y2 + y2_dA + z2_dt + kT2,
    }


@dataclass(frozen=True)
class BoundReport:
    """Uniform-in-n energy norms of a penalized family."""

    penalizations: tuple[float, ...]
    norms: tuple[float, ...]
    components: tuple[dict, ...]
    sup_norm: float
    tail_ratio: float
    growth_ratio: float
    bounded: bool


def apriori_bounds(
    solutions: Mapping[float, EnsembleSolution],
    problem: ProblemSpec,
    tail_tol: float = 1.25,
    growth_tol: float = 4.0,
) -> BoundReport:
    """Check that the penalized family's energy norms stay bounded in n.

    The norm per solution is E[sup_t Y^2 + int Y^2 dA + int |Z|^2 dt +
    K_T^2].  ``bounded`` requires a plateau at the tail of the schedule
    (last norm at most ``tail_tol`` times the previous one) and no overall
    blow-up (at most ``growth_tol`` times the first norm; on obstacle
    problems K_T^2 legitimately ramps up to its limit before flattening,
    so the overall factor is deliberately loose while a divergent scheme
    overshoots it by many orders of magnitude).
    """
    ns = tuple(sorted(solutions))
    comps = tuple(solutions[n].apriori_norms for n in ns)
    norms = tuple(c["total"] for c in comps)
    tail = norms[-1] / norms[-2] if len(norms) >= 2 and norms[-2] > 0 else 1.0
    growth = norms[-1] / norms[0] if norms[0] > 0 else (1.0 if norms[-1] == 0 else math.inf)
    return BoundReport(
        penalizations=ns,
        norms=norms,
        components=comps,
        sup_norm=max(norms),
        tail_ratio=tail,
        growth_ratio=growth,
        bounded=(growth <= growth_tol and tail <= tail_tol),
    )


@dataclass(frozen=True)
class ComparisonHypothesisReport:
    """Empirical check of the jump-size condition sum_i beta_i dH(i) > -1."""

    min_sum: float
    holds: bool
    lipschitz_bound: float
    violation_fraction: float


def check_comparison_hypothesis(
    sol1: EnsembleSolution,
    sol2: EnsembleSolution,
    problem2: ProblemSpec,
    ens: PathEnsemble,
    denominator_rtol: float = 1e-12,
) -> ComparisonHypothesisReport:
    """Difference-quotient slopes of the second driver in each Z slot.

    For slot i the quotient is evaluated between the two solutions' Z
    values with slots below i already swapped, matching the telescoping
    decomposition that underlies the ordering argument.  Slots where the
    two Z's coincide contribute zero.  Also reports the interval bound
    -c * rank * max |dH| implied by the declared Lipschitz constant.
    """
    grid = ens.grid
    n = grid.n_steps
    t = grid.nodes
    X = ens.X
    dH = ens.dH
    rank = ens.basis.rank
    Z1 = sol1.Z[:, :n, :]
    Z2 = sol2.Z[:, :n, :]
    total = np.zeros((ens.n_paths, n))
    for a in range(rank):
        z_lo = np.concatenate([Z2[:, :, :a], Z1[:, :, a:]], axis=2)
        z_hi = np.concatenate([Z2[:, :, : a + 1], Z1[:, :, a + 1 :]], axis=2)
        num = np.empty((ens.n_paths, n))
        for k in range(n):
            f_lo = np.asarray(problem2.f(t[k], X[:, k], sol2.Y[:, k], z_lo[:, k, :]), dtype=float)
            f_hi = np.asarray(problem2.f(t[k], X[:, k], sol2.Y[:, k], z_hi[:, k, :]), dtype=float)
            num[:, k] = f_lo - f_hi
        den = Z1[:, :, a] - Z2[:, :, a]
        scale = np.abs(Z1[:, :, a]) + np.abs(Z2[:, :, a]) + 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            beta = np.where(np.abs(den) > denominator_rtol * scale, num / den, 0.0)
        total += beta * dH[:, :, a]
    min_sum = float(np.min(total)) if total.size else 0.0
    max_dh = float(np.max(np.abs(dH))) if dH.size else 0.0
    frac = float(np.mean(total <= -1.0)) if total.size else 0.0
    return ComparisonHypothesisReport(
        min_sum=min_sum,
        holds=min_sum > -1.0,
        lipschitz_bound=-problem2.lipschitz_c * max(rank, 1) * max_dh,
        violation_fraction=frac,
    )
