"""Numerical laboratory for reflected backward doubly stochastic equations
driven by finite-activity jump processes.

Pipeline: a jump driver (:mod:`levylab.levy`) induces an orthonormal
martingale basis (:mod:`levylab.teugels`); forward scenarios with
clamp-reflected state and boundary local time come from
:mod:`levylab.paths`; the backward equations are solved by penalized or
projected least-squares Monte Carlo (:mod:`levylab.solver`) and
cross-validated against a finite-difference obstacle solver with a
nonlinear flux boundary condition (:mod:`levylab.pdie`).  Experiment
configs, verification suites and the command line live in
:mod:`levylab.config`, :mod:`levylab.suites` and :mod:`levylab.cli`.
"""

from .errors import (
    BisectionFailure,
    CFLViolation,
    ConfigParseError,
    DuplicateJumpSize,
    EmptyMeasure,
    GridIncompatible,
    InitialPointOutsideDomain,
    LevyLabError,
    NonMonotoneUserTable,
    NonpositiveIntensity,
    RankMismatch,
    SingularRegression,
    SingularRegressionWarning,
    TerminalBelowObstacle,
    UnknownCoefficientName,
    ZeroJumpSize,
)
from .levy import LevySpec, MomentTable, ValidatedLevySpec, levy_moments, validate_levy_spec
from .paths import (
    PathBundle,
    PathEnsemble,
    TimeGrid,
    assemble_A,
    derived_rng,
    simulate_brownian,
    simulate_ensemble,
    simulate_levy,
    simulate_reflected_x,
    skorokhod_minimality_gap,
)
from .pdie import (
    FkReport,
    NonlocalStencil,
    PidieGrid,
    PidieGridSpec,
    representation_check,
    solve_obstacle_pidie,
)
from .problems import REGISTRY, ProblemSpec, build_problem
from .solver import (
    BoundReport,
    EnsembleSolution,
    SolverConfig,
    apriori_bounds,
    check_comparison_hypothesis,
    skorokhod_residual,
    solve_penalized,
)
from .teugels import (
    AtomicMeasure,
    TeugelsBasis,
    basis_for,
    build_mu,
    orthonormal_basis,
    teugels_increments,
)

__version__ = "0.1.0"
