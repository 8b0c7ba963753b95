import dataclasses
import math

import numpy as np
import pytest

from levylab.errors import TerminalBelowObstacle
from levylab.levy import LevySpec, validate_levy_spec
from levylab.paths import TimeGrid, simulate_ensemble
from levylab.problems import NO_OBSTACLE, ProblemSpec, build_problem
from levylab.solver import (
    SolverConfig,
    apriori_bounds,
    check_comparison_hypothesis,
    skorokhod_residual,
    solve_penalized,
)
from levylab.suites import (
    deterministic_benchmark_problem,
    penalization_family,
    run_benchmark_solution,
)
from levylab.teugels import basis_for

TWO_ATOM = validate_levy_spec(LevySpec(atoms=((0.3, 2.0), (-0.2, 1.0))))


def flat_obstacle(level=NO_OBSTACLE):
    return lambda t, x: np.full(np.broadcast(np.asarray(t), np.asarray(x)).shape, level)


def make_problem(name="p", f=None, phi=None, g=None, terminal=None, obstacle=None, c=1.0):
    zero3 = lambda t, x, y: np.zeros_like(np.asarray(y, dtype=float))
    return ProblemSpec(
        name=name,
        f=f or (lambda t, x, y, z: np.zeros_like(np.asarray(y, dtype=float))),
        phi=phi or zero3,
        g=g or zero3,
        terminal=terminal or (lambda x: np.ones_like(np.asarray(x, dtype=float))),
        obstacle=obstacle or flat_obstacle(),
        lipschitz_c=c,
        beta_mono=0.0,
        theta=1.0,
    )


@pytest.fixture(scope="module")
def ensemble():
    grid = TimeGrid(1.0, 100)
    basis = basis_for(TWO_ATOM)
    return simulate_ensemble(TWO_ATOM, grid, basis, 600, 21, theta=1.0, x0=0.0)


@pytest.fixture(scope="module")
def ensemble_identity_clock():
    grid = TimeGrid(1.0, 100)
    basis = basis_for(TWO_ATOM)
    return simulate_ensemble(
        TWO_ATOM, grid, basis, 600, 21, theta=1.0, x0=0.0, a_mode="identity-time"
    )


CFG = SolverConfig(n_paths=600, penalization=None, degree=4, master_seed=21)


class TestExactPropagation:
    def test_constant_problem(self, ensemble):
        sol = solve_penalized(make_problem(), CFG, ensemble)
        assert np.max(np.abs(sol.Y - 1.0)) < 1e-10
        assert np.all(sol.K == 0.0)
        assert np.max(np.abs(sol.Z[:, :, : sol.rank])) < 1e-9
        assert np.all(sol.Z[:, :, sol.rank :] == 0.0)
        assert sol.skorokhod_residual == 0.0

    def test_driver_decay_matches_discrete_product(self, ensemble):
        # f = -0.1 y propagates as Y_k = (1 - 0.1 dt) Y_{k+1}, an exact product
        prob = make_problem(f=lambda t, x, y, z: -0.1 * np.asarray(y, dtype=float))
        sol = solve_penalized(prob, CFG, ensemble)
        expected = (1.0 - 0.1 * 0.01) ** 100
        assert sol.y0_value == pytest.approx(expected, abs=1e-12)

    def test_boundary_decay_with_identity_clock(self, ensemble_identity_clock):
        # phi = -0.5 y against dA = dt gives the same product with rate 0.5
        prob = make_problem(phi=lambda t, x, y: -0.5 * np.asarray(y, dtype=float))
        sol = solve_penalized(prob, CFG, ensemble_identity_clock)
        expected = (1.0 - 0.5 * 0.01) ** 100
        assert sol.y0_value == pytest.approx(expected, abs=1e-12)

    def test_constant_g_accumulates_brownian(self, ensemble):
        prob = make_problem(
            g=lambda t, x, y: np.ones_like(np.asarray(y, dtype=float)),
            terminal=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        )
        sol = solve_penalized(prob, CFG, ensemble)
        assert sol.y0_value == pytest.approx(float(ensemble.B[-1]), abs=1e-12)

    def test_state_dependent_g_two_pass_product(self, ensemble):
        # g = y gives Y_k = yhat0 (1 + dB_k); with terminal 1 the product telescopes
        prob = make_problem(g=lambda t, x, y: np.asarray(y, dtype=float))
        sol = solve_penalized(prob, CFG, ensemble)
        expected = float(np.prod(1.0 + np.diff(ensemble.B)))
        assert sol.y0_value == pytest.approx(expected, rel=1e-10)


class TestObstacle:
    def test_deterministic_benchmark_projection(self):
        sol, metrics = run_benchmark_solution(TWO_ATOM, n_paths=600, seed=33)
        # oracle: Y_t = max(0, sup_{s >= t}(1 - s)) = 1 - t, K_T = 1
        assert metrics["y_max_error"] < 1e-9
        assert metrics["k_t_error"] < 1e-9
        assert 0.0 <= metrics["skorokhod_residual"] <= 0.02
        assert np.all(sol.Y >= sol.S)
        assert np.all(np.diff(sol.K, axis=1) >= 0.0)
        assert np.all(sol.K[:, 0] == 0.0)

    def test_terminal_below_obstacle_raises(self, ensemble):
        prob = make_problem(
            terminal=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
            obstacle=flat_obstacle(0.5),
        )
        with pytest.raises(TerminalBelowObstacle):
            solve_penalized(prob, CFG, ensemble)

    def test_path_count_guard(self, ensemble):
        with pytest.raises(ValueError):
            solve_penalized(make_problem(), SolverConfig(n_paths=30, master_seed=1), ensemble)

    def test_contact_without_push_keeps_k_zero(self, ensemble):
        # obstacle exactly at the solution level: yhat == S, so dK must stay 0
        prob = make_problem(obstacle=flat_obstacle(1.0))
        sol = solve_penalized(prob, CFG, ensemble)
        # yhat == S up to regression rounding; the push must not exceed it
        assert np.max(sol.K) < 1e-11
        assert np.max(np.abs(sol.Y - 1.0)) < 1e-10


SCHEDULE = (4.0, 16.0, 64.0, 256.0)


@pytest.fixture(scope="module")
def family():
    problem = deterministic_benchmark_problem()
    return problem, penalization_family(
        problem, TWO_ATOM, TimeGrid(1.0, 100), 600, 44, SCHEDULE
    )


class TestPenalization:
    SCHEDULE = SCHEDULE

    def test_k_t_approaches_ode_closed_form(self, family):
        # independent oracle: dY = -n (Y - S)^- dt backward from 0 with S = 1 - t
        # solves to K_T(n) = 1 - (1 - e^{-n}) / n
        _, fam = family
        for n in self.SCHEDULE:
            k_t = float(np.mean(fam[n].K[:, -1]))
            assert k_t == pytest.approx(1.0 - (1.0 - math.exp(-n)) / n, abs=0.02)

    def test_k_t_monotone_from_below(self, family):
        _, fam = family
        k_ts = [float(np.mean(fam[n].K[:, -1])) for n in self.SCHEDULE]
        assert all(a < b for a, b in zip(k_ts, k_ts[1:]))
        assert all(k < 1.0 for k in k_ts)

    def test_penetration_decreasing_with_rate(self, family):
        _, fam = family
        pens = [fam[n].penetration_norm for n in self.SCHEDULE]
        assert all(a > b for a, b in zip(pens, pens[1:]))
        for n, p in zip(self.SCHEDULE, pens):
            assert p <= 1.0 / n  # well under the C/n envelope

    def test_residual_decreasing_in_n(self, family):
        _, fam = family
        residuals = [fam[n].skorokhod_residual for n in self.SCHEDULE]
        assert all(a > b for a, b in zip(residuals, residuals[1:]))

    def test_y0_monotone_in_n(self, family):
        _, fam = family
        y0s = [fam[n].y0_value for n in self.SCHEDULE]
        assert all(a < b for a, b in zip(y0s, y0s[1:]))

    def test_apriori_bounds_flat_for_constant_problem(self, ensemble):
        sols = {}
        for n in (1.0, 2.0, 4.0, 8.0):
            cfg = SolverConfig(n_paths=600, penalization=n, master_seed=21)
            sols[n] = solve_penalized(make_problem(), cfg, ensemble)
        report = apriori_bounds(sols, make_problem())
        assert report.bounded
        assert max(report.norms) == pytest.approx(min(report.norms), rel=1e-9)

    def test_apriori_bounds_benchmark_family(self, family):
        problem, fam = family
        report = apriori_bounds(fam, problem)
        assert report.bounded
        assert report.sup_norm < 10.0


class TestComparison:
    def test_identical_problems_zero_slopes(self, ensemble):
        prob = make_problem(f=lambda t, x, y, z: -0.1 * np.asarray(y, dtype=float))
        sol1 = solve_penalized(prob, CFG, ensemble)
        sol2 = solve_penalized(prob, CFG, ensemble)
        report = check_comparison_hypothesis(sol1, sol2, prob, ensemble)
        assert report.min_sum == 0.0
        assert report.holds

    def test_ordered_terminals_give_ordered_solutions(self, ensemble):
        hi = make_problem(terminal=lambda x: np.ones_like(np.asarray(x, dtype=float)))
        lo = make_problem(terminal=lambda x: np.zeros_like(np.asarray(x, dtype=float)))
        sol_hi = solve_penalized(hi, CFG, ensemble)
        sol_lo = solve_penalized(lo, CFG, ensemble)
        assert np.mean(sol_hi.Y < sol_lo.Y - 0.01) <= 0.01
        report = check_comparison_hypothesis(sol_hi, sol_lo, lo, ensemble)
        assert report.min_sum == 0.0  # z-independent driver

    def test_z_dependent_driver_respects_lipschitz_bound(self, ensemble):
        def f(t, x, y, z):
            z = np.asarray(z)
            z1 = z[..., 0] if z.ndim and z.shape[-1] else 0.0
            return -0.1 * np.asarray(y, dtype=float) + 0.3 * np.tanh(z1)

        hi = make_problem(
            f=f, terminal=lambda x: np.maximum(np.asarray(x, dtype=float), 0.0), c=0.3
        )
        lo = make_problem(
            f=f, terminal=lambda x: 0.5 * np.maximum(np.asarray(x, dtype=float), 0.0), c=0.3
        )
        sol_hi = solve_penalized(hi, CFG, ensemble)
        sol_lo = solve_penalized(lo, CFG, ensemble)
        report = check_comparison_hypothesis(sol_hi, sol_lo, lo, ensemble)
        assert report.min_sum >= report.lipschitz_bound - 1e-9
        assert report.holds  # the observed sums stay above -1 even when the bound does not


class TestDiagnostics:
    def test_skorokhod_residual_zero_without_push(self, ensemble):
        sol = solve_penalized(make_problem(), CFG, ensemble)
        assert skorokhod_residual(sol) == 0.0

    def test_residual_accepts_external_obstacle_values(self):
        sol, _ = run_benchmark_solution(TWO_ATOM, n_paths=600, seed=33)
        assert skorokhod_residual(sol, sol.S) == sol.skorokhod_residual
        # |yhat - S| = dt on the contact set, so the gap is dt * K_T = 0.01
        assert sol.skorokhod_residual == pytest.approx(0.01, abs=1e-10)

    def test_degenerate_z_columns_exactly_zero(self):
        grid = TimeGrid(1.0, 50)
        spec = validate_levy_spec(LevySpec(atoms=((1.0, 1.0),)))
        basis = basis_for(spec, 3)
        ens = simulate_ensemble(spec, grid, basis, 600, 5, theta=2.0, x0=0.0)
        prob = make_problem(terminal=lambda x: np.asarray(x, dtype=float) ** 2)
        sol = solve_penalized(prob, CFG, ens)
        assert sol.rank == 1
        assert np.all(sol.Z[:, :, 1:] == 0.0)


def test_sigma_positive_driver_supported():
    # a continuous part adds one basis component; exact propagation must hold
    spec = validate_levy_spec(LevySpec(atoms=((0.5, 1.0),), sigma=0.4))
    basis = basis_for(spec, 4)
    assert basis.rank == 2
    ens = simulate_ensemble(spec, TimeGrid(1.0, 50), basis, 600, 11, theta=2.0, x0=0.0)
    prob = dataclasses.replace(make_problem(), theta=2.0)
    sol = solve_penalized(prob, CFG, ens)
    assert np.max(np.abs(sol.Y - 1.0)) < 1e-10
    assert np.all(sol.Z[:, :, basis.rank :] == 0.0)
    assert np.max(np.abs(sol.Z[:, :, : basis.rank])) < 1e-9


def test_apriori_bounds_finite_on_stochastic_instance():
    # regression baseline: the two-sided jump benchmark stays bounded at n = 64
    problem = build_problem("example51", {}, 1.0)
    family = penalization_family(problem, TWO_ATOM, TimeGrid(1.0, 100), 600, 13, (16.0, 64.0))
    report = apriori_bounds(family, problem)
    assert report.bounded
    assert all(np.isfinite(v) for v in report.norms)
    assert report.sup_norm < 5.0


def test_uniqueness_surrogate_small():
    grid = TimeGrid(1.0, 50)
    problem = build_problem("example51", {}, 1.0)
    values = []
    from levylab.suites import solve_outer_samples

    for seed in (7, 8):
        cfg = SolverConfig(n_paths=500, penalization=None, outer_b_samples=4, master_seed=seed)
        _, y0, se = solve_outer_samples(problem, TWO_ATOM, grid, cfg)
        values.append((y0, se))
    (a, sa), (b, sb) = values
    assert abs(a - b) <= 4.0 * math.sqrt(sa**2 + sb**2)
