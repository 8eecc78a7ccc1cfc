import numpy as np
import pytest

from theta_fbsde import (
    AffineControlDrift,
    ConstantVolatility,
    DeterministicSpec,
    LinearF0,
    LinearTerminal,
    ParameterError,
    ProblemSpec,
    QuadraticPenaltyDriver,
    QuadraticTerminal,
    QuarticDriver,
    TimeGrid,
    UsageError,
    check_dynamic_consistency,
    check_monotonicity,
    check_subadditivity,
    check_translation_invariance,
    martingale_diagnostics,
    picard_solve,
    static_set,
    theta_expectation,
    unconstrained_interval,
    y0_standard_error,
)


def quartic_spec(lam=2.0, gamma=1.0, horizon=1.0):
    driver = QuarticDriver(lam, gamma)
    return DeterministicSpec(driver, unconstrained_interval(driver, 1.0), horizon)


def linear_driver_spec(slope, horizon=1.0):
    # w0 inside the set: the optimized driver is exactly f0
    driver = QuadraticPenaltyDriver(kappa=1.0, w0=0.0, f0=LinearF0(slope))
    return DeterministicSpec(driver, static_set([(0.0, 0.0)]).base, horizon)


def zero_driver_problem(sigma=1.0, x0=0.0, horizon=1.0, terminal=None):
    return ProblemSpec(
        horizon=horizon,
        x0=np.array([x0]),
        drift=AffineControlDrift(np.array([0.0]), np.array([[0.0]])),
        volatility=ConstantVolatility(np.array([[sigma]])),
        driver=QuadraticPenaltyDriver(kappa=1.0, w0=0.0),
        terminal=terminal if terminal is not None else LinearTerminal(np.array([1.0])),
        ambiguity=static_set([(0.0, 0.0)]),
    )


class TestThetaExpectation:
    def test_zero_terminal_is_zero(self):
        value, _ = theta_expectation(quartic_spec(), TimeGrid(1.0, 200), xi=0.0)
        assert value == 0.0

    def test_quartic_small_terminal(self):
        value, _ = theta_expectation(quartic_spec(), TimeGrid(1.0, 1000), xi=0.1)
        # close to the quadratic-approximation value 0.1 / 0.9
        assert value == pytest.approx(0.1111, abs=2e-3)
        assert value > 0.1

    def test_classical_case_matches_expectation(self):
        spec = zero_driver_problem(sigma=1.0, x0=0.3, terminal=QuadraticTerminal())
        grid = TimeGrid(1.0, 40)
        value, sol = theta_expectation(spec, grid, n_particles=6000, seed=1)
        se = y0_standard_error(spec, grid, sol)
        assert abs(value - (0.3**2 + 1.0)) <= 3 * se + 5e-3

    def test_deterministic_requires_numeric_terminal(self):
        with pytest.raises(UsageError):
            theta_expectation(quartic_spec(), TimeGrid(1.0, 10))


class TestDynamicConsistency:
    def test_quartic_composition(self):
        disc = check_dynamic_consistency(quartic_spec(), TimeGrid(1.0, 1000), 0.1, 0.5)
        assert disc <= 1e-8

    def test_zero_solution(self):
        disc = check_dynamic_consistency(quartic_spec(), TimeGrid(1.0, 100), 0.0, 0.3)
        assert disc == 0.0

    def test_linear_driver_closed_form(self):
        lam0, c = 0.7, 0.4
        spec = linear_driver_spec(lam0)
        disc = check_dynamic_consistency(spec, TimeGrid(1.0, 800), c, 0.5)
        assert disc <= 1e-10
        value, _ = theta_expectation(spec, TimeGrid(1.0, 800), xi=c)
        assert value == pytest.approx(c * np.exp(lam0), rel=1e-9)

    def test_stochastic_tower_with_shared_noise(self):
        spec = zero_driver_problem(sigma=1.0, x0=0.5)
        grid = TimeGrid(1.0, 20)
        disc = check_dynamic_consistency(spec, grid, None, 0.5, n_particles=2000, seed=3)
        assert disc <= 5e-3

    def test_split_time_validated(self):
        with pytest.raises(UsageError):
            check_dynamic_consistency(quartic_spec(), TimeGrid(1.0, 10), 0.1, 1.5)


class TestMonotonicity:
    def test_quartic_ordered_terminals(self):
        res = check_monotonicity(quartic_spec(), TimeGrid(1.0, 500), 0.1, 0.0)
        assert not res.violated
        assert res.margin == pytest.approx(0.1111, abs=2e-3)

    def test_equal_terminals_zero_margin(self):
        res = check_monotonicity(quartic_spec(), TimeGrid(1.0, 200), 0.05, 0.05)
        assert res.margin == 0.0

    def test_ordering_precondition(self):
        with pytest.raises(UsageError):
            check_monotonicity(quartic_spec(), TimeGrid(1.0, 100), 0.0, 0.1)

    def test_deterministic_comparison_on_ordered_grid(self):
        spec = quartic_spec()
        grid = TimeGrid(1.0, 400)
        values = [theta_expectation(spec, grid, xi=xi)[0] for xi in np.linspace(-0.2, 0.2, 9)]
        assert np.all(np.diff(values) >= 0.0)

    def test_stochastic_unit_shift(self):
        spec = zero_driver_problem(sigma=0.8, x0=0.2)
        grid = TimeGrid(1.0, 25)

        def shifted(x):
            return x[:, 0] + 1.0

        from theta_fbsde import CallableTerminal

        res = check_monotonicity(
            spec, grid, CallableTerminal(shifted), LinearTerminal(np.array([1.0])),
            n_particles=2000, seed=4,
        )
        assert not res.violated
        assert res.margin == pytest.approx(1.0, abs=3 * res.tolerance + 1e-6)


class TestSubadditivity:
    def test_reference_gap(self):
        res = check_subadditivity(quartic_spec(), 0.1, TimeGrid(1.0, 1000))
        assert res.e_sum == 0.0
        assert res.violated
        assert 0.015 <= res.split_sum <= 0.025

    def test_zero_split_degenerate(self):
        res = check_subadditivity(quartic_spec(), 0.0, TimeGrid(1.0, 100))
        assert res.gap == 0.0

    def test_other_parameters_still_violate(self):
        res = check_subadditivity(quartic_spec(3.0, 1.0), 0.05, TimeGrid(1.0, 500))
        assert res.gap > 0.0

    def test_gap_grows_with_horizon(self):
        gaps = [
            check_subadditivity(quartic_spec(horizon=T), 0.1, TimeGrid(T, 800)).gap
            for T in (0.5, 1.0, 2.0)
        ]
        assert gaps[0] < gaps[1] < gaps[2]

    def test_guard_rejects_large_terminals(self):
        with pytest.raises(ParameterError):
            check_subadditivity(quartic_spec(), 0.6, TimeGrid(1.0, 200))

    def test_requires_quartic_family(self):
        with pytest.raises(UsageError):
            check_subadditivity(linear_driver_spec(0.5), 0.1, TimeGrid(1.0, 100))


class TestTranslationInvariance:
    def test_quartic_defect(self):
        defect = check_translation_invariance(quartic_spec(), 0.0, 0.1, TimeGrid(1.0, 1000))
        assert 0.008 <= defect <= 0.014

    def test_zero_driver_invariant(self):
        spec = zero_driver_problem(sigma=0.5, x0=0.1)
        grid = TimeGrid(1.0, 20)
        defect = check_translation_invariance(spec, None, 0.3, grid, n_particles=2000, seed=5)
        assert abs(defect) <= 1e-10

    def test_y_independent_driver_exact(self):
        # distance penalty present but constant in y: shifts must cancel exactly
        driver = QuadraticPenaltyDriver(kappa=1.0, w0=0.6)
        spec = DeterministicSpec(driver, static_set([(-2.0, -1.0), (1.0, 2.0)]).base, 1.0)
        defect = check_translation_invariance(spec, 0.2, 0.1, TimeGrid(1.0, 500))
        assert abs(defect) <= 1e-8


class TestMartingaleDiagnostics:
    def test_zero_driver_solution(self):
        spec = zero_driver_problem(sigma=0.7, x0=0.4)
        grid = TimeGrid(1.0, 30)
        sol, _ = picard_solve(spec, grid, 4000, seed=6)
        report = martingale_diagnostics(spec, grid, sol)
        assert report.max_abs_driver == 0.0
        assert report.within_three_fraction >= 0.95

    def test_deterministic_corrected_path_is_flat(self):
        spec = quartic_spec()
        grid = TimeGrid(1.0, 1000)
        _, sol = theta_expectation(spec, grid, xi=0.1)
        report = martingale_diagnostics(spec, grid, sol)
        assert report.martingale_drift <= 1e-8
        assert report.max_abs_driver > 0.0

    def test_application_decomposition(self):
        spec = ProblemSpec(
            horizon=1.0,
            x0=np.array([1.0]),
            drift=AffineControlDrift(np.array([0.0]), np.array([[0.25]])),
            volatility=ConstantVolatility(np.array([[0.3]])),
            driver=QuadraticPenaltyDriver(kappa=1.0, w0=0.6, f0=LinearF0(0.5)),
            terminal=LinearTerminal(np.array([1.0])),
            ambiguity=static_set([(-2.0, -1.0), (1.0, 2.0)]),
        )
        grid = TimeGrid(1.0, 50)
        sol, _ = picard_solve(spec, grid, 4000, seed=7)
        report = martingale_diagnostics(spec, grid, sol)
        assert report.within_three_fraction >= 0.95
