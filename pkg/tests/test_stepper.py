import math

import numpy as np
import pytest
from scipy.linalg import eigh

from cifeedback import (
    FemFunction,
    InterpolantSpec,
    ModelParams,
    StepperConfig,
    backward_euler_step,
    project_initial,
    simulate,
    uniform_partition,
)
from cifeedback.assembly import mass_matrix, stiffness_matrix
from cifeedback.stepper import (
    AssembledSystem,
    NewtonConvergenceError,
    SnapshotTimeWarning,
    StepSizeWarning,
    decay_step_condition,
    newton_solve,
    step_size_guard,
)

example_params = ModelParams(nu=0.1, gamma=9.0, delta=9.0, mu=20.0)
heat_params = ModelParams(nu=1.0, gamma=0.0, delta=0.0)


def _lowest_discrete_mode(mesh, bc):
    values, vectors = eigh(stiffness_matrix(mesh, bc).to_dense(), mass_matrix(mesh, bc).to_dense())
    return values[0], vectors[:, 0]


def _example_run(mu, N=50, T=2.0, M=200, spec=None):
    mesh = uniform_partition(N)
    y0h = project_initial(lambda x: x * (1 - x), mesh, "mixed")
    spec = spec or InterpolantSpec.nodal()
    return simulate(y0h, example_params.replace(mu=mu), spec, "mixed", StepperConfig.from_steps(M, T))


class TestStepperConfig:
    def test_n_steps(self):
        assert StepperConfig(k=0.1, T=1.0).n_steps == 10
        assert StepperConfig(k=0.3, T=1.0).n_steps == 4
        assert StepperConfig.from_steps(500, 5.0).n_steps == 500

    def test_invalid_step(self):
        with pytest.raises(ValueError):
            StepperConfig(k=0.0, T=1.0)
        with pytest.raises(ValueError):
            StepperConfig(k=0.5, T=0.1)
        with pytest.raises(ValueError):
            StepperConfig(k=0.1, T=1.0, newton_max_iters=0)

    def test_snapshot_outside_horizon(self):
        with pytest.raises(ValueError):
            StepperConfig(k=0.1, T=1.0, snapshot_times=[1.5])
        with pytest.raises(ValueError):
            StepperConfig(k=0.1, T=1.0, snapshot_times=[-0.1])
        assert StepperConfig(k=0.1, T=1.0, snapshot_times=[1.0]).snapshot_times == (1.0,)


class TestStepConditions:
    def test_guard(self):
        assert step_size_guard(example_params, 0.01, 0.1)
        assert not step_size_guard(example_params, 0.01, 0.12)

    def test_decay_step_condition(self):
        assert decay_step_condition(example_params, 0.87, 0.01)
        assert not decay_step_condition(example_params, 0.87, 0.01, refined=True)
        assert not decay_step_condition(example_params, 0.9, 0.01)


class TestNewton:
    def test_quadratic_convergence(self):
        y, report = newton_solve(lambda y: y ** 3 - 8.0, lambda y, rhs: rhs / (3.0 * y ** 2), np.array([3.0]), 1e-12, 25)
        assert report.converged
        assert y[0] == pytest.approx(2.0, abs=1e-12)
        assert 1.8 <= report.contraction_orders()[-1] <= 2.2

    def test_always_updates_once(self):
        y, report = newton_solve(lambda y: y - 1.0, lambda y, rhs: rhs, np.array([1.0]), 1e-12, 25)
        assert report.iterations == 1
        assert report.converged

    def test_not_converged(self):
        y, report = newton_solve(lambda y: y ** 3 - 8.0, lambda y, rhs: rhs / (3.0 * y ** 2), np.array([3.0]), 1e-12, 2)
        assert not report.converged
        assert report.iterations == 2

    def test_residual_floor(self):
        y, report = newton_solve(
            lambda y: y ** 3 - 8.0,
            lambda y, rhs: rhs / (3.0 * y ** 2),
            np.array([3.0]),
            1e-12,
            25,
            residual_floor=lambda y: 1e-3,
        )
        assert report.converged
        assert report.residuals[-1] <= 1e-3
        assert report.iterations < 5


class TestBackwardEulerStep:
    def test_linear_step_single_iteration(self):
        mesh = uniform_partition(20)
        y0h = project_initial(lambda x: np.sin(math.pi * x / 2), mesh, "mixed")
        assembled = AssembledSystem(mesh, "mixed", InterpolantSpec.nodal(), controlled=False)
        _, report = backward_euler_step(y0h, heat_params, assembled, StepperConfig(k=0.01, T=1.0))
        assert report.iterations == 1

    def test_zero_is_fixed(self):
        mesh = uniform_partition(20)
        zero = FemFunction.zeros(mesh, "mixed")
        assembled = AssembledSystem(mesh, "mixed", InterpolantSpec.nodal())
        following, report = backward_euler_step(zero, example_params, assembled, StepperConfig(k=0.01, T=1.0))
        assert np.all(following.coeffs == 0.0)
        assert report.converged

    def test_nonlinear_step_converges(self):
        mesh = uniform_partition(100)
        y0h = project_initial(lambda x: x * (1 - x), mesh, "mixed")
        assembled = AssembledSystem(mesh, "mixed", InterpolantSpec.nodal())
        _, report = backward_euler_step(y0h, example_params, assembled, StepperConfig(k=0.1, T=1.0))
        assert report.converged
        assert report.iterations <= 6
        orders = report.contraction_orders()
        assert orders
        assert all(1.5 <= order <= 2.5 for order in orders)

    def test_newton_failure(self):
        mesh = uniform_partition(20)
        y0h = project_initial(lambda x: x * (1 - x), mesh, "mixed")
        assembled = AssembledSystem(mesh, "mixed", InterpolantSpec.nodal())
        with pytest.raises(NewtonConvergenceError):
            backward_euler_step(y0h, example_params, assembled, StepperConfig(k=0.1, T=1.0, newton_max_iters=1))


class TestSimulate:
    def test_records_every_level(self):
        traj = _example_run(20.0, N=20, T=0.1, M=10)
        assert len(traj) == 11
        assert traj.times[-1] == pytest.approx(0.1)
        assert traj.newton_iters[0] == 0
        assert np.all(traj.newton_iters[1:] >= 1)

    def test_snapshots(self):
        mesh = uniform_partition(20)
        y0h = project_initial(lambda x: x * (1 - x), mesh, "mixed")
        config = StepperConfig.from_steps(10, 0.1, snapshot_times=[0.0, 0.05, 0.1])
        traj = simulate(y0h, example_params, InterpolantSpec.nodal(), "mixed", config)
        assert [t for t, _ in traj.snapshots] == pytest.approx([0.0, 0.05, 0.1])
        assert traj.snapshots[-1][1] is traj.final

    def test_snapshot_off_grid_warns(self):
        mesh = uniform_partition(20)
        y0h = project_initial(lambda x: x * (1 - x), mesh, "mixed")
        config = StepperConfig.from_steps(10, 0.1, snapshot_times=[0.033])
        with pytest.warns(SnapshotTimeWarning):
            traj = simulate(y0h, example_params, InterpolantSpec.nodal(), "mixed", config)
        assert len(traj.snapshots) == 1
        assert traj.snapshots[0][1].coeffs.shape == (20,)

    def test_bc_mismatch(self):
        y0h = FemFunction.zeros(uniform_partition(10), "neumann")
        with pytest.raises(ValueError):
            simulate(y0h, example_params, InterpolantSpec.nodal(), "mixed", StepperConfig(k=0.1, T=1.0))

    def test_step_size_warning(self):
        y0h = FemFunction.zeros(uniform_partition(100), "mixed")
        with pytest.warns(StepSizeWarning):
            simulate(y0h, example_params, InterpolantSpec.nodal(), "mixed", StepperConfig.from_steps(2, 0.24))

    def test_failure_reports_step(self):
        mesh = uniform_partition(20)
        y0h = project_initial(lambda x: x * (1 - x), mesh, "mixed")
        config = StepperConfig.from_steps(10, 1.0, newton_max_iters=1)
        with pytest.raises(NewtonConvergenceError) as info:
            simulate(y0h, example_params, InterpolantSpec.nodal(), "mixed", config)
        assert info.value.step == 1

    def test_deterministic(self):
        first = _example_run(20.0, N=20, T=0.2, M=20)
        second = _example_run(20.0, N=20, T=0.2, M=20)
        assert np.array_equal(first.l2, second.l2)
        assert np.array_equal(first.final.coeffs, second.final.coeffs)

    def test_steady_state_preserved(self):
        params = ModelParams(nu=0.1, gamma=9.0, delta=9.0, mu=0.0)
        mesh = uniform_partition(10)
        one = FemFunction(mesh, "neumann", np.ones(11))
        traj = simulate(one, params, InterpolantSpec.nodal(), "neumann", StepperConfig.from_steps(10, 1.0))
        assert np.allclose(traj.final.coeffs, 1.0, atol=1e-11)


class TestLinearModes:
    def test_discrete_heat_factor(self):
        mesh = uniform_partition(40)
        eigenvalue, vector = _lowest_discrete_mode(mesh, "mixed")
        y0h = FemFunction(mesh, "mixed", vector)
        k = 0.01
        traj = simulate(y0h, heat_params, InterpolantSpec.nodal(), "mixed", StepperConfig.from_steps(20, 20 * k))
        ratios = traj.l2[1:] / traj.l2[:-1]
        assert np.allclose(ratios, 1.0 / (1.0 + k * eigenvalue), rtol=1e-10)
        assert ratios[0] == pytest.approx(1.0 / (1.0 + k * (math.pi / 2) ** 2), rel=1e-5)

    def test_linearized_growth(self):
        params = ModelParams(nu=0.1, gamma=9.0, delta=0.0)
        mesh = uniform_partition(40)
        eigenvalue, vector = _lowest_discrete_mode(mesh, "mixed")
        y0h = FemFunction(mesh, "mixed", 1e-3 * vector)
        k = 0.01
        traj = simulate(y0h, params, InterpolantSpec.nodal(), "mixed", StepperConfig.from_steps(10, 10 * k))
        expected = 1.0 / (1.0 + k * (params.nu * eigenvalue - params.gamma))
        assert expected > 1.0
        assert np.allclose(traj.l2[1:] / traj.l2[:-1], expected, rtol=1e-8)


class TestStabilization:
    def test_uncontrolled_leaves_zero(self):
        traj = _example_run(0.0, T=3.0, M=300)
        assert traj.l2[-1] >= 0.5

    def test_controlled_decays(self):
        traj = _example_run(20.0)
        assert traj.l2[-1] < 1e-6
        assert np.all(np.diff(traj.l2) < 0)

    def test_solutions_contract(self):
        rng = np.random.default_rng(3)
        mesh = uniform_partition(50)
        assembled = AssembledSystem(mesh, "mixed", InterpolantSpec.volumes())
        config = StepperConfig.from_steps(50, 0.5)
        for _ in range(10):
            first = FemFunction(mesh, "mixed", rng.uniform(-1.0, 1.0, 50))
            second = FemFunction(mesh, "mixed", rng.uniform(-1.0, 1.0, 50))
            previous = np.linalg.norm(first.coeffs - second.coeffs)
            gaps = []
            for _ in range(config.n_steps):
                first, _ = backward_euler_step(first, example_params, assembled, config)
                second, _ = backward_euler_step(second, example_params, assembled, config)
                gaps.append(math.sqrt(mass_matrix(mesh, "mixed").quadratic_form(first.coeffs - second.coeffs)))
            assert previous > 0
            assert all(b <= a * (1 + 1e-9) + 1e-12 for a, b in zip(gaps, gaps[1:]))
