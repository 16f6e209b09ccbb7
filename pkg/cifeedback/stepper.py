"""Backward-Euler time stepping of the controlled equation with a Newton
solve at every step.

In coefficients, one step from Y_prev solves

    M (Y - Y_prev) / k + nu A Y - gamma M Y + delta c(Y) + mu B Y = 0

where c(Y) = (Y^3, phi_i) and B is the feedback matrix of the interpolant.
"""
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import spsolve

from .assembly import cubic_jacobian, cubic_term, mass_matrix, stiffness_matrix
from .diagnostics import Trajectory, h1_seminorm, l2_norm, l4_norm, linf_norm
from .interpolants import ObservationOperator
from .mesh import FemFunction
from .model import check_stabilization_conditions

logger = logging.getLogger(__name__)

# Systems whose bandwidth stays below this are solved in banded storage
MAX_BANDED_BANDWIDTH = 32
# Multiple of machine epsilon times the residual term magnitudes treated as round-off
ROUNDOFF_FACTOR = 64


class StepSizeWarning(UserWarning):
    """The time step violates the sufficient condition for solvability."""


class SnapshotTimeWarning(UserWarning):
    """A requested snapshot time falls between two time levels."""


class NewtonConvergenceError(RuntimeError):
    """Newton's method did not converge within the allowed iterations."""

    def __init__(self, report, step=None):
        self.report = report
        self.step = step
        where = "" if step is None else " at step {0}".format(step)
        super().__init__(
            "Newton did not converge{0} after {1} iterations (last residual {2:.3e}).".format(
                where, report.iterations, report.residuals[-1]
            )
        )


@dataclass(frozen=True)
class StepperConfig:
    """Time discretization and Newton settings.

    Attributes:
        k: the time step.
        T: the final time.
        newton_abs_tol: tolerance on the Euclidean norm of the algebraic residual.
        newton_max_iters: maximum Newton updates per step.
        newton_step_tol: relative update size at which Newton is considered
            stagnated at round-off and stops as converged.
        snapshot_times: times at which solution snapshots are kept.
    """

    k: float
    T: float
    newton_abs_tol: float = 1e-12
    newton_max_iters: int = 25
    newton_step_tol: float = 1e-14
    snapshot_times: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.k > 0:
            raise ValueError("k must be > 0, not {0}.".format(self.k))
        if not self.T >= self.k:
            raise ValueError("T must be >= k, got T={0} and k={1}.".format(self.T, self.k))
        if not self.newton_abs_tol > 0:
            raise ValueError("newton_abs_tol must be > 0, not {0}.".format(self.newton_abs_tol))
        if self.newton_max_iters < 1:
            raise ValueError("newton_max_iters must be >= 1, not {0}.".format(self.newton_max_iters))
        snapshot_times = tuple(float(t) for t in self.snapshot_times)
        for t in snapshot_times:
            if t < 0 or t > self.T * (1.0 + 1e-12):
                raise ValueError("Snapshot time {0} lies outside [0, T={1}].".format(t, self.T))
        object.__setattr__(self, "snapshot_times", snapshot_times)

    @classmethod
    def from_steps(cls, M, T, **kwargs):
        """The configuration with M steps of size T / M."""
        if int(M) != M or M < 1:
            raise ValueError("M must be a positive integer, not {0}.".format(M))
        return cls(k=T / M, T=T, **kwargs)

    @property
    def n_steps(self):
        """ceil(T / k), ignoring round-off in the division."""
        ratio = self.T / self.k
        nearest = round(ratio)
        if abs(ratio - nearest) <= 1e-9 * max(ratio, 1.0):
            return int(nearest)
        return int(math.ceil(ratio))


@dataclass(frozen=True)
class NewtonReport:
    """Iteration count and residual history of one Newton solve."""

    iterations: int
    residuals: tuple
    converged: bool

    def contraction_orders(self, floor=1e-13):
        """Estimated convergence orders log(r_{i+1}/r_i) / log(r_i/r_{i-1}),
        using only residuals above floor.
        """
        r = [value for value in self.residuals if value > floor]
        orders = []
        for i in range(1, len(r) - 1):
            if r[i] < r[i - 1]:
                orders.append(math.log(r[i + 1] / r[i]) / math.log(r[i] / r[i - 1]))
        return orders


def step_size_guard(params, h, k):
    """Sufficient condition k (gamma + mu c_p^2 h^2 / 2) < 1 for the step to be solvable."""
    return k * (params.gamma + params.mu * params.c_p ** 2 * h ** 2 / 2.0) < 1.0


def decay_step_condition(params, alpha, k, refined=False):
    """The step restriction under which the discrete decay bound holds.

    The basic form is e^{alpha k} < 1 + k (mu - 2 nu - 2 gamma) / 2; the
    refined form used for the error estimates replaces 2 nu by 3 nu.
    """
    diffusion = 3.0 if refined else 2.0
    margin = params.mu - diffusion * params.nu - 2.0 * params.gamma
    return math.exp(alpha * k) < 1.0 + k * margin / 2.0


def newton_solve(residual, jacobian_solve, y0, abs_tol, max_iters, step_tol=1e-14, residual_floor=None):
    """Newton's method starting from y0, always taking at least one update.

    Args:
        residual (callable): y -> F(y).
        jacobian_solve (callable): (y, rhs) -> solution of F'(y) d = rhs.
        y0 (ndarray): the initial guess.
        abs_tol (float): stop once ||F(y)|| <= abs_tol.
        max_iters (int): maximum number of updates.
        step_tol (float): stop once ||d|| <= step_tol (1 + ||y||).
        residual_floor (callable or None): y -> the residual level reachable in
            floating point at y. Residuals below it count as converged even
            when abs_tol is smaller.

    Returns:
        (y, report): the final iterate and a NewtonReport
    """
    y = np.array(y0, dtype=float)
    r = residual(y)
    residuals = [float(np.linalg.norm(r))]
    for iteration in range(1, max_iters + 1):
        update = jacobian_solve(y, -r)
        y = y + update
        r = residual(y)
        residuals.append(float(np.linalg.norm(r)))
        stagnated = np.linalg.norm(update) <= step_tol * (1.0 + np.linalg.norm(y))
        tolerance = abs_tol if residual_floor is None else max(abs_tol, residual_floor(y))
        if residuals[-1] <= tolerance or stagnated:
            return y, NewtonReport(iteration, tuple(residuals), True)
    return y, NewtonReport(max_iters, tuple(residuals), False)


def _bandwidths(matrix):
    coo = matrix.tocoo()
    if coo.nnz == 0:
        return 0, 0
    offsets = coo.row - coo.col
    return int(max(offsets.max(), 0)), int(max(-offsets.min(), 0))


class AssembledSystem:
    """Mass, stiffness and feedback matrices of one (mesh, bc, interpolant).

    The feedback matrix is only assembled for controlled runs. The observation
    operator is always built so that the control norm can be recorded.
    """

    def __init__(self, mesh, bc, spec, controlled=True):
        self.mesh = mesh
        self.bc = bc
        self.spec = spec
        self.mass = mass_matrix(mesh, bc)
        self.stiffness = stiffness_matrix(mesh, bc)
        self.observation = ObservationOperator(spec, mesh, bc)
        self.feedback = self.observation.feedback_matrix() if controlled else None

    def __repr__(self):
        return "<AssembledSystem> {0} dofs, feedback {1}".format(
            self.mass.diag.size, "assembled" if self.feedback is not None else "skipped"
        )


class _EulerOperator:
    """Residual and Jacobian solves of one backward-Euler step for fixed (params, k)."""

    def __init__(self, params, assembled, k):
        self.params = params
        self.assembled = assembled
        self.k = k
        mass, stiffness = assembled.mass, assembled.stiffness
        linear = mass * (1.0 / k - params.gamma) + stiffness * params.nu
        self._mass_over_k = mass * (1.0 / k)
        self._linear = linear.to_sparse()
        if assembled.feedback is not None and params.mu != 0:
            self._linear = csr_matrix(self._linear + params.mu * assembled.feedback)
        lower, upper = _bandwidths(self._linear)
        self._lower = max(lower, 1)
        self._upper = max(upper, 1)
        self._banded = max(self._lower, self._upper) <= MAX_BANDED_BANDWIDTH
        if self._banded:
            n = mass.diag.size
            coo = self._linear.tocoo()
            self._linear_bands = np.zeros((self._lower + self._upper + 1, n))
            np.add.at(self._linear_bands, (self._upper + coo.row - coo.col, coo.col), coo.data)
        else:
            self._linear_csc = self._linear.tocsc()
        self._linear_abs = abs(self._linear)

    def residual(self, y, y_prev):
        mesh, bc = self.assembled.mesh, self.assembled.bc
        r = self._linear @ y - self._mass_over_k.dot(y_prev)
        if self.params.delta != 0:
            r = r + self.params.delta * cubic_term(FemFunction(mesh, bc, y))
        return r

    def residual_floor(self, y, y_prev):
        """Round-off level of the residual at y, from the magnitudes of its terms."""
        magnitude = self._linear_abs @ np.abs(y) + self._mass_over_k.dot(np.abs(y_prev))
        if self.params.delta != 0:
            magnitude = magnitude + self.params.delta * cubic_term(
                FemFunction(self.assembled.mesh, self.assembled.bc, np.abs(y))
            )
        return ROUNDOFF_FACTOR * np.finfo(float).eps * float(np.linalg.norm(magnitude))

    def solve(self, y, rhs):
        if self.params.delta != 0:
            nonlinear = cubic_jacobian(FemFunction(self.assembled.mesh, self.assembled.bc, y))
            nonlinear = nonlinear * self.params.delta
        else:
            nonlinear = None
        if self._banded:
            bands = self._linear_bands.copy()
            if nonlinear is not None:
                u = self._upper
                bands[u - 1, 1:] += nonlinear.sup
                bands[u, :] += nonlinear.diag
                bands[u + 1, :-1] += nonlinear.sub
            return solve_banded((self._lower, self._upper), bands, rhs)
        matrix = self._linear_csc
        if nonlinear is not None:
            matrix = (matrix + nonlinear.to_sparse()).tocsc()
        return spsolve(matrix, rhs)

    def step(self, y_prev, config):
        return newton_solve(
            lambda y: self.residual(y, y_prev),
            self.solve,
            y_prev,
            config.newton_abs_tol,
            config.newton_max_iters,
            config.newton_step_tol,
            residual_floor=lambda y: self.residual_floor(y, y_prev),
        )


def backward_euler_step(Y_prev, params, assembled, config):
    """Advance one backward-Euler step from Y_prev.

    Newton starts from Y_prev and uses the exact Jacobian
    M/k + nu A - gamma M + delta J(Y) + mu B.

    Args:
        Y_prev (FemFunction): the state at t_n.
        params (ModelParams): the model coefficients.
        assembled (AssembledSystem): the matrices for Y_prev's space.
        config (StepperConfig): the time step and Newton settings.

    Returns:
        (Y_next, report): the state at t_{n+1} and its NewtonReport

    Raises:
        NewtonConvergenceError: if Newton fails to converge.
    """
    operator = _EulerOperator(params, assembled, config.k)
    coeffs, report = operator.step(Y_prev.coeffs, config)
    if not report.converged:
        raise NewtonConvergenceError(report)
    return Y_prev.with_coeffs(coeffs), report


def _check_guard(params, h, k):
    if not step_size_guard(params, h, k):
        message = "Time step k={0} violates k (gamma + mu c_p^2 h^2 / 2) < 1 with h={1}.".format(k, h)
        logger.warning(message)
        warnings.warn(message, StepSizeWarning, stacklevel=3)
        return False
    return True


def simulate(y0h, params, spec, bc, config):
    """Run the fully discrete scheme from Y^0 = y0h up to time config.T.

    Args:
        y0h (FemFunction): the discrete initial state.
        params (ModelParams): the model coefficients.
        spec (InterpolantSpec): the observation operator of the controller.
        bc (BoundaryCondition): must match y0h.bc.
        config (StepperConfig): the time discretization.

    Returns:
        trajectory: a Trajectory with one record per time level

    Raises:
        NewtonConvergenceError: with the failing step index.
    """
    from .model import BoundaryCondition

    bc = BoundaryCondition.from_string(bc)
    if y0h.bc is not bc:
        raise ValueError("Initial state uses {0} boundary conditions, not {1}.".format(y0h.bc.value, bc.value))
    mesh = y0h.mesh
    assembled = AssembledSystem(mesh, bc, spec, controlled=params.mu != 0)
    h_obs = spec.observation_width(mesh)
    report = check_stabilization_conditions(params, h_obs)
    logger.info(
        "Simulating %r with %r on %r, k=%g, %d steps; %s",
        params,
        spec,
        mesh,
        config.k,
        config.n_steps,
        report,
    )
    _check_guard(params, h_obs, config.k)

    operator = _EulerOperator(params, assembled, config.k)
    n_steps = config.n_steps
    snapshot_steps = {}
    for t in config.snapshot_times:
        step = min(int(round(t / config.k)), n_steps)
        if abs(step * config.k - t) > 1e-9 * max(config.T, 1.0):
            message = "Snapshot time {0} is not on the time grid; keeping t={1} instead.".format(t, step * config.k)
            logger.warning(message)
            warnings.warn(message, SnapshotTimeWarning, stacklevel=2)
        snapshot_steps.setdefault(step, []).append(t)

    times = [0.0]
    l2, h1, l4, linf, control = [], [], [], [], []
    dt_l2, dt_h1 = [0.0], [0.0]
    iterations = [0]
    snapshots = []

    def record(y):
        l2.append(l2_norm(y))
        h1.append(h1_seminorm(y))
        l4.append(l4_norm(y))
        linf.append(linf_norm(y))
        control.append(assembled.observation.l2_norm(y.coeffs))

    current = y0h
    record(current)
    if 0 in snapshot_steps:
        snapshots.append((0.0, current))
    for n in range(1, n_steps + 1):
        coeffs, newton = operator.step(current.coeffs, config)
        if not newton.converged:
            logger.error("Newton failed at step %d: residuals %s", n, newton.residuals)
            raise NewtonConvergenceError(newton, step=n)
        logger.debug("step %d: %d Newton iterations, residuals %s", n, newton.iterations, newton.residuals)
        following = current.with_coeffs(coeffs)
        difference = (following - current) * (1.0 / config.k)
        current = following
        times.append(n * config.k)
        record(current)
        dt_l2.append(l2_norm(difference))
        dt_h1.append(h1_seminorm(difference))
        iterations.append(newton.iterations)
        if n in snapshot_steps:
            snapshots.append((times[-1], current))

    logger.info("Finished at t=%g with ||Y||=%.4e", times[-1], l2[-1])
    return Trajectory(
        times=times,
        l2=l2,
        h1_semi=h1,
        l4=l4,
        linf=linf,
        control_l2=control,
        newton_iters=iterations,
        dt_l2=dt_l2,
        dt_h1_semi=dt_h1,
        snapshots=snapshots,
        final=current,
        params=params,
        bc=bc,
        spec=spec,
        config=config,
    )
