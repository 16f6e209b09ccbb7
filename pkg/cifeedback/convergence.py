"""Refinement studies against fine-grid reference solutions, observed orders
and an independent finite-difference solver used as a cross-check.

Ladders refine by a factor 2 and every coarse mesh must be nested in the
reference mesh, so errors are measured on the reference mesh without any
interpolation between unrelated grids.
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .assembly import TridiagonalMatrix
from .diagnostics import l2_norm, linf_norm
from .helpers import evaluate, map_in_order
from .interpolants import FourierProjection, InterpolantKind, SampleRule, apply
from .mesh import FemFunction, project_initial, uniform_partition
from .model import BoundaryCondition
from .stepper import ROUNDOFF_FACTOR, StepperConfig, newton_solve, simulate

logger = logging.getLogger(__name__)

REFINEMENT_RATIO = 2
# Errors at or below this level are round-off; no order is reported for them
ERROR_FLOOR = 1e-14
# Temporal references use this many times the finest ladder's step count
TEMPORAL_REFERENCE_FACTOR = 16


class ConvergenceAxis(Enum):
    SPACE = "space"
    TIME = "time"
    CONTROL = "control"


def observed_order(e_coarse, e_fine, ratio=REFINEMENT_RATIO):
    """log(e_coarse / e_fine) / log(ratio).

    Raises:
        ValueError: if an error is not positive or ratio <= 1.
    """
    if not e_coarse > 0 or not e_fine > 0:
        raise ValueError("Errors must be positive, got {0} and {1}.".format(e_coarse, e_fine))
    if not ratio > 1:
        raise ValueError("The refinement ratio must be > 1, not {0}.".format(ratio))
    return math.log(e_coarse / e_fine) / math.log(ratio)


def _orders(resolutions, errors, refine):
    orders = []
    for i in range(1, len(errors)):
        if refine is ConvergenceAxis.SPACE:
            ratio = resolutions[i - 1] / resolutions[i]
        else:
            ratio = resolutions[i] / resolutions[i - 1]
        if errors[i - 1] <= ERROR_FLOOR or errors[i] <= ERROR_FLOOR:
            orders.append(None)
        else:
            orders.append(observed_order(errors[i - 1], errors[i], ratio))
    return orders


class ConvergenceReport:
    """Errors and observed orders of one refinement ladder.

    Spatial ladders are stored by decreasing h, temporal ladders by
    increasing M. An order is None where one of the two errors sits at the
    round-off floor.
    """

    def __init__(self, axis, resolutions, errors_l2, errors_linf, refine=None):
        self.axis = ConvergenceAxis(axis)
        if refine is None:
            refine = ConvergenceAxis.TIME if self.axis is ConvergenceAxis.TIME else ConvergenceAxis.SPACE
        self.refine = ConvergenceAxis(refine)
        if self.refine is ConvergenceAxis.CONTROL:
            raise ValueError("A ladder refines either space or time.")
        if not len(resolutions) == len(errors_l2) == len(errors_linf):
            raise ValueError("Resolutions and errors must have one entry per rung.")
        rows = sorted(
            zip(resolutions, errors_l2, errors_linf),
            key=lambda row: -row[0] if self.refine is ConvergenceAxis.SPACE else row[0],
        )
        self.resolutions = [row[0] for row in rows]
        self.errors_l2 = [float(row[1]) for row in rows]
        self.errors_linf = [float(row[2]) for row in rows]
        self.orders_l2 = _orders(self.resolutions, self.errors_l2, self.refine)
        self.orders_linf = _orders(self.resolutions, self.errors_linf, self.refine)

    @property
    def ladder(self):
        return list(zip(self.resolutions, self.errors_l2, self.errors_linf))

    @property
    def observed_orders(self):
        return self.orders_l2

    def resolution_label(self, resolution):
        if self.refine is ConvergenceAxis.SPACE:
            return "1/{0}".format(int(round(1.0 / resolution)))
        return str(int(resolution))

    def tail_mean(self, norm="l2", count=2):
        """Mean of the last `count` defined orders, or None if there are none."""
        orders = self.orders_l2 if norm == "l2" else self.orders_linf
        defined = [order for order in orders if order is not None][-count:]
        if not defined:
            return None
        return sum(defined) / len(defined)

    def rows(self):
        """Table rows (resolution, error_l2, oc_l2, error_linf, oc_linf) with "--"
        for undefined orders.
        """
        def order_text(order):
            return "--" if order is None else "{0:.4f}".format(order)

        orders_l2 = [None] + self.orders_l2
        orders_linf = [None] + self.orders_linf
        return [
            (
                self.resolution_label(resolution),
                "{0:.4e}".format(e_l2),
                order_text(oc_l2),
                "{0:.4e}".format(e_linf),
                order_text(oc_linf),
            )
            for resolution, e_l2, oc_l2, e_linf, oc_linf in zip(
                self.resolutions, self.errors_l2, orders_l2, self.errors_linf, orders_linf
            )
        ]

    def __repr__(self):
        return "<ConvergenceReport> {0} ladder ({1}) with {2} rungs, orders {3}".format(
            self.axis.value,
            self.refine.value,
            len(self.resolutions),
            ["--" if o is None else round(o, 3) for o in self.orders_l2],
        )


@dataclass(frozen=True)
class ReferenceSolution:
    """The final-time state of a fine-grid run and how it was computed."""

    final: FemFunction
    h_ref: float
    M_ref: int
    T: float
    params: object
    bc: BoundaryCondition
    spec: object

    @property
    def mesh(self):
        return self.final.mesh


def _mesh_for(h):
    N = int(round(1.0 / h))
    if abs(N * h - 1.0) > 1e-9:
        raise ValueError("h must be 1/N for an integer N, not {0}.".format(h))
    return uniform_partition(N)


def _run(params, bc, spec, y0, mesh, M, T):
    y0h = project_initial(y0, mesh, bc)
    return simulate(y0h, params, spec, bc, StepperConfig.from_steps(M, T))


def compute_reference(params, bc, spec, y0, h_ref, M_ref, T):
    """Simulate on the reference resolution (h_ref, M_ref) up to T.

    Returns:
        reference: a ReferenceSolution
    """
    bc = BoundaryCondition.from_string(bc)
    mesh = _mesh_for(h_ref)
    logger.info("Computing reference solution at h=1/%d, M=%d, T=%g", mesh.n_elements, M_ref, T)
    trajectory = _run(params, bc, spec, y0, mesh, M_ref, T)
    return ReferenceSolution(
        final=trajectory.final,
        h_ref=mesh.h,
        M_ref=int(M_ref),
        T=float(T),
        params=params,
        bc=bc,
        spec=spec,
    )


def _on_reference_mesh(coarse, ref_mesh):
    if not ref_mesh.contains_nodes(coarse.mesh.nodes):
        raise ValueError("Mesh {0} is not nested in the reference mesh {1}.".format(coarse.mesh, ref_mesh))
    return FemFunction.from_nodal_values(ref_mesh, coarse.bc, coarse.eval(ref_mesh.nodes))


def grid_error(coarse, ref, linf_on="reference"):
    """L2 and max errors of coarse against the reference final state.

    The coarse function is evaluated on the reference mesh. The L2 error uses
    the reference mass matrix. The max error is taken over the reference
    nodes, or over the coarse nodes with linf_on="coarse".

    Raises:
        ValueError: if the meshes are not nested or use different boundary conditions.
    """
    reference = ref.final if isinstance(ref, ReferenceSolution) else ref
    if coarse.bc is not reference.bc:
        raise ValueError("Cannot compare functions with different boundary conditions.")
    difference = reference - _on_reference_mesh(coarse, reference.mesh)
    error_l2 = l2_norm(difference)
    if linf_on == "coarse":
        error_linf = float(np.max(np.abs(difference.eval(coarse.mesh.nodes))))
    elif linf_on == "reference":
        error_linf = linf_norm(difference)
    else:
        raise ValueError("linf_on must be 'reference' or 'coarse', not {0!r}.".format(linf_on))
    return error_l2, error_linf


def _check_nested(h_ladder, ref):
    N_ref = ref.mesh.n_elements
    for h in h_ladder:
        N = _mesh_for(h).n_elements
        if N_ref % N != 0 or N >= N_ref:
            raise ValueError(
                "Ladder mesh 1/{0} must be strictly coarser than and nested in the reference 1/{1}.".format(N, N_ref)
            )


def spatial_study(params, bc, spec, y0, h_ladder, M_fixed, ref, workers=None):
    """Final-time state errors for every h in h_ladder at a fixed step count.

    Returns:
        report: a ConvergenceReport along the space axis
    """
    bc = BoundaryCondition.from_string(bc)
    _check_nested(h_ladder, ref)

    def rung(h):
        trajectory = _run(params, bc, spec, y0, _mesh_for(h), M_fixed, ref.T)
        errors = grid_error(trajectory.final, ref)
        logger.info("space rung h=%g: L2 %.4e, max %.4e", h, *errors)
        return errors

    errors = map_in_order(rung, h_ladder, workers)
    return ConvergenceReport(
        ConvergenceAxis.SPACE,
        [_mesh_for(h).h for h in h_ladder],
        [e[0] for e in errors],
        [e[1] for e in errors],
    )


def _check_temporal_reference(M_ladder, h_fixed, ref):
    if _mesh_for(h_fixed) != ref.mesh:
        raise ValueError("A temporal study needs the reference on the ladder mesh h={0}.".format(h_fixed))
    if ref.M_ref < max(M_ladder):
        raise ValueError("The reference step count {0} is below the ladder maximum {1}.".format(ref.M_ref, max(M_ladder)))


def temporal_study(params, bc, spec, y0, M_ladder, h_fixed, ref, workers=None):
    """Final-time state errors for every M in M_ladder on a fixed mesh.

    Returns:
        report: a ConvergenceReport along the time axis
    """
    bc = BoundaryCondition.from_string(bc)
    _check_temporal_reference(M_ladder, h_fixed, ref)
    mesh = _mesh_for(h_fixed)

    def rung(M):
        trajectory = _run(params, bc, spec, y0, mesh, M, ref.T)
        errors = grid_error(trajectory.final, ref)
        logger.info("time rung M=%d: L2 %.4e, max %.4e", M, *errors)
        return errors

    errors = map_in_order(rung, M_ladder, workers)
    return ConvergenceReport(ConvergenceAxis.TIME, list(M_ladder), [e[0] for e in errors], [e[1] for e in errors])


def _control_error(spec, coarse, reference, bc):
    observed = spec.resolved(coarse.mesh)
    difference = apply(observed, reference, bc) - apply(observed, coarse, bc)
    if isinstance(difference, FourierProjection):
        return difference.l2_norm(), float(np.max(np.abs(difference(reference.mesh.nodes))))
    return difference.l2_norm(), difference.linf_norm()


def control_study(params, bc, spec, y0, ladder, fixed, ref, refine="space", workers=None):
    """Errors of the control input I_h(y_ref(T)) - I_h(Y^M) along a ladder.

    The observation operator of each rung is applied to both the rung's final
    state and the reference.

    Args:
        ladder (list): h values (refine="space") or step counts (refine="time").
        fixed (int or float): the fixed M (space) or the fixed h (time).
        refine (str): "space" or "time".

    Returns:
        report: a ConvergenceReport along the control axis
    """
    bc = BoundaryCondition.from_string(bc)
    refine = ConvergenceAxis(refine)
    if refine is ConvergenceAxis.SPACE:
        _check_nested(ladder, ref)
        resolutions = [_mesh_for(h).h for h in ladder]

        def rung(h):
            return _run(params, bc, spec, y0, _mesh_for(h), fixed, ref.T).final

    elif refine is ConvergenceAxis.TIME:
        _check_temporal_reference(ladder, fixed, ref)
        mesh = _mesh_for(fixed)
        resolutions = list(ladder)

        def rung(M):
            return _run(params, bc, spec, y0, mesh, M, ref.T).final

    else:
        raise ValueError("A control study refines either space or time.")

    finals = map_in_order(rung, ladder, workers)
    errors = [_control_error(spec, final, ref.final, bc) for final in finals]
    logger.info("control ladder (%s) errors: %s", refine.value, errors)
    return ConvergenceReport(
        ConvergenceAxis.CONTROL,
        resolutions,
        [e[0] for e in errors],
        [e[1] for e in errors],
        refine=refine,
    )


def _fd_operators(bc, n, h):
    """Centered second differences and the midpoint feedback stencil on the
    free grid nodes, with ghost nodes reflecting across Neumann ends.
    """
    if bc is BoundaryCondition.DIRICHLET:
        size = n - 1
    elif bc is BoundaryCondition.MIXED:
        size = n
    else:
        size = n + 1
    diag = np.full(size, 2.0 / h ** 2)
    sub = np.full(size - 1, -1.0 / h ** 2)
    sup = np.full(size - 1, -1.0 / h ** 2)
    f_diag = np.full(size, 0.5)
    f_sub = np.full(size - 1, 0.25)
    f_sup = np.full(size - 1, 0.25)
    if bc in (BoundaryCondition.MIXED, BoundaryCondition.NEUMANN):
        sub[-1] *= 2.0
        f_sub[-1] *= 2.0
    if bc is BoundaryCondition.NEUMANN:
        sup[0] *= 2.0
        f_sup[0] *= 2.0
    return TridiagonalMatrix(sub, diag, sup), TridiagonalMatrix(f_sub, f_diag, f_sup)


def fd_oracle(params, bc, y0, grid_points, steps, T, spec=None, newton_abs_tol=1e-12, newton_max_iters=25):
    """Solve the controlled equation with centered finite differences in space
    and the same backward-Euler/Newton stepping.

    The feedback at node j is mu (y_{j-1} + 2 y_j + y_{j+1}) / 4, the average
    of the two adjacent element-midpoint values.

    Args:
        params (ModelParams): the coefficients.
        bc (BoundaryCondition or str): the boundary condition.
        y0 (callable): the initial data, sampled at the grid points.
        grid_points (int): number of grid points including both ends.
        steps (int): number of time steps.
        T (float): the final time.
        spec (InterpolantSpec or None): the controller being cross-checked.
            Only piecewise-constant interpolants on the grid cells are
            supported, and nodal values must be sampled at the midpoints.

    Returns:
        solution: a FemFunction holding the grid values at T on the uniform mesh

    Raises:
        ValueError: for unsupported interpolants.
        NewtonConvergenceError: if a Newton solve fails.
    """
    from .stepper import NewtonConvergenceError

    bc = BoundaryCondition.from_string(bc)
    if spec is not None and (not spec.is_piecewise_constant or spec.breakpoints is not None):
        raise ValueError("The finite-difference solver only supports interpolants on the grid cells, not {0!r}.".format(spec))
    if spec is not None and spec.kind is InterpolantKind.NODAL_VALUES and spec.sample_rule is not SampleRule.MIDPOINT:
        raise ValueError(
            "The finite-difference feedback samples element midpoints; {0!r} samples elsewhere.".format(spec)
        )
    mesh = uniform_partition(grid_points - 1)
    h = mesh.h
    k = T / steps
    laplacian, feedback = _fd_operators(bc, mesh.n_elements, h)
    linear = laplacian * params.nu + feedback * params.mu
    identity_over_k = 1.0 / k - params.gamma
    magnitude_of_linear = TridiagonalMatrix(np.abs(linear.sub), np.abs(linear.diag), np.abs(linear.sup))

    y = FemFunction.from_nodal_values(mesh, bc, evaluate(y0, mesh.nodes)).coeffs.copy()

    def jacobian_solve(state, rhs):
        diag = linear.diag + identity_over_k + 3.0 * params.delta * state ** 2
        return TridiagonalMatrix(linear.sub, diag, linear.sup).solve(rhs)

    for n in range(1, steps + 1):
        previous = y

        def residual(state):
            return (state - previous) / k + linear.dot(state) - params.gamma * state + params.delta * state ** 3

        def residual_floor(state):
            magnitude = (
                magnitude_of_linear.dot(np.abs(state))
                + (1.0 / k + params.gamma) * np.abs(state)
                + np.abs(previous) / k
                + params.delta * np.abs(state) ** 3
            )
            return ROUNDOFF_FACTOR * np.finfo(float).eps * float(np.linalg.norm(magnitude))

        y, report = newton_solve(residual, jacobian_solve, previous, newton_abs_tol, newton_max_iters, residual_floor=residual_floor)
        if not report.converged:
            raise NewtonConvergenceError(report, step=n)
    logger.debug("Finite-difference run finished: %d points, %d steps", grid_points, steps)
    return FemFunction(mesh, bc, y)
