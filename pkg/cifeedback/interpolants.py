"""Finite-parameter observation operators I_h.

Three kinds are supported:

- nodal values: I_h(f) = sum_n f(x_n*) chi_{J_n}, with x_n* the left end,
  midpoint or right end of each observation interval J_n
- finite volumes: I_h(f) = sum_n mean_{J_n}(f) chi_{J_n}
- Fourier modes: the L2-orthogonal projection onto the first Laplacian
  eigenfunctions of the boundary condition

The observation intervals default to the elements of the mesh the operator
is applied on. A coarser partition is accepted as long as its breakpoints are
mesh nodes.
"""
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import trapezoid
from scipy.sparse import coo_matrix, csr_matrix

from .helpers import evaluate
from .mesh import FemFunction, free_node_count, free_nodes, reference_gauss_rule
from .model import BoundaryCondition, eigenfunction, mode_indices

logger = logging.getLogger(__name__)

# Gauss points per element for trigonometric (non-polynomial) integrands
FOURIER_GAUSS_POINTS = 5
# Quadrature resolution used when a plain callable is projected onto Fourier modes
CALLABLE_QUADRATURE_ELEMENTS = 1024
# Sub-intervals per observation interval when averaging a plain callable
CALLABLE_SUBDIVISIONS = 16


class InterpolantKind(Enum):
    NODAL_VALUES = "nodal"
    FINITE_VOLUMES = "volumes"
    FOURIER_MODES = "fourier"

    @classmethod
    def from_string(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(
                "Interpolant kind {0} not recognized. Must be one of: {1}".format(
                    name, tuple(kind.value for kind in cls)
                )
            )


class SampleRule(Enum):
    LEFT = "left"
    MIDPOINT = "midpoint"
    RIGHT = "right"

    @classmethod
    def from_string(cls, name):
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(
                "Sample rule {0} not recognized. Must be one of: {1}".format(
                    name, tuple(rule.value for rule in cls)
                )
            )


def _uniform_breakpoints(count):
    return np.arange(count + 1, dtype=float) / count


class InterpolantSpec:
    """Which observation operator to use and on which intervals."""

    def __init__(self, kind, sample_rule="midpoint", mode_count=None, breakpoints=None):
        """Create an InterpolantSpec.

        Prefer the constructors `nodal`, `volumes` and `fourier`.

        Args:
            kind (InterpolantKind or str): "nodal", "volumes" or "fourier".
            sample_rule (SampleRule or str): where nodal values are sampled
                inside each interval. Default "midpoint".
            mode_count (int or None): number of Fourier modes. Required for
                the Fourier kind; 0 means nothing is observed.
            breakpoints (array-like or None): the observation partition
                0 = b_0 < ... < b_n = 1 for the piecewise-constant kinds.
                If None, the elements of the mesh act as intervals.

        Raises:
            ValueError: if the arguments are inconsistent.
        """
        self.kind = InterpolantKind.from_string(kind)
        self.sample_rule = SampleRule.from_string(sample_rule)
        if self.kind is InterpolantKind.FOURIER_MODES:
            if mode_count is None or int(mode_count) != mode_count or mode_count < 0:
                raise ValueError("mode_count must be an integer >= 0, not {0}.".format(mode_count))
            if breakpoints is not None:
                raise ValueError("Fourier modes do not use an observation partition.")
            mode_count = int(mode_count)
        elif mode_count is not None:
            raise ValueError("mode_count only applies to Fourier modes.")
        self.mode_count = mode_count

        if breakpoints is not None:
            breakpoints = np.array(breakpoints, dtype=float)
            if breakpoints.ndim != 1 or breakpoints.size < 2:
                raise ValueError("An observation partition needs at least one interval.")
            if breakpoints[0] != 0.0 or breakpoints[-1] != 1.0 or np.any(np.diff(breakpoints) <= 0):
                raise ValueError("Observation intervals must tile [0, 1] without overlap.")
            breakpoints.setflags(write=False)
        self.breakpoints = breakpoints

    @classmethod
    def nodal(cls, count=None, sample_rule="midpoint", breakpoints=None):
        """Nodal values on `count` uniform intervals (or explicit breakpoints)."""
        if count is not None:
            breakpoints = _uniform_breakpoints(count)
        return cls(InterpolantKind.NODAL_VALUES, sample_rule=sample_rule, breakpoints=breakpoints)

    @classmethod
    def volumes(cls, count=None, breakpoints=None):
        """Volume averages on `count` uniform intervals (or explicit breakpoints)."""
        if count is not None:
            breakpoints = _uniform_breakpoints(count)
        return cls(InterpolantKind.FINITE_VOLUMES, breakpoints=breakpoints)

    @classmethod
    def fourier(cls, mode_count):
        return cls(InterpolantKind.FOURIER_MODES, mode_count=mode_count)

    @property
    def is_piecewise_constant(self):
        return self.kind is not InterpolantKind.FOURIER_MODES

    def partition(self, mesh=None):
        """The observation breakpoints, falling back to the mesh nodes."""
        if self.breakpoints is not None:
            return self.breakpoints
        if mesh is None:
            raise ValueError("This interpolant observes on the mesh partition; a mesh is required.")
        return mesh.nodes

    def resolved(self, mesh):
        """A copy whose observation partition is fixed to the one used on mesh."""
        if not self.is_piecewise_constant:
            return self
        return InterpolantSpec(self.kind, sample_rule=self.sample_rule, breakpoints=self.partition(mesh))

    def observation_width(self, mesh):
        """The scale h of the interpolation bound: the widest observation interval."""
        if not self.is_piecewise_constant:
            return mesh.h
        return float(np.diff(self.partition(mesh)).max())

    def to_dict(self):
        data = {"kind": self.kind.value}
        if self.kind is InterpolantKind.NODAL_VALUES:
            data["sample_rule"] = self.sample_rule.value
        if self.kind is InterpolantKind.FOURIER_MODES:
            data["mode_count"] = self.mode_count
        elif self.breakpoints is not None:
            data["breakpoints"] = [float(b) for b in self.breakpoints]
        return data

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        kind = InterpolantKind.from_string(data.pop("kind"))
        count = data.pop("count", None)
        if kind is InterpolantKind.FOURIER_MODES:
            mode_count = data.pop("mode_count", count)
            return cls(kind, mode_count=mode_count, **data)
        if count is not None:
            data["breakpoints"] = _uniform_breakpoints(count)
        return cls(kind, **data)

    def __eq__(self, other):
        if not isinstance(other, InterpolantSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __repr__(self):
        if self.kind is InterpolantKind.FOURIER_MODES:
            return "InterpolantSpec(kind='fourier', mode_count={0})".format(self.mode_count)
        intervals = "mesh" if self.breakpoints is None else self.breakpoints.size - 1
        return "InterpolantSpec(kind='{0}', sample_rule='{1}', intervals={2})".format(
            self.kind.value, self.sample_rule.value, intervals
        )


class PiecewiseConstantFn:
    """A function constant on each interval [b_n, b_{n+1})."""

    def __init__(self, breakpoints, values):
        breakpoints = np.array(breakpoints, dtype=float)
        values = np.array(values, dtype=float)
        if values.shape != (breakpoints.size - 1,):
            raise ValueError(
                "Expected {0} interval values, got {1}.".format(breakpoints.size - 1, values.size)
            )
        self.breakpoints = breakpoints
        self.values = values

    @property
    def widths(self):
        return np.diff(self.breakpoints)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        index = np.clip(np.searchsorted(self.breakpoints, x, side="right") - 1, 0, self.values.size - 1)
        return self.values[index]

    def integral(self):
        return float(np.sum(self.values * self.widths))

    def l2_norm(self):
        return float(np.sqrt(np.sum(self.values ** 2 * self.widths)))

    def linf_norm(self):
        return float(np.max(np.abs(self.values)))

    def __sub__(self, other):
        if not np.array_equal(self.breakpoints, other.breakpoints):
            raise ValueError("Piecewise-constant functions live on different partitions.")
        return PiecewiseConstantFn(self.breakpoints, self.values - other.values)

    def __repr__(self):
        return "<PiecewiseConstantFn> on {0} intervals".format(self.values.size)


class FourierProjection:
    """A finite combination sum_m c_m e_m of normalized Laplacian eigenfunctions."""

    def __init__(self, bc, coefficients):
        self.bc = BoundaryCondition.from_string(bc)
        self.coefficients = np.array(coefficients, dtype=float)
        self.indices = mode_indices(self.bc, self.coefficients.size)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        result = np.zeros_like(x)
        for c, n in zip(self.coefficients, self.indices):
            result = result + c * eigenfunction(self.bc, n)(x)
        return result

    def l2_norm(self):
        return float(np.linalg.norm(self.coefficients))

    def __sub__(self, other):
        if other.bc is not self.bc or other.coefficients.size != self.coefficients.size:
            raise ValueError("Fourier projections live on different mode sets.")
        return FourierProjection(self.bc, self.coefficients - other.coefficients)

    def __repr__(self):
        return "<FourierProjection> {0} modes, {1} boundary".format(self.coefficients.size, self.bc.value)


def _sample_points(breakpoints, rule):
    left, right = breakpoints[:-1], breakpoints[1:]
    if rule is SampleRule.LEFT:
        return left.copy()
    if rule is SampleRule.RIGHT:
        return right.copy()
    return (left + right) / 2.0


def _interval_means(f, breakpoints):
    """Mean of f over each interval by composite Gauss quadrature.

    FemFunctions are integrated element by element, which is exact. Other
    callables are integrated on CALLABLE_SUBDIVISIONS pieces per interval.
    """
    if isinstance(f, FemFunction):
        fine = np.union1d(breakpoints, f.mesh.nodes)
        points = 2
    else:
        pieces = np.linspace(0.0, 1.0, CALLABLE_SUBDIVISIONS + 1)[:-1]
        widths = np.diff(breakpoints)
        fine = np.append((breakpoints[:-1, None] + widths[:, None] * pieces[None, :]).ravel(), 1.0)
        points = FOURIER_GAUSS_POINTS
    s, w = reference_gauss_rule(points)
    lengths = np.diff(fine)
    xq = fine[:-1, None] + lengths[:, None] * s[None, :]
    piece_integrals = np.sum(lengths[:, None] * w[None, :] * evaluate(f, xq), axis=1)
    owner = np.searchsorted(breakpoints, (fine[:-1] + fine[1:]) / 2.0) - 1
    totals = np.bincount(owner, weights=piece_integrals, minlength=breakpoints.size - 1)
    return totals / np.diff(breakpoints)


def _fourier_coefficients(f, bc, mode_count):
    if isinstance(f, FemFunction):
        nodes = f.mesh.nodes
    else:
        nodes = _uniform_breakpoints(CALLABLE_QUADRATURE_ELEMENTS)
    s, w = reference_gauss_rule(FOURIER_GAUSS_POINTS)
    lengths = np.diff(nodes)
    xq = nodes[:-1, None] + lengths[:, None] * s[None, :]
    wq = lengths[:, None] * w[None, :]
    fq = evaluate(f, xq)
    return np.array([np.sum(wq * fq * eigenfunction(bc, n)(xq)) for n in mode_indices(bc, mode_count)])


def _breakpoints_for(spec, f):
    mesh = f.mesh if isinstance(f, FemFunction) else None
    return spec.partition(mesh)


def apply_nodal(spec, f):
    """Nodal-values interpolant: sample f at x_n* in every observation interval."""
    if spec.kind is not InterpolantKind.NODAL_VALUES:
        raise ValueError("apply_nodal needs a nodal-values spec, got {0}.".format(spec.kind.value))
    breakpoints = _breakpoints_for(spec, f)
    return PiecewiseConstantFn(breakpoints, evaluate(f, _sample_points(breakpoints, spec.sample_rule)))


def apply_volumes(spec, f):
    """Finite-volume interpolant: the mean of f over every observation interval."""
    if spec.kind is not InterpolantKind.FINITE_VOLUMES:
        raise ValueError("apply_volumes needs a finite-volumes spec, got {0}.".format(spec.kind.value))
    breakpoints = _breakpoints_for(spec, f)
    return PiecewiseConstantFn(breakpoints, _interval_means(f, breakpoints))


def apply_fourier(spec, f, bc):
    """Orthogonal projection of f onto the first spec.mode_count eigenfunctions of bc."""
    if spec.kind is not InterpolantKind.FOURIER_MODES:
        raise ValueError("apply_fourier needs a Fourier-modes spec, got {0}.".format(spec.kind.value))
    bc = BoundaryCondition.from_string(bc)
    return FourierProjection(bc, _fourier_coefficients(f, bc, spec.mode_count))


def apply(spec, f, bc=None):
    """Apply whichever interpolant spec describes.

    Args:
        spec (InterpolantSpec): the observation operator.
        f (FemFunction or callable): the observed function.
        bc (BoundaryCondition or None): needed for Fourier modes; defaults to
            f.bc for FemFunctions.
    """
    if spec.kind is InterpolantKind.NODAL_VALUES:
        return apply_nodal(spec, f)
    if spec.kind is InterpolantKind.FINITE_VOLUMES:
        return apply_volumes(spec, f)
    if bc is None:
        if not isinstance(f, FemFunction):
            raise ValueError("A boundary condition is required to project a callable onto Fourier modes.")
        bc = f.bc
    return apply_fourier(spec, f, bc)


def controller_count(spec, mesh=None):
    """Number of observed quantities: intervals for piecewise-constant kinds,
    modes for Fourier.
    """
    if spec.kind is InterpolantKind.FOURIER_MODES:
        return spec.mode_count
    return spec.partition(mesh).size - 1


class ObservationOperator:
    """The linear map from FEM coefficients to the observed quantities.

    `sample` maps free-node coefficients to interval values (or Fourier
    coefficients). `moments` holds (chi_{J_n}, phi_i) (or (e_m, phi_i)), so
    that the feedback matrix is moments^T @ sample.
    """

    def __init__(self, spec, mesh, bc):
        self.spec = spec
        self.mesh = mesh
        self.bc = BoundaryCondition.from_string(bc)
        self._dofs = free_nodes(mesh, self.bc)
        self.n_free = free_node_count(mesh, self.bc)
        if spec.is_piecewise_constant:
            self._build_piecewise_constant()
        else:
            self._build_fourier()

    def _restrict_columns(self, rows, cols, data, n_rows):
        keep = (cols >= self._dofs.start) & (cols < self._dofs.stop)
        matrix = coo_matrix(
            (data[keep], (rows[keep], cols[keep] - self._dofs.start)), shape=(n_rows, self.n_free)
        )
        return matrix.tocsr()

    def _build_piecewise_constant(self):
        mesh = self.mesh
        breakpoints = self.spec.partition(mesh)
        if not mesh.contains_nodes(breakpoints):
            raise ValueError(
                "Observation breakpoints must be nodes of the mesh ({0}).".format(mesh)
            )
        self.breakpoints = breakpoints
        self.weights = np.diff(breakpoints)
        n_obs = self.weights.size

        elements = np.arange(mesh.n_elements)
        midpoints = (mesh.nodes[:-1] + mesh.nodes[1:]) / 2.0
        owner = np.searchsorted(breakpoints, midpoints) - 1
        half = mesh.element_lengths / 2.0
        rows = np.concatenate([owner, owner])
        cols = np.concatenate([elements, elements + 1])
        self.moments = self._restrict_columns(rows, cols, np.concatenate([half, half]), n_obs)

        if self.spec.kind is InterpolantKind.FINITE_VOLUMES:
            self.sample = csr_matrix(self.moments.multiply(1.0 / self.weights[:, None]))
        else:
            points = _sample_points(breakpoints, self.spec.sample_rule)
            element = np.clip(np.searchsorted(mesh.nodes, points, side="right") - 1, 0, mesh.n_elements - 1)
            t = (points - mesh.nodes[element]) / mesh.element_lengths[element]
            obs = np.arange(n_obs)
            rows = np.concatenate([obs, obs])
            cols = np.concatenate([element, element + 1])
            self.sample = self._restrict_columns(rows, cols, np.concatenate([1.0 - t, t]), n_obs)

    def _build_fourier(self):
        mesh = self.mesh
        self.breakpoints = None
        self.weights = None
        count = self.spec.mode_count
        xq, wq, s = mesh.gauss_points(FOURIER_GAUSS_POINTS)
        full = np.zeros((count, mesh.nodes.size))
        for m, n in enumerate(mode_indices(self.bc, count)):
            weighted = wq * eigenfunction(self.bc, n)(xq)
            full[m, :-1] += weighted @ (1.0 - s)
            full[m, 1:] += weighted @ s
        self.moments = csr_matrix(full[:, self._dofs])
        self.sample = self.moments

    @property
    def count(self):
        return self.sample.shape[0]

    def values(self, coeffs):
        """Interval values, or Fourier coefficients, of I_h(y_h)."""
        return self.sample @ np.asarray(coeffs, dtype=float)

    def interpolate(self, y):
        """I_h(y) for a FemFunction y on this operator's space."""
        values = self.values(y.coeffs)
        if self.spec.is_piecewise_constant:
            return PiecewiseConstantFn(self.breakpoints, values)
        return FourierProjection(self.bc, values)

    def l2_norm(self, coeffs):
        """||I_h(y_h)||_{L2}, exact for every kind."""
        values = self.values(coeffs)
        if self.weights is None:
            return float(np.linalg.norm(values))
        return float(np.sqrt(np.sum(values ** 2 * self.weights)))

    def feedback_matrix(self):
        if self.count == 0:
            return csr_matrix((self.n_free, self.n_free))
        return csr_matrix(self.moments.T @ self.sample)

    def __repr__(self):
        return "<ObservationOperator> {0} observations of {1} dofs".format(self.count, self.n_free)


@dataclass(frozen=True)
class InterpolationBoundReport:
    """Observed ratios ||phi - I_h phi|| / (h ||phi||_1) for a set of functions."""

    ratios: tuple
    h: float

    @property
    def max_ratio(self):
        return max(self.ratios) if self.ratios else 0.0


def verify_interpolation_bound(spec, sample_functions, h, bc=BoundaryCondition.MIXED, samples=20001):
    """Measure the interpolation error of spec against h ||phi||_1.

    Norms are computed by dense sampling; derivatives by second-order
    finite differences of the samples.

    Args:
        spec (InterpolantSpec): the interpolant. A spec without explicit
            breakpoints is applied on the uniform partition of width h.
        sample_functions (list of callables): the functions phi.
        h (float): the observation scale.
        bc (BoundaryCondition): used by Fourier modes.
        samples (int): number of sampling points on [0, 1].

    Returns:
        report: an InterpolationBoundReport
    """
    if not sample_functions:
        raise ValueError("sample_functions must not be empty.")
    if spec.is_piecewise_constant and spec.breakpoints is None:
        spec = InterpolantSpec(
            spec.kind, sample_rule=spec.sample_rule, breakpoints=_uniform_breakpoints(int(round(1.0 / h)))
        )
    x = np.linspace(0.0, 1.0, samples)
    ratios = []
    for phi in sample_functions:
        values = evaluate(phi, x)
        derivative = np.gradient(values, x, edge_order=2)
        h1_norm = np.sqrt(trapezoid(values ** 2, x) + trapezoid(derivative ** 2, x))
        error = np.sqrt(trapezoid((values - evaluate(apply(spec, phi, bc), x)) ** 2, x))
        ratios.append(0.0 if h1_norm == 0 else float(error / (h * h1_norm)))
    report = InterpolationBoundReport(ratios=tuple(ratios), h=float(h))
    logger.debug("Interpolation bound for %r at h=%g: max ratio %.4f", spec, h, report.max_ratio)
    return report
