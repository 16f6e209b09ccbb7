"""The 1D partition of (0, 1), the P1 finite-element space built on it and
the per-element Gauss-Legendre rules used throughout the package.
"""
import logging
import warnings

import numpy as np
from numpy.polynomial.legendre import leggauss

from .helpers import atomic_write_text, evaluate
from .model import BoundaryCondition

logger = logging.getLogger(__name__)

# Gauss points per element for every polynomial integrand (exact up to degree 5)
GAUSS_POINTS = 3

COMPATIBILITY_TOLERANCE = 1e-8


class CompatibilityWarning(UserWarning):
    """Initial data does not vanish where the boundary condition pins it."""


def reference_gauss_rule(points=GAUSS_POINTS):
    """Gauss-Legendre nodes and weights mapped to the reference element [0, 1]."""
    nodes, weights = leggauss(points)
    return (nodes + 1.0) / 2.0, weights / 2.0


class MeshPartition:
    """A partition 0 = x_0 < x_1 < ... < x_N = 1 of the unit interval."""

    def __init__(self, nodes):
        """Create a MeshPartition.

        Args:
            nodes (array-like): the strictly increasing node coordinates,
                starting at exactly 0 and ending at exactly 1.

        Raises:
            ValueError: if the nodes do not form a valid partition.
        """
        nodes = np.array(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("A mesh needs at least 3 nodes (2 elements), got {0}.".format(nodes.size))
        if nodes[0] != 0.0 or nodes[-1] != 1.0:
            raise ValueError(
                "Mesh nodes must start at 0 and end at 1, got [{0}, {1}].".format(nodes[0], nodes[-1])
            )
        lengths = np.diff(nodes)
        if np.any(lengths <= 0):
            raise ValueError("Mesh nodes must be strictly increasing.")
        nodes.setflags(write=False)
        lengths.setflags(write=False)
        self._nodes = nodes
        self._lengths = lengths

    @property
    def nodes(self):
        return self._nodes

    @property
    def element_lengths(self):
        return self._lengths

    @property
    def h(self):
        """The mesh parameter: the largest element length."""
        return float(self._lengths.max())

    @property
    def n_elements(self):
        return self._lengths.size

    @property
    def is_uniform(self):
        return bool(np.allclose(self._lengths, self._lengths[0], rtol=1e-12, atol=0.0))

    def node_index(self, x, tol=1e-12):
        """Index of the node at coordinate x, or None if x is not a node."""
        i = int(np.searchsorted(self._nodes, x - tol))
        if i < self._nodes.size and abs(self._nodes[i] - x) <= tol:
            return i
        return None

    def contains_nodes(self, points, tol=1e-12):
        """True if every coordinate in points is a node of this mesh."""
        return all(self.node_index(x, tol) is not None for x in np.atleast_1d(points))

    def gauss_points(self, points=GAUSS_POINTS):
        """Physical quadrature points and weights on every element.

        Returns:
            (xq, wq, s): xq and wq of shape (n_elements, points) and the
            reference coordinates s in [0, 1] of shape (points,).
        """
        s, w = reference_gauss_rule(points)
        left = self._nodes[:-1, None]
        xq = left + self._lengths[:, None] * s[None, :]
        wq = self._lengths[:, None] * w[None, :]
        return xq, wq, s

    def __eq__(self, other):
        if not isinstance(other, MeshPartition):
            return NotImplemented
        return np.array_equal(self._nodes, other._nodes)

    def __hash__(self):
        return hash(self._nodes.tobytes())

    def __repr__(self):
        return "<MeshPartition> with {0} elements, h={1:.6g}".format(self.n_elements, self.h)


def uniform_partition(N):
    """The uniform mesh x_j = j / N.

    Raises:
        ValueError: if N < 2.
    """
    if int(N) != N or N < 2:
        raise ValueError("N must be an integer >= 2, not {0}.".format(N))
    N = int(N)
    nodes = np.arange(N + 1, dtype=float) / N
    return MeshPartition(nodes)


def free_nodes(mesh, bc):
    """The slice of node indices carrying degrees of freedom under bc.

    Mixed: 1..N, Dirichlet: 1..N-1, Neumann: 0..N. Constrained nodes hold 0.
    """
    bc = BoundaryCondition.from_string(bc)
    N = mesh.n_elements
    if bc is BoundaryCondition.MIXED:
        return slice(1, N + 1)
    if bc is BoundaryCondition.DIRICHLET:
        return slice(1, N)
    return slice(0, N + 1)


def free_node_count(mesh, bc):
    dofs = free_nodes(mesh, bc)
    return dofs.stop - dofs.start


class FemFunction:
    """A continuous piecewise-linear function stored by its free nodal values."""

    def __init__(self, mesh, bc, coeffs):
        """Create a FemFunction.

        Args:
            mesh (MeshPartition): the underlying mesh.
            bc (BoundaryCondition or str): the boundary condition deciding
                which nodes are free.
            coeffs (array-like): the nodal values at the free nodes.

        Raises:
            ValueError: if coeffs does not match the free-node count.
        """
        self.mesh = mesh
        self.bc = BoundaryCondition.from_string(bc)
        coeffs = np.array(coeffs, dtype=float)
        expected = free_node_count(mesh, self.bc)
        if coeffs.shape != (expected,):
            raise ValueError(
                "coeffs must have length {0} for {1} boundary conditions on this mesh, got shape {2}.".format(
                    expected, self.bc.value, coeffs.shape
                )
            )
        coeffs.setflags(write=False)
        self._coeffs = coeffs

    @classmethod
    def zeros(cls, mesh, bc):
        return cls(mesh, bc, np.zeros(free_node_count(mesh, bc)))

    @classmethod
    def from_nodal_values(cls, mesh, bc, values):
        """Build from values at all N+1 nodes; constrained entries are dropped."""
        values = np.asarray(values, dtype=float)
        return cls(mesh, bc, values[free_nodes(mesh, bc)])

    @property
    def coeffs(self):
        return self._coeffs

    def nodal_values(self):
        """Values at all N+1 nodes, constrained nodes included as zeros."""
        values = np.zeros(self.mesh.nodes.size)
        values[free_nodes(self.mesh, self.bc)] = self._coeffs
        return values

    def eval(self, x):
        """Evaluate at x in [0, 1] by linear interpolation of nodal values.

        Raises:
            ValueError: if any x lies outside [0, 1].
        """
        x = np.asarray(x, dtype=float)
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise ValueError("Evaluation points must lie in [0, 1].")
        values = np.interp(x, self.mesh.nodes, self.nodal_values())
        if values.ndim == 0:
            return float(values)
        return values

    def __call__(self, x):
        return self.eval(x)

    def element_values(self, s):
        """Values at reference coordinates s on every element, shape (n_elements, len(s))."""
        values = self.nodal_values()
        s = np.asarray(s, dtype=float)
        return values[:-1, None] * (1.0 - s[None, :]) + values[1:, None] * s[None, :]

    def with_coeffs(self, coeffs):
        return FemFunction(self.mesh, self.bc, coeffs)

    def _check_compatible(self, other):
        if not isinstance(other, FemFunction):
            return NotImplemented
        if other.mesh != self.mesh or other.bc is not self.bc:
            raise ValueError("FemFunctions live on different spaces.")
        return None

    def __add__(self, other):
        if self._check_compatible(other) is NotImplemented:
            return NotImplemented
        return self.with_coeffs(self._coeffs + other.coeffs)

    def __sub__(self, other):
        if self._check_compatible(other) is NotImplemented:
            return NotImplemented
        return self.with_coeffs(self._coeffs - other.coeffs)

    def __mul__(self, scalar):
        return self.with_coeffs(float(scalar) * self._coeffs)

    __rmul__ = __mul__

    def __repr__(self):
        return "<FemFunction> {0} dofs, {1} boundary".format(self._coeffs.size, self.bc.value)


def _check_compatibility(y0, bc):
    pinned = []
    if bc in (BoundaryCondition.MIXED, BoundaryCondition.DIRICHLET):
        pinned.append(0.0)
    if bc is BoundaryCondition.DIRICHLET:
        pinned.append(1.0)
    for x in pinned:
        value = float(evaluate(y0, np.array([x]))[0])
        if abs(value) > COMPATIBILITY_TOLERANCE:
            message = "Initial data is {0:.3g} at x={1} where {2} boundary conditions require 0.".format(
                value, x, bc.value
            )
            logger.warning(message)
            warnings.warn(message, CompatibilityWarning, stacklevel=3)


def load_vector(f, mesh, bc):
    """(f, phi_i) for every free node i, by the per-element Gauss rule."""
    xq, wq, s = mesh.gauss_points()
    fq = evaluate(f, xq)
    full = np.zeros(mesh.nodes.size)
    full[:-1] += np.sum(wq * fq * (1.0 - s), axis=1)
    full[1:] += np.sum(wq * fq * s, axis=1)
    return full[free_nodes(mesh, bc)]


def project_initial(y0, mesh, bc):
    """The L2 projection of y0 onto the P1 space of (mesh, bc).

    Args:
        y0 (callable): vectorized initial data on [0, 1].
        mesh (MeshPartition): the mesh.
        bc (BoundaryCondition or str): the boundary condition.

    Returns:
        y0h: a FemFunction
    """
    from .assembly import mass_matrix

    bc = BoundaryCondition.from_string(bc)
    _check_compatibility(y0, bc)
    rhs = load_vector(y0, mesh, bc)
    coeffs = mass_matrix(mesh, bc).solve(rhs)
    return FemFunction(mesh, bc, coeffs)


def dump_snapshot(f, filepath):
    """Write the nodal values of f as "x<TAB>y" rows, one per node."""
    rows = ["{0!r}\t{1!r}".format(float(x), float(y)) for x, y in zip(f.mesh.nodes, f.nodal_values())]
    atomic_write_text(filepath, "\n".join(rows) + "\n")
