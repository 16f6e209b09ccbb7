"""Assembly of the P1 Galerkin operators.

All integrals are computed element by element. Coefficients (delta, mu, nu)
are left to the caller so that one assembly can serve a parameter sweep.
"""
import logging

import numpy as np
from scipy.linalg import solve_banded
from scipy.sparse import diags

from .mesh import free_nodes

logger = logging.getLogger(__name__)


class TridiagonalMatrix:
    """A square tridiagonal matrix stored by its three diagonals."""

    def __init__(self, sub, diag, sup):
        diag = np.array(diag, dtype=float)
        sub = np.array(sub, dtype=float)
        sup = np.array(sup, dtype=float)
        n = diag.size
        if sub.size != max(n - 1, 0) or sup.size != max(n - 1, 0):
            raise ValueError(
                "Off-diagonals must have length {0}, got {1} and {2}.".format(n - 1, sub.size, sup.size)
            )
        for array in (sub, diag, sup):
            array.setflags(write=False)
        self.sub = sub
        self.diag = diag
        self.sup = sup

    @classmethod
    def symmetric(cls, diag, off):
        return cls(off, diag, off)

    @property
    def shape(self):
        return (self.diag.size, self.diag.size)

    def is_symmetric(self):
        return np.array_equal(self.sub, self.sup)

    def dot(self, vector):
        vector = np.asarray(vector, dtype=float)
        result = self.diag * vector
        result[1:] += self.sub * vector[:-1]
        result[:-1] += self.sup * vector[1:]
        return result

    def __matmul__(self, vector):
        return self.dot(vector)

    def __add__(self, other):
        if not isinstance(other, TridiagonalMatrix):
            return NotImplemented
        return TridiagonalMatrix(self.sub + other.sub, self.diag + other.diag, self.sup + other.sup)

    def __sub__(self, other):
        if not isinstance(other, TridiagonalMatrix):
            return NotImplemented
        return TridiagonalMatrix(self.sub - other.sub, self.diag - other.diag, self.sup - other.sup)

    def __mul__(self, scalar):
        scalar = float(scalar)
        return TridiagonalMatrix(scalar * self.sub, scalar * self.diag, scalar * self.sup)

    __rmul__ = __mul__

    def quadratic_form(self, vector):
        vector = np.asarray(vector, dtype=float)
        return float(vector @ self.dot(vector))

    def banded(self):
        """The (3, n) storage expected by scipy.linalg.solve_banded."""
        bands = np.zeros((3, self.diag.size))
        bands[0, 1:] = self.sup
        bands[1, :] = self.diag
        bands[2, :-1] = self.sub
        return bands

    def solve(self, rhs):
        return solve_banded((1, 1), self.banded(), np.asarray(rhs, dtype=float))

    def to_sparse(self):
        if self.diag.size == 1:
            return diags([self.diag], [0], format="csr")
        return diags([self.sub, self.diag, self.sup], [-1, 0, 1], format="csr")

    def to_dense(self):
        return self.to_sparse().toarray()

    def __repr__(self):
        return "<TridiagonalMatrix> {0}x{0}".format(self.diag.size)


def _restrict(diag, off, mesh, bc):
    dofs = free_nodes(mesh, bc)
    return TridiagonalMatrix.symmetric(diag[dofs], off[dofs.start : dofs.stop - 1])


def full_mass_matrix(mesh):
    """M_ij = (phi_i, phi_j) over all N+1 nodes, ignoring boundary conditions."""
    lengths = mesh.element_lengths
    diag = np.zeros(mesh.nodes.size)
    diag[:-1] += lengths / 3.0
    diag[1:] += lengths / 3.0
    return diag, lengths / 6.0


def full_stiffness_matrix(mesh):
    """A_ij = (phi_i', phi_j') over all N+1 nodes, ignoring boundary conditions."""
    inverse = 1.0 / mesh.element_lengths
    diag = np.zeros(mesh.nodes.size)
    diag[:-1] += inverse
    diag[1:] += inverse
    return diag, -inverse


def mass_matrix(mesh, bc):
    """The consistent P1 mass matrix on the free nodes of (mesh, bc)."""
    diag, off = full_mass_matrix(mesh)
    return _restrict(diag, off, mesh, bc)


def stiffness_matrix(mesh, bc):
    """The P1 stiffness matrix on the free nodes of (mesh, bc)."""
    diag, off = full_stiffness_matrix(mesh)
    return _restrict(diag, off, mesh, bc)


def cubic_term(y):
    """The vector (y^3, phi_i) over the free nodes of y.

    The per-element integrand has degree 4, so the 3-point Gauss rule is exact.
    """
    mesh = y.mesh
    xq, wq, s = mesh.gauss_points()
    cubes = wq * y.element_values(s) ** 3
    full = np.zeros(mesh.nodes.size)
    full[:-1] += cubes @ (1.0 - s)
    full[1:] += cubes @ s
    return full[free_nodes(mesh, y.bc)]


def cubic_jacobian(y):
    """The matrix 3 (y^2 phi_j, phi_i), the derivative of cubic_term at y."""
    mesh = y.mesh
    xq, wq, s = mesh.gauss_points()
    squares = 3.0 * wq * y.element_values(s) ** 2
    left, right = 1.0 - s, s
    diag = np.zeros(mesh.nodes.size)
    diag[:-1] += squares @ (left * left)
    diag[1:] += squares @ (right * right)
    off = squares @ (left * right)
    return _restrict(diag, off, mesh, y.bc)


def feedback_matrix(spec, mesh, bc):
    """The sparse matrix B_ij = (I_h(phi_j), phi_i) for the interpolant spec.

    B @ coeffs equals (I_h(y_h), phi_i) for every y_h in the P1 space, since
    I_h is linear.

    Raises:
        ValueError: if the observation partition does not align with the mesh.
    """
    from .interpolants import ObservationOperator

    operator = ObservationOperator(spec, mesh, bc)
    return operator.feedback_matrix()
