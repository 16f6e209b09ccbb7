"""PDE parameters, boundary conditions and the stabilization analysis of the
controlled Chafee-Infante equation

    y_t - nu y_xx - gamma y + delta y^3 = -mu I_h(y)   on (0, 1).
"""
import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

logger = logging.getLogger(__name__)


class BoundaryCondition(Enum):
    """The three supported sets of boundary conditions.

    - MIXED: y(0) = 0, y_x(1) = 0
    - DIRICHLET: y(0) = y(1) = 0
    - NEUMANN: y_x(0) = y_x(1) = 0
    """

    MIXED = "mixed"
    DIRICHLET = "dirichlet"
    NEUMANN = "neumann"

    @classmethod
    def from_string(cls, name):
        """Look up a boundary condition by case-insensitive name.

        Raises:
            ValueError: if name is not one of the allowed variants.
        """
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(
                "Boundary condition {0} not recognized. Must be one of: {1}".format(
                    name, tuple(bc.value for bc in cls)
                )
            )


class ModelParams:
    """Coefficients of the controlled equation.

    Instances are immutable once created.
    """

    __slots__ = ("nu", "gamma", "delta", "mu", "c_p")

    def __init__(self, nu, gamma, delta, mu=0.0, c_p=1.0):
        """Create a ModelParams object.

        Args:
            nu (float): The diffusion coefficient, must be > 0.
            gamma (float): The linear reaction coefficient, must be >= 0.
                gamma = 0 gives a pure heat equation.
            delta (float): The cubic reaction coefficient, must be >= 0.
                delta = 0 gives a linear problem.
            mu (float): The feedback gain. 0 means uncontrolled. Default 0.
            c_p (float): The interpolation constant of the observation
                operator, must be > 0. Default 1.

        Raises:
            ValueError: if any coefficient lies outside its range.
        """
        values = {
            "nu": float(nu),
            "gamma": float(gamma),
            "delta": float(delta),
            "mu": float(mu),
            "c_p": float(c_p),
        }
        for name, value in values.items():
            if not math.isfinite(value):
                raise ValueError("{0} must be finite, not {1}.".format(name, value))
        if values["nu"] <= 0:
            raise ValueError("nu must be > 0, not {0}.".format(nu))
        if values["c_p"] <= 0:
            raise ValueError("c_p must be > 0, not {0}.".format(c_p))
        for name in ("gamma", "delta", "mu"):
            if values[name] < 0:
                raise ValueError("{0} must be >= 0, not {1}.".format(name, values[name]))
        for name, value in values.items():
            object.__setattr__(self, name, value)

    def __setattr__(self, name, value):
        raise AttributeError("ModelParams is immutable.")

    def replace(self, **changes):
        """Return a copy with some coefficients changed."""
        values = self.to_dict()
        values.update(changes)
        return ModelParams(**values)

    def to_dict(self):
        return {name: getattr(self, name) for name in self.__slots__}

    def __eq__(self, other):
        if not isinstance(other, ModelParams):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(tuple(self.to_dict().values()))

    def __repr__(self):
        return "ModelParams(nu={0}, gamma={1}, delta={2}, mu={3}, c_p={4})".format(
            self.nu, self.gamma, self.delta, self.mu, self.c_p
        )


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of the two stabilization inequalities for a given scale h.

    alpha_max is the largest admissible decay rate (mu - 2 gamma - 2 nu) / 2,
    clipped at 0. beta is 2 nu - mu c_p^2 h^2.
    """

    nu_lower_ok: bool
    mu_lower_ok: bool
    alpha_max: float
    beta: float
    h: float

    @property
    def ok(self):
        return self.nu_lower_ok and self.mu_lower_ok

    def default_alpha(self):
        """The decay rate used when none is requested explicitly."""
        return self.alpha_max


def check_stabilization_conditions(params, h):
    """Evaluate nu >= mu c_p^2 h^2 / 2 and mu >= 2 (gamma + nu).

    Failed conditions are reported, never raised: uncontrolled runs
    (mu = 0) are legitimate experiments.

    Args:
        params (ModelParams): the model coefficients.
        h (float): the observation scale entering the interpolation bound.

    Returns:
        report: a ConditionReport
    """
    if h <= 0:
        raise ValueError("h must be > 0, not {0}.".format(h))
    observation_term = params.mu * params.c_p ** 2 * h ** 2
    nu_lower_ok = params.nu >= observation_term / 2.0
    mu_lower_ok = params.mu >= 2.0 * (params.gamma + params.nu)
    alpha_max = max((params.mu - 2.0 * params.gamma - 2.0 * params.nu) / 2.0, 0.0)
    beta = 2.0 * params.nu - observation_term
    return ConditionReport(
        nu_lower_ok=nu_lower_ok,
        mu_lower_ok=mu_lower_ok,
        alpha_max=alpha_max,
        beta=beta,
        h=float(h),
    )


def first_mode_index(bc):
    """Smallest valid mode index: Dirichlet modes start at 1, others at 0."""
    bc = BoundaryCondition.from_string(bc)
    return 1 if bc is BoundaryCondition.DIRICHLET else 0


def mode_indices(bc, count):
    """The first `count` valid mode indices for bc."""
    start = first_mode_index(bc)
    return list(range(start, start + count))


def laplacian_eigenvalue(bc, n):
    """The n-th eigenvalue of -d^2/dx^2 on (0, 1) under bc.

    Mixed: ((2n+1) pi / 2)^2, n >= 0. Dirichlet: (n pi)^2, n >= 1.
    Neumann: (n pi)^2, n >= 0.
    """
    bc = BoundaryCondition.from_string(bc)
    if int(n) != n or n < first_mode_index(bc):
        raise ValueError(
            "Mode index {0} is not valid for {1} boundary conditions; must be an integer >= {2}.".format(
                n, bc.value, first_mode_index(bc)
            )
        )
    if bc is BoundaryCondition.MIXED:
        return ((2 * n + 1) * math.pi / 2.0) ** 2
    return (n * math.pi) ** 2


def eigenfunction(bc, n):
    """The L2-normalized eigenfunction belonging to laplacian_eigenvalue(bc, n).

    Returns:
        a vectorized callable x -> value
    """
    bc = BoundaryCondition.from_string(bc)
    wavenumber = math.sqrt(laplacian_eigenvalue(bc, n))
    root2 = math.sqrt(2.0)
    if bc is BoundaryCondition.NEUMANN:
        if n == 0:
            return lambda x: np.ones_like(np.asarray(x, dtype=float))
        return lambda x: root2 * np.cos(wavenumber * np.asarray(x, dtype=float))
    return lambda x: root2 * np.sin(wavenumber * np.asarray(x, dtype=float))


def linearized_mode_rate(params, bc, n):
    """Exponential growth rate -nu lambda_n + gamma of mode n of the
    problem linearized around y = 0 (no control).
    """
    return -params.nu * laplacian_eigenvalue(bc, n) + params.gamma


def unstable_mode_count(params, bc):
    """Number of modes whose linearized rate is strictly positive."""
    bc = BoundaryCondition.from_string(bc)
    count = 0
    n = first_mode_index(bc)
    while linearized_mode_rate(params, bc, n) > 0:
        count += 1
        n += 1
    return count


def steady_states(params):
    """The spatially constant roots of gamma y = delta y^3.

    With delta = 0 only y = 0 is returned.
    """
    if params.delta == 0:
        return [0.0]
    root = math.sqrt(params.gamma / params.delta)
    if root == 0:
        return [0.0]
    return [0.0, root, -root]
