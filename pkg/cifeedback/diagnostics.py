"""Norms of FEM functions, the Trajectory record produced by the stepper and
the decay diagnostics computed from it.
"""
import logging
import math
from dataclasses import dataclass

import numpy as np

from .assembly import mass_matrix, stiffness_matrix

logger = logging.getLogger(__name__)

SERIES_NAMES = ("l2", "h1_semi", "l4", "linf", "control_l2", "newton_iters", "dt_l2", "dt_h1_semi")

# Relative slack applied when comparing squared norms against the decay bound
DECAY_CHECK_RTOL = 1e-10


def l2_norm(f):
    """sqrt(c^T M c), exact for P1 functions."""
    return math.sqrt(max(mass_matrix(f.mesh, f.bc).quadratic_form(f.coeffs), 0.0))


def h1_seminorm(f):
    """||f_x||_{L2} via the stiffness quadratic form."""
    return math.sqrt(max(stiffness_matrix(f.mesh, f.bc).quadratic_form(f.coeffs), 0.0))


def l4_norm(f):
    # Degree-4 integrand per element, exact with 3 Gauss points
    xq, wq, s = f.mesh.gauss_points()
    return float(np.sum(wq * f.element_values(s) ** 4) ** 0.25)


def linf_norm(f):
    return float(np.max(np.abs(f.nodal_values())))


class Trajectory:
    """Time series recorded along one simulation.

    Every series has one entry per time level t_0 = 0 < t_1 < ... < t_M.
    Series that were not recorded are filled with NaN.
    """

    def __init__(
        self,
        times,
        l2,
        h1_semi=None,
        l4=None,
        linf=None,
        control_l2=None,
        newton_iters=None,
        dt_l2=None,
        dt_h1_semi=None,
        snapshots=None,
        final=None,
        params=None,
        bc=None,
        spec=None,
        config=None,
    ):
        """Create a Trajectory.

        Args:
            times (array-like): strictly increasing times starting at 0.
            l2 (array-like): ||Y^n||_{L2} per time level.
            h1_semi, l4, linf, control_l2 (array-like or None): further norms.
            newton_iters (array-like or None): Newton iterations per step,
                0 at t = 0.
            dt_l2, dt_h1_semi (array-like or None): norms of the discrete
                time derivative (Y^n - Y^{n-1}) / k, 0 at t = 0.
            snapshots (list or None): (time, FemFunction) pairs.
            final (FemFunction or None): the state at the last time level.
            params, bc, spec, config: run metadata.

        Raises:
            ValueError: if the series differ in length or times are invalid.
        """
        times = np.array(times, dtype=float)
        if times.ndim != 1 or times.size == 0:
            raise ValueError("A trajectory needs at least one time level.")
        if times[0] != 0.0 or np.any(np.diff(times) <= 0):
            raise ValueError("Trajectory times must start at 0 and be strictly increasing.")
        self.times = times
        n = times.size
        given = {
            "l2": l2,
            "h1_semi": h1_semi,
            "l4": l4,
            "linf": linf,
            "control_l2": control_l2,
            "newton_iters": newton_iters,
            "dt_l2": dt_l2,
            "dt_h1_semi": dt_h1_semi,
        }
        for name in SERIES_NAMES:
            values = given[name]
            series = np.full(n, np.nan) if values is None else np.array(values, dtype=float)
            if series.shape != (n,):
                raise ValueError(
                    "Series {0} has {1} entries but there are {2} time levels.".format(name, series.size, n)
                )
            series.setflags(write=False)
            setattr(self, name, series)
        self.times.setflags(write=False)
        self.snapshots = list(snapshots or [])
        self.final = final
        self.params = params
        self.bc = bc
        self.spec = spec
        self.config = config

    def __len__(self):
        return self.times.size

    @property
    def final_time(self):
        return float(self.times[-1])

    def window_mask(self, window):
        t0, t1 = window
        return (self.times >= t0 - 1e-12) & (self.times <= t1 + 1e-12)

    def decay_bound(self, alpha):
        """e^{-alpha t_n} ||Y^0||, the norm-scale right-hand side of the decay bound."""
        return np.exp(-alpha * self.times) * self.l2[0]

    def __repr__(self):
        return "<Trajectory> {0} time levels up to t={1:g}, final ||Y||={2:.4e}".format(
            len(self), self.final_time, self.l2[-1]
        )


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of log ||Y^n|| = log C - alpha_est t over fit_window."""

    alpha_est: float
    fit_window: tuple
    residual: float


def decay_rate_fit(traj, window=None):
    """Fit the exponential decay rate of the L2 norm.

    Args:
        traj (Trajectory): the trajectory.
        window (tuple or None): the time interval (t0, t1) to fit on. Defaults
            to (0.2 T, T) to skip the initial transient.

    Returns:
        fit: a DecayFit

    Raises:
        ValueError: if the window holds fewer than two points or a norm in it
            is not strictly positive.
    """
    T = traj.final_time
    if window is None:
        window = (0.2 * T, T)
    t0, t1 = float(window[0]), float(window[1])
    if t0 < 0 or t1 > T + 1e-12 or t0 >= t1:
        raise ValueError("Fit window {0} must lie inside [0, {1}].".format(window, T))
    mask = traj.window_mask((t0, t1))
    times, norms = traj.times[mask], traj.l2[mask]
    if times.size < 2:
        raise ValueError("Fit window {0} holds fewer than two time levels.".format(window))
    if np.any(~(norms > 0)):
        raise ValueError("The L2 norm must be strictly positive on the fit window.")
    coefficients, residuals, _, _, _ = np.polyfit(times, np.log(norms), 1, full=True)
    residual = float(residuals[0]) if residuals.size else 0.0
    fit = DecayFit(alpha_est=float(-coefficients[0]), fit_window=(t0, t1), residual=residual)
    logger.debug("Decay fit on %s: alpha=%.6g, residual=%.3e", fit.fit_window, fit.alpha_est, fit.residual)
    return fit


@dataclass(frozen=True)
class DecayCheckReport:
    """Outcome of checking ||Y^n||^2 <= e^{-2 alpha t_n} ||Y^0||^2 at every level.

    preconditions_met records whether the stabilization conditions and the
    discrete step condition hold; the bound is checked either way.
    """

    holds: tuple
    alpha: float
    preconditions_met: bool
    first_violation: object = None

    @property
    def ok(self):
        return self.first_violation is None


def verify_discrete_decay(traj, params, h, alpha):
    """Check the discrete exponential decay bound along a trajectory.

    Args:
        traj (Trajectory): the trajectory to check.
        params (ModelParams): the coefficients it was computed with.
        h (float): the observation scale.
        alpha (float): the decay rate to check.

    Returns:
        report: a DecayCheckReport. first_violation is the (index, time) of
        the first level breaking the bound, or None.
    """
    from .model import check_stabilization_conditions
    from .stepper import decay_step_condition

    conditions = check_stabilization_conditions(params, h)
    margin = params.mu - 2.0 * params.nu - 2.0 * params.gamma
    preconditions = conditions.ok and 0 < 2.0 * alpha <= margin
    if len(traj) > 1:
        k = float(traj.times[1] - traj.times[0])
        preconditions = preconditions and decay_step_condition(params, alpha, k)
    if not preconditions:
        logger.info("Decay bound with alpha=%g checked outside its hypotheses.", alpha)

    squared = traj.l2 ** 2
    bound = np.exp(-2.0 * alpha * traj.times) * squared[0]
    holds = squared <= bound * (1.0 + DECAY_CHECK_RTOL) + 1e-300
    first_violation = None
    if not np.all(holds):
        index = int(np.argmin(holds))
        first_violation = (index, float(traj.times[index]))
        logger.info("Decay bound violated first at t=%g", first_violation[1])
    return DecayCheckReport(
        holds=tuple(bool(value) for value in holds),
        alpha=float(alpha),
        preconditions_met=bool(preconditions),
        first_violation=first_violation,
    )


def control_series(traj):
    """Rows (t_n, ||I_h(Y^n)||_{L2}) of the control input norm."""
    if traj.spec is None:
        raise ValueError("The trajectory carries no interpolant metadata.")
    return [(float(t), float(c)) for t, c in zip(traj.times, traj.control_l2)]


def relative_gap(first, second, t_min=0.0, floor=1e-10):
    """Largest relative difference of the L2 series of two trajectories.

    Only time levels t >= t_min where both norms exceed floor are compared.

    Raises:
        ValueError: if the trajectories use different time grids.
    """
    if len(first) != len(second) or not np.allclose(first.times, second.times, rtol=0.0, atol=1e-12):
        raise ValueError("Trajectories must share one time grid.")
    mask = (first.times >= t_min - 1e-12) & (first.l2 > floor) & (second.l2 > floor)
    if not np.any(mask):
        return 0.0
    a, b = first.l2[mask], second.l2[mask]
    return float(np.max(np.abs(a - b) / np.maximum(a, b)))
