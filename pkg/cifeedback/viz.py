"""Plot-ready CSV output for trajectories, control inputs, convergence tables
and mode listings. Every file has a header row, '.' decimals and LF line
endings, and is written atomically.
"""
import csv
import io
from os import path

from .helpers import atomic_write_text
from .mesh import dump_snapshot

TRAJECTORY_HEADER = ("t", "l2_norm", "h1_norm", "control_l2", "newton_iters")
DIAGNOSTICS_HEADER = ("t", "l2_norm", "h1_norm", "l4_norm", "control_l2", "decay_bound_rhs")
CONTROL_HEADER = ("t", "control_l2")
CONVERGENCE_HEADER = ("resolution", "error_l2", "oc_l2", "error_linf", "oc_linf")
MODES_HEADER = ("n", "eigenvalue", "rate", "unstable")


def _number(value):
    return repr(float(value))


def csv_text(header, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def write_csv(filepath, header, rows):
    atomic_write_text(filepath, csv_text(header, rows))
    return filepath


def trajectory_rows(traj):
    return [
        (_number(t), _number(l2), _number(h1), _number(control), int(iterations))
        for t, l2, h1, control, iterations in zip(
            traj.times, traj.l2, traj.h1_semi, traj.control_l2, traj.newton_iters
        )
    ]


def diagnostics_rows(traj, alpha):
    """Rows of the diagnostics CSV. decay_bound_rhs is e^{-alpha t} ||Y^0||,
    on the same scale as l2_norm (the bound on squared norms has rate 2 alpha).
    """
    bound = traj.decay_bound(alpha)
    return [
        tuple(_number(value) for value in row)
        for row in zip(traj.times, traj.l2, traj.h1_semi, traj.l4, traj.control_l2, bound)
    ]


def write_trajectory(traj, filepath):
    return write_csv(filepath, TRAJECTORY_HEADER, trajectory_rows(traj))


def write_diagnostics(traj, filepath, alpha):
    return write_csv(filepath, DIAGNOSTICS_HEADER, diagnostics_rows(traj, alpha))


def write_control(traj, filepath):
    from .diagnostics import control_series

    rows = [(_number(t), _number(c)) for t, c in control_series(traj)]
    return write_csv(filepath, CONTROL_HEADER, rows)


def write_snapshots(traj, directory, prefix="snapshot"):
    """Dump every snapshot of traj as a two-column x/y file; returns the paths."""
    paths = []
    for t, state in traj.snapshots:
        filepath = path.join(directory, "{0}_t{1:g}.tsv".format(prefix, t))
        dump_snapshot(state, filepath)
        paths.append(filepath)
    return paths


def write_convergence(report, filepath):
    return write_csv(filepath, CONVERGENCE_HEADER, report.rows())


def write_modes(rows, filepath):
    formatted = [(int(n), _number(eigenvalue), _number(rate), str(bool(unstable)).lower()) for n, eigenvalue, rate, unstable in rows]
    return write_csv(filepath, MODES_HEADER, formatted)
