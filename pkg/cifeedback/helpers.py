"""Helper functions shared by the numerical modules and the experiment runner:
atomic file output, callable evaluation and initial-condition parsing.
"""
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import sympy

# Named initial conditions used by the bundled presets
INITIAL_CONDITION_PRESETS = {
    "x(1-x)": "x*(1 - x)",
    "sin(pi x/2)": "sin(pi*x/2)",
    "1e-3 sin(pi x/2)": "1e-3*sin(pi*x/2)",
    "cos(3 pi x)": "cos(3*pi*x)",
}


def evaluate(f, x):
    """Evaluate a vectorized callable and broadcast the result to the shape of x.

    Callables returning a scalar (such as `lambda x: 0.0`) are accepted.
    """
    x = np.asarray(x, dtype=float)
    return np.broadcast_to(np.asarray(f(x), dtype=float), x.shape).astype(float)


def parse_initial_condition(text):
    """Turn a preset name or an inline expression in x into a vectorized callable.

    Args:
        text (str): one of INITIAL_CONDITION_PRESETS or an expression such as
            "sin(pi*x) + x**2". Only the symbol x may appear.

    Returns:
        f: a callable evaluating the expression on numpy arrays

    Raises:
        ValueError: if the expression cannot be parsed or uses other symbols.
    """
    expression = INITIAL_CONDITION_PRESETS.get(text.strip(), text)
    x = sympy.Symbol("x")
    try:
        parsed = sympy.sympify(expression, locals={"x": x})
    except (sympy.SympifyError, SyntaxError, TypeError) as err:
        raise ValueError("Could not parse initial condition {0!r}: {1}".format(text, err))
    unknown = parsed.free_symbols - {x}
    if unknown:
        raise ValueError(
            "Initial condition {0!r} may only depend on x, found: {1}".format(
                text, sorted(str(symbol) for symbol in unknown)
            )
        )
    function = sympy.lambdify(x, parsed, modules="numpy")
    return lambda points: evaluate(function, points)


def atomic_write_text(filepath, text):
    """Write text to filepath so that the file is either complete or absent."""
    directory = os.path.dirname(os.path.abspath(filepath))
    os.makedirs(directory, exist_ok=True)
    handle, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(handle, "w", newline="\n") as file:
            file.write(text)
        os.replace(tmp_path, filepath)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def map_in_order(function, items, workers=None):
    """Apply function to independent items concurrently, returning results in input order.

    Args:
        function (callable): applied to each item; must not share mutable state.
        items (iterable): the inputs.
        workers (int or None): thread count. Defaults to min(len(items), cpu count).
    """
    items = list(items)
    if workers is None:
        workers = min(len(items), os.cpu_count() or 1)
    if workers <= 1 or len(items) <= 1:
        return [function(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as executor:
        return list(executor.map(function, items))
