"""Exact linear optimal transport with a compiled core and a pure fallback.

The assignment kernel dominates the runtime of the graph-distance solver
(one exact linear-OT solve per Frank-Wolfe iteration), so it ships both as a
Cython extension and as a pure-Python twin.  The compiled backend is selected
at import when available; set ``FAIRSWITCH_PURE_OT=1`` or call
``set_backend("pure")`` to force the fallback.
"""

import os

import numpy as np

from . import pure
from .simplex import solve_transport

try:
    from . import _core
except ImportError:
    _core = None

_impl = pure if (_core is None or os.environ.get("FAIRSWITCH_PURE_OT") == "1") else _core


def backend_name():
    """Name of the active assignment backend: 'compiled' or 'pure'."""
    return _impl.BACKEND


def available_backends():
    names = ["pure"]
    if _core is not None:
        names.insert(0, "compiled")
    return names


def set_backend(name):
    """Select the assignment backend ('compiled' or 'pure') at runtime."""
    global _impl
    if name == "pure":
        _impl = pure
    elif name == "compiled":
        if _core is None:
            raise RuntimeError("compiled backend is not available")
        _impl = _core
    else:
        raise ValueError(f"unknown backend {name!r}")


def solve_assignment(cost):
    """Minimum-cost perfect matching of a square cost matrix."""
    return _impl.solve_assignment(cost)


def min_cost_plan(cost, row_marginals, col_marginals):
    """Exact vertex minimizer of <cost, P> over the transportation polytope.

    Uniform equal marginals route to the assignment kernel (the optimum is a
    scaled permutation); anything else runs the transportation simplex.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    a = np.asarray(row_marginals, dtype=np.float64)
    b = np.asarray(col_marginals, dtype=np.float64)
    n, m = cost.shape
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")
    if abs(a.sum() - b.sum()) > 1e-9 * max(a.sum(), b.sum(), 1.0):
        raise ValueError("infeasible marginals: mass totals differ")

    uniform = (
        n == m
        and np.all(a == a[0])
        and np.all(b == b[0])
        and a[0] == b[0]
        and a[0] > 0
    )
    if uniform:
        col4row = _impl.solve_assignment(cost)
        plan = np.zeros((n, n))
        plan[np.arange(n), col4row] = a[0]
        return plan
    return solve_transport(cost, a, b)
