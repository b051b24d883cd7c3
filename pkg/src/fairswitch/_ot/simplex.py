"""Exact transportation-simplex solver for the linear transport problem

    min <cost, P>  s.t.  P @ 1 = a,  P.T @ 1 = b,  P >= 0.

Used for general (non-uniform) marginals; the uniform equal-marginal case is
dispatched to the assignment kernel instead, where the optimum is attained at
a permutation vertex.

Basic feasible solutions are spanning trees of the bipartite row/column
graph.  The implementation keeps degenerate zero-allocation basics, enters on
the most negative reduced cost, and falls back to Bland's rule if too many
consecutive degenerate pivots occur, which guarantees termination.
"""

import numpy as np

_BLAND_TRIGGER = 200


def _northwest_corner(a, b):
    """Initial basis via the northwest-corner rule: exactly n+m-1 cells."""
    n, m = len(a), len(b)
    ra = a.copy()
    rb = b.copy()
    basic_i = np.empty(n + m - 1, dtype=np.int64)
    basic_j = np.empty(n + m - 1, dtype=np.int64)
    basic_x = np.empty(n + m - 1)
    i = j = 0
    for k in range(n + m - 1):
        basic_i[k] = i
        basic_j[k] = j
        x = min(ra[i], rb[j])
        basic_x[k] = x
        ra[i] -= x
        rb[j] -= x
        if i == n - 1 and j == m - 1:
            return basic_i[: k + 1], basic_j[: k + 1], basic_x[: k + 1]
        if (ra[i] <= rb[j] and i < n - 1) or j == m - 1:
            i += 1
        else:
            j += 1
    return basic_i, basic_j, basic_x


def _duals(cost, basic_i, basic_j, n, m):
    """Solve u_i + v_j = cost_ij over the basis tree (u_0 anchored at 0)."""
    u = np.full(n, np.nan)
    v = np.full(m, np.nan)
    row_cells = [[] for _ in range(n)]
    col_cells = [[] for _ in range(m)]
    for k in range(len(basic_i)):
        row_cells[basic_i[k]].append(k)
        col_cells[basic_j[k]].append(k)
    u[0] = 0.0
    stack = [(0, True)]
    while stack:
        node, is_row = stack.pop()
        if is_row:
            for k in row_cells[node]:
                j = basic_j[k]
                if np.isnan(v[j]):
                    v[j] = cost[node, j] - u[node]
                    stack.append((j, False))
        else:
            for k in col_cells[node]:
                i = basic_i[k]
                if np.isnan(u[i]):
                    u[i] = cost[i, node] - v[node]
                    stack.append((i, True))
    return u, v, row_cells, col_cells


def _tree_path(enter_i, enter_j, basic_i, basic_j, row_cells, col_cells, n):
    """Unique alternating path of basic cells from row enter_i to col enter_j."""
    # nodes: rows are 0..n-1, columns are n..n+m-1
    parent_cell = {enter_i: -1}
    stack = [enter_i]
    while stack:
        node = stack.pop()
        if node == n + enter_j:
            break
        if node < n:
            cells = row_cells[node]
        else:
            cells = col_cells[node - n]
        for k in cells:
            nxt = n + basic_j[k] if node < n else basic_i[k]
            if nxt not in parent_cell:
                parent_cell[nxt] = k
                stack.append(nxt)
    path = []
    node = n + enter_j
    while node != enter_i:
        k = parent_cell[node]
        path.append(k)
        cell_row, cell_col = basic_i[k], basic_j[k] + n
        node = cell_col if node == cell_row else cell_row
    path.reverse()
    return path


def solve_transport(cost, a, b, tol=1e-10, max_pivots=None):
    """Exact optimal transport plan between marginals a and b.

    Returns an (n, m) plan attaining the LP optimum.  Raises ValueError on
    infeasible marginals and RuntimeError if pivoting fails to terminate.
    """
    cost = np.asarray(cost, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    n, m = cost.shape
    if len(a) != n or len(b) != m:
        raise ValueError("marginal lengths do not match cost shape")
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("marginals must be nonnegative")
    if abs(a.sum() - b.sum()) > 1e-9 * max(a.sum(), b.sum(), 1.0):
        raise ValueError("infeasible marginals: mass totals differ")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix must be finite")

    if n == 1 or m == 1:
        plan = np.zeros((n, m))
        if n == 1:
            plan[0, :] = b
        else:
            plan[:, 0] = a
        return plan

    if max_pivots is None:
        max_pivots = 1000 + 100 * (n + m)
    scale = max(1.0, float(np.max(np.abs(cost))))

    basic_i, basic_j, basic_x = _northwest_corner(a, b)
    degenerate_streak = 0

    for _ in range(max_pivots):
        u, v, row_cells, col_cells = _duals(cost, basic_i, basic_j, n, m)
        reduced = cost - u[:, None] - v[None, :]
        reduced[basic_i, basic_j] = 0.0

        if degenerate_streak < _BLAND_TRIGGER:
            flat = int(np.argmin(reduced))
            if reduced.flat[flat] >= -tol * scale:
                break
        else:
            negatives = np.flatnonzero(reduced.ravel() < -tol * scale)
            if len(negatives) == 0:
                break
            flat = int(negatives[0])
        ei, ej = divmod(flat, m)

        path = _tree_path(ei, ej, basic_i, basic_j, row_cells, col_cells, n)
        minus = np.asarray(path[0::2])
        theta = float(np.min(basic_x[minus]))
        # tie-break on the cell's (row, col) index: Bland-compatible, keeps
        # degenerate pivot sequences from cycling
        ties = minus[basic_x[minus] == theta]
        theta_idx = int(ties[np.argmin(basic_i[ties] * m + basic_j[ties])])

        basic_x[path[0::2]] -= theta
        basic_x[path[1::2]] += theta
        basic_i[theta_idx] = ei
        basic_j[theta_idx] = ej
        basic_x[theta_idx] = theta

        degenerate_streak = degenerate_streak + 1 if theta == 0.0 else 0
    else:
        raise RuntimeError("transportation simplex failed to terminate")

    plan = np.zeros((n, m))
    plan[basic_i, basic_j] = np.maximum(basic_x, 0.0)
    return plan
