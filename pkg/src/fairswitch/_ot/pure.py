"""Pure-Python reference backend for the assignment kernel.

Shortest-augmenting-path algorithm (Jonker-Volgenant style) for the square
linear assignment problem.  The inner column scan is vectorized with numpy;
the compiled backend in ``_core.pyx`` runs the identical algorithm with plain
C loops, so both backends produce bit-identical assignments, including on
cost ties (first minimum in column order wins in both).
"""

import numpy as np

BACKEND = "pure"


def solve_assignment(cost):
    """Return ``col4row`` minimizing ``sum(cost[i, col4row[i]])``.

    cost must be a square, finite float64 matrix.  Runs in O(n^3).
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n = cost.shape[0]
    if cost.shape[1] != n:
        raise ValueError("assignment requires a square cost matrix")

    u = np.zeros(n)
    v = np.zeros(n)
    col4row = np.full(n, -1, dtype=np.int64)
    row4col = np.full(n, -1, dtype=np.int64)

    for cur_row in range(n):
        shortest = np.full(n, np.inf)
        path = np.full(n, -1, dtype=np.int64)
        done_cols = np.zeros(n, dtype=bool)
        scanned_rows = []
        min_val = 0.0
        i = cur_row
        sink = -1
        while sink == -1:
            scanned_rows.append(i)
            remaining = np.flatnonzero(~done_cols)
            reduced = min_val + cost[i, remaining] - u[i] - v[remaining]
            better = reduced < shortest[remaining]
            shortest[remaining[better]] = reduced[better]
            path[remaining[better]] = i

            k = remaining[np.argmin(shortest[remaining])]
            min_val = shortest[k]
            if not np.isfinite(min_val):
                raise RuntimeError("assignment problem is infeasible")
            done_cols[k] = True
            if row4col[k] == -1:
                sink = k
            else:
                i = row4col[k]

        u[cur_row] += min_val
        for r in scanned_rows:
            if r != cur_row:
                u[r] += min_val - shortest[col4row[r]]
        sc = np.flatnonzero(done_cols)
        v[sc] -= min_val - shortest[sc]

        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            col4row[i], j = j, col4row[i]
            if i == cur_row:
                break

    return col4row
