# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled backend for the assignment kernel.

Same shortest-augmenting-path algorithm as ``pure.py``, written with typed C
loops.  Comparison order and arithmetic match the pure backend exactly so the
two produce identical assignments.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "compiled"


def solve_assignment(cost):
    """Return ``col4row`` minimizing ``sum(cost[i, col4row[i]])``."""
    cost_arr = np.ascontiguousarray(cost, dtype=np.float64)
    if cost_arr.ndim != 2 or cost_arr.shape[0] != cost_arr.shape[1]:
        raise ValueError("assignment requires a square cost matrix")

    cdef double[:, ::1] c = cost_arr
    cdef Py_ssize_t n = c.shape[0]

    u_arr = np.zeros(n)
    v_arr = np.zeros(n)
    col4row_arr = np.full(n, -1, dtype=np.int64)
    row4col_arr = np.full(n, -1, dtype=np.int64)
    shortest_arr = np.empty(n)
    path_arr = np.empty(n, dtype=np.int64)
    done_arr = np.empty(n, dtype=np.int8)
    scanned_arr = np.empty(n, dtype=np.int64)

    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef cnp.int64_t[::1] col4row = col4row_arr
    cdef cnp.int64_t[::1] row4col = row4col_arr
    cdef double[::1] shortest = shortest_arr
    cdef cnp.int64_t[::1] path = path_arr
    cdef cnp.npy_int8[::1] done = done_arr
    cdef cnp.int64_t[::1] scanned = scanned_arr

    cdef Py_ssize_t cur_row, i, j, k, sink, n_scanned, s
    cdef double min_val, red, best
    cdef double inf = np.inf

    for cur_row in range(n):
        for j in range(n):
            shortest[j] = inf
            path[j] = -1
            done[j] = 0
        n_scanned = 0
        min_val = 0.0
        i = cur_row
        sink = -1
        while sink == -1:
            scanned[n_scanned] = i
            n_scanned += 1
            for j in range(n):
                if done[j]:
                    continue
                red = min_val + c[i, j] - u[i] - v[j]
                if red < shortest[j]:
                    shortest[j] = red
                    path[j] = i
            k = -1
            best = inf
            for j in range(n):
                if not done[j] and shortest[j] < best:
                    best = shortest[j]
                    k = j
            if k < 0:
                raise RuntimeError("assignment problem is infeasible")
            min_val = best
            done[k] = 1
            if row4col[k] == -1:
                sink = k
            else:
                i = row4col[k]

        u[cur_row] += min_val
        for s in range(n_scanned):
            i = scanned[s]
            if i != cur_row:
                u[i] += min_val - shortest[col4row[i]]
        for j in range(n):
            if done[j]:
                v[j] -= min_val - shortest[j]

        j = sink
        while True:
            i = path[j]
            row4col[j] = i
            k = col4row[i]
            col4row[i] = j
            j = k
            if i == cur_row:
                break

    return col4row_arr
