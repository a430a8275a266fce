# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled forward sweep over a time-sliced reachability lattice."""
import numpy as np


def sweep(const unsigned char[:, ::1] free, const int[:, ::1] nbr, Py_ssize_t start):
    cdef Py_ssize_t T = free.shape[0]
    cdef Py_ssize_t S = free.shape[1]
    cdef Py_ssize_t K = nbr.shape[1]
    cdef Py_ssize_t k, s, i, j, n, tgt

    reach_arr = np.zeros((T, S), dtype=np.uint8)
    pred_arr = np.full((T, S), -1, dtype=np.int16)
    active_arr = np.empty(S, dtype=np.intp)
    cdef unsigned char[:, ::1] reach = reach_arr
    cdef short[:, ::1] pred = pred_arr
    cdef Py_ssize_t[::1] active = active_arr

    reach[0, start] = 1
    for k in range(T - 1):
        n = 0
        for s in range(S):
            if reach[k, s]:
                active[n] = s
                n += 1
        if n == 0:
            break
        # offsets outermost so the recorded predecessor is the smallest offset index
        for j in range(K):
            for i in range(n):
                tgt = nbr[active[i], j]
                if tgt >= 0 and free[k + 1, tgt] and not reach[k + 1, tgt]:
                    reach[k + 1, tgt] = 1
                    pred[k + 1, tgt] = <short>j
    return reach_arr, pred_arr
