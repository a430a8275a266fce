"""Numpy implementation of the lattice sweep, used when the extension is absent."""
import numpy as np


def sweep(free, nbr, start):
    T, S = free.shape
    K = nbr.shape[1]
    reach = np.zeros((T, S), dtype=np.uint8)
    pred = np.full((T, S), -1, dtype=np.int16)
    reach[0, start] = 1
    for k in range(T - 1):
        active = np.flatnonzero(reach[k])
        if active.size == 0:
            break
        nxt_free = free[k + 1]
        nxt = reach[k + 1]
        for j in range(K):
            tgt = nbr[active, j]
            tgt = tgt[tgt >= 0]
            tgt = tgt[(nxt_free[tgt] != 0) & (nxt[tgt] == 0)]
            nxt[tgt] = 1
            pred[k + 1, tgt] = j
    return reach, pred
