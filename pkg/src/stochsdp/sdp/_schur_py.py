"""Reference (numpy) implementation of the Schur-complement kernel."""

import numpy as np


def schur_accumulate(M, W, mats, offsets, rows):
    """Add ``tr(A_i W_b A_j W_b)`` into ``M[rows_i, rows_j]`` for every block ``b``.

    ``mats[offsets[b]:offsets[b+1]]`` are the constraint matrices touching
    block ``b`` and ``rows`` gives their row indices (unique within a block).
    """
    for b in range(len(offsets) - 1):
        lo, hi = int(offsets[b]), int(offsets[b + 1])
        if lo == hi:
            continue
        A = mats[lo:hi]
        B = W[b] @ A @ W[b]
        r = hi - lo
        sub = A.reshape(r, -1) @ B.reshape(r, -1).T
        idx = rows[lo:hi]
        M[np.ix_(idx, idx)] += 0.5 * (sub + sub.T)
