"""Compiled inner loops.

Every routine here is a plain sequential loop; results do not depend on
thread count or scheduling.
"""

import numpy as np
from numba import njit

# Off-band entries of dense tables. Large enough never to win a min that
# matters, small enough that sums of two stay finite.
SENTINEL = 1e30


@njit(cache=True)
def minplus(A, B):
    n = A.shape[0]
    m = B.shape[1]
    C = np.full((n, m), SENTINEL)
    for j in range(n):
        row = C[j]
        for r in range(A.shape[1]):
            a = A[j, r]
            if a >= SENTINEL:
                continue
            Br = B[r]
            for i in range(m):
                v = a + Br[i]
                if v < row[i]:
                    row[i] = v
    return C


@njit(cache=True)
def _wrap(j, n):
    if j < 0:
        return j + n
    if j >= n:
        return j - n
    return j


@njit(cache=True)
def discounted_apply(cost, disc, u, K, out, pol):
    """out(i) = min_k disc(j,k) * (u(j) + cost(j,k)), j = i - k mod N.

    Ties go to the smallest k.  Returns sup |out - u|.
    """
    n = u.shape[0]
    width = 2 * K + 1
    res = 0.0
    for i in range(n):
        best = np.inf
        arg = 0
        for kk in range(width):
            j = _wrap(i - (kk - K), n)
            v = disc[j, kk] * (u[j] + cost[j, kk])
            if v < best:
                best = v
                arg = kk
        out[i] = best
        pol[i] = arg - K
        d = abs(best - u[i])
        if d > res:
            res = d
    return res


@njit(cache=True)
def value_iteration(cost, disc, u0, K, tol, max_iter, trace_every):
    n = u0.shape[0]
    u = u0.copy()
    nxt = np.empty(n)
    pol = np.empty(n, dtype=np.int64)
    ntrace = max_iter // trace_every + 2
    trace = np.empty(ntrace)
    t = 0
    res = np.inf
    it = 0
    while it < max_iter:
        res = discounted_apply(cost, disc, u, K, nxt, pol)
        u, nxt = nxt, u
        it += 1
        if it % trace_every == 0 and t < ntrace:
            trace[t] = res
            t += 1
        if res < tol:
            break
    return u, it, res, trace[:t]
