"""Hot loops, compiled with numba when available.

Every kernel has a pure-numpy twin with the same signature.  The numba path
is used unless numba is missing or ``DYADIC_LAB_NUMBA`` is set to a false
value (``0``, ``false``, ``no``, ``off``) before import.
"""
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

_FALSE = {"0", "false", "no", "off"}
USE_NUMBA = numba is not None and os.environ.get("DYADIC_LAB_NUMBA", "1").lower() not in _FALSE


# -- numpy reference implementations ---------------------------------------

def coarsen_numpy(a, group):
    """Sum consecutive blocks of ``group`` entries."""
    return a.reshape(-1, group).sum(axis=1)


def refine_add_numpy(parent, child):
    """``out[i*g + j] = parent[i] + child[i*g + j]`` with ``g = len(child) // len(parent)``."""
    g = child.shape[0] // parent.shape[0]
    return np.repeat(parent, g) + child


def subtree_sums_numpy(flat, branching, depth):
    """Subtree totals of a level-major complete tree stored in ``flat``.

    Level ``l`` occupies ``branching**l`` consecutive slots; the result holds, for
    every node, the sum of its own value and all descendants' values.
    """
    out = np.array(flat, dtype=float)
    offsets = _tree_offsets(branching, depth)
    for lev in range(depth - 2, -1, -1):
        lo, hi = offsets[lev], offsets[lev + 1]
        child = out[hi:offsets[lev + 2]]
        out[lo:hi] += child.reshape(-1, branching).sum(axis=1)
    return out


def power_iteration_numpy(B, v, tol, maxit):
    """Power iteration on a symmetric PSD matrix.

    Returns ``(rayleigh, iterations, residual, history)`` where ``history`` holds
    every Rayleigh quotient, starting with that of ``v``.
    """
    hist = np.empty(maxit + 1)
    v = v / np.sqrt(v @ v)
    w = B @ v
    lam = float(v @ w)
    hist[0] = lam
    res = np.inf
    it = 0
    while it < maxit:
        nw = np.sqrt(w @ w)
        if nw == 0.0:
            res = 0.0
            break
        v = w / nw
        w = B @ v
        new = float(v @ w)
        it += 1
        hist[it] = new
        res = abs(new - lam) / new if new > 0.0 else 0.0
        lam = new
        if res <= tol:
            break
    return lam, it, res, hist[: it + 1]


def _tree_offsets(branching, depth):
    offs = [0]
    for lev in range(depth):
        offs.append(offs[-1] + branching**lev)
    return offs


# -- numba implementations ----------------------------------------------------

if numba is not None:

    @numba.njit(cache=True)
    def coarsen_numba(a, group):
        n = a.shape[0] // group
        out = np.empty(n)
        for i in range(n):
            s = 0.0
            for j in range(group):
                s += a[i * group + j]
            out[i] = s
        return out

    @numba.njit(cache=True)
    def refine_add_numba(parent, child):
        g = child.shape[0] // parent.shape[0]
        out = np.empty(child.shape[0])
        for i in range(parent.shape[0]):
            p = parent[i]
            for j in range(g):
                out[i * g + j] = p + child[i * g + j]
        return out

    @numba.njit(cache=True)
    def subtree_sums_numba(flat, branching, depth):
        out = flat.astype(np.float64).copy()
        offs = np.zeros(depth + 1, dtype=np.int64)
        width = 1
        for lev in range(depth):
            offs[lev + 1] = offs[lev] + width
            width *= branching
        for lev in range(depth - 2, -1, -1):
            lo = offs[lev]
            hi = offs[lev + 1]
            for i in range(hi - lo):
                s = 0.0
                base = hi + i * branching
                for j in range(branching):
                    s += out[base + j]
                out[lo + i] += s
        return out

    @numba.njit(cache=True)
    def power_iteration_numba(B, v, tol, maxit):
        hist = np.empty(maxit + 1)
        v = v / np.sqrt(np.dot(v, v))
        w = np.dot(B, v)
        lam = np.dot(v, w)
        hist[0] = lam
        res = np.inf
        it = 0
        while it < maxit:
            nw = np.sqrt(np.dot(w, w))
            if nw == 0.0:
                res = 0.0
                break
            v = w / nw
            w = np.dot(B, v)
            new = np.dot(v, w)
            it += 1
            hist[it] = new
            if new > 0.0:
                res = abs(new - lam) / new
            else:
                res = 0.0
            lam = new
            if res <= tol:
                break
        return lam, it, res, hist[: it + 1]

else:  # pragma: no cover
    coarsen_numba = refine_add_numba = subtree_sums_numba = power_iteration_numba = None


def coarsen(a, group):
    a = np.ascontiguousarray(a, dtype=float)
    if USE_NUMBA:
        return coarsen_numba(a, group)
    return coarsen_numpy(a, group)


def refine_add(parent, child):
    parent = np.ascontiguousarray(parent, dtype=float)
    child = np.ascontiguousarray(child, dtype=float)
    if USE_NUMBA:
        return refine_add_numba(parent, child)
    return refine_add_numpy(parent, child)


def subtree_sums(flat, branching, depth):
    flat = np.ascontiguousarray(flat, dtype=float)
    if USE_NUMBA:
        return subtree_sums_numba(flat, branching, depth)
    return subtree_sums_numpy(flat, branching, depth)


def power_iteration(B, v, tol, maxit):
    B = np.ascontiguousarray(B, dtype=float)
    v = np.ascontiguousarray(v, dtype=float)
    if USE_NUMBA:
        lam, it, res, hist = power_iteration_numba(B, v, tol, maxit)
        return float(lam), int(it), float(res), hist
    return power_iteration_numpy(B, v, tol, maxit)
