"""Level-by-level machinery shared by the Haar (d=1) and Wilson (d>=1) systems.

Children of a cube are numbered ``c = 0..2^d-1`` in lexicographic bit order.
The Wilson splits of a cube are the internal nodes of the binary tree that
splits the children by coordinate 1, then 2, ...; node ``alpha = 2^j - 1 + p``
(breadth first) owns the contiguous children block ``[p s, (p+1) s)`` with
``s = 2^(d-j)``, ``E1`` is its first half and ``E2`` its second half.

All array routines accept leading batch dimensions.  Coefficients are flat
arrays with index ``2^(d l) - 1 + zpos * (2^d - 1) + alpha``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .grid import GridSpec, ResolutionError, StepFunction


@dataclass(frozen=True)
class PairTable:
    d: int
    mask1: np.ndarray  # (nalpha, 2^d) 0/1
    mask2: np.ndarray
    depth: np.ndarray  # (nalpha,) tree depth j of each node
    nest: np.ndarray  # (nalpha, nalpha): nest[a, b] = 1 iff E_b is a subset of E_a

    @property
    def nalpha(self) -> int:
        return self.mask1.shape[0]

    @property
    def maskE(self) -> np.ndarray:
        return self.mask1 + self.mask2

    @property
    def sign(self) -> np.ndarray:
        return self.mask2 - self.mask1

    @property
    def efrac(self) -> np.ndarray:
        """|E_alpha| / |I|."""
        return 2.0 ** (-self.depth.astype(float))


@lru_cache(maxsize=None)
def pair_table(d: int) -> PairTable:
    nch, nal = 1 << d, (1 << d) - 1
    m1 = np.zeros((nal, nch))
    m2 = np.zeros((nal, nch))
    depth = np.zeros(nal, dtype=int)
    for j in range(d):
        size = 1 << (d - j)
        for p in range(1 << j):
            a = (1 << j) - 1 + p
            m1[a, p * size:p * size + size // 2] = 1
            m2[a, p * size + size // 2:(p + 1) * size] = 1
            depth[a] = j
    mE = m1 + m2
    nest = ((mE[None, :, :] <= mE[:, None, :]).all(axis=2)).astype(float)
    for arr in (m1, m2, depth, nest):
        arr.flags.writeable = False
    return PairTable(d, m1, m2, depth, nest)


# -- integrals --------------------------------------------------------------------


def child_integrals(src, grid: GridSpec, level: int) -> np.ndarray:
    """Integrals over children of level-``level`` cubes: shape (..., cubes, 2^d).

    ``src`` is a StepFunction or an array of Z-ordered cell values.
    """
    if level + 1 > grid.R:
        raise ResolutionError(f"level {level} needs resolution {level + 1} > {grid.R}")
    if isinstance(src, StepFunction):
        return src.child_integrals(level)
    nlev = 1 << (grid.d * (level + 1))
    sums = src.reshape(src.shape[:-1] + (nlev, -1)).sum(axis=-1)
    return (sums * grid.cell_measure).reshape(src.shape[:-1] + (nlev >> grid.d, grid.nchildren))


def set_integrals(src, grid: GridSpec, level: int):
    """``(int_E1, int_E2)`` for every cube and split, each of shape (..., cubes, nalpha)."""
    X = child_integrals(src, grid, level)
    t = pair_table(grid.d)
    return X @ t.mask1.T, X @ t.mask2.T


def set_measure(grid: GridSpec, level: int) -> np.ndarray:
    """|E_alpha| for cubes of ``level``, shape (nalpha,)."""
    return pair_table(grid.d).efrac * 2.0 ** (-grid.d * level)


def flatten(per_level: list) -> np.ndarray:
    """Concatenate per-level (..., cubes, nalpha) arrays into flat coefficient arrays."""
    parts = [a.reshape(a.shape[:-2] + (-1,)) for a in per_level]
    if not parts:
        return np.zeros(0)
    return np.concatenate(parts, axis=-1)


def unflatten(flat: np.ndarray, grid: GridSpec, level: int) -> np.ndarray:
    lo, hi = grid.coeff_offset(level), grid.coeff_offset(level + 1)
    return flat[..., lo:hi].reshape(flat.shape[:-1] + (-1, grid.nalpha))


# -- coefficients ------------------------------------------------------------------


def haar_coeffs(src, grid: GridSpec, M: int | None = None) -> np.ndarray:
    """Unweighted Wilson coefficients <f, h^alpha_I> on levels 0..M-1."""
    M = grid.M if M is None else M
    out = []
    for level in range(M):
        F1, F2 = set_integrals(src, grid, level)
        out.append((F2 - F1) / np.sqrt(set_measure(grid, level)))
    return flatten(out)


def set_averages(src, grid: GridSpec, M: int | None = None) -> np.ndarray:
    """Averages <f>_{E_alpha,I} on levels 0..M-1."""
    M = grid.M if M is None else M
    out = []
    for level in range(M):
        F1, F2 = set_integrals(src, grid, level)
        out.append((F1 + F2) / set_measure(grid, level))
    return flatten(out)


def cube_averages(src, grid: GridSpec, M: int | None = None) -> np.ndarray:
    """<f>_I for every cube on levels 0..M-1, repeated over alpha (flat coefficient layout)."""
    M = grid.M if M is None else M
    out = []
    for level in range(M):
        X = child_integrals(src, grid, level)
        avg = X.sum(axis=-1) / 2.0 ** (-grid.d * level)
        out.append(np.repeat(avg[..., None], grid.nalpha, axis=-1))
    return flatten(out)


@dataclass(frozen=True)
class SplitMasses:
    """w(E1), w(E2) per Wilson index (flat layout) for a fixed weight."""

    W1: np.ndarray
    W2: np.ndarray
    absE: np.ndarray

    @property
    def C(self) -> np.ndarray:
        """sqrt(<w>_E1 <w>_E2 / <w>_E)."""
        half = self.absE / 2
        return np.sqrt((self.W1 / half) * (self.W2 / half) / ((self.W1 + self.W2) / self.absE))

    @property
    def D(self) -> np.ndarray:
        """<w, h^alpha> / <w>_E (Wilson orientation)."""
        return (self.W2 - self.W1) / np.sqrt(self.absE) / ((self.W1 + self.W2) / self.absE)

    def weighted(self, F1: np.ndarray, F2: np.ndarray) -> np.ndarray:
        """<F, h^{w,alpha}> given int_E1 F and int_E2 F (Wilson orientation)."""
        W1, W2 = self.W1, self.W2
        return (np.sqrt(W1 / W2) * F2 - np.sqrt(W2 / W1) * F1) / np.sqrt(W1 + W2)


def split_masses(w: StepFunction, grid: GridSpec, M: int | None = None) -> SplitMasses:
    M = grid.M if M is None else M
    W1, W2, E = [], [], []
    for level in range(M):
        a, b = set_integrals(w, grid, level)
        W1.append(a)
        W2.append(b)
        E.append(np.broadcast_to(set_measure(grid, level), a.shape))
    return SplitMasses(flatten(W1), flatten(W2), flatten(E))


def split_integrals(src, grid: GridSpec, M: int | None = None):
    M = grid.M if M is None else M
    F1, F2 = [], []
    for level in range(M):
        a, b = set_integrals(src, grid, level)
        F1.append(a)
        F2.append(b)
    return flatten(F1), flatten(F2)


# -- synthesis ---------------------------------------------------------------------


def haar_table(grid: GridSpec, level: int) -> np.ndarray:
    t = pair_table(grid.d)
    return t.sign / np.sqrt(set_measure(grid, level))[:, None]


def indicator_table(grid: GridSpec, level: int) -> np.ndarray:
    t = pair_table(grid.d)
    return t.maskE / set_measure(grid, level)[:, None]


def synthesize(coeffs: np.ndarray, grid: GridSpec, table=haar_table, mean=0.0,
               M: int | None = None) -> np.ndarray:
    """Z-ordered level-R values of ``mean + sum_{I,alpha} c_{I,alpha} phi_{I,alpha}``.

    ``table(grid, level)`` gives the (nalpha, 2^d) child values of the basis
    functions of a level-``level`` cube.
    """
    M = grid.M if M is None else M
    if M > grid.R:
        raise ResolutionError(f"depth {M} exceeds resolution {grid.R}")
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[-1] != (1 << (grid.d * M)) - 1:
        raise ValueError(f"expected {(1 << (grid.d * M)) - 1} coefficients, got {coeffs.shape[-1]}")
    batch = coeffs.shape[:-1]
    vals = np.broadcast_to(np.asarray(mean, dtype=float), batch + (1,)).astype(float)
    for level in range(M):
        c = unflatten(coeffs, grid, level)
        contrib = (c @ table(grid, level)).reshape(batch + (-1,))
        if not batch:
            vals = _kernels.refine_add(vals, contrib)
        else:
            vals = np.repeat(vals, grid.nchildren, axis=-1) + contrib
    return np.repeat(vals, 1 << (grid.d * (grid.R - M)), axis=-1)
