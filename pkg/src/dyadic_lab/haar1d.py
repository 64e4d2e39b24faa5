"""The one-dimensional Haar system and the disbalanced decomposition.

Orientation: ``h_I = (1_{I-} - 1_{I+}) / sqrt|I|`` where ``I-`` is the left half
(``GridSpec.minus_left``).  Coefficient arrays use heap order, index
``2^l - 1 + k`` for the interval ``[k 2^-l, (k+1) 2^-l)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _basis
from .grid import CellIndex, DyadicError, GridSpec, ResolutionError, StepFunction, cell_zrange
from .weight import Weight


def _require_1d(grid: GridSpec):
    if grid.d != 1:
        raise DyadicError("haar1d works on d=1 grids; use dyadic_lab.wilson for d>1")


def orientation(grid: GridSpec) -> float:
    """Sign relating ``h_I`` to the Wilson function ``(1_right - 1_left)/sqrt|I|``."""
    return -1.0 if grid.minus_left else 1.0


def minus_child(grid: GridSpec) -> int:
    return 0 if grid.minus_left else 1


def heap_index(I: CellIndex) -> int:
    return (1 << I.level) - 1 + I.pos[0]


def interval(index: int) -> CellIndex:
    level = int(np.floor(np.log2(index + 1)))
    return CellIndex(level, (index + 1 - (1 << level),))


def _check_level(grid: GridSpec, I: CellIndex):
    _require_1d(grid)
    if I.level > grid.R - 1:
        raise ResolutionError(f"level {I.level} needs resolution {I.level + 1} > {grid.R}")


def haar(I: CellIndex, grid: GridSpec) -> StepFunction:
    _check_level(grid, I)
    lo, hi = cell_zrange(grid, I)
    mid = (lo + hi) // 2
    v = np.zeros(grid.ncells)
    amp = 1.0 / np.sqrt(I.measure)
    s = orientation(grid)
    v[lo:mid] = -s * amp
    v[mid:hi] = s * amp
    return StepFunction(grid, v)


def avg_fn(I: CellIndex, grid: GridSpec) -> StepFunction:
    _require_1d(grid)
    return StepFunction.indicator(grid, I) / I.measure


def haar_coeff(f: StepFunction, I: CellIndex) -> float:
    """``<f, h_I>``."""
    _check_level(f.grid, I)
    X = f.child_integrals(I.level)[I.pos[0]]
    lo, hi = X[minus_child(f.grid)], X[1 - minus_child(f.grid)]
    return float((lo - hi) / np.sqrt(I.measure))


def haar_coeffs(f, grid: GridSpec | None = None, M: int | None = None) -> np.ndarray:
    """All ``<f, h_I>`` on levels ``0..M-1`` (heap order); ``f`` may be a batch of Z arrays."""
    grid = f.grid if grid is None else grid
    _require_1d(grid)
    return orientation(grid) * _basis.haar_coeffs(f, grid, M)


def averages(f, grid: GridSpec | None = None, M: int | None = None) -> np.ndarray:
    """All ``<f>_I`` on levels ``0..M-1`` (heap order)."""
    grid = f.grid if grid is None else grid
    _require_1d(grid)
    return _basis.set_averages(f, grid, M)


def minus_child_values(values_next_level: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Pick ``x_{I-}`` from a heap array on levels ``1..M`` given as the full ``0..M`` array."""
    n = values_next_level.shape[-1]
    M = int(np.log2(n + 1)) - 1
    idx = np.arange((1 << M) - 1)
    lev = np.floor(np.log2(idx + 1)).astype(int)
    k = idx + 1 - (1 << lev)
    child = (1 << (lev + 1)) - 1 + 2 * k + minus_child(grid)
    return values_next_level[..., child]


@dataclass
class CoefficientMap:
    """Finite Haar expansion: global average plus dense coefficients on levels ``0..M-1``."""

    M: int
    avg: float
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != ((1 << self.M) - 1,):
            raise DyadicError(f"expected {(1 << self.M) - 1} coefficients, got {self.coeffs.shape}")

    def __getitem__(self, I: CellIndex) -> float:
        return float(self.coeffs[heap_index(I)])

    def to_dict(self) -> dict:
        rows = []
        for i, v in enumerate(self.coeffs):
            I = interval(i)
            rows.append([I.level, I.pos[0], float(v)])
        return {"M": self.M, "coeffs": rows, "avg": float(self.avg)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "CoefficientMap":
        M = int(data["M"])
        coeffs = np.full((1 << M) - 1, np.nan)
        for level, pos, value in data["coeffs"]:
            if level >= M:
                raise DyadicError(f"coefficient at level {level} beyond depth {M}")
            coeffs[heap_index(CellIndex(int(level), (int(pos),)))] = value
        if np.isnan(coeffs).any():
            raise DyadicError("missing Haar coefficients")
        return cls(M, float(data["avg"]), coeffs)

    @classmethod
    def from_json(cls, text: str) -> "CoefficientMap":
        return cls.from_dict(json.loads(text))


def analyze(f: StepFunction, M: int | None = None) -> CoefficientMap:
    M = f.grid.M if M is None else M
    return CoefficientMap(M, f.integral(), haar_coeffs(f, M=M))


def reconstruct(cmap: CoefficientMap, grid: GridSpec) -> StepFunction:
    """``avg * 1 + sum_I c_I h_I`` at resolution ``grid.R``."""
    _require_1d(grid)
    z = _basis.synthesize(orientation(grid) * cmap.coeffs, grid, mean=cmap.avg, M=cmap.M)
    return StepFunction.from_z(grid, z)


def weighted_haar(w: Weight, K: CellIndex) -> StepFunction:
    """``h^w_K``: w-orthonormal, w-mean zero, oriented so that ``C_K(w) >= 0`` in
    ``h_K = C_K(w) h^w_K + D_K(w) h^1_K``."""
    grid = w.grid
    _check_level(grid, K)
    X = w.child_integrals(K.level)[K.pos[0]]
    m_minus, m_plus = X[minus_child(grid)], X[1 - minus_child(grid)]
    m = m_minus + m_plus
    lo, hi = cell_zrange(grid, K)
    mid = (lo + hi) // 2
    minus_val = np.sqrt(m_plus / m_minus) / np.sqrt(m)
    plus_val = -np.sqrt(m_minus / m_plus) / np.sqrt(m)
    z = np.zeros(grid.ncells)
    if grid.minus_left:
        z[lo:mid], z[mid:hi] = minus_val, plus_val
    else:
        z[lo:mid], z[mid:hi] = plus_val, minus_val
    return StepFunction.from_z(grid, z)


@dataclass(frozen=True)
class DisbalancedPair:
    C: float
    D: float


def disbalanced(w: Weight, K: CellIndex) -> DisbalancedPair:
    """``C_K(w) = sqrt(<w>_{K+} <w>_{K-} / <w>_K)`` and ``D_K(w) = <w, h_K> / <w>_K``."""
    _check_level(w.grid, K)
    means = w.level_means(K.level + 1)[2 * K.pos[0]:2 * K.pos[0] + 2]
    mK = w.level_means(K.level)[K.pos[0]]
    C = np.sqrt(means[0] * means[1] / mK)
    return DisbalancedPair(float(C), haar_coeff(w, K) / float(mK))


def disbalanced_all(w: Weight, M: int | None = None):
    """Vectors ``(C_K(w), D_K(w))`` over levels ``0..M-1`` (heap order)."""
    _require_1d(w.grid)
    sm = _basis.split_masses(w, w.grid, M)
    return sm.C, orientation(w.grid) * sm.D


def weighted_pairings(w: Weight, F, M: int | None = None) -> np.ndarray:
    """``<F, h^w_K>`` (unweighted pairing) for all K on levels ``0..M-1``.

    With ``F = g w`` this is ``<h^w_K, g>_w``.  ``F`` may be a batch of Z arrays.
    """
    grid = w.grid
    _require_1d(grid)
    sm = _basis.split_masses(w, grid, M)
    F1, F2 = _basis.split_integrals(F, grid, M)
    return orientation(grid) * sm.weighted(F1, F2)
