"""One-dimensional paraproducts, the Haar shift and the six-term expansion of the shifted paraproduct.

Everything uses the orientation of :mod:`dyadic_lab.haar1d` (``h_I`` is
positive on ``I-``).  Symbols are heap-ordered arrays, :class:`CoefficientMap`
objects or ``{CellIndex: value}`` dicts covering levels ``0..M-1``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _basis, haar1d
from .grid import CellIndex, DyadicError, GridSpec, ResolutionError, StepFunction, check_grid, inner_w
from .weight import Weight

# term name -> (phi-side part, g-side part)
TERM_MAP = {
    "A1": ("a", "G1"), "B1": ("b", "G1"), "C1": ("c", "G1"),
    "A2": ("a", "G2"), "B2": ("b", "G2"), "C2": ("c", "G2"),
    "A11": ("a11", "G1"), "A12": ("a12", "G1"),
    "A21": ("a11", "G2"), "A22": ("a12", "G2"),
    "C21": ("c21", "G2"), "C22": ("c22", "G2"),
}
TERM_NAMES = tuple(TERM_MAP)
SUB_SPLITS = {"A1": ("A11", "A12"), "A2": ("A21", "A22"), "C2": ("C21", "C22")}


@dataclass(frozen=True)
class TermBreakdown:
    lhs: float
    A1: float
    B1: float
    C1: float
    A2: float
    B2: float
    C2: float
    A11: float
    A12: float
    A21: float
    A22: float
    C21: float
    C22: float

    @property
    def signed_sum(self) -> float:
        return self.A1 - self.B1 - self.C1 + self.A2 - self.B2 - self.C2

    @property
    def residual(self) -> float:
        """Identity error relative to the largest quantity involved."""
        return residual(self.signed_sum, self.lhs, [getattr(self, n) for n in TERM_NAMES[:6]])

    @property
    def split_residual(self) -> float:
        return max(residual(getattr(self, a) + getattr(self, b), getattr(self, parent),
                            [getattr(self, a), getattr(self, b)])
                   for parent, (a, b) in SUB_SPLITS.items())

    def to_dict(self) -> dict:
        out = {n: getattr(self, n) for n in TERM_NAMES}
        out["lhs"] = self.lhs
        out["residual"] = self.residual
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "TermBreakdown":
        return cls(lhs=float(data["lhs"]), **{n: float(data[n]) for n in TERM_NAMES})


def residual(value: float, target: float, terms=()) -> float:
    scale = max([abs(target)] + [abs(t) for t in terms])
    if scale == 0.0:
        return float(abs(value - target))
    return float(abs(value - target) / scale)


# -- symbols and paraproducts -------------------------------------------------------


def symbol_array(b, M: int) -> np.ndarray:
    """Heap-ordered array of a symbol on levels ``0..M-1``."""
    n = (1 << M) - 1
    if isinstance(b, haar1d.CoefficientMap):
        if b.M < M:
            raise DyadicError(f"symbol covers depth {b.M}, need {M}")
        return b.coeffs[:n]
    if isinstance(b, dict):
        out = np.full(n, np.nan)
        for I, v in b.items():
            if I.level < M:
                out[haar1d.heap_index(I)] = v
        if np.isnan(out).any():
            raise DyadicError("symbol is missing entries")
        return out
    arr = np.asarray(b, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape[-1] != n:
        raise DyadicError(f"symbol has {arr.shape[-1]} entries, need {n}")
    return arr


def paraproduct(alpha: int, beta: int, b, f: StepFunction) -> StepFunction:
    """``sum_I b_I <f, h^beta_I> h^alpha_I`` with ``h^0 = h`` and ``h^1 = 1_I/|I|``."""
    grid = f.grid
    haar1d._require_1d(grid)
    if alpha not in (0, 1) or beta not in (0, 1):
        raise DyadicError("paraproduct indices must be 0 or 1")
    s = haar1d.orientation(grid)
    bv = symbol_array(b, grid.M)
    x = bv * (haar1d.haar_coeffs(f) if beta == 0 else haar1d.averages(f))
    if alpha == 0:
        z = _basis.synthesize(s * x, grid)
    else:
        z = _basis.synthesize(x, grid, table=_basis.indicator_table)
    return StepFunction.from_z(grid, z)


def shift_coeffs(c: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Move the heap coefficient of each ``I`` to ``I-`` (depth grows by one)."""
    M = int(np.log2(c.shape[-1] + 1))
    out = np.zeros(c.shape[:-1] + ((1 << (M + 1)) - 1,))
    idx = np.arange(c.shape[-1])
    lev = np.floor(np.log2(idx + 1)).astype(int)
    k = idx + 1 - (1 << lev)
    out[..., (1 << (lev + 1)) - 1 + 2 * k + haar1d.minus_child(grid)] = c
    return out


def haar_shift(f: StepFunction) -> StepFunction:
    """``S f = sum_{level(I) < M} <f, h_I> h_{I-}``."""
    grid = f.grid
    haar1d._require_1d(grid)
    if grid.R < grid.M + 1:
        raise ResolutionError("the shift needs R >= M + 1")
    c = shift_coeffs(haar1d.haar_coeffs(f), grid)
    z = _basis.synthesize(haar1d.orientation(grid) * c, grid, M=grid.M + 1)
    return StepFunction.from_z(grid, z)


# -- the shifted paraproduct ----------------------------------------------------------


def _require_resolution(phi: StepFunction):
    if not phi.is_resolution(phi.grid.M, 1e-12):
        raise ResolutionError("phi must be constant on level-M cells for exact identities")


def composed_coeffs(w: Weight, phi: StepFunction) -> np.ndarray:
    """Coefficient of ``h_{K-}`` in ``S P^(1,0)_{hat(w^-1/2)} phi`` for every ``K`` (heap order)."""
    check_grid(w, phi)
    haar1d._require_1d(w.grid)
    _require_resolution(phi)
    return (haar1d.haar_coeffs(w.isqrt * phi)
            - haar1d.averages(w.isqrt) * haar1d.haar_coeffs(phi)
            - haar1d.averages(phi) * haar1d.haar_coeffs(w.isqrt))


def composed_coeff(w: Weight, phi: StepFunction, K: CellIndex) -> float:
    if K.level >= w.grid.M:
        raise ResolutionError(f"K must lie on levels 0..{w.grid.M - 1}")
    return float(composed_coeffs(w, phi)[haar1d.heap_index(K)])


def target_function(w: Weight, phi: StepFunction) -> StepFunction:
    """``S P^(1,0)_{hat(w^-1/2)} phi`` by direct operator application."""
    check_grid(w, phi)
    return haar_shift(paraproduct(1, 0, haar1d.haar_coeffs(w.isqrt), phi))


def target_operator(w: Weight, phi: StepFunction) -> StepFunction:
    """``w^(1/2) S P^(1,0)_{hat(w^-1/2)} phi``."""
    return w.sqrt * target_function(w, phi)


def phi_parts(w: Weight, phi_z: np.ndarray) -> dict:
    """phi-side factors of every term, indexed by ``K`` (heap order, batch over rows)."""
    grid = w.grid
    isq, sq = w.isqrt.zvalues, w.sqrt.zvalues
    winv = w.inverse_weight
    Ci, Di = haar1d.disbalanced_all(winv)
    phihat = haar1d.haar_coeffs(phi_z, grid)
    phiK = haar1d.averages(phi_z, grid)
    isqK = haar1d.averages(isq, grid)
    return {
        "a": haar1d.haar_coeffs(isq * phi_z, grid),
        "b": phihat * isqK,
        "c": haar1d.haar_coeffs(isq, grid) * phiK,
        "a11": Ci * haar1d.weighted_pairings(winv, (sq * phi_z) * winv.zvalues),
        "a12": Di * haar1d.averages(isq * phi_z, grid),
        "c21": Ci * haar1d.weighted_pairings(winv, sq * winv.zvalues) * phiK,
        "c22": Di * isqK * phiK,
    }


def g_parts(w: Weight, g_z: np.ndarray) -> dict:
    """g-side factors ``C_{K-}<h^w_{K-}, g>_w`` and ``D_{K-}<g w>_{K-}``."""
    grid = w.grid
    M1 = grid.M + 1
    C, D = haar1d.disbalanced_all(w, M1)
    wg = g_z * w.zvalues
    G1 = C * haar1d.weighted_pairings(w, wg, M1)
    G2 = D * haar1d.averages(wg, grid, M1)
    return {"G1": haar1d.minus_child_values(G1, grid), "G2": haar1d.minus_child_values(G2, grid)}


def six_terms(w: Weight, phi: StepFunction, g: StepFunction) -> TermBreakdown:
    grid = check_grid(w, phi, g)
    haar1d._require_1d(grid)
    _require_resolution(phi)
    P = phi_parts(w, phi.zvalues)
    G = g_parts(w, g.zvalues)
    vals = {name: float(np.sum(P[p] * G[q])) for name, (p, q) in TERM_MAP.items()}
    lhs = inner_w(target_function(w, phi), g, w)
    return TermBreakdown(lhs=lhs, **vals)


def term_factors(w: Weight, phi_basis_z: np.ndarray, g_basis_z: np.ndarray) -> dict:
    """Per-term ``(Phi, Gamma)`` with ``term(phi_i, g_j) = sum_K Phi[i, K] Gamma[j, K]``."""
    P = phi_parts(w, phi_basis_z)
    G = g_parts(w, g_basis_z)
    return {name: (P[p], G[q]) for name, (p, q) in TERM_MAP.items()}


__all__ = [
    "TERM_MAP", "TERM_NAMES", "SUB_SPLITS", "TermBreakdown", "residual", "symbol_array", "paraproduct",
    "haar_shift", "shift_coeffs", "composed_coeff", "composed_coeffs", "target_function",
    "target_operator", "six_terms", "term_factors",
]
