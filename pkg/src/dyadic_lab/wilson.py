"""Wilson's Haar system on [0,1)^d, the Haar multiplier and d-dimensional paraproducts.

Index layout: a Wilson index ``(I, alpha)`` with ``I`` on level ``l`` has flat
position ``2^(d l) - 1 + zpos(I) * (2^d - 1) + alpha``.  Orientation follows
the weighted formula: ``h^alpha_I = (1_E2 - 1_E1) / sqrt|E|``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _basis
from .grid import (CellIndex, DyadicError, GridSpec, ResolutionError, StepFunction, cell_zrange,
                   check_grid, inner_w)
from .shiftops import TERM_MAP, TermBreakdown, residual
from .weight import Weight


@dataclass(frozen=True)
class WilsonPair:
    cube: CellIndex
    alpha: int
    E1: tuple
    E2: tuple

    @property
    def E(self) -> tuple:
        return self.E1 + self.E2

    @property
    def measure(self) -> float:
        return sum(c.measure for c in self.E)


def build_pairs(I: CellIndex) -> list[WilsonPair]:
    """The ``2^d - 1`` splits of the children of ``I`` (breadth-first binary tree)."""
    kids = I.children()
    t = _basis.pair_table(I.d)
    out = []
    for a in range(t.nalpha):
        E1 = tuple(kids[c] for c in np.flatnonzero(t.mask1[a]))
        E2 = tuple(kids[c] for c in np.flatnonzero(t.mask2[a]))
        out.append(WilsonPair(I, a, E1, E2))
    return out


def flat_index(grid: GridSpec, I: CellIndex, alpha: int) -> int:
    return grid.coeff_offset(I.level) + I.zpos * grid.nalpha + alpha


def index_of(grid: GridSpec, n: int) -> tuple:
    level = 0
    while grid.coeff_offset(level + 1) <= n:
        level += 1
    r = n - grid.coeff_offset(level)
    return CellIndex.from_z(r // grid.nalpha, level, grid.d), r % grid.nalpha


def indices(grid: GridSpec):
    """All ``(I, alpha)`` on levels ``0..M-1`` in flat order."""
    return [index_of(grid, n) for n in range(grid.ncoeffs)]


def _check_cube(grid: GridSpec, I: CellIndex, alpha: int):
    if I.d != grid.d:
        raise DyadicError("cube dimension does not match the grid")
    if I.level > grid.R - 1:
        raise ResolutionError(f"level {I.level} needs resolution {I.level + 1} > {grid.R}")
    if not 0 <= alpha < grid.nalpha:
        raise DyadicError(f"alpha must lie in 0..{grid.nalpha - 1}")


def _set_zmask(grid: GridSpec, cells) -> np.ndarray:
    z = np.zeros(grid.ncells, dtype=bool)
    for c in cells:
        lo, hi = cell_zrange(grid, c)
        z[lo:hi] = True
    return z


def wilson_haar(w, I: CellIndex, alpha: int, grid: GridSpec | None = None) -> StepFunction:
    """``h^{w,alpha}_I``; pass ``w=None`` (with ``grid``) for the unweighted ``h^alpha_I``."""
    grid = w.grid if w is not None else grid
    _check_cube(grid, I, alpha)
    pair = build_pairs(I)[alpha]
    m1 = _set_zmask(grid, pair.E1)
    m2 = _set_zmask(grid, pair.E2)
    if w is None:
        w1 = w2 = pair.measure / 2
    else:
        wz = w.zvalues * grid.cell_measure
        w1, w2 = wz[m1].sum(), wz[m2].sum()
    z = np.zeros(grid.ncells)
    z[m2] = np.sqrt(w1 / w2)
    z[m1] = -np.sqrt(w2 / w1)
    return StepFunction.from_z(grid, z / np.sqrt(w1 + w2))


def set_indicator_avg(I: CellIndex, alpha: int, grid: GridSpec) -> StepFunction:
    """``h^1_{E_alpha,I} = 1_E / |E|``."""
    _check_cube(grid, I, alpha)
    pair = build_pairs(I)[alpha]
    return StepFunction.from_z(grid, _set_zmask(grid, pair.E) / pair.measure)


# -- index-valued arrays --------------------------------------------------------------


class WilsonArray:
    """Dense map from Wilson indices on levels ``0..M-1`` to reals."""

    def __init__(self, d: int, M: int, values):
        self.d, self.M = int(d), int(M)
        vals = np.asarray(values, dtype=float).reshape(-1)
        n = (1 << (self.d * self.M)) - 1
        if vals.size != n:
            raise DyadicError(f"expected {n} entries, got {vals.size}")
        self.values = vals

    def to_dict(self) -> dict:
        grid = GridSpec(self.d, self.M, self.M + 1)
        rows = []
        for n, v in enumerate(self.values):
            I, a = index_of(grid, n)
            rows.append([I.level, *I.pos, a, float(v)])
        return {"d": self.d, "M": self.M, "entries": rows}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict):
        d, M = int(data["d"]), int(data["M"])
        grid = GridSpec(d, M, M + 1)
        vals = np.full(grid.ncoeffs, np.nan)
        for row in data["entries"]:
            level, pos, a, v = int(row[0]), tuple(int(k) for k in row[1:1 + d]), int(row[1 + d]), row[2 + d]
            if level >= M:
                raise DyadicError(f"entry at level {level} beyond depth {M}")
            vals[flat_index(grid, CellIndex(level, pos), a)] = v
        if np.isnan(vals).any():
            raise DyadicError("incomplete index map")
        return cls(d, M, vals)

    @classmethod
    def from_json(cls, text: str):
        return cls.from_dict(json.loads(text))


class WilsonSymbol(WilsonArray):
    pass


class SignPattern(WilsonArray):
    def __init__(self, d: int, M: int, values):
        super().__init__(d, M, values)
        if not np.all(np.abs(self.values) == 1):
            raise DyadicError("sign pattern entries must be +1 or -1")


def random_signs(d: int, M: int, seed) -> SignPattern:
    rng = np.random.default_rng(seed)
    return SignPattern(d, M, rng.choice([-1.0, 1.0], size=(1 << (d * M)) - 1))


def _values(x, grid: GridSpec) -> np.ndarray:
    v = x.values if isinstance(x, WilsonArray) else np.asarray(x, dtype=float)
    if v.shape[-1] != grid.ncoeffs:
        raise DyadicError(f"expected {grid.ncoeffs} entries, got {v.shape[-1]}")
    return v


# -- transforms -------------------------------------------------------------------------


def coeffs(f, grid: GridSpec | None = None, M: int | None = None) -> np.ndarray:
    """``<f, h^alpha_I>`` for every index (flat)."""
    grid = f.grid if grid is None else grid
    return _basis.haar_coeffs(f, grid, M)


def set_averages(f, grid: GridSpec | None = None, M: int | None = None) -> np.ndarray:
    """``<f>_{E_alpha,I}`` for every index (flat)."""
    grid = f.grid if grid is None else grid
    return _basis.set_averages(f, grid, M)


def reconstruct(mean: float, c, grid: GridSpec) -> StepFunction:
    return StepFunction.from_z(grid, _basis.synthesize(_values(c, grid), grid, mean=mean))


def multiplier(sigma, f: StepFunction) -> StepFunction:
    """``T_sigma f = sum sigma_{I,alpha} <f, h^alpha_I> h^alpha_I``."""
    grid = f.grid
    s = _values(sigma, grid)
    return StepFunction.from_z(grid, _basis.synthesize(s * coeffs(f), grid))


PARAPRODUCT_KINDS = ((0, 0), (0, 1), (1, 0))


def paraproduct_d(kind, a, f: StepFunction) -> StepFunction:
    """Wilson paraproducts ``P^(0,0)``, ``P^(0,1)`` and ``P^(1,0)`` with symbol ``a``."""
    kind = tuple(kind)
    grid = f.grid
    av = _values(a, grid)
    if kind == (0, 0):
        z = _basis.synthesize(av * coeffs(f), grid)
    elif kind == (0, 1):
        z = _basis.synthesize(av * set_averages(f), grid)
    elif kind == (1, 0):
        z = _basis.synthesize(av * coeffs(f), grid, table=_basis.indicator_table)
    else:
        raise DyadicError(f"paraproduct kind must be one of {PARAPRODUCT_KINDS}")
    return StepFunction.from_z(grid, z)


def _overlap(A: CellIndex, B: CellIndex) -> float:
    if A.contains(B):
        return B.measure
    if B.contains(A):
        return A.measure
    return 0.0


def avg_against(pair_small: WilsonPair, pair_big: WilsonPair) -> float:
    """``<h^1_{E_small}, h^beta_J>`` from exact cube overlaps."""
    big_e = pair_big.measure
    o2 = sum(_overlap(a, b) for a in pair_small.E for b in pair_big.E2)
    o1 = sum(_overlap(a, b) for a in pair_small.E for b in pair_big.E1)
    return (o2 - o1) / (pair_small.measure * np.sqrt(big_e))


def product_formula_rhs(f: StepFunction, g: StepFunction, J: CellIndex, beta: int) -> float:
    """Right-hand side of the Wilson product formula for ``(fg)^_{J,beta}``."""
    grid = check_grid(f, g)
    if not (f.is_resolution(grid.M, 1e-12) and g.is_resolution(grid.M, 1e-12)):
        raise ResolutionError("product formula needs f, g constant at level M")
    fc, gc = coeffs(f), coeffs(g)
    big = build_pairs(J)[beta]
    total = 0.0
    for n, (I, a) in enumerate(indices(grid)):
        if fc[n] == 0.0 or gc[n] == 0.0 or not J.contains(I):
            continue
        total += fc[n] * gc[n] * avg_against(build_pairs(I)[a], big)
    k = flat_index(grid, J, beta)
    fE, gE = set_averages(f)[k], set_averages(g)[k]
    return float(total + fc[k] * gE + gc[k] * fE)


# -- disbalanced decomposition ----------------------------------------------------------


def disbalanced_d(w: Weight, J: CellIndex, beta: int) -> tuple:
    """``(C_J(w, beta), D_J(w, beta))``."""
    _check_cube(w.grid, J, beta)
    M = J.level + 1
    sm = _basis.split_masses(w, w.grid, M)
    n = flat_index(w.grid, J, beta)
    return float(sm.C[n]), float(sm.D[n])


def disbalanced_all(w: Weight, M: int | None = None):
    sm = _basis.split_masses(w, w.grid, M)
    return sm.C, sm.D


def weighted_pairings(w: Weight, F, M: int | None = None) -> np.ndarray:
    """``<F, h^{w,alpha}_I>`` (unweighted pairing) for every index; ``F = g w`` gives ``<g, h^{w}>_w``."""
    grid = w.grid
    sm = _basis.split_masses(w, grid, M)
    F1, F2 = _basis.split_integrals(F, grid, M)
    return sm.weighted(F1, F2)


def disbalanced_residual(w: Weight, g: StepFunction) -> float:
    """Max relative error of ``<h^b_J, w g> = C <g, h^{w,b}_J>_w + D <w g>_E`` over all indices."""
    check_grid(w, g)
    wg = w * g
    lhs = coeffs(wg)
    C, D = disbalanced_all(w)
    rhs = C * weighted_pairings(w, wg) + D * set_averages(wg)
    scale = max(np.abs(lhs).max(), np.abs(C * weighted_pairings(w, wg)).max(), 1e-300)
    return float(np.abs(lhs - rhs).max() / scale)


# -- the multiplier composition ------------------------------------------------------------


def composed_coeffs(w: Weight, phi: StepFunction) -> np.ndarray:
    """Coefficients of ``P^(1,0)_{hat(w^-1/2)} phi`` against ``h^beta_J`` via the product formula."""
    check_grid(w, phi)
    _require_resolution(phi)
    return coeffs(w.isqrt * phi) - coeffs(w.isqrt) * set_averages(phi) - coeffs(phi) * set_averages(w.isqrt)


def _require_resolution(phi: StepFunction):
    if not phi.is_resolution(phi.grid.M, 1e-12):
        raise ResolutionError("phi must be constant on level-M cells for exact identities")


def phi_parts(w: Weight, phi_z: np.ndarray) -> dict:
    """phi-side coefficient arrays of the six terms and their splits (batch over rows)."""
    grid = w.grid
    isq, sq = w.isqrt.zvalues, w.sqrt.zvalues
    winv = w.inverse_weight
    Ci, Di = disbalanced_all(winv)
    a = coeffs(isq * phi_z, grid)
    phihat = coeffs(phi_z, grid)
    phiE = set_averages(phi_z, grid)
    isqE = set_averages(isq, grid)
    parts = {
        "a": a,
        "b": phihat * isqE,
        "c": coeffs(isq, grid) * phiE,
        "a11": Ci * weighted_pairings(winv, (sq * phi_z) * winv.zvalues),
        "a12": Di * set_averages(isq * phi_z, grid),
        "c21": Ci * weighted_pairings(winv, sq * winv.zvalues) * phiE,
        "c22": Di * isqE * phiE,
    }
    return parts


def g_parts(w: Weight, g_z: np.ndarray) -> dict:
    grid = w.grid
    C, D = disbalanced_all(w)
    wg = g_z * w.zvalues
    return {"G1": C * weighted_pairings(w, wg), "G2": D * set_averages(wg, grid)}


def six_terms_multiplier(w: Weight, sigma, phi: StepFunction, g: StepFunction) -> TermBreakdown:
    grid = check_grid(w, phi, g)
    _require_resolution(phi)
    s = _values(sigma, grid)
    P = phi_parts(w, phi.zvalues)
    G = g_parts(w, g.zvalues)
    vals = {name: float(np.sum(s * P[p] * G[q])) for name, (p, q) in TERM_MAP.items()}
    lhs = inner_w(target_function(w, sigma, phi), g, w)
    return TermBreakdown(lhs=lhs, **vals)


def target_function(w: Weight, sigma, phi: StepFunction) -> StepFunction:
    """``T_sigma P^(1,0)_{hat(w^-1/2)} phi`` by direct operator application."""
    check_grid(w, phi)
    return multiplier(sigma, paraproduct_d((1, 0), coeffs(w.isqrt), phi))


def target_operator(w: Weight, sigma, phi: StepFunction) -> StepFunction:
    """``w^(1/2) T_sigma P^(1,0)_{hat(w^-1/2)} phi``."""
    return w.sqrt * target_function(w, sigma, phi)


def term_factors(w: Weight, sigma, phi_basis_z: np.ndarray, g_basis_z: np.ndarray) -> dict:
    """Per-term ``(Phi, Gamma)`` with ``term(phi, g) = sum_n Phi[i, n] sigma_n Gamma[j, n]``."""
    s = _values(sigma, w.grid)
    P = phi_parts(w, phi_basis_z)
    G = g_parts(w, g_basis_z)
    return {name: (P[p] * s, G[q]) for name, (p, q) in TERM_MAP.items()}


__all__ = [
    "WilsonPair", "build_pairs", "wilson_haar", "set_indicator_avg", "WilsonArray", "WilsonSymbol",
    "SignPattern", "random_signs", "coeffs", "set_averages", "reconstruct", "multiplier",
    "paraproduct_d", "product_formula_rhs", "disbalanced_d", "disbalanced_all", "weighted_pairings",
    "disbalanced_residual", "composed_coeffs", "six_terms_multiplier", "target_function",
    "target_operator", "term_factors", "residual",
]
