"""Carleson-type testing constants, Petermichl sums, square functions and norm estimation.

Sequences indexed by cubes use the level-major Z layout of
``GridSpec.cube_offset``; in d=1 that is heap order.  Wilson-indexed sequences
use the flat coefficient layout.  Suprema run over levels ``0..M-1``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _basis, _kernels, haar1d, wilson
from .grid import CellIndex, DyadicError, GridSpec, StepFunction, check_grid
from .weight import Weight, a2_characteristic


# -- reports ------------------------------------------------------------------------


@dataclass
class CarlesonReport:
    """Supremum of a normalized subtree sum.

    ``bound`` is the value ``sup`` must not exceed; it is ``None`` when no
    budget applies.  ``argmax`` is a cell (cube-indexed) or ``(cell, alpha)``.
    """

    name: str
    sup: float
    argmax: object
    per_root: np.ndarray = field(repr=False)
    budget: float | None = None
    bound: float | None = None

    @property
    def passed(self) -> bool:
        return self.bound is None or self.sup <= self.bound

    def with_bound(self, budget: float, bound: float) -> "CarlesonReport":
        return CarlesonReport(self.name, self.sup, self.argmax, self.per_root, budget, bound)

    def to_dict(self) -> dict:
        arg = self.argmax
        if isinstance(arg, tuple):
            arg = [arg[0].level, list(arg[0].pos), arg[1]]
        elif isinstance(arg, CellIndex):
            arg = [arg.level, list(arg.pos)]
        return {"name": self.name, "sup": self.sup, "argmax": arg, "budget": self.budget,
                "bound": self.bound, "pass": self.passed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _nonneg(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DyadicError("testing sequences must be nonnegative")
    return x


def _cube_report(name: str, grid: GridSpec, totals: np.ndarray, norms: np.ndarray) -> CarlesonReport:
    ratio = np.divide(totals, norms, out=np.zeros_like(totals), where=norms > 0)
    k = int(np.argmax(ratio))
    level = 0
    while grid.cube_offset(level + 1) <= k:
        level += 1
    cell = CellIndex.from_z(k - grid.cube_offset(level), level, grid.d)
    return CarlesonReport(name, float(ratio[k]), cell, ratio)


def _cube_measures(grid: GridSpec, M: int) -> np.ndarray:
    return np.concatenate([np.full(1 << (grid.d * lev), 2.0 ** (-grid.d * lev)) for lev in range(M)])


def _cube_integrals(f: StepFunction, M: int) -> np.ndarray:
    return np.concatenate([f.level_integrals(lev) for lev in range(M)])


def _cube_means(f: StepFunction, M: int) -> np.ndarray:
    return np.concatenate([f.level_means(lev) for lev in range(M)])


def _grid_depth(grid: GridSpec, seq: np.ndarray) -> int:
    n = seq.shape[-1]
    M = 0
    while grid.cube_offset(M) < n:
        M += 1
    if grid.cube_offset(M) != n:
        raise DyadicError(f"a cube-indexed sequence cannot have {n} entries in d={grid.d}")
    return M


def subtree_totals(seq: np.ndarray, grid: GridSpec) -> np.ndarray:
    """``sum_{I subset J} seq_I`` for every cube ``J``."""
    return _kernels.subtree_sums(seq, grid.nchildren, _grid_depth(grid, seq))


def carleson_norm(lam, grid: GridSpec) -> CarlesonReport:
    """``sup_J |J|^-1 sum_{I subset J} lam_I``."""
    lam = _nonneg(lam)
    M = _grid_depth(grid, lam)
    return _cube_report("carleson", grid, subtree_totals(lam, grid), _cube_measures(grid, M))


def weighted_carleson_constant(w: Weight, alpha) -> CarlesonReport:
    """``sup_J w(J)^-1 sum_{I subset J} <w>_I^2 alpha_I``."""
    alpha = _nonneg(alpha)
    grid = w.grid
    M = _grid_depth(grid, alpha)
    seq = _cube_means(w, M) ** 2 * alpha
    return _cube_report("weighted_carleson", grid, subtree_totals(seq, grid), _cube_integrals(w, M))


def bilinear_test(w: Weight, nu: Weight, alpha) -> tuple:
    """The three testing suprema of the bilinear embedding: against ``nu``, ``w`` and Lebesgue."""
    grid = check_grid(w, nu)
    alpha = _nonneg(alpha)
    M = _grid_depth(grid, alpha)
    out = []
    for name, v in (("nu", nu), ("w", w)):
        seq = alpha * _cube_means(v, M)
        out.append(_cube_report(f"bilinear_{name}", grid, subtree_totals(seq, grid), _cube_integrals(v, M)))
    out.append(_cube_report("bilinear_lebesgue", grid, subtree_totals(alpha, grid), _cube_measures(grid, M)))
    return tuple(out)


def bilinear_sum(w: Weight, nu: Weight, alpha, f: StepFunction, g: StepFunction) -> float:
    """``sum_I alpha_I <f>^w_I <g>^nu_I`` with ``<f>^w_I = <f w>_I / <w>_I``."""
    alpha = _nonneg(alpha)
    M = _grid_depth(w.grid, alpha)
    fw = _cube_means(f * w, M) / _cube_means(w, M)
    gn = _cube_means(g * nu, M) / _cube_means(nu, M)
    return float(np.sum(alpha * fw * gn))


# -- Wilson-indexed sums ---------------------------------------------------------------


def wilson_subtree_totals(t: np.ndarray, grid: GridSpec, M: int | None = None) -> np.ndarray:
    """``sum_{J subset I} sum_{beta: E_{beta,J} subset E_{alpha,I}} t_{J,beta}`` for every ``(I, alpha)``."""
    M = grid.M if M is None else M
    table = _basis.pair_table(grid.d)
    g = grid.with_depth(M) if M != grid.M else grid
    per_level = [_basis.unflatten(t, g, lev) for lev in range(M)]
    cube_tot = np.concatenate([p.sum(axis=-1) for p in per_level])
    full = _kernels.subtree_sums(cube_tot, grid.nchildren, M)
    out = []
    for lev in range(M):
        own = per_level[lev] @ table.nest.T
        if lev + 1 < M:
            lo, hi = grid.cube_offset(lev + 1), grid.cube_offset(lev + 2)
            kids = full[lo:hi].reshape(-1, grid.nchildren)
            own = own + kids @ table.maskE.T
        out.append(own)
    return _basis.flatten(out)


def _wilson_report(name: str, grid: GridSpec, totals: np.ndarray, norms: np.ndarray) -> CarlesonReport:
    ratio = np.divide(totals, norms, out=np.zeros_like(totals), where=norms > 0)
    k = int(np.argmax(ratio))
    return CarlesonReport(name, float(ratio[k]), wilson.index_of(grid, k), ratio)


def _set_masses(w: StepFunction, grid: GridSpec, M: int):
    sm = _basis.split_masses(w, grid, M)
    return sm.W1 + sm.W2, sm.absE


def wilson_carleson_constant(w: Weight, a, M: int | None = None) -> CarlesonReport:
    """``sup_{I,alpha} w(E_{alpha,I})^-1 sum a_{J,beta} <w>_{E_{beta,J}}^2`` over nested indices."""
    grid = w.grid
    M = grid.M if M is None else M
    a = _nonneg(a)
    wE, absE = _set_masses(w, grid, M)
    tot = wilson_subtree_totals(a * (wE / absE) ** 2, grid, M)
    return _wilson_report("wilson_carleson", grid, tot, wE)


def wilson_bilinear_test(w: Weight, nu: Weight, a, M: int | None = None) -> tuple:
    grid = check_grid(w, nu)
    M = grid.M if M is None else M
    a = _nonneg(a)
    out = []
    for name, v in (("nu", nu), ("w", w)):
        vE, absE = _set_masses(v, grid, M)
        out.append(_wilson_report(f"bilinear_{name}", grid, wilson_subtree_totals(a * vE / absE, grid, M), vE))
    _, absE = _set_masses(w, grid, M)
    out.append(_wilson_report("bilinear_lebesgue", grid, wilson_subtree_totals(a, grid, M), absE))
    return tuple(out)


# -- Petermichl-type sums ------------------------------------------------------------------


def _a2(w: Weight) -> float:
    return a2_characteristic(w)[0]


def petermichl_sums(w: Weight, budget: float = 16.0) -> tuple:
    """The three shifted sums of ``|hat(w^-1)_I hat(w)_{I-}|`` (d=1), each bounded by ``budget [w]``."""
    grid = w.grid
    haar1d._require_1d(grid)
    M = grid.M
    inv = w.inverse_weight
    t = np.abs(haar1d.haar_coeffs(inv) * haar1d.minus_child_values(haar1d.haar_coeffs(w, M=M + 1), grid))
    wK, iK = _cube_means(w, M), _cube_means(inv, M)
    reps = (
        _cube_report("petermichl_w", grid, subtree_totals(t / wK, grid), _cube_integrals(inv, M)),
        _cube_report("petermichl_winv", grid, subtree_totals(t / iK, grid), _cube_integrals(w, M)),
        _cube_report("petermichl_plain", grid, subtree_totals(t, grid), _cube_measures(grid, M)),
    )
    bound = budget * _a2(w)
    return tuple(r.with_bound(budget, bound) for r in reps)


def wilson_sums(w: Weight, budget: float | None = None) -> tuple:
    """The three nested sums of ``|hat(w)_{J,b} hat(w^-1)_{J,b}|``; default budget ``16 2^d [w]``."""
    grid = w.grid
    budget = 16.0 * 2**grid.d if budget is None else budget
    inv = w.inverse_weight
    t = np.abs(_basis.haar_coeffs(w, grid) * _basis.haar_coeffs(inv, grid))
    wE, absE = _set_masses(w, grid, grid.M)
    iE, _ = _set_masses(inv, grid, grid.M)
    bound = budget * _a2(w)
    reps = (
        _wilson_report("wilson_plain", grid, wilson_subtree_totals(t, grid), absE),
        _wilson_report("wilson_winv", grid, wilson_subtree_totals(t / (iE / absE), grid), wE),
        _wilson_report("wilson_w", grid, wilson_subtree_totals(t / (wE / absE), grid), iE),
    )
    return tuple(r.with_bound(budget, bound) for r in reps)


def carleson_suite(w: Weight, budget: float = 8.0) -> tuple:
    """Testing suprema behind the term estimates; each passes iff ``sqrt(sup) <= budget [w]^(p/2)``.

    d=1 uses the shifted forms, d>=2 the Wilson-indexed ones.
    """
    a2 = _a2(w)
    items = _suite_d1(w) if w.grid.d == 1 else _suite_wilson(w)
    return tuple(rep.with_bound(budget, (budget * a2 ** (p / 2)) ** 2) for rep, p in items)


def _suite_d1(w: Weight):
    grid = w.grid
    M = grid.M
    inv = w.inverse_weight
    wK, iK = _cube_means(w, M), _cube_means(inv, M)
    isq_hat = haar1d.haar_coeffs(w.isqrt)
    inv_hat = haar1d.haar_coeffs(inv)
    w_minus = haar1d.minus_child_values(haar1d.haar_coeffs(w, M=M + 1), grid)
    isqK = _cube_means(w.isqrt, M)
    bessel = haar1d.weighted_pairings(inv, w.sqrt.zvalues * inv.zvalues) ** 2
    meas, wJ, iJ = _cube_measures(grid, M), _cube_integrals(w, M), _cube_integrals(inv, M)
    return [
        (_cube_report("square_consequence", grid, subtree_totals(isq_hat**2 * wK, grid), meas), 2),
        (_cube_report("dual_square", grid, subtree_totals(inv_hat**2 * wK, grid), iJ), 2),
        (_cube_report("modified_square", grid, subtree_totals(iK * w_minus**2, grid), wJ), 2),
        (_cube_report("shifted_square", grid, subtree_totals(isqK**2 * w_minus**2, grid), wJ), 2),
        (_cube_report("bessel", grid, subtree_totals(bessel, grid), meas), 0),
    ]


def _suite_wilson(w: Weight):
    grid = w.grid
    inv = w.inverse_weight
    wE, absE = _set_masses(w, grid, grid.M)
    iE, _ = _set_masses(inv, grid, grid.M)
    wcube = _basis.cube_averages(w, grid)
    isq_hat = _basis.haar_coeffs(w.isqrt, grid)
    inv_hat = _basis.haar_coeffs(inv, grid)
    w_hat = _basis.haar_coeffs(w, grid)
    bessel = wilson.weighted_pairings(inv, w.sqrt.zvalues * inv.zvalues) ** 2
    tot = lambda t: wilson_subtree_totals(t, grid)  # noqa: E731
    return [
        (_wilson_report("square_consequence", grid, tot(isq_hat**2 * wcube), absE), 2),
        (_wilson_report("dual_square", grid, tot(inv_hat**2 * wE / absE), iE), 2),
        (_wilson_report("modified_square", grid, tot(iE / absE * w_hat**2), wE), 2),
        (_wilson_report("bessel", grid, tot(bessel), absE), 0),
    ]


# -- square functions ---------------------------------------------------------------------


def _sq_coeffs(f: StepFunction) -> np.ndarray:
    return _basis.haar_coeffs(f, f.grid) ** 2


def _spread(per_level: list, grid: GridSpec) -> np.ndarray:
    """Z-ordered level-R values of the sum of per-level cube values extended as step functions."""
    z = per_level[0]
    for block in per_level[1:]:
        z = np.repeat(z, grid.nchildren) + block
    return np.repeat(z, 1 << (grid.d * (grid.R - len(per_level) + 1)))


def square_function(f: StepFunction) -> StepFunction:
    """``Sf = (sum |hat f_{I,alpha}|^2 1_I / |I|)^(1/2)`` over levels ``0..M-1``."""
    grid = f.grid
    c = _sq_coeffs(f)
    per_level = [_basis.unflatten(c, grid, lev).sum(axis=-1) * 2.0 ** (grid.d * lev) for lev in range(grid.M)]
    return StepFunction.from_z(grid, np.sqrt(_spread(per_level, grid)))


def modified_square_function(f: StepFunction) -> StepFunction:
    """``S_pi f`` (d=1): each ``|hat f_I|^2 / |I|`` is spread over the parent of ``I``; the root over itself."""
    grid = f.grid
    haar1d._require_1d(grid)
    c = haar1d.haar_coeffs(f) ** 2
    dens = [c[(1 << lev) - 1:(1 << (lev + 1)) - 1] * 2.0**lev for lev in range(grid.M)]
    per_level = [dens[lev + 1].reshape(-1, 2).sum(axis=1) for lev in range(grid.M - 1)] or [np.zeros(1)]
    per_level[0] = per_level[0] + dens[0]
    return StepFunction.from_z(grid, np.sqrt(_spread(per_level, grid)))


def weighted_sq_norm(f: StepFunction, sigma: StepFunction, method: str = "coefficients") -> float:
    """``||Sf||^2_sigma`` from ``sum |hat f|^2 <sigma>_I`` or by integrating ``(Sf)^2 sigma``."""
    grid = check_grid(f, sigma)
    if method == "coefficients":
        return float(np.sum(_sq_coeffs(f) * _basis.cube_averages(sigma, grid)))
    if method == "direct":
        s = square_function(f)
        return float(np.sum(s.values**2 * sigma.values) * grid.cell_measure)
    raise DyadicError(f"unknown method {method!r}")


def square_pencil(w: Weight, modified: bool = False):
    """``(N, D)`` with ``v^T N v = ||S f||_w^2`` and ``v^T D v = ||f||_w^2`` for ``f`` constant on level-M cells."""
    grid = w.grid
    M = grid.M
    basis = _level_basis(grid, M)
    H = _basis.haar_coeffs(basis, grid)  # (n, ncoeffs)
    if modified:
        haar1d._require_1d(grid)
        # parent mass over |I|: 2 <w>_{pi I}, root keeps <w>_[0,1)
        means = _cube_means(w, M)
        scale = np.concatenate([[means[0]], 2 * np.repeat(means, 2)[: (1 << M) - 2]])
    else:
        scale = _basis.cube_averages(w, grid)
    N = (H * scale) @ H.T
    D = np.diag(w.level_integrals(M))
    return N, D


def _level_basis(grid: GridSpec, level: int) -> np.ndarray:
    """Z-ordered resolution-R values of the indicators of the level-``level`` cells."""
    n = 1 << (grid.d * level)
    return np.repeat(np.eye(n), 1 << (grid.d * (grid.R - level)), axis=1)


def square_function_norm(w: Weight, modified: bool = False, **kw) -> "NormEstimate":
    """``||S||`` (or ``||S_pi||``) on ``L^2(w)``, restricted to functions constant on level-M cells."""
    N, D = square_pencil(w, modified)
    est = sharp_ratio(N, D, **kw)
    return est.sqrt()


# -- norm estimation ------------------------------------------------------------------------


@dataclass
class NormEstimate:
    value: float
    iterations: int
    residual: float
    converged: bool = True
    history: np.ndarray = field(default=None, repr=False)

    def sqrt(self) -> "NormEstimate":
        return NormEstimate(float(np.sqrt(max(self.value, 0.0))), self.iterations, self.residual,
                            self.converged, self.history)

    def to_dict(self) -> dict:
        return {"value": self.value, "iters": self.iterations, "residual": self.residual}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _as_matrix(form, dim):
    if callable(form):
        if dim is None:
            raise DyadicError("dim is required for callable forms")
        return np.column_stack([form(e) for e in np.eye(dim)])
    return np.asarray(form, dtype=float)


def sharp_ratio(numerator, denominator, dim: int | None = None, *, tol: float = 1e-10,
                maxit: int = 10_000, seed: int = 0) -> NormEstimate:
    """Largest ``lambda`` with ``N v = lambda D v`` by power iteration on ``L^-1 N L^-T``."""
    N = _as_matrix(numerator, dim)
    D = _as_matrix(denominator, dim)
    if N.shape != D.shape or N.shape[0] != N.shape[1]:
        raise DyadicError("forms must be square and of equal size")
    try:
        L = np.linalg.cholesky((D + D.T) / 2)
    except np.linalg.LinAlgError as exc:
        raise DyadicError("denominator form is not positive definite") from exc
    X = scipy.linalg.solve_triangular(L, (N + N.T) / 2, lower=True)
    B = scipy.linalg.solve_triangular(L, X.T, lower=True)
    B = (B + B.T) / 2
    scale = np.abs(B).max() if B.size else 0.0
    if scale == 0.0:
        return NormEstimate(0.0, 0, 0.0, True, np.zeros(1))
    rng = np.random.default_rng(seed)
    v = np.ones(B.shape[0])
    for _ in range(8):
        if np.linalg.norm(B @ v) > 1e-12 * scale * np.linalg.norm(v):
            break
        v = rng.standard_normal(B.shape[0])
    lam, it, res, hist = _kernels.power_iteration(B, v, tol, maxit)
    return NormEstimate(float(lam), it, float(res), bool(res <= tol), hist)


def operator_norm(apply, grid: GridSpec, domain_weight: StepFunction | None = None,
                  codomain_weight: StepFunction | None = None, *, level: int | None = None,
                  check_linearity: bool = True, seed: int = 0, **kw) -> NormEstimate:
    """``sup ||apply f||_{codomain} / ||f||_{domain}`` over ``f`` constant on level-``level`` cells."""
    level = grid.M if level is None else level
    basis = _level_basis(grid, level)
    if check_linearity:
        _check_linear(apply, grid, level, seed)
    cols = np.column_stack([apply(StepFunction.from_z(grid, b)).zvalues for b in basis])
    wc = np.ones(grid.ncells) if codomain_weight is None else codomain_weight.zvalues
    N = cols.T @ (cols * (wc * grid.cell_measure)[:, None])
    if domain_weight is None:
        dvals = np.full(basis.shape[0], 2.0 ** (-grid.d * level))
    else:
        dvals = domain_weight.level_integrals(level)
    return sharp_ratio(N, np.diag(dvals), **kw).sqrt()


def _check_linear(apply, grid: GridSpec, level: int, seed: int, tol: float = 1e-9):
    rng = np.random.default_rng(seed)
    for _ in range(3):
        f = StepFunction.random(grid, rng, level=level)
        g = StepFunction.random(grid, rng, level=level)
        a, b = rng.standard_normal(2)
        lhs = apply(a * f + b * g).values
        rhs = a * apply(f).values + b * apply(g).values
        scale = max(np.abs(lhs).max(), np.abs(rhs).max(), 1.0)
        if np.abs(lhs - rhs).max() > tol * scale:
            raise DyadicError("operator failed the linearity spot check")


def bilinear_form_norm(Phi: np.ndarray, Gamma: np.ndarray, phi_gram: np.ndarray, g_gram: np.ndarray,
                       **kw) -> NormEstimate:
    """``sup phi^T F g / (|phi| |g|)`` with ``F = Phi Gamma^T`` and diagonal Gram vectors."""
    F = Phi @ Gamma.T
    N = (F / g_gram) @ F.T
    return sharp_ratio(N, np.diag(phi_gram), **kw).sqrt()


__all__ = [
    "CarlesonReport", "NormEstimate", "carleson_norm", "weighted_carleson_constant", "bilinear_test",
    "bilinear_sum", "wilson_subtree_totals", "wilson_carleson_constant", "wilson_bilinear_test",
    "petermichl_sums", "wilson_sums", "carleson_suite", "square_function", "modified_square_function",
    "weighted_sq_norm", "square_pencil", "square_function_norm", "sharp_ratio", "operator_norm",
    "bilinear_form_norm", "subtree_totals",
]
