"""Seeded experiment drivers behind the command line: identity suites, inequality sweeps, scaling studies."""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import embed, haar1d, shiftops, wilson
from .grid import GridSpec, StepFunction, inner, norm, norm_w
from .weight import Weight, a2_characteristic, gen_power_weight, gen_recursive_weight

FAMILIES = ("recursive", "power")
DEFAULT_PARAMS = {
    "recursive": (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8),
    "power": (-0.9, -0.7, -0.5, -0.3, 0.3, 0.5, 0.7, 0.9),
}
DEFAULT_BUDGETS = {
    "identity": 1e-9,
    "embedding": 8.0,
    "petermichl": 16.0,
    "wilson": None,  # 16 * 2^d
    "operator": 32.0,
    "half_power": 8.0,
    "slope": 1.1,
}
SCALING_COLUMNS = ("param", "a2", "norm_shift", "norm_mult", *shiftops.TERM_NAMES, "runtime")
HALF_POWER_TERMS = ("B1", "A11")


@dataclass
class Outcome:
    rows: list
    footer: dict
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def thread_count() -> int:
    cap = os.environ.get("DYADIC_LAB_THREADS")
    n = os.cpu_count() or 1
    return max(1, min(n, int(cap))) if cap else min(n, 4)


def _pmap(fn, items):
    items = list(items)
    workers = min(thread_count(), len(items)) or 1
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(fn, items))


def make_weight(family: str, param: float, grid: GridSpec, seed: int | None = None) -> Weight:
    """Sweep weights: constant-``delta`` recursive weights, or ``|x|^a``.

    With ``seed`` the recursive family draws each split's ``delta`` uniformly in ``[-param, param]``.
    """
    if family == "recursive":
        if seed is None:
            return gen_recursive_weight(grid, float(param))
        return gen_recursive_weight(grid, seed=seed, delta_max=float(param))
    if family == "power":
        return gen_power_weight(float(param), grid)
    raise ValueError(f"unknown weight family {family!r}")


def random_inputs(grid: GridSpec, rng, w: Weight):
    """``phi`` normalized in L^2 and ``g`` normalized in L^2(w), both constant on level-M cells."""
    phi = StepFunction.random(grid, rng, level=grid.M)
    g = StepFunction.random(grid, rng, level=grid.M)
    return phi / norm(phi), g / norm_w(g, w)


# -- identity suites ---------------------------------------------------------------------


def _trial_weight(grid: GridSpec, trial: int, rng, families, params) -> tuple:
    family = families[trial % len(families)]
    choices = params.get(family) or DEFAULT_PARAMS[family]
    p = float(rng.choice(choices))
    if family == "recursive":
        p = abs(p)
    return family, p, make_weight(family, p, grid, seed=int(rng.integers(2**31)))


def _mg_residual(f: StepFunction, g: StepFunction, paraproduct, coeffs, avgs) -> float:
    total = (paraproduct((0, 0), avgs(g), f) + paraproduct((0, 1), coeffs(g), f)
             + paraproduct((1, 0), coeffs(g), f))
    target = f * g - f.integral() * g.integral()
    return float(np.abs((total - target).values).max() / max(np.abs(target.values).max(), 1e-300))


def _adjoint_residual(f: StepFunction, g: StepFunction, b, paraproduct) -> float:
    lhs = inner(paraproduct((1, 0), b, f), g)
    rhs = inner(f, paraproduct((0, 1), b, g))
    return shiftops.residual(lhs, rhs, [lhs])


def identity_trial_1d(grid: GridSpec, trial: int, seed: int, families, params) -> dict:
    rng = np.random.default_rng([seed, trial])
    family, p, w = _trial_weight(grid, trial, rng, families, params)
    phi, g = random_inputs(grid, rng, w)
    tb = shiftops.six_terms(w, phi, g)
    pp = lambda kind, b, f: shiftops.paraproduct(kind[0], kind[1], b, f)  # noqa: E731
    b = rng.standard_normal(grid.ncoeffs)
    return {
        "trial": trial, "family": family, "param": p, "a2": a2_characteristic(w)[0],
        "lhs": tb.lhs, "residual": tb.residual, "split_residual": tb.split_residual,
        "mg_residual": _mg_residual(phi, g, pp, haar1d.haar_coeffs, haar1d.averages),
        "adjoint_residual": _adjoint_residual(phi, g, b, pp),
    }


def identity_trial_wilson(grid: GridSpec, trial: int, seed: int, families, params) -> dict:
    rng = np.random.default_rng([seed, trial])
    family, p, w = _trial_weight(grid, trial, rng, families, params)
    phi, g = random_inputs(grid, rng, w)
    sigma = wilson.random_signs(grid.d, grid.M, int(rng.integers(2**31)))
    tb = wilson.six_terms_multiplier(w, sigma, phi, g)
    J, beta = wilson.index_of(grid, int(rng.integers(grid.ncoeffs)))
    rhs = wilson.product_formula_rhs(phi, g, J, beta)
    k = wilson.flat_index(grid, J, beta)
    direct = float(wilson.coeffs(phi * g)[k])
    boundary = [wilson.coeffs(phi)[k] * wilson.set_averages(g)[k], wilson.coeffs(g)[k] * wilson.set_averages(phi)[k]]
    b = rng.standard_normal(grid.ncoeffs)
    return {
        "trial": trial, "family": family, "param": p, "a2": a2_characteristic(w)[0],
        "lhs": tb.lhs, "residual": tb.residual, "split_residual": tb.split_residual,
        "prop_residual": wilson.disbalanced_residual(w, g),
        "product_residual": shiftops.residual(rhs, direct, boundary),
        "mg_residual": _mg_residual(phi, g, wilson.paraproduct_d, wilson.coeffs, wilson.set_averages),
        "adjoint_residual": _adjoint_residual(phi, g, b, wilson.paraproduct_d),
    }


def identity_check(grid: GridSpec, trials: int, seed: int, families=FAMILIES, params=None,
                   wilson_mode: bool | None = None, tol: float = 1e-9) -> Outcome:
    params = params or {}
    wilson_mode = grid.d > 1 if wilson_mode is None else wilson_mode
    trial = identity_trial_wilson if wilson_mode else identity_trial_1d
    rows = _pmap(lambda t: trial(grid, t, seed, families, params), range(trials))
    keys = [k for k in rows[0] if k.endswith("residual")] if rows else []
    footer = {f"max_{k}": max(r[k] for r in rows) for k in keys}
    footer.update({"trials": trials, "tolerance": tol, "d": grid.d, "M": grid.M, "R": grid.R})
    failures = [f"trial {r['trial']}: {k}={r[k]:.3e}" for r in rows for k in keys if not r[k] <= tol]
    return Outcome(rows, footer, failures)


# -- inequality sweep ----------------------------------------------------------------------


def sweep_point(d: int, M: int, R: int, family: str, param: float, budgets: dict) -> list:
    grid = GridSpec(d, M, R)
    w = make_weight(family, param, grid)
    a2 = a2_characteristic(w)[0]
    reports = list(embed.carleson_suite(w, budgets["embedding"]))
    if d == 1:
        reports += embed.petermichl_sums(w, budgets["petermichl"])
    reports += embed.wilson_sums(w, budgets.get("wilson"))
    return [{"family": family, "param": float(param), "depth": M, "a2": a2, "name": r.name,
             "sup": r.sup, "budget": r.budget, "bound": r.bound, "pass": r.passed} for r in reports]


def inequality_sweep(d: int, depths, families, params: dict, budgets: dict, resolution: int | None = None) -> Outcome:
    points = [(M, fam, p) for fam in families for p in (params.get(fam) or DEFAULT_PARAMS[fam]) for M in depths]
    chunks = _pmap(lambda pt: sweep_point(d, pt[0], resolution or pt[0] + 2, pt[1], pt[2], budgets), points)
    rows = [r for chunk in chunks for r in chunk]
    failures = [f"{r['family']} param={r['param']} M={r['depth']} {r['name']}: {r['sup']:.4g} > {r['bound']:.4g}"
                for r in rows if not r["pass"]]
    footer = {"points": len(points), "reports": len(rows), "failed": len(failures)}
    return Outcome(rows, footer, failures)


# -- scaling study ---------------------------------------------------------------------------


def shift_target_norm(w: Weight, **kw) -> embed.NormEstimate:
    """``sup ||S P^(1,0) phi||_w / ||phi||``."""
    return embed.operator_norm(lambda f: shiftops.target_function(w, f), w.grid, None, w, **kw)


def multiplier_target_norm(w: Weight, sigma, **kw) -> embed.NormEstimate:
    """``sup ||T_sigma P^(1,0) phi||_w / ||phi||``."""
    return embed.operator_norm(lambda f: wilson.target_function(w, sigma, f), w.grid, None, w, **kw)


def term_norms(w: Weight, sigma=None) -> dict:
    """Norms of every term as a bilinear form on ``L^2 x L^2(w)``.

    ``phi`` ranges over functions constant on level-M cells, ``g`` over level-R cells.
    d=1 without ``sigma`` uses the shifted expansion; otherwise the multiplier one.
    """
    grid = w.grid
    phi_basis = embed._level_basis(grid, grid.M)
    g_basis = np.eye(grid.ncells)
    if sigma is None:
        factors = shiftops.term_factors(w, phi_basis, g_basis)
    else:
        factors = wilson.term_factors(w, sigma, phi_basis, g_basis)
    phi_gram = np.full(phi_basis.shape[0], 2.0 ** (-grid.d * grid.M))
    g_gram = w.zvalues * grid.cell_measure
    return {name: embed.bilinear_form_norm(P, G, phi_gram, g_gram).value for name, (P, G) in factors.items()}


def ols_slope(a2, norms, floor: float = 2.0) -> float | None:
    x = np.asarray(a2, dtype=float)
    y = np.asarray(norms, dtype=float)
    keep = (x >= floor) & (y > 0)
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def scaling_row(d: int, M: int, R: int, family: str, param: float, seed: int, timings: bool) -> tuple:
    t0 = time.perf_counter()
    grid = GridSpec(d, M, R)
    w = make_weight(family, param, grid)
    a2 = a2_characteristic(w)[0]
    sigma = wilson.random_signs(d, M, seed)
    shift = shift_target_norm(w).value if d == 1 else None
    mult = multiplier_target_norm(w, sigma).value
    raw = term_norms(w, None if d == 1 else sigma)
    row = {"param": float(param), "a2": a2, "norm_shift": shift, "norm_mult": mult}
    row.update({n: raw[n] / a2 for n in shiftops.TERM_NAMES})
    elapsed = time.perf_counter() - t0
    row["runtime"] = elapsed if timings else None
    return row, raw, elapsed


def scaling_study(d: int, M: int, R: int, family: str, params, seed: int, budgets: dict,
                  timings: bool = False) -> Outcome:
    params = list(params or DEFAULT_PARAMS[family])
    results = _pmap(lambda p: scaling_row(d, M, R, family, p, seed, timings), params)
    rows = [r[0] for r in results]
    failures = []
    for row, raw, _ in results:
        a2 = row["a2"]
        for key in ("norm_shift", "norm_mult"):
            if row[key] is not None and not row[key] <= budgets["operator"] * a2:
                failures.append(f"param={row['param']}: {key}={row[key]:.4g} > {budgets['operator']}*[w]")
        for name in HALF_POWER_TERMS:
            if not raw[name] <= budgets["half_power"] * np.sqrt(a2):
                failures.append(f"param={row['param']}: {name}={raw[name]:.4g} > {budgets['half_power']}*[w]^1/2")
    a2s = [r["a2"] for r in rows]
    slopes = {}
    for key in ("norm_shift", "norm_mult"):
        vals = [r[key] for r in rows]
        if all(v is not None for v in vals):
            slopes[key] = ols_slope(a2s, vals)
            if slopes[key] is not None and not slopes[key] <= budgets["slope"]:
                failures.append(f"{key} slope {slopes[key]:.4f} > {budgets['slope']}")
    footer = {
        "slopes": slopes,
        "a2_range": [min(a2s), max(a2s)] if a2s else None,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "runtimes": [round(r[2], 3) for r in results],
    }
    return Outcome(rows, footer, failures)
