"""A2 weights on the truncated dyadic grid."""
from __future__ import annotations

import json
from functools import cached_property

import numpy as np

from . import _basis
from .grid import CellIndex, DyadicError, GridSpec, StepFunction


class PositivityError(DyadicError):
    """A weight value is not strictly positive."""


class Weight(StepFunction):
    """Strictly positive step function with cached companions.

    ``inv``, ``sqrt`` and ``isqrt`` are the exact pointwise powers -1, 1/2 and
    -1/2; they are computed eagerly so every identity sees the same arrays.
    """

    def __init__(self, grid: GridSpec, values):
        super().__init__(grid, values)
        if not np.all(np.isfinite(self.values)) or self.values.min() <= 0:
            raise PositivityError("weight values must be finite and strictly positive")
        self.pyramid  # noqa: B018 - build caches eagerly
        self.inv = StepFunction(grid, 1.0 / self.values)
        self.sqrt = StepFunction(grid, np.sqrt(self.values))
        self.isqrt = StepFunction(grid, 1.0 / np.sqrt(self.values))

    @classmethod
    def from_step(cls, f: StepFunction) -> "Weight":
        return cls(f.grid, f.values)

    @cached_property
    def inverse_weight(self) -> "Weight":
        """``1/w`` as a :class:`Weight` (needed for the dual-weight decompositions)."""
        return Weight(self.grid, self.inv.values)

    def to_dict(self) -> dict:
        out = super().to_dict()
        out["kind"] = "weight"
        return out

    @classmethod
    def from_dict(cls, data: dict, M: int | None = None) -> "Weight":
        if data.get("kind", "weight") != "weight":
            raise DyadicError(f"not a weight file: kind={data.get('kind')!r}")
        f = StepFunction.from_dict(data, M)
        return cls(f.grid, f.values)

    @classmethod
    def from_json(cls, text: str, M: int | None = None) -> "Weight":
        return cls.from_dict(json.loads(text), M)


def a2_characteristic(w: Weight) -> tuple[float, CellIndex]:
    """Dyadic A2 characteristic: max over cells of <w>_I <1/w>_I, with its arg-max."""
    best, arg = -np.inf, None
    for level in range(w.grid.R + 1):
        prod = w.level_means(level) * w.inv.level_means(level)
        k = int(np.argmax(prod))
        if prod[k] > best:
            best, arg = float(prod[k]), (level, k)
    return best, CellIndex.from_z(arg[1], arg[0], w.grid.d)


def gen_recursive_weight(grid: GridSpec, delta=None, *, seed=None, delta_max=None,
                         root_average: float = 1.0) -> Weight:
    """Weight built top-down by unbalancing every Wilson split.

    For each cube ``I`` on levels ``0..M-1`` and each split ``alpha`` of its
    children into ``(E1, E2)`` the averages satisfy
    ``<w>_E1 = (1 + delta) <w>_E`` and ``<w>_E2 = (1 - delta) <w>_E``.  In d=1
    this is ``<w>_{I-} = (1 + delta_I) <w>_I``.  ``delta`` is a scalar, an array
    with one entry per Wilson index (level-major, Z order, alpha fastest), or
    ``None`` together with ``seed``/``delta_max`` for uniform random entries.
    Below level ``M`` the weight is constant on cells.
    """
    n = grid.ncoeffs
    if delta is None:
        if seed is None or delta_max is None:
            raise DyadicError("give delta, or seed and delta_max")
        rng = np.random.default_rng(seed)
        delta = rng.uniform(-delta_max, delta_max, n)
    delta = np.broadcast_to(np.asarray(delta, dtype=float), (n,)).copy()
    if np.any(np.abs(delta) >= 1):
        raise PositivityError("every |delta| must be < 1")
    if root_average <= 0:
        raise PositivityError("root average must be positive")
    if grid.minus_left is False and grid.d == 1:
        delta = -delta  # I- is the right child
    table = _basis.pair_table(grid.d)
    means = np.array([float(root_average)])
    for level in range(grid.M):
        dl = delta[grid.coeff_offset(level):grid.coeff_offset(level + 1)].reshape(-1, grid.nalpha)
        mult = np.ones((dl.shape[0], grid.nchildren))
        for a in range(grid.nalpha):
            col = dl[:, a:a + 1]
            mult *= np.where(table.mask1[a] > 0, 1 + col, 1.0) * np.where(table.mask2[a] > 0, 1 - col, 1.0)
        means = (means[:, None] * mult).reshape(-1)
    return Weight.from_z(grid, np.repeat(means, 1 << (grid.d * (grid.R - grid.M))))


def gen_power_weight(a: float, grid: GridSpec, x0=None) -> Weight:
    """Power weight ``|x - x0|^a``.

    In d=1 (``x0 = 0``) the cell values are the exact cell averages of ``x^a``;
    in higher dimensions the function is sampled at cell centroids.
    """
    d, R = grid.d, grid.R
    if d == 1:
        if a <= -1:
            raise PositivityError("x^a is not integrable near 0 for a <= -1")
        k = np.arange(1 << R, dtype=float)
        vals = ((k + 1) ** (a + 1) - k ** (a + 1)) / (a + 1) * 2.0 ** (-R * a)
        return Weight(grid, vals)
    x0 = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float)
    h = 2.0**-R
    coords = (np.indices((1 << R,) * d).reshape(d, -1).T + 0.5) * h
    r = np.linalg.norm(coords - x0, axis=1)
    return Weight(grid, r**a)


def from_config(cfg: dict, grid: GridSpec | None = None) -> Weight:
    """Build a weight from ``{"family": "recursive"|"power", "delta"|"a": ..., "seed": ..., "M": ..., "R": ...}``.

    ``grid`` defaults to ``GridSpec(cfg.get("d", 1), cfg["M"], cfg.get("R"))``.
    """
    if grid is None:
        grid = GridSpec(int(cfg.get("d", 1)), int(cfg["M"]), None if cfg.get("R") is None else int(cfg["R"]))
    family = cfg.get("family")
    if family == "recursive":
        if "delta" in cfg and cfg["delta"] is not None:
            return gen_recursive_weight(grid, cfg["delta"], root_average=cfg.get("root_average", 1.0))
        return gen_recursive_weight(grid, seed=cfg.get("seed", 0), delta_max=cfg["delta_max"])
    if family == "power":
        return gen_power_weight(float(cfg["a"]), grid, cfg.get("x0"))
    raise DyadicError(f"unknown weight family {family!r}")
