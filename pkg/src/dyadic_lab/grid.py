"""Dyadic cells, truncated grids and step functions on [0,1)^d.

Values of a :class:`StepFunction` are stored in lexicographic cell order (the
serialization order).  Internally most computations use the Z (Morton) order,
in which the cells of any dyadic cube are contiguous and children appear in
lexicographic bit order.  For ``d == 1`` both orders coincide.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from . import _kernels


class DyadicError(ValueError):
    """Base class for invalid inputs."""


class ResolutionError(DyadicError):
    """A cell or function is finer than the grid (or operation) allows."""


class GridMismatchError(DyadicError):
    """Two objects live on different grids."""


@dataclass(frozen=True)
class CellIndex:
    """The cube prod_i [k_i 2^-l, (k_i + 1) 2^-l)."""

    level: int
    pos: tuple

    def __post_init__(self):
        pos = tuple(int(k) for k in (self.pos if isinstance(self.pos, Sequence) else (self.pos,)))
        object.__setattr__(self, "pos", pos)
        if self.level < 0:
            raise DyadicError(f"negative level {self.level}")
        n = 1 << self.level
        if not pos or any(k < 0 or k >= n for k in pos):
            raise DyadicError(f"position {pos} out of range for level {self.level}")

    @classmethod
    def root(cls, d: int = 1) -> "CellIndex":
        return cls(0, (0,) * d)

    @property
    def d(self) -> int:
        return len(self.pos)

    @property
    def measure(self) -> float:
        return 2.0 ** (-self.d * self.level)

    @property
    def bounds(self):
        h = 2.0**-self.level
        return tuple((k * h, (k + 1) * h) for k in self.pos)

    def parent(self) -> "CellIndex":
        if self.level == 0:
            raise DyadicError("the root cell has no parent")
        return CellIndex(self.level - 1, tuple(k >> 1 for k in self.pos))

    def children(self) -> list["CellIndex"]:
        return children(self)

    def contains(self, other: "CellIndex") -> bool:
        if other.level < self.level or other.d != self.d:
            return False
        shift = other.level - self.level
        return all((k >> shift) == j for k, j in zip(other.pos, self.pos))

    @property
    def zpos(self) -> int:
        return morton(self.pos, self.level)

    @classmethod
    def from_z(cls, zpos: int, level: int, d: int) -> "CellIndex":
        return cls(level, unmorton(zpos, level, d))

    def __str__(self):
        return "x".join(f"[{a:g},{b:g})" for a, b in self.bounds)


def children(I: CellIndex) -> list[CellIndex]:
    """The 2^d cells of level ``I.level + 1`` tiling ``I``, in lexicographic bit order."""
    d = I.d
    out = []
    for c in range(1 << d):
        bits = [(c >> (d - 1 - i)) & 1 for i in range(d)]
        out.append(CellIndex(I.level + 1, tuple(2 * k + b for k, b in zip(I.pos, bits))))
    return out


def morton(pos: Sequence[int], level: int) -> int:
    z = 0
    for b in range(level - 1, -1, -1):
        for k in pos:
            z = (z << 1) | ((k >> b) & 1)
    return z


def unmorton(z: int, level: int, d: int) -> tuple:
    pos = [0] * d
    for b in range(level):
        for i in range(d - 1, -1, -1):
            pos[i] |= (z & 1) << b
            z >>= 1
    return tuple(pos)


@lru_cache(maxsize=None)
def z_permutation(d: int, R: int):
    """Return ``(z2lex, lex2z)`` index arrays for level-``R`` cells."""
    n = 1 << R
    coords = np.indices((n,) * d).reshape(d, -1)  # lexicographic order
    z = np.zeros(coords.shape[1], dtype=np.int64)
    for b in range(R - 1, -1, -1):
        for i in range(d):
            z = (z << 1) | ((coords[i] >> b) & 1)
    lex2z = z
    z2lex = np.empty_like(z)
    z2lex[lex2z] = np.arange(z.size)
    lex2z.flags.writeable = False
    z2lex.flags.writeable = False
    return z2lex, lex2z


def to_z(values: np.ndarray, d: int, R: int) -> np.ndarray:
    if d == 1:
        return values
    return values[..., z_permutation(d, R)[0]]


def from_z(zvalues: np.ndarray, d: int, R: int) -> np.ndarray:
    if d == 1:
        return zvalues
    return zvalues[..., z_permutation(d, R)[1]]


@dataclass(frozen=True)
class GridSpec:
    """Truncation of the dyadic grid of [0,1)^d.

    Coefficients live on levels ``0..M-1``; step functions are constant on
    level-``R`` cells.  ``minus_left`` selects which child is ``I-`` in d=1.
    """

    d: int = 1
    M: int = 5
    R: int | None = None
    minus_left: bool = True

    def __post_init__(self):
        if self.R is None:
            object.__setattr__(self, "R", self.M + 2)
        if self.d < 1:
            raise DyadicError("dimension must be positive")
        if self.M < 0:
            raise DyadicError("depth must be non-negative")
        if self.R < self.M + 1:
            raise ResolutionError(f"resolution R={self.R} must be at least M+1={self.M + 1}")

    @property
    def ncells(self) -> int:
        return 1 << (self.d * self.R)

    @property
    def nchildren(self) -> int:
        return 1 << self.d

    @property
    def nalpha(self) -> int:
        return (1 << self.d) - 1

    @property
    def ncoeffs(self) -> int:
        """Number of Haar/Wilson indices on levels ``0..M-1``."""
        return (1 << (self.d * self.M)) - 1

    @property
    def ncubes(self) -> int:
        """Number of cubes on levels ``0..M-1``."""
        return self.ncoeffs // self.nalpha

    @property
    def cell_measure(self) -> float:
        return 2.0 ** (-self.d * self.R)

    def with_depth(self, M: int) -> "GridSpec":
        return GridSpec(self.d, M, self.R, self.minus_left)

    def cells(self, level: int) -> list[CellIndex]:
        """Cells of ``level`` in Z order."""
        return [CellIndex.from_z(z, level, self.d) for z in range(1 << (self.d * level))]

    def cube_offset(self, level: int) -> int:
        return ((1 << (self.d * level)) - 1) // self.nalpha

    def coeff_offset(self, level: int) -> int:
        return (1 << (self.d * level)) - 1


class StepFunction:
    """A real function on [0,1)^d that is constant on level-``R`` cells."""

    def __init__(self, grid: GridSpec, values):
        vals = np.array(values, dtype=float).reshape(-1)
        if vals.size != grid.ncells:
            raise DyadicError(f"expected {grid.ncells} values, got {vals.size}")
        vals.flags.writeable = False
        self.grid = grid
        self.values = vals

    # construction -------------------------------------------------------------

    @classmethod
    def constant(cls, grid: GridSpec, c: float = 1.0) -> "StepFunction":
        return cls(grid, np.full(grid.ncells, float(c)))

    @classmethod
    def from_z(cls, grid: GridSpec, zvalues) -> "StepFunction":
        return cls(grid, from_z(np.asarray(zvalues, dtype=float), grid.d, grid.R))

    @classmethod
    def from_level(cls, grid: GridSpec, level_zvalues) -> "StepFunction":
        """Piecewise constant function given by one value per level-``l`` cell (Z order)."""
        lv = np.asarray(level_zvalues, dtype=float)
        level = round(np.log2(lv.size) / grid.d)
        if (1 << (grid.d * level)) != lv.size or level > grid.R:
            raise ResolutionError(f"cannot place {lv.size} values on a dyadic level")
        return cls.from_z(grid, np.repeat(lv, 1 << (grid.d * (grid.R - level))))

    @classmethod
    def indicator(cls, grid: GridSpec, I: CellIndex) -> "StepFunction":
        z = np.zeros(grid.ncells)
        lo, hi = cell_zrange(grid, I)
        z[lo:hi] = 1.0
        return cls.from_z(grid, z)

    @classmethod
    def random(cls, grid: GridSpec, rng, level: int | None = None) -> "StepFunction":
        """Standard normal values on level-``level`` cells (default ``grid.M``)."""
        level = grid.M if level is None else level
        return cls.from_level(grid, rng.standard_normal(1 << (grid.d * level)))

    # views ------------------------------------------------------------------------

    @cached_property
    def zvalues(self) -> np.ndarray:
        z = np.ascontiguousarray(to_z(self.values, self.grid.d, self.grid.R))
        z.flags.writeable = False
        return z

    @cached_property
    def pyramid(self) -> list:
        """Cell sums (not integrals) per level ``0..R``, Z order."""
        g = self.grid.nchildren
        sums = [np.asarray(self.zvalues, dtype=float)]
        for _ in range(self.grid.R):
            sums.append(_kernels.coarsen(sums[-1], g))
        return sums[::-1]

    def level_means(self, level: int) -> np.ndarray:
        if level > self.grid.R:
            raise ResolutionError(f"level {level} exceeds resolution {self.grid.R}")
        return self.pyramid[level] / (1 << (self.grid.d * (self.grid.R - level)))

    def level_integrals(self, level: int) -> np.ndarray:
        if level > self.grid.R:
            raise ResolutionError(f"level {level} exceeds resolution {self.grid.R}")
        return self.pyramid[level] * self.grid.cell_measure

    def child_integrals(self, level: int) -> np.ndarray:
        """Integrals over the children of every level-``level`` cube, shape (cubes, 2^d)."""
        return self.level_integrals(level + 1).reshape(-1, self.grid.nchildren)

    def integral(self) -> float:
        return float(self.pyramid[0][0] * self.grid.cell_measure)

    def mean(self) -> float:
        return self.integral()

    def is_resolution(self, level: int, rtol: float = 0.0) -> bool:
        """True if constant on every level-``level`` cell."""
        if level >= self.grid.R:
            return True
        blocks = self.zvalues.reshape(-1, 1 << (self.grid.d * (self.grid.R - level)))
        spread = blocks.max(axis=1) - blocks.min(axis=1)
        scale = max(float(np.abs(self.values).max(initial=0.0)), 1e-300)
        return bool(np.all(spread <= rtol * scale))

    # arithmetic (pointwise, stays at resolution R) --------------------------------

    def _coerce(self, other):
        if isinstance(other, StepFunction):
            check_grid(self, other)
            return other.values
        return float(other)

    def __add__(self, other):
        return StepFunction(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return StepFunction(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return StepFunction(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return StepFunction(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return StepFunction(self.grid, self.values / self._coerce(other))

    def __neg__(self):
        return StepFunction(self.grid, -self.values)

    def __pow__(self, p):
        return StepFunction(self.grid, self.values ** float(p))

    def __repr__(self):
        return f"StepFunction(d={self.grid.d}, R={self.grid.R}, values={self.values!r})"

    # serialization ------------------------------------------------------------------

    def to_dict(self) -> dict:
        return {"d": self.grid.d, "R": self.grid.R, "values": [float(v) for v in self.values]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict, M: int | None = None) -> "StepFunction":
        d, R = int(data["d"]), int(data["R"])
        if M is None:
            M = R - 1
        return cls(GridSpec(d, M, R), data["values"])

    @classmethod
    def from_json(cls, text: str, M: int | None = None) -> "StepFunction":
        return cls.from_dict(json.loads(text), M)


def check_grid(*objs) -> GridSpec:
    grid = objs[0].grid
    for o in objs[1:]:
        if o.grid != grid:
            raise GridMismatchError(f"grid mismatch: {grid} vs {o.grid}")
    return grid


def cell_zrange(grid: GridSpec, I: CellIndex) -> tuple:
    """Half-open range of level-R Z positions covered by ``I``."""
    if I.d != grid.d:
        raise DyadicError("cell dimension does not match grid")
    if I.level > grid.R:
        raise ResolutionError(f"cell level {I.level} exceeds resolution {grid.R}")
    width = 1 << (grid.d * (grid.R - I.level))
    lo = I.zpos * width
    return lo, lo + width


def average(f: StepFunction, I: CellIndex) -> float:
    """Exact mean of ``f`` over ``I``."""
    if I.level > f.grid.R:
        raise ResolutionError(f"cell level {I.level} exceeds resolution {f.grid.R}")
    return float(f.level_means(I.level)[I.zpos])


def inner(f: StepFunction, g: StepFunction) -> float:
    check_grid(f, g)
    return float(f.values @ g.values) * f.grid.cell_measure


def inner_w(f: StepFunction, g: StepFunction, w: StepFunction) -> float:
    check_grid(f, g, w)
    return float(np.sum(f.values * g.values * w.values)) * f.grid.cell_measure


def norm(f: StepFunction) -> float:
    return float(np.sqrt(inner(f, f)))


def norm_w(f: StepFunction, w: StepFunction) -> float:
    return float(np.sqrt(inner_w(f, f, w)))
