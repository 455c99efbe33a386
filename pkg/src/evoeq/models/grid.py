"""Uniform rectangular grids and per-cell coefficient fields."""

from dataclasses import dataclass

import numpy as np

from .._validation import check_positive
from ..errors import CoefficientError, ShapeError
from ..linop import hermitian_lower_bound

DEFAULT_CAP = 4096


@dataclass(frozen=True)
class DomainGrid:
    """Box ``prod [0, extent_i]`` cut into ``n_cells_i`` equal cells per axis.

    Cells are numbered in C order (last axis fastest), nodes likewise.
    """

    dim: int
    extent: tuple
    n_cells: tuple
    cap: int = DEFAULT_CAP

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        extent = tuple(float(e) for e in np.atleast_1d(self.extent))
        cells = tuple(int(n) for n in np.atleast_1d(self.n_cells))
        if len(extent) != self.dim or len(cells) != self.dim:
            raise ShapeError("extent and n_cells need one entry per axis")
        for e in extent:
            check_positive(e, "extent")
        if min(cells) < 1:
            raise ValueError("n_cells must be positive")
        object.__setattr__(self, "extent", extent)
        object.__setattr__(self, "n_cells", cells)
        if self.n_unknowns > self.cap:
            raise ValueError(f"{self.n_unknowns} unknowns exceed the cap {self.cap}")

    @classmethod
    def line(cls, n_cells, length=1.0, cap=DEFAULT_CAP):
        return cls(1, (length,), (n_cells,), cap)

    @property
    def spacing(self):
        return tuple(e / n for e, n in zip(self.extent, self.n_cells))

    @property
    def n_cells_total(self):
        return int(np.prod(self.n_cells))

    @property
    def n_nodes_total(self):
        return int(np.prod([n + 1 for n in self.n_cells]))

    @property
    def n_unknowns(self):
        """Nodal scalar plus one flux vector per cell."""
        return self.n_nodes_total + self.dim * self.n_cells_total

    def _mesh(self, axes):
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @property
    def cell_centers(self):
        return self._mesh([(np.arange(n) + 0.5) * h for n, h in zip(self.n_cells, self.spacing)])

    @property
    def nodes(self):
        return self._mesh([np.arange(n + 1) * h for n, h in zip(self.n_cells, self.spacing)])

    def to_json(self):
        return {"dim": self.dim, "extent": list(self.extent), "n_cells": list(self.n_cells)}


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Per-cell ``dim x dim`` matrices ``a(x)``."""

    grid: DomainGrid
    values: np.ndarray

    def __post_init__(self):
        d = self.grid.dim
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.n_cells_total, d, d):
            raise ShapeError(f"expected shape {(self.grid.n_cells_total, d, d)}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("coefficient values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def scalar(cls, grid, values):
        """Isotropic field ``a(x) = s(x) I`` from per-cell scalars (or one scalar)."""
        s = np.broadcast_to(np.asarray(values, dtype=complex), (grid.n_cells_total,))
        return cls(grid, s[:, None, None] * np.eye(grid.dim)[None])

    def bounds(self):
        """``(min_x lambda_min Re a(x), 1 / min_x lambda_min Re a(x)^-1)``."""
        lo = min(hermitian_lower_bound(v) for v in self.values)
        inv_lo = min(hermitian_lower_bound(np.linalg.inv(v)) for v in self.values)
        beta = np.inf if inv_lo <= 0 else 1.0 / inv_lo
        return float(lo), float(beta)

    def certify(self, alpha, beta, tol=1e-12):
        """Raise unless ``Re a >= alpha`` and ``Re a^-1 >= 1/beta`` in every cell."""
        lo, hi = self.bounds()
        if lo < alpha - tol or hi > beta * (1 + tol):
            raise CoefficientError(
                f"coefficient bounds fail: measured alpha={lo:.6g}, beta={hi:.6g}; "
                f"required alpha={alpha:g}, beta={beta:g}",
                measured_alpha=lo, measured_beta=hi,
            )
        return lo, hi

    def block_operator(self):
        """Block-diagonal operator on the flattened (cell-major) flux space."""
        n, d = self.grid.n_cells_total, self.grid.dim
        out = np.zeros((n * d, n * d), dtype=complex)
        for k, v in enumerate(self.values):
            out[k * d:(k + 1) * d, k * d:(k + 1) * d] = v
        return out
