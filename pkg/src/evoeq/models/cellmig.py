"""Nonlocal averaging operator ``S_r`` and the cell-migration model.

``S_r q(x) = n int_0^1 |S_1|^-1 int_{S_1} <q(x + r s y), y> y dsigma(y) ds``
with ``q`` extended by zero outside the domain. Quadrature: Gauss-Legendre
in ``s``; the two points ``{-1, 1}`` in 1-D and an equispaced trapezoid
rule on the circle in 2-D. Off-grid values come from multilinear
interpolation between cell centres; inside the domain but beyond the
outermost centres the nearest centre value is used.
"""

from dataclasses import dataclass

import numpy as np

from .._validation import check_positive
from ..convergence import default_time_probes, solution_convergence_experiment
from ..errors import ConditionError, ShapeError
from ..linop import hermitian_lower_bound, op_norm
from ..matlaw import HalfPlaneGrid
from ..spectral import TimeGrid, evo_solve
from .diffusion import DEFAULT_NU0, assemble_diffusion, smooth_probes, smooth_vectors
from .grid import DomainGrid

DEFAULT_R_VALUES = tuple(2.0**-k for k in range(1, 7))
#: Final-gap threshold as a fraction of the limit operator's probe scale.
RELATIVE_THRESHOLD = 0.02


def _interp_weights_1d(p, n, h):
    """Indices and weights for linear interpolation at ``p`` from centres ``(k + 1/2) h``."""
    s = np.clip(p / h - 0.5, 0.0, n - 1.0)
    lo = np.minimum(np.floor(s).astype(int), max(n - 2, 0))
    frac = s - lo
    if n == 1:
        return [(lo, np.ones_like(frac))]
    return [(lo, 1.0 - frac), (lo + 1, frac)]


@dataclass(frozen=True, eq=False)
class SrOperator:
    """``S_r`` on a :class:`DomainGrid`, assembled as a dense matrix on flux fields."""

    r: float
    grid: DomainGrid
    n_s: int = 16
    n_sphere: int = 64

    def __post_init__(self):
        check_positive(self.r, "r", strict=False)

    @property
    def s_nodes(self):
        x, w = np.polynomial.legendre.leggauss(self.n_s)
        return 0.5 * (x + 1), 0.5 * w

    @property
    def sphere_nodes(self):
        """Directions and weights; weights sum to ``|S_1|``."""
        if self.grid.dim == 1:
            return np.array([[1.0], [-1.0]]), np.ones(2)
        theta = 2 * np.pi * np.arange(self.n_sphere) / self.n_sphere
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=1)
        return dirs, np.full(self.n_sphere, 2 * np.pi / self.n_sphere)

    def matrix(self):
        grid = self.grid
        d = grid.dim
        ncell = grid.n_cells_total
        centers = grid.cell_centers
        s, ws = self.s_nodes
        dirs, wd = self.sphere_nodes
        area = wd.sum()
        out = np.zeros((ncell * d, ncell * d))
        rows = np.arange(ncell)
        for sk, wsk in zip(s, ws):
            for y, wy in zip(dirs, wd):
                pts = centers + self.r * sk * y[None, :]
                inside = np.all((pts >= 0) & (pts <= np.array(grid.extent)), axis=1)
                proj = d * wsk * wy / area * np.outer(y, y)
                per_axis = [
                    _interp_weights_1d(pts[:, ax], grid.n_cells[ax], grid.spacing[ax])
                    for ax in range(d)
                ]
                for combo in np.ndindex(*(len(p) for p in per_axis)):
                    idx = np.zeros(ncell, dtype=int)
                    weight = inside.astype(float)
                    for ax, c in enumerate(combo):
                        k, w = per_axis[ax][c]
                        idx = idx * grid.n_cells[ax] + k
                        weight = weight * w
                    for i in range(d):
                        for j in range(d):
                            if proj[i, j] != 0:
                                np.add.at(out, (rows * d + i, idx * d + j), weight * proj[i, j])
        return out

    def apply(self, q):
        q = np.asarray(q)
        flat = q.reshape(-1)
        if flat.size != self.grid.n_cells_total * self.grid.dim:
            raise ShapeError(f"field of size {flat.size} does not match the grid")
        return (self.matrix() @ flat).reshape(q.shape)


def sr_apply(op, q):
    return op.apply(q)


def approx_unity_defect(ops, fields):
    """Per operator ``(r, max_q |S_r q - q| / |q|, |S_r|)``."""
    out = []
    for op in ops:
        mat = op.matrix()
        defect = max(np.linalg.norm(mat @ q - q) / np.linalg.norm(q) for q in fields)
        out.append((op.r, float(defect), float(op_norm(mat))))
    return out


def smooth_flux_fields(grid, count=4):
    """Smooth flux fields vanishing at the boundary (products of sines)."""
    x = grid.cell_centers / np.array(grid.extent)
    fields = []
    for k in range(1, count + 1):
        base = np.sin(np.pi * k * x).prod(axis=1) * np.sin(np.pi * x).prod(axis=1) ** 2
        f = np.repeat(base[:, None], grid.dim, axis=1)
        fields.append(f.ravel())
    return fields


def _as_operator(x, n):
    x = np.asarray(x, dtype=complex)
    return x * np.eye(n) if x.ndim == 0 else x


def nonlocal_coefficient(a1, a2, a3, s_matrix):
    n = s_matrix.shape[0]
    return _as_operator(a1, n) - _as_operator(a2, n) @ s_matrix @ _as_operator(a3, n)


def standing_assumption(a1, a2, a3, ops):
    """``min_r lambda_min Re(a1 - a2 S_r a3)``; raises if not positive."""
    lows = []
    for op in ops:
        low = hermitian_lower_bound(nonlocal_coefficient(a1, a2, a3, op.matrix()))
        if not low > 0:
            raise ConditionError(
                f"Re(a1 - a2 S_r a3) >= c > 0 fails at r = {op.r:g}: lambda_min = {low:.6g}",
                certificate="standing_assumption", inequality="Re(a1 - a2 S_r a3) >= c",
                r=op.r, lower_bound=low,
            )
        lows.append(low)
    return float(min(lows))


def cellmig_experiment(r_values=DEFAULT_R_VALUES, a1=2.0, a2=0.5, a3=0.5, n_cells=256,
                       nu0=DEFAULT_NU0, time_grid=None, workers=1):
    """Solution operators for ``A_r = a1 - a2 S_r a3`` against ``r = 0``.

    The final-gap thresholds are :data:`RELATIVE_THRESHOLD` times the size
    of the ``r = 0`` solution operator seen through the same probes.
    """
    grid = DomainGrid.line(n_cells)
    time_grid = TimeGrid(0.0, 1 / 8, 256, 1.0) if time_grid is None else time_grid
    ops = [SrOperator(r, grid) for r in r_values]
    op0 = SrOperator(0.0, grid)
    c_standing = standing_assumption(a1, a2, a3, ops + [op0])

    base = assemble_diffusion(grid, 1.0, nu0=nu0)
    coeffs = [nonlocal_coefficient(a1, a2, a3, op.matrix()) for op in ops]
    a_limit = nonlocal_coefficient(a1, a2, a3, op0.matrix())
    laws = [base.law(c, label=f"r={op.r:g}") for c, op in zip(coeffs, ops)]
    limit_law = base.law(a_limit, label="r=0")

    hgrid = HalfPlaneGrid.default(nu0)
    probes = smooth_probes(base)
    signals = default_time_probes(time_grid, smooth_vectors(base))

    a = base.a_skew
    freq_scale = max(np.abs(probes.pairings(np.linalg.inv(z * limit_law.eval(z) + a))).max()
                     for z in hgrid.points)
    u0 = evo_solve(limit_law, a, base.dec, signals, workers=workers)
    time_scale = max(abs(u.inner(g)) for u in u0 for g in signals)
    thresholds = {"freq": RELATIVE_THRESHOLD * float(freq_scale),
                  "time": RELATIVE_THRESHOLD * float(time_scale)}

    n_values = [1.0 / r for r in r_values]
    report = solution_convergence_experiment(
        laws, limit_law, a, base.dec, hgrid, probes, time_grid=time_grid, n_values=n_values,
        thresholds=thresholds, time_probes=signals, label="cellmig", workers=workers,
    )
    fields = smooth_flux_fields(grid)
    inv0 = np.linalg.inv(a_limit)
    sot = [max(np.linalg.norm((np.linalg.inv(c) - inv0) @ q) / np.linalg.norm(q) for q in fields)
           for c in coeffs]
    unity = approx_unity_defect(ops, fields)
    report.extra.update({
        "r_values": list(r_values),
        "standing_c": c_standing,
        "sot_inverse_defect": [float(x) for x in sot],
        "unity_defect": [u[1] for u in unity],
        "sr_norms": [u[2] for u in unity],
        "coefficients": {"a1": a1, "a2": a2, "a3": a3},
        "n_cells": n_cells,
    })
    return report
