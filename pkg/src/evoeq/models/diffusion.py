"""Staggered-grid diffusion as a first-order system and 1-D homogenisation.

The state is ``(u, q)`` with ``u`` at nodes and the flux ``q`` at cell
centres. With ``G`` the discrete gradient the spatial operator is

    A = [[0, -G^H], [G, 0]],

exactly anti-hermitian, and the heat-type material law is

    M(z) = diag(I, 0) + z^-1 diag(0, A_r^-1).
"""

from dataclasses import dataclass

import numpy as np

from .._validation import RCOND_THRESHOLD, rcond
from ..convergence import (
    ProbeSet,
    default_time_probes,
    solution_convergence_experiment,
    wot_gap,
)
from ..errors import AssemblyError, ResolutionError, SingularBlockError
from ..linop import Decomposition
from ..matlaw import HalfPlaneGrid, MaterialLaw
from ..spectral import TimeGrid, evo_solve
from .grid import CoefficientField, DomainGrid

DEFAULT_NU0 = 0.5
DEFAULT_N_VALUES = (2, 4, 8, 16, 32, 64)
#: Fraction of the harmonic-vs-arithmetic separation allowed as final gap.
SEPARATION_FRACTION = 0.25


def _grad_1d(n, h):
    g = np.zeros((n, n + 1))
    idx = np.arange(n)
    g[idx, idx] = -1.0 / h
    g[idx, idx + 1] = 1.0 / h
    return g


def _grad_2d(nx, ny, hx, hy):
    """Gradient from nodes to cell centres, each partial averaged over the cell's two edges."""
    g = np.zeros((nx * ny * 2, (nx + 1) * (ny + 1)))

    def node(i, j):
        return i * (ny + 1) + j

    for i in range(nx):
        for j in range(ny):
            k = i * ny + j
            sw, se, nw, ne = node(i, j), node(i + 1, j), node(i, j + 1), node(i + 1, j + 1)
            g[2 * k, [se, ne]] += 0.5 / hx
            g[2 * k, [sw, nw]] -= 0.5 / hx
            g[2 * k + 1, [nw, ne]] += 0.5 / hy
            g[2 * k + 1, [sw, se]] -= 0.5 / hy
    return g


def _boundary_nodes(grid):
    nodes = grid.nodes
    on = np.zeros(len(nodes), dtype=bool)
    for axis, ext in enumerate(grid.extent):
        on |= np.isclose(nodes[:, axis], 0.0) | np.isclose(nodes[:, axis], ext)
    return on


def gradient(grid, bc="neumann"):
    """Discrete gradient; Dirichlet drops the boundary nodes from the domain."""
    if grid.dim == 1:
        g = _grad_1d(grid.n_cells[0], grid.spacing[0])
    else:
        g = _grad_2d(*grid.n_cells, *grid.spacing)
    if bc == "neumann":
        return g
    if bc == "dirichlet":
        return g[:, ~_boundary_nodes(grid)]
    raise ValueError(f"unknown boundary condition {bc!r}")


@dataclass(frozen=True, eq=False)
class DiffusionAssembly:
    grid: DomainGrid
    bc: str
    grad: np.ndarray
    a_skew: np.ndarray
    dec: Decomposition
    coefficient: CoefficientField
    nu0: float

    @property
    def n_u(self):
        return self.grad.shape[1]

    @property
    def n_q(self):
        return self.grad.shape[0]

    @property
    def dim(self):
        return self.n_u + self.n_q

    def law(self, a_r=None, label="heat"):
        """``diag(I, 0) + z^-1 diag(0, A_r^-1)``; ``A_r`` defaults to the local coefficient."""
        a_r = self.coefficient.block_operator() if a_r is None else np.asarray(a_r, dtype=complex)
        rc = rcond(a_r)
        if rc < RCOND_THRESHOLD:
            raise SingularBlockError(f"A_r is singular (rcond={rc:.2e})", rcond=rc)
        m0 = np.zeros((self.dim, self.dim), dtype=complex)
        m0[:self.n_u, :self.n_u] = np.eye(self.n_u)
        m1 = np.zeros_like(m0)
        m1[self.n_u:, self.n_u:] = np.linalg.inv(a_r)
        return MaterialLaw({0: m0, -1: m1}, nu0=self.nu0, label=label)

    def split(self, x):
        return x[:self.n_u], x[self.n_u:]


def assemble_diffusion(grid, a, bc="neumann", nu0=DEFAULT_NU0, bounds=None):
    """Block operator, ``ker A`` decomposition and law factory for ``grid``.

    ``bounds=(alpha, beta)`` certifies the coefficient before assembly.
    """
    if not isinstance(a, CoefficientField):
        a = CoefficientField.scalar(grid, a)
    if bounds is not None:
        a.certify(*bounds)
    g = gradient(grid, bc)
    nq, nu_ = g.shape
    op = np.zeros((nu_ + nq, nu_ + nq))
    op[:nu_, nu_:] = -g.T
    op[nu_:, :nu_] = g
    skew = np.linalg.norm(op + op.T, 2)
    if skew > 1e-12:
        raise AssemblyError(f"assembled operator is not skew: residual {skew:.2e}", residual=skew)
    dec = Decomposition.from_kernel(op, tol=1e-10)
    residual = np.linalg.norm(op @ dec.basis0, 2) if dec.d0 else 0.0
    if residual > 1e-10:
        raise AssemblyError(f"kernel basis residual {residual:.2e}", residual=residual)
    return DiffusionAssembly(grid, bc, g, op.astype(complex), dec, a, nu0)


def oscillating_coefficient(n, alpha, beta, grid):
    """Cells alternate between ``alpha`` and ``beta`` in blocks of half-period ``L/n``."""
    if not 0 < alpha <= beta:
        raise ValueError(f"need 0 < alpha <= beta, got {alpha}, {beta}")
    if grid.dim != 1:
        raise ValueError("oscillating coefficients are one-dimensional")
    cells = grid.n_cells[0]
    if n < 1 or cells % n:
        raise ResolutionError(f"half-period of {cells}/{n} cells is not an integer")
    half = np.arange(cells) // (cells // n)
    return CoefficientField.scalar(grid, np.where(half % 2 == 0, alpha, beta))


def harmonic_mean(alpha, beta):
    return 2 * alpha * beta / (alpha + beta)


def smooth_vectors(assembly):
    """Eight smooth fields on the ``(u, q)`` state space (1-D or 2-D), unit Euclidean norm."""
    grid = assembly.grid
    x_nodes = grid.nodes
    if assembly.bc == "dirichlet":
        x_nodes = x_nodes[~_boundary_nodes(grid)]
    x_cells = grid.cell_centers
    ext = np.array(grid.extent)
    xn = x_nodes / ext
    xc = x_cells / ext
    d = grid.dim

    def node_field(f):
        return np.concatenate([f(xn), np.zeros(assembly.n_q)])

    def flux_field(f, comp=0):
        q = np.zeros((grid.n_cells_total, d))
        q[:, comp % d] = f(xc)
        return np.concatenate([np.zeros(assembly.n_u), q.ravel()])

    cos1 = lambda x: np.cos(np.pi * x[:, 0])  # noqa: E731
    fields = [
        node_field(lambda x: np.ones(len(x))),
        node_field(cos1),
        node_field(lambda x: np.sin(np.pi * x).prod(axis=1)),
        flux_field(lambda x: np.ones(len(x))),
        flux_field(cos1, comp=d - 1),
        flux_field(lambda x: np.sin(np.pi * x[:, 0])),
        node_field(lambda x: x[:, 0]) + flux_field(lambda x: 1 - x[:, 0]),
        node_field(lambda x: np.sin(np.pi * x[:, 0])) + flux_field(lambda x: np.cos(2 * np.pi * x[:, 0])),
    ]
    return [f / np.linalg.norm(f) for f in fields]


def smooth_probes(assembly):
    return ProbeSet.from_vectors(smooth_vectors(assembly), label="smooth")


def _max_time_gap(law1, law2, assembly, signals, workers):
    u1 = evo_solve(law1, assembly.a_skew, assembly.dec, signals, workers=workers)
    u2 = evo_solve(law2, assembly.a_skew, assembly.dec, signals, workers=workers)
    return max(abs((a - b).inner(g)) for a, b in zip(u1, u2) for g in signals)


def separation(law1, law2, assembly, grid, probes, signals, workers=1):
    """Frequency and time gaps between two solution operators (used for calibration)."""
    a = assembly.a_skew
    freq = max(
        wot_gap(np.linalg.inv(z * law1.eval(z) + a), np.linalg.inv(z * law2.eval(z) + a),
                probes).sup_gap
        for z in grid.points
    )
    return {"freq": float(freq), "time": float(_max_time_gap(law1, law2, assembly, signals, workers))}


def homogenization_experiment(n_values=DEFAULT_N_VALUES, alpha=1.0, beta=3.0, n_cells=128,
                              limit="harmonic", nu0=DEFAULT_NU0, time_grid=None,
                              workers=1):
    """Oscillating 1-D diffusion against a constant-coefficient limit law.

    ``limit`` is ``"harmonic"`` (the correct limit), ``"arithmetic"`` or a
    number. Thresholds are a fixed fraction of the gap between the
    harmonic-mean and arithmetic-mean solution operators, so passing means
    the sequence has come much closer to the tested limit than the two
    candidate limits are to each other.
    """
    grid = DomainGrid.line(n_cells)
    time_grid = TimeGrid(0.0, 1 / 8, 256, 1.0) if time_grid is None else time_grid
    hm, am = harmonic_mean(alpha, beta), 0.5 * (alpha + beta)
    value = {"harmonic": hm, "arithmetic": am}.get(limit, limit)
    value = float(value)

    base = assemble_diffusion(grid, 1.0, nu0=nu0)
    laws = []
    for n in n_values:
        field = oscillating_coefficient(n, alpha, beta, grid)
        field.certify(alpha, beta)
        laws.append(base.law(field.block_operator(), label=f"a_{n}"))
    limit_law = base.law(CoefficientField.scalar(grid, value).block_operator(),
                         label=f"limit={value:g}")
    hgrid = HalfPlaneGrid.default(nu0)
    probes = smooth_probes(base)
    vectors = smooth_vectors(base)
    signals = default_time_probes(time_grid, vectors)

    law_h = base.law(CoefficientField.scalar(grid, hm).block_operator())
    law_a = base.law(CoefficientField.scalar(grid, am).block_operator())
    sep = separation(law_h, law_a, base, hgrid, probes, signals, workers)
    thresholds = {k: SEPARATION_FRACTION * v for k, v in sep.items()}

    report = solution_convergence_experiment(
        laws, limit_law, base.a_skew, base.dec, hgrid, probes, time_grid=time_grid,
        n_values=list(n_values), thresholds=thresholds, time_probes=signals,
        label=f"homogenize[{limit}]", workers=workers,
    )
    report.extra.update({
        "limit_value": value, "harmonic_mean": hm, "arithmetic_mean": am,
        "separation": sep, "alpha": alpha, "beta": beta, "n_cells": n_cells,
    })
    return report
