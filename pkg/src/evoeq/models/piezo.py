"""Finite-dimensional surrogate of scalar piezo-electricity.

State blocks of sizes ``(m0, m1, m2, m3)``; with ``W = eps + e^* C^-1 e``

    M0 = [[I, 0, 0, 0], [0, C^-1, C^-1 e, 0], [0, e^* C^-1, W, 0], [0, 0, 0, mu]]
    M1 = sigma in block (2, 2),      M(z) = M0 + z^-1 M1.

The spatial operator is a random anti-hermitian matrix with a kernel of
prescribed dimension, standing in for the div/grad/rot block.
"""

from dataclasses import dataclass, replace

import numpy as np

from .._validation import check_operator
from ..convergence import (
    ProbeSet,
    default_time_probes,
    limit_coercivity_audit,
    solution_convergence_experiment,
)
from ..errors import ConditionError
from ..linop import (
    Decomposition,
    hermitian_lower_bound,
    op_norm,
    operator_to_json,
    random_complex,
    skew_on,
)
from ..matlaw import HalfPlaneGrid, MaterialLaw, alt_boundedness_check, picard_coercivity
from ..spectral import TimeGrid, solve_coercivity

SELF_ADJOINT_TOL = 1e-12
DEFAULT_N_VALUES = (1, 2, 4, 8, 16, 32, 64)


@dataclass(frozen=True, eq=False)
class PiezoBlocks:
    C: np.ndarray
    e: np.ndarray
    eps: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    m0: int = 3

    def __post_init__(self):
        for name in ("C", "eps", "mu", "sigma"):
            object.__setattr__(self, name, check_operator(getattr(self, name), square=True, name=name))
        object.__setattr__(self, "e", check_operator(self.e, name="e"))
        if self.e.shape != (self.C.shape[0], self.eps.shape[0]):
            raise ValueError(f"e must be {self.C.shape[0]} x {self.eps.shape[0]}, got {self.e.shape}")
        if self.sigma.shape != self.eps.shape:
            raise ValueError("sigma and eps must have the same size")

    @property
    def sizes(self):
        return (self.m0, self.C.shape[0], self.eps.shape[0], self.mu.shape[0])

    @property
    def dim(self):
        return sum(self.sizes)

    def to_json(self):
        return {k: operator_to_json(getattr(self, k)) for k in ("C", "e", "eps", "mu", "sigma")} | {
            "m0": self.m0}


@dataclass(frozen=True)
class PiezoConstants:
    c: float
    d: float
    nu0: float


def piezo_blocks_to_laws(blocks):
    """``(M0, M1)`` assembled from the blocks."""
    m0, m1, m2, m3 = blocks.sizes
    n = blocks.dim
    cinv = np.linalg.inv(blocks.C)
    s1 = slice(m0, m0 + m1)
    s2 = slice(m0 + m1, m0 + m1 + m2)
    s3 = slice(m0 + m1 + m2, n)
    big0 = np.zeros((n, n), dtype=complex)
    big0[:m0, :m0] = np.eye(m0)
    big0[s1, s1] = cinv
    big0[s1, s2] = cinv @ blocks.e
    big0[s2, s1] = blocks.e.conj().T @ cinv
    big0[s2, s2] = blocks.eps + blocks.e.conj().T @ cinv @ blocks.e
    big0[s3, s3] = blocks.mu
    big1 = np.zeros((n, n), dtype=complex)
    big1[s2, s2] = blocks.sigma
    return big0, big1


def random_skew_with_kernel(dim, kernel_dim, seed):
    """Anti-hermitian ``A`` with ``ker A`` of the given dimension, and its decomposition."""
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(random_complex(rng, dim))
    dec = Decomposition(q[:, :kernel_dim], q[:, kernel_dim:])
    inner = random_complex(rng, dim - kernel_dim)
    inner = 0.5 * (inner - inner.conj().T)
    return skew_on(dec, inner), dec


@dataclass(frozen=True, eq=False)
class PiezoSystem:
    blocks: PiezoBlocks
    M0: np.ndarray
    M1: np.ndarray
    a_skew: np.ndarray
    dec: Decomposition
    law: MaterialLaw


def assemble_piezo(blocks, constants, kernel_dim=4, skew_seed=7, certify=True, grid=None):
    """Assemble ``M0, M1``, the skew surrogate and the law ``M0 + z^-1 M1``.

    With ``certify`` every stated inequality is checked first and a
    :class:`ConditionError` names the one that fails.
    """
    if certify:
        piezo_certificates(blocks, constants, grid=grid, raise_on_failure=True)
    big0, big1 = piezo_blocks_to_laws(blocks)
    a_skew, dec = random_skew_with_kernel(blocks.dim, kernel_dim, skew_seed)
    law = MaterialLaw({0: big0, -1: big1}, nu0=constants.nu0, label="piezo")
    return PiezoSystem(blocks, big0, big1, a_skew, dec, law)


def _self_adjoint_residual(t):
    return float(op_norm(t - t.conj().T))


def piezo_certificates(blocks, constants, grid=None, raise_on_failure=False):
    """Evaluate every stated inequality; returns ``{name: (value, bound, ok)}``.

    Half-plane conditions are grid minima (default grid for ``nu0``).
    ``nu eps + Re sigma >= c`` for ``nu > nu0`` is evaluated at ``nu0``,
    where it is weakest because ``eps >= 0``.
    """
    c, d, nu0 = constants.c, constants.d, constants.nu0
    grid = HalfPlaneGrid.default(nu0) if grid is None else grid
    b = blocks
    checks = {}
    for name in ("C", "eps", "mu"):
        res = _self_adjoint_residual(getattr(b, name))
        checks[f"{name} = {name}^*"] = (res, SELF_ADJOINT_TOL, res <= SELF_ADJOINT_TOL)
    eps_low = hermitian_lower_bound(b.eps)
    checks["eps >= 0"] = (eps_low, 0.0, eps_low >= -SELF_ADJOINT_TOL)
    checks["C >= 1/d"] = (hermitian_lower_bound(b.C), 1 / d, None)
    checks["mu >= c"] = (hermitian_lower_bound(b.mu), c, None)
    checks["nu eps + Re sigma >= c"] = (hermitian_lower_bound(nu0 * b.eps + b.sigma), c, None)
    checks["C^-1 >= c"] = (hermitian_lower_bound(np.linalg.inv(b.C)), c, None)
    checks["mu^-1 >= 1/d"] = (hermitian_lower_bound(np.linalg.inv(b.mu)), 1 / d, None)
    w_low = min(hermitian_lower_bound(np.linalg.inv(b.eps + b.sigma / z)) for z in grid.points)
    checks["Re((eps + sigma/z)^-1) >= 1/d"] = (w_low, 1 / d, None)
    big0, big1 = piezo_blocks_to_laws(b)
    law = MaterialLaw({0: big0, -1: big1}, nu0=nu0)
    checks["Re zM(z) >= c'"] = (picard_coercivity(law, grid), 0.0, None)
    checks["Re M(z)^-1 >= 1/d"] = (
        min(hermitian_lower_bound(np.linalg.inv(law.eval(z))) for z in grid.points), 1 / d,
        alt_boundedness_check(law, d, grid),
    )
    out = {}
    for name, (value, bound, ok) in checks.items():
        if ok is None:
            ok = value >= bound if bound else value > 0
        out[name] = (float(value), float(bound), bool(ok))
        if raise_on_failure and not ok:
            raise ConditionError(
                f"piezo condition {name} fails: {value:.6g} vs {bound:.6g}",
                certificate="piezo_certificates", inequality=name, value=float(value),
                bound=float(bound),
            )
    return out


# ---------------------------------------------------------------------------
# shipped parameter sets
# ---------------------------------------------------------------------------

def _spd(rng, n, lo, hi):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return q @ np.diag(np.linspace(lo, hi, n)) @ q.T


def _set_baseline(m):
    eye = np.eye(m)
    return PiezoBlocks(eye, np.zeros((m, m)), eye, eye, np.zeros((m, m)), m0=m), \
        PiezoConstants(c=0.4, d=2.0, nu0=0.5)


def _set_coupled(m):
    rng = np.random.default_rng(2024)
    skew = rng.standard_normal((m, m))
    blocks = PiezoBlocks(
        C=_spd(rng, m, 1.0, 2.0),
        e=0.3 * rng.standard_normal((m, m)),
        eps=_spd(rng, m, 1.0, 2.0),
        mu=_spd(rng, m, 1.0, 1.5),
        sigma=0.5 * np.eye(m) + 0.1 * (skew - skew.T),
        m0=m,
    )
    return blocks, PiezoConstants(c=0.25, d=8.0, nu0=0.5)


def _set_conductive(m):
    rng = np.random.default_rng(2025)
    blocks = PiezoBlocks(
        C=_spd(rng, m, 1.0, 1.5),
        e=0.2 * rng.standard_normal((m, m)),
        eps=np.zeros((m, m)),
        mu=_spd(rng, m, 1.0, 2.0),
        sigma=_spd(rng, m, 1.0, 2.0),
        m0=m,
    )
    return blocks, PiezoConstants(c=0.25, d=8.0, nu0=0.5)


SHIPPED_SETS = {"baseline": _set_baseline, "coupled": _set_coupled, "conductive": _set_conductive}


def shipped_set(name, block_size=3):
    if name not in SHIPPED_SETS:
        raise KeyError(f"unknown piezo parameter set {name!r}; choose from {sorted(SHIPPED_SETS)}")
    return SHIPPED_SETS[name](block_size)


# ---------------------------------------------------------------------------
# convergence
# ---------------------------------------------------------------------------

def _sym(x):
    return 0.5 * (x + x.conj().T)


def perturbation_sequence(blocks, n_values, kind="perturbation", seed=11, size=0.1):
    """Block sequences converging entrywise to ``blocks``.

    ``perturbation``: every block moves by ``s_k R/n`` with ``s_k = (-1)^k``
    for the k-th term, so sampled members lie on both sides of the limit;
    ``eps`` moves by ``+R/n`` with ``R >= 0`` to stay non-negative.
    ``oscillating``: only ``sigma`` moves, by ``s_k R/n``.
    All ``R`` are self-adjoint except the one for ``e``.
    """
    rng = np.random.default_rng(seed)
    m1, m2 = blocks.C.shape[0], blocks.eps.shape[0]
    m3 = blocks.mu.shape[0]

    def psd(n):
        g = rng.standard_normal((n, n))
        r = g @ g.T
        return size * r / op_norm(r)

    def unit(shape):
        g = rng.standard_normal(shape)
        return size * g / op_norm(g)

    r_c, r_eps, r_mu = psd(m1), psd(m2), psd(m3)
    r_e = unit((m1, m2))
    r_sigma = _sym(unit((m2, m2)))
    out = []
    for k, n in enumerate(n_values):
        sign = (-1) ** k
        if kind == "perturbation":
            out.append(replace(blocks, C=blocks.C + sign * r_c / n, e=blocks.e + sign * r_e / n,
                               eps=blocks.eps + r_eps / n, mu=blocks.mu + sign * r_mu / n,
                               sigma=blocks.sigma + sign * r_sigma / n))
        elif kind == "oscillating":
            out.append(replace(blocks, sigma=blocks.sigma + sign * r_sigma / n))
        else:
            raise ValueError(f"unknown sequence kind {kind!r}")
    return out


def resolvent_gap_bound(law_n, law, points, c_n, c):
    """``max_z |z (M_n(z) - M(z))| / (c_n c)``, a bound on the resolvent difference."""
    return max(op_norm(z * (law_n.eval(z) - law.eval(z))) for z in points) / (c_n * c)


def piezo_convergence(set_name="coupled", n_values=DEFAULT_N_VALUES, kind="perturbation",
                      block_size=3, kernel_dim=4, skew_seed=7, seed=11, probe_seed=42,
                      time_grid=None, workers=1):
    """Solution-operator gaps for entrywise-convergent block sequences.

    Thresholds are the resolvent bounds of :func:`resolvent_gap_bound` at the
    last ``n``, on the half-plane grid (frequency gaps) and on the solve
    frequencies (time gaps, unit-norm probe signals).
    """
    blocks, constants = shipped_set(set_name, block_size)
    time_grid = TimeGrid(0.0, 1 / 8, 256, 1.0) if time_grid is None else time_grid
    hgrid = HalfPlaneGrid.default(constants.nu0)
    limit = assemble_piezo(blocks, constants, kernel_dim, skew_seed, grid=hgrid)
    seq_blocks = perturbation_sequence(blocks, n_values, kind, seed)
    systems = [assemble_piezo(b, constants, kernel_dim, skew_seed, grid=hgrid) for b in seq_blocks]
    laws = [s.law for s in systems]

    probes = ProbeSet.standard(blocks.dim, seed=probe_seed)
    signals = default_time_probes(time_grid, probes.phi.T[:8])

    c_lim = picard_coercivity(limit.law, hgrid)
    c_last = picard_coercivity(laws[-1], hgrid)
    z_time = time_grid.z
    thresholds = {
        "freq": resolvent_gap_bound(laws[-1], limit.law, hgrid.points, c_last, c_lim),
        "time": resolvent_gap_bound(laws[-1], limit.law, z_time,
                                    solve_coercivity(laws[-1], time_grid),
                                    solve_coercivity(limit.law, time_grid)),
    }
    report = solution_convergence_experiment(
        laws, limit.law, limit.a_skew, limit.dec, hgrid, probes, time_grid=time_grid,
        n_values=list(n_values), thresholds=thresholds, time_probes=signals,
        label=f"piezo[{set_name},{kind}]", workers=workers,
    )
    audit = limit_coercivity_audit(report)
    report.extra.update({
        "set": set_name, "kind": kind, "constants": vars(constants),
        "audit": audit.to_json(),
    })
    report.passed = bool(report.passed and audit.passed)
    return report
