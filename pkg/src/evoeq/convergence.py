"""Weak-operator and nonlocal-H convergence diagnostics.

Weak-operator convergence is probed by a finite set of unit vector pairs
``(phi, psi)``; the gap of two operators is ``max |<(T1 - T2) phi, psi>|``.
Nonlocal-H gaps apply the same probes to the four Schur components after
embedding them back into ``H`` through the decomposition bases, so the
probes are vectors of ``H`` and the gaps do not depend on which
orthonormal bases span ``H0`` and ``H1``.
"""

import csv
import io
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._parallel import pmap
from ._validation import check_operator, check_positive
from .errors import HypothesisError, ShapeError
from .linop import hermitian_lower_bound, schur_components
from .matlaw import picard_coercivity, sup_norm_estimate
from .spectral import TimeGrid, WeightedSignal, evo_solve, gaussian_bump, mollified_indicator

COMPONENTS = ("a", "b", "c", "d")
#: Gaps at or below this multiple of the operator scale count as zero.
ZERO_GAP = 1e-13


def _unit_columns(x):
    norms = np.linalg.norm(x, axis=0)
    if np.any(norms == 0):
        raise ValueError("probe vectors must be nonzero")
    return x / norms


class ProbeSet:
    """Unit vector pairs ``(phi_k, psi_k)`` stored as matrix columns.

    Use :meth:`standard` for the seeded default (canonical basis pairs up
    to a cap plus complex Gaussian pairs) or :meth:`from_vectors` for
    custom probes such as smooth fields.
    """

    def __init__(self, phi, psi, seed=None, label=""):
        phi = np.atleast_2d(np.asarray(phi, dtype=complex))
        psi = np.atleast_2d(np.asarray(psi, dtype=complex))
        if phi.shape[1] != psi.shape[1]:
            raise ShapeError("phi and psi must hold the same number of probes")
        self.phi = _unit_columns(phi)
        self.psi = _unit_columns(psi)
        self.seed = seed
        self.label = label

    @classmethod
    def standard(cls, dim_in, dim_out=None, seed=42, n_gauss=32, basis_cap=16):
        dim_out = dim_in if dim_out is None else dim_out
        ni, no = min(dim_in, basis_cap), min(dim_out, basis_cap)
        ii, jj = np.meshgrid(np.arange(ni), np.arange(no), indexing="ij")
        phi_b = np.zeros((dim_in, ii.size), dtype=complex)
        psi_b = np.zeros((dim_out, ii.size), dtype=complex)
        phi_b[ii.ravel(), np.arange(ii.size)] = 1
        psi_b[jj.ravel(), np.arange(ii.size)] = 1
        rng = np.random.default_rng(seed)
        phi_g = rng.standard_normal((dim_in, n_gauss)) + 1j * rng.standard_normal((dim_in, n_gauss))
        psi_g = rng.standard_normal((dim_out, n_gauss)) + 1j * rng.standard_normal((dim_out, n_gauss))
        return cls(np.hstack([phi_b, phi_g]), np.hstack([psi_b, psi_g]), seed=seed, label="standard")

    @classmethod
    def from_vectors(cls, phis, psis=None, label="custom"):
        """All pairs from two lists of vectors (``psis`` defaults to ``phis``)."""
        phis = np.asarray(phis, dtype=complex)
        psis = phis if psis is None else np.asarray(psis, dtype=complex)
        i, j = np.meshgrid(np.arange(len(phis)), np.arange(len(psis)), indexing="ij")
        return cls(phis[i.ravel()].T, psis[j.ravel()].T, label=label)

    @property
    def dim_in(self):
        return self.phi.shape[0]

    @property
    def dim_out(self):
        return self.psi.shape[0]

    def __len__(self):
        return self.phi.shape[1]

    def pairings(self, t):
        """``<T phi_k, psi_k>`` for every probe."""
        return np.einsum("ik,ik->k", self.psi.conj(), t @ self.phi)


@dataclass
class WotReport:
    per_probe_gaps: np.ndarray
    sup_gap: float
    labels: tuple = ()

    def to_json(self):
        return {"sup_gap": self.sup_gap, "per_probe_gaps": self.per_probe_gaps.tolist(),
                "labels": list(self.labels)}


def wot_gap(t1, t2, probes, labels=()):
    """Probe-wise ``|<(T1 - T2) phi, psi>|`` and its maximum."""
    t1 = check_operator(t1, name="t1")
    t2 = check_operator(t2, name="t2")
    if t1.shape != t2.shape:
        raise ShapeError(f"operator shapes differ: {t1.shape} vs {t2.shape}")
    if t1.shape != (probes.dim_out, probes.dim_in):
        raise ShapeError(f"operators {t1.shape} do not match probes "
                         f"({probes.dim_out}, {probes.dim_in})")
    gaps = np.abs(probes.pairings(t1 - t2))
    return WotReport(gaps, float(gaps.max()), tuple(labels))


def embedded_components(m, dec):
    """Schur components of ``m`` as operators on ``H``, keyed a, b, c, d."""
    q = schur_components(m, dec)
    b0, b1 = dec.basis0, dec.basis1
    return {
        "a": b0 @ q.a @ b0.conj().T,
        "b": b0 @ q.b @ b1.conj().T,
        "c": b1 @ q.c @ b0.conj().T,
        "d": b1 @ q.d @ b1.conj().T,
    }


@dataclass
class NlhReport:
    """Component gaps per grid point; ``entries`` holds ``(z, {name: WotReport})``."""

    entries: list
    worst_gap: float

    def component_worst(self):
        return {k: max(r[k].sup_gap for _, r in self.entries) for k in COMPONENTS}

    def to_json(self):
        return {
            "worst_gap": self.worst_gap,
            "points": [
                {"z": [z.real, z.imag], **{k: rep[k].sup_gap for k in COMPONENTS}}
                for z, rep in self.entries
            ],
        }


def _nlh_entry(m1, m2, dec, probes):
    c1 = embedded_components(m1, dec)
    c2 = embedded_components(m2, dec)
    return {k: wot_gap(c1[k], c2[k], probes, labels=(k,)) for k in COMPONENTS}


def nlh_gap(m1, m2, dec, probes):
    """Weak-operator gaps of the four Schur components at a single operator pair."""
    entry = _nlh_entry(m1, m2, dec, probes)
    return NlhReport([(None, entry)], max(r.sup_gap for r in entry.values()))


def parameterised_nlh_gap(law1, law2, dec, grid, probes, premultiply_z=False, workers=1):
    """:func:`nlh_gap` of ``M1(z), M2(z)`` (or ``z M1(z), z M2(z)``) at each grid point."""
    def work(z):
        s = z if premultiply_z else 1.0
        return z, _nlh_entry(s * law1.eval(z), s * law2.eval(z), dec, probes)

    entries = pmap(work, list(grid.points), workers)
    worst = max(r.sup_gap for _, rep in entries for r in rep.values())
    return NlhReport(entries, worst)


# ---------------------------------------------------------------------------
# end-to-end experiment
# ---------------------------------------------------------------------------

def default_time_probes(time_grid, vectors, scale=None):
    """Eight unit-norm probe signals: four mollified indicators, four Gaussian bumps.

    ``vectors`` supplies spatial profiles, cycled if fewer than eight.
    Supports sit early in the window to keep wraparound small.
    """
    vectors = [np.asarray(v, dtype=complex) for v in vectors]
    t = time_grid.t
    t0 = time_grid.t0
    scale = 4 * time_grid.dt if scale is None else scale
    out = []
    for k in range(8):
        v = vectors[k % len(vectors)]
        if k < 4:
            start = t0 + 8 * scale + 0.5 * k
            profile = mollified_indicator(t, start, start + 1.0 + 0.5 * k, scale)
        else:
            width = 0.5 + 0.125 * (k - 4)
            profile = gaussian_bump(t, t0 + 8 * width + 0.5 * (k - 4), width)
        sig = WeightedSignal(time_grid, profile[:, None] * v[None, :])
        out.append(sig * (1.0 / sig.norm()))
    return out


def _fit_slope(n_values, gaps):
    n = np.asarray(n_values, dtype=float)
    g = np.asarray(gaps, dtype=float)
    keep = g > 0
    if keep.sum() < 2:
        return None
    return float(np.polyfit(np.log(n[keep]), np.log(g[keep]), 1)[0])


def _trend_pass(gaps, slope, threshold, scale):
    gaps = np.asarray(gaps)
    if np.all(gaps <= ZERO_GAP * scale):
        return True
    return slope is not None and slope < 0 and gaps[-1] <= threshold


@dataclass
class ConvergenceReport:
    experiment: str
    n_values: list
    freq_points: list
    freq_gaps: list
    time_gaps: list
    slopes: dict
    thresholds: dict
    passed: bool
    hypothesis: dict
    extra: dict = field(default_factory=dict)
    laws: list = field(default_factory=list, repr=False)
    limit_law: object = field(default=None, repr=False)
    grid: object = field(default=None, repr=False)

    @property
    def freq_worst(self):
        return [max(row) for row in self.freq_gaps]

    def to_json(self):
        return {
            "experiment": self.experiment,
            "n_values": list(self.n_values),
            "freq_points": [[z.real, z.imag] for z in self.freq_points],
            "freq_gaps": [list(row) for row in self.freq_gaps],
            "freq_worst": self.freq_worst,
            "time_gaps": list(self.time_gaps),
            "slopes": dict(self.slopes),
            "thresholds": dict(self.thresholds),
            "hypothesis": dict(self.hypothesis),
            "pass": bool(self.passed),
            **self.extra,
        }

    def to_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["n", "freq_gap", "time_gap"])
        for n, fg, tg in zip(self.n_values, self.freq_worst, self.time_gaps):
            writer.writerow([format(n, ".17g"), format(fg, ".17g"), format(tg, ".17g")])
        return buf.getvalue()


def check_hypotheses(laws, grid):
    """Shared ``c = min Re zM_n(z)`` and ``d = max |M_n(z)|`` over laws and grid."""
    cs, ds = [], []
    for k, law in enumerate(laws):
        c = picard_coercivity(law, grid)
        if not c > 0:
            raise HypothesisError(
                f"law #{k} ({law.label}): Re zM(z) >= c > 0 fails on the grid, c = {c:.6g}",
                law_index=k, c=c, certificate="picard_coercivity",
                inequality="Re zM_n(z) >= c",
            )
        cs.append(c)
        ds.append(sup_norm_estimate(law, grid).grid)
    return {"c": float(min(cs)), "d": float(max(ds)),
            "c_per_law": [float(c) for c in cs], "d_per_law": [float(d) for d in ds]}


def _resolvent(law, a, z):
    return np.linalg.inv(z * law.eval(z) + a)


def solution_convergence_experiment(laws, limit_law, a_skew, dec, grid, probes,
                                    time_grid=None, n_values=None, thresholds=None,
                                    time_probes=None, label="experiment", workers=1):
    """Gaps of solution operators of ``laws`` against the one of ``limit_law``.

    Frequency side: ``wot_gap((z M_n(z) + A)^-1, (z M(z) + A)^-1)`` at every
    grid point. Time side: ``max_ij |<(S_n - S) f_i, f_j>_nu|`` over the
    probe signals. Convergence is declared when the gap curve has negative
    log-log slope and its last value is at most the threshold (or every gap
    is zero to rounding).

    ``thresholds`` is ``{"freq": x, "time": y}``; ``n_values`` labels the
    sequence (default ``1, 2, ...``).
    """
    laws = list(laws)
    if not laws:
        raise ValueError("need at least one law")
    n_values = list(range(1, len(laws) + 1)) if n_values is None else list(n_values)
    if len(n_values) != len(laws):
        raise ValueError("n_values and laws differ in length")
    thresholds = dict(thresholds or {"freq": 0.0, "time": 0.0})
    time_grid = TimeGrid(0.0, 1 / 8, 256, 1.0) if time_grid is None else time_grid
    a = check_operator(a_skew, square=True)

    hyp = check_hypotheses(laws, grid)
    limit_hyp = check_hypotheses([limit_law], grid)
    points = list(grid.points)

    limit_res = [_resolvent(limit_law, a, z) for z in points]
    scale = max(np.linalg.norm(r, 2) for r in limit_res)

    def freq_row(law):
        return [wot_gap(_resolvent(law, a, z), r0, probes).sup_gap
                for z, r0 in zip(points, limit_res)]

    freq_gaps = pmap(freq_row, laws, workers)

    if time_probes is None:
        time_probes = default_time_probes(time_grid, probes.phi.T[:8])
    u_limit = evo_solve(limit_law, a, dec, time_probes, workers=workers)

    def time_gap(law):
        u = evo_solve(law, a, dec, time_probes, workers=1)
        return max(abs((ui - u0).inner(g)) for ui, u0 in zip(u, u_limit) for g in time_probes)

    time_gaps = [float(g) for g in pmap(time_gap, laws, workers)]
    time_scale = max(u.norm() for u in u_limit)

    freq_worst = [max(row) for row in freq_gaps]
    slopes = {"freq": _fit_slope(n_values, freq_worst), "time": _fit_slope(n_values, time_gaps)}
    ok_freq = _trend_pass(freq_worst, slopes["freq"], thresholds["freq"], scale)
    ok_time = _trend_pass(time_gaps, slopes["time"], thresholds["time"], time_scale)
    return ConvergenceReport(
        experiment=label, n_values=n_values, freq_points=points, freq_gaps=freq_gaps,
        time_gaps=time_gaps, slopes=slopes, thresholds=thresholds,
        passed=bool(ok_freq and ok_time),
        hypothesis={**hyp, "limit_c": limit_hyp["c"], "limit_d": limit_hyp["d"]},
        extra={"pass_freq": bool(ok_freq), "pass_time": bool(ok_time),
               "time_grid": time_grid.to_json()},
        laws=laws, limit_law=limit_law, grid=grid,
    )


def _coercivity_pair(law, grid):
    lows_t, lows_inv = [], []
    for z in grid.points:
        value = law.eval(z)
        lows_t.append(hermitian_lower_bound(z * value))
        lows_inv.append(hermitian_lower_bound(np.linalg.inv(value)))
    return min(lows_t), min(lows_inv)


class CoercivityAudit(NamedTuple):
    c: float
    d: float
    sequence_c: float
    sequence_d: float
    passed: bool

    def to_json(self):
        return self._asdict()


def limit_coercivity_audit(report, tol=1e-8):
    """Bounds of the limit law against those shared by the sequence.

    ``c = min_z lambda_min Re z M(z)`` and ``d = min_z lambda_min Re M(z)^-1``
    for the limit law on the experiment grid; ``passed`` says whether both
    are at least the sequence minima less ``tol``.
    """
    check_positive(tol, "tol", strict=False)
    seq = [_coercivity_pair(law, report.grid) for law in report.laws]
    c_seq = min(p[0] for p in seq)
    d_seq = min(p[1] for p in seq)
    c_lim, d_lim = _coercivity_pair(report.limit_law, report.grid)
    return CoercivityAudit(float(c_lim), float(d_lim), float(c_seq), float(d_seq),
                           bool(c_lim >= c_seq - tol and d_lim >= d_seq - tol))
