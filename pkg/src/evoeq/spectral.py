"""Discrete exponentially weighted L2 space, Fourier-Laplace transform and
the Picard solution operator.

The real line is truncated to ``[t0, t0 + n*dt)``. A signal ``f`` is stored
by its samples; the weighted norm is

    |f|_nu^2 = sum_j |f(t_j)|^2 exp(-2 nu t_j) dt .

The transform multiplies by ``exp(-nu t)`` and applies a DFT scaled so that
the discrete Plancherel identity ``|L f|_{L2} = |f|_nu`` is exact, with
``L2`` measured by ``sum_k |F_k|^2 dxi``. Frequencies are stored centred,
``xi_k = 2 pi k / (n dt)`` for ``k = -n/2, ..., n/2 - 1``.

Operators of the functional calculus act by pointwise multiplication at
``z_k = i xi_k + nu``.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.special import erf
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._parallel import pmap
from ._validation import check_operator, check_positive
from .errors import (
    AliasingError,
    DomainError,
    InternalConsistencyError,
    ShapeError,
    SolverError,
    WellPosednessError,
)
from .linop import Decomposition, check_skew, hermitian_part, perturbed_block_inverse

#: Fraction of spectral energy allowed in the top octave before
#: differentiation is refused.
BAND_LIMIT_TOL = 1e-6
_SQRT_2PI = np.sqrt(2 * np.pi)
_CHUNK_ENTRIES = 2_000_000


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_j = t0 + j dt``, ``j < n_steps``, with weight exponent ``nu``."""

    t0: float = 0.0
    dt: float = 1.0 / 32
    n_steps: int = 1024
    nu: float = 1.0

    def __post_init__(self):
        check_positive(self.dt, "dt")
        check_positive(self.nu, "nu")
        n = self.n_steps
        if not isinstance(n, (int, np.integer)) or n < 8 or n & (n - 1):
            raise ValueError(f"n_steps must be a power of two >= 8, got {n!r}")
        if self.nu * self.window < 16:
            raise ValueError(
                f"nu * n_steps * dt = {self.nu * self.window:g} < 16: "
                "wraparound would not be damped"
            )

    @property
    def window(self):
        return self.n_steps * self.dt

    @property
    def t(self):
        return self.t0 + self.dt * np.arange(self.n_steps)

    @property
    def xi(self):
        k = np.arange(self.n_steps) - self.n_steps // 2
        return 2 * np.pi * k / self.window

    @property
    def z(self):
        """Spectral parameters ``i xi_k + nu``."""
        return 1j * self.xi + self.nu

    @property
    def dxi(self):
        return 2 * np.pi / self.window

    @property
    def weight(self):
        return np.exp(-self.nu * self.t)

    def to_json(self):
        return {"t0": self.t0, "dt": self.dt, "n_steps": int(self.n_steps), "nu": self.nu}


def _as_values(values, grid):
    arr = np.asarray(values, dtype=complex)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] != grid.n_steps:
        raise ShapeError(f"signal values must have shape ({grid.n_steps}, dim), got {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class WeightedSignal:
    """Samples of an ``H``-valued function, read as an element of L2_nu."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_values(self.values, self.grid))

    @property
    def dim(self):
        return self.values.shape[1]

    @property
    def t(self):
        return self.grid.t

    def norm(self):
        w = self.grid.weight[:, None]
        return float(np.sqrt(np.sum(np.abs(self.values * w) ** 2) * self.grid.dt))

    def inner(self, other):
        """Weighted inner product, linear in the first argument."""
        w2 = self.grid.weight[:, None] ** 2
        return complex(np.sum(self.values * other.values.conj() * w2) * self.grid.dt)

    def apply(self, op):
        """Pointwise application of a constant operator on ``H``."""
        op = check_operator(op)
        return WeightedSignal(self.grid, self.values @ op.T)

    def restrict_before(self, a):
        return WeightedSignal(self.grid, self.values * (self.t < a)[:, None])

    def __add__(self, other):
        return WeightedSignal(self.grid, self.values + other.values)

    def __sub__(self, other):
        return WeightedSignal(self.grid, self.values - other.values)

    def __mul__(self, scalar):
        return WeightedSignal(self.grid, self.values * scalar)

    __rmul__ = __mul__

    def to_json(self):
        return {
            "grid": self.grid.to_json(),
            "re": self.values.real.tolist(),
            "im": self.values.imag.tolist(),
        }

    @classmethod
    def from_json(cls, obj):
        grid = TimeGrid(**obj["grid"])
        return cls(grid, np.asarray(obj["re"]) + 1j * np.asarray(obj["im"]))

    def to_csv(self):
        """Columns ``t``, then ``re_i, im_i`` interleaved per coordinate."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["t"]
        for i in range(self.dim):
            header += [f"re_{i}", f"im_{i}"]
        writer.writerow(header)
        for tj, row in zip(self.t, self.values):
            cells = [format(tj, ".17g")]
            for v in row:
                cells += [format(v.real, ".17g"), format(v.imag, ".17g")]
            writer.writerow(cells)
        return buf.getvalue()


@dataclass(frozen=True, eq=False)
class SpectralSignal:
    """Fourier-Laplace image, sampled at the centred frequencies ``grid.xi``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_values(self.values, self.grid))

    @property
    def xi(self):
        return self.grid.xi

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.dxi))


# ---------------------------------------------------------------------------
# transforms
# ---------------------------------------------------------------------------

def _forward(values, grid):
    """Transform along axis 0; trailing axes are carried along."""
    shape = (-1,) + (1,) * (values.ndim - 1)
    g = values * grid.weight.reshape(shape)
    spec = np.fft.fftshift(np.fft.fft(g, axis=0), axes=0)
    phase = np.exp(-1j * grid.xi * grid.t0) * (grid.dt / _SQRT_2PI)
    return spec * phase.reshape(shape)


def _backward(spec, grid):
    shape = (-1,) + (1,) * (spec.ndim - 1)
    phase = np.exp(1j * grid.xi * grid.t0) * (_SQRT_2PI / grid.dt)
    g = np.fft.ifft(np.fft.ifftshift(spec * phase.reshape(shape), axes=0), axis=0)
    return g / grid.weight.reshape(shape)


def fourier_laplace(f):
    """``L_nu f``: weight by ``exp(-nu t)``, then a unitary DFT."""
    return SpectralSignal(f.grid, _forward(f.values, f.grid))


def inverse_fourier_laplace(spec):
    return WeightedSignal(spec.grid, _backward(spec.values, spec.grid))


def top_octave_fraction(f):
    """Share of spectral energy at ``|xi| >= pi / (2 dt)``."""
    spec = _forward(f.values, f.grid)
    energy = np.sum(np.abs(spec) ** 2, axis=1)
    total = energy.sum()
    if total == 0:
        return 0.0
    top = np.abs(f.grid.xi) >= np.pi / (2 * f.grid.dt)
    return float(energy[top].sum() / total)


def check_band_limit(f, what="signal"):
    frac = top_octave_fraction(f)
    if frac >= BAND_LIMIT_TOL:
        raise AliasingError(
            f"{what} is not band-limited: top-octave energy fraction {frac:.3e}",
            fraction=frac,
        )
    return frac


def td_apply(f):
    """Time derivative ``L* (i m + nu) L`` applied to a band-limited signal."""
    check_band_limit(f)
    spec = _forward(f.values, f.grid) * f.grid.z[:, None]
    return WeightedSignal(f.grid, _backward(spec, f.grid))


def td_inverse(f):
    """``t -> int_{t0}^t f(s) ds`` by cumulative trapezoid.

    For band-limited input the Euler-Maclaurin end corrections through
    ``dt^6`` are added, with the odd derivatives of ``f`` taken
    spectrally; that makes the rule agree with division by ``i xi + nu``
    far below the band-limit tolerance. Rough input gets the plain rule,
    since the corrections presume smoothness.
    """
    v, dt = f.values, f.grid.dt
    out = np.zeros_like(v)
    out[1:] = np.cumsum(0.5 * (v[1:] + v[:-1]), axis=0) * dt
    if top_octave_fraction(f) < BAND_LIMIT_TOL:
        spec = _forward(v, f.grid)
        z = f.grid.z[:, None]
        for order, coef in ((1, -1 / 12), (3, 1 / 720), (5, -1 / 30240)):
            deriv = _backward(spec * z**order, f.grid)
            out += coef * dt ** (order + 1) * (deriv - deriv[0])
    return WeightedSignal(f.grid, out)


def _check_nu(law, grid):
    if not grid.nu > law.nu0:
        raise DomainError(f"nu = {grid.nu} must exceed the law's nu0 = {law.nu0}")


def _chunks(n, dim):
    size = max(1, min(n, _CHUNK_ENTRIES // max(1, dim * dim)))
    return [slice(i, min(i + size, n)) for i in range(0, n, size)]


def matlaw_apply(law, f, workers=1):
    """``M(d/dt) f``: multiply each frequency slice by ``M(i xi_k + nu)``."""
    grid = f.grid
    _check_nu(law, grid)
    if law.dim != f.dim:
        raise ShapeError(f"law of size {law.dim} applied to signal of dim {f.dim}")
    spec = _forward(f.values, grid)
    zs = grid.z

    def work(sl):
        return np.stack([law.eval(z) @ s for z, s in zip(zs[sl], spec[sl])])

    out = np.concatenate(pmap(work, _chunks(grid.n_steps, law.dim), workers))
    return WeightedSignal(grid, _backward(out, grid))


# ---------------------------------------------------------------------------
# Picard solver
# ---------------------------------------------------------------------------

def _stack_rhs(f):
    """Accept one signal or a list of signals; return (grid, (n, dim, m), single)."""
    single = isinstance(f, WeightedSignal)
    signals = [f] if single else list(f)
    if not signals:
        raise ValueError("no right-hand sides given")
    grid = signals[0].grid
    if any(s.grid != grid for s in signals):
        raise ShapeError("right-hand sides live on different time grids")
    return grid, np.stack([s.values for s in signals], axis=-1), single


def _solve_frequencies(law, a, grid, rhs_spec, method, dec, workers):
    zs = grid.z

    def work(sl):
        t = np.stack([z * law.eval(z) for z in zs[sl]])
        if method == "schur":
            return np.stack([perturbed_block_inverse(tk, a, dec) @ r
                             for tk, r in zip(t, rhs_spec[sl])])
        try:
            return np.linalg.solve(t + a, rhs_spec[sl])
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular frequency slice in xi range "
                              f"[{zs[sl][0].imag:g}, {zs[sl][-1].imag:g}]") from exc

    return np.concatenate(pmap(work, _chunks(grid.n_steps, law.dim), workers))


def hermitian_part_batch(t):
    return 0.5 * (t + np.conj(np.swapaxes(t, -1, -2)))


def coercivity_profile(law, grid, workers=1):
    """``lambda_min Re (z_k M(z_k))`` at every solve frequency.

    For laws with real coefficients the value at ``-xi`` is the complex
    conjugate problem of the one at ``xi``, so only ``xi <= 0`` is solved.
    """
    _check_nu(law, grid)
    n = grid.n_steps
    todo = np.arange(n // 2 + 1) if law.is_real else np.arange(n)

    def work(idx):
        t = np.stack([z * law.eval(z) for z in grid.z[idx]])
        return np.linalg.eigvalsh(hermitian_part_batch(t))[:, 0]

    chunks = [todo[sl] for sl in _chunks(len(todo), law.dim)]
    lows = np.empty(n)
    lows[todo] = np.concatenate(pmap(work, chunks, workers))
    if law.is_real:
        k = np.arange(n // 2 + 1, n)
        lows[k] = lows[n - k]
    return lows


def solve_coercivity(law, grid, workers=1):
    """``min_k lambda_min Re (z_k M(z_k))`` over the solve frequencies."""
    return float(coercivity_profile(law, grid, workers).min())


def evo_solve(law, a_skew, dec, f, method="lu", workers=1, return_coercivity=False):
    """Solve ``(d/dt M(d/dt) + A) U = f`` frequency by frequency.

    Parameters
    ----------
    law : Law
    a_skew : array, anti-hermitian
    dec : Decomposition or None
        Needed only for ``method="schur"``, which assembles each slice
        inverse blockwise instead of by LU.
    f : WeightedSignal or list of WeightedSignal
    method : {"lu", "schur"}

    Returns the solution(s) in the same form as ``f``; with
    ``return_coercivity`` also the constant ``c`` measured on the solve
    frequencies.
    """
    grid, rhs, single = _stack_rhs(f)
    _check_nu(law, grid)
    a = check_skew(a_skew)
    if a.shape != (law.dim, law.dim) or rhs.shape[1] != law.dim:
        raise ShapeError(f"law dim {law.dim}, A {a.shape}, signal dim {rhs.shape[1]}")
    if method not in ("lu", "schur"):
        raise ValueError(f"unknown method {method!r}")
    if method == "schur" and dec is None:
        dec = Decomposition.from_kernel(a)

    lower = coercivity_profile(law, grid, workers)
    c = float(lower.min())
    if not c > 0:
        k = int(np.argmin(lower))
        raise WellPosednessError(
            f"Re zM(z) >= c > 0 fails: c = {c:.6g} at xi = {grid.xi[k]:g}",
            c=c, xi=float(grid.xi[k]),
        )
    sol_spec = _solve_frequencies(law, a, grid, _forward(rhs, grid), method, dec, workers)
    sol = _backward(sol_spec, grid)
    out = [WeightedSignal(grid, sol[..., j]) for j in range(sol.shape[-1])]
    for fj, uj in zip(_stack_signals(grid, rhs), out):
        bound = fj.norm() / c
        if uj.norm() > bound * (1 + 1e-9) + 1e-300:
            raise InternalConsistencyError(
                f"|U|_nu = {uj.norm():.12g} exceeds |f|_nu / c = {bound:.12g}",
                certificate="evo_solve.norm_bound", inequality="|S| <= 1/c",
            )
    result = out[0] if single else out
    return (result, c) if return_coercivity else result


def _stack_signals(grid, rhs):
    return [WeightedSignal(grid, rhs[..., j]) for j in range(rhs.shape[-1])]


def evo_apply(law, a_skew, u, workers=1):
    """Forward operator ``(d/dt M(d/dt) + A) u``, evaluated spectrally."""
    grid = u.grid
    _check_nu(law, grid)
    a = check_operator(a_skew, square=True)
    spec = _forward(u.values, grid)
    zs = grid.z

    def work(sl):
        return np.stack([(z * law.eval(z) + a) @ s for z, s in zip(zs[sl], spec[sl])])

    out = np.concatenate(pmap(work, _chunks(grid.n_steps, law.dim), workers))
    return WeightedSignal(grid, _backward(out, grid))


def causality_defect(u, a, f=None):
    """``|U 1_{t<a}|_nu / |U|_nu``; ``0`` for the zero signal.

    If the input ``f`` is passed, it is checked to vanish before ``a``.
    """
    if f is not None and np.any(f.values[f.t < a]):
        raise ValueError(f"input does not vanish before a = {a}")
    total = u.norm()
    if total == 0:
        return 0.0
    return u.restrict_before(a).norm() / total


# ---------------------------------------------------------------------------
# signal factories
# ---------------------------------------------------------------------------

def mollified_indicator(t, a, b, scale):
    """``1_[a,b]`` convolved with a Gaussian of standard deviation ``scale``."""
    s = np.sqrt(2) * scale
    return 0.5 * (erf((t - a) / s) - erf((t - b) / s))


def causal_pulse(t, a, length, scale):
    """Mollified indicator starting ``8 * scale`` after ``a``; exactly 0 before ``a``."""
    start = a + 8 * scale
    return np.where(t >= a, mollified_indicator(t, start, start + length, scale), 0.0)


def gaussian_bump(t, center, width):
    return np.exp(-0.5 * ((t - center) / width) ** 2)


def random_band_limited(grid, dim, rng, start=None, n_bumps=3, span=4.0,
                        widths=(0.25, 0.5)):
    """Sum of random Gaussian bumps with complex vector amplitudes.

    Bump centres lie ten widths or more after ``start`` (default: the
    grid start) and samples before ``start`` are set exactly to zero.
    Keeping the support early in the window keeps DFT wraparound of
    non-decaying responses below ``exp(-nu * (window - t))``.
    """
    t = grid.t
    start = grid.t0 if start is None else start
    values = np.zeros((grid.n_steps, dim), dtype=complex)
    for _ in range(n_bumps):
        width = rng.uniform(*widths)
        center = start + 10 * width + rng.uniform(0, span)
        amp = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        values += gaussian_bump(t, center, width)[:, None] * amp[None, :]
    values[t < start] = 0.0
    return WeightedSignal(grid, values)


# ---------------------------------------------------------------------------
# estimator wrappers
# ---------------------------------------------------------------------------

def _as_signals(x, grid):
    if isinstance(x, WeightedSignal):
        return x, "signal"
    if isinstance(x, (list, tuple)) and x and isinstance(x[0], WeightedSignal):
        return list(x), "list"
    arr = np.asarray(x)
    if arr.ndim == 3:
        return [WeightedSignal(grid, v) for v in arr], "array3"
    return WeightedSignal(grid, arr), "array2"


def _restore(signals, kind):
    if kind == "signal":
        return signals
    if kind == "list":
        return signals
    if kind == "array3":
        return np.stack([s.values for s in signals])
    return signals.values


class MaterialLawOperator(TransformerMixin, BaseEstimator):
    """``M(d/dt)`` as a transformer on sampled signals."""

    def __init__(self, law=None, time_grid=None, workers=1):
        self.law = law
        self.time_grid = time_grid
        self.workers = workers

    def fit(self, X=None, y=None):
        grid = self.time_grid or TimeGrid()
        _check_nu(self.law, grid)
        self.grid_ = grid
        return self

    def transform(self, X):
        check_is_fitted(self, "grid_")
        signals, kind = _as_signals(X, self.grid_)
        many = signals if isinstance(signals, list) else [signals]
        out = [matlaw_apply(self.law, s, self.workers) for s in many]
        return _restore(out if isinstance(signals, list) else out[0], kind)


class PicardSolver(TransformerMixin, BaseEstimator):
    """Solution operator ``(d/dt M(d/dt) + A)^-1`` as a transformer.

    ``fit`` validates the data and measures the Picard constant on the
    solve frequencies (``coercivity_``); ``transform`` solves, and
    ``inverse_transform`` applies the forward operator.
    """

    def __init__(self, law=None, a_skew=None, dec=None, time_grid=None,
                 method="lu", workers=1):
        self.law = law
        self.a_skew = a_skew
        self.dec = dec
        self.time_grid = time_grid
        self.method = method
        self.workers = workers

    def fit(self, X=None, y=None):
        grid = self.time_grid or TimeGrid()
        a = np.zeros((self.law.dim, self.law.dim)) if self.a_skew is None else self.a_skew
        self.a_ = check_skew(a)
        c = solve_coercivity(self.law, grid)
        if not c > 0:
            raise WellPosednessError(f"Re zM(z) >= c > 0 fails: c = {c:.6g}", c=c)
        self.grid_ = grid
        self.coercivity_ = c
        return self

    def transform(self, X):
        check_is_fitted(self, "coercivity_")
        signals, kind = _as_signals(X, self.grid_)
        out = evo_solve(self.law, self.a_, self.dec, signals,
                        method=self.method, workers=self.workers)
        return _restore(out, kind)

    def inverse_transform(self, X):
        check_is_fitted(self, "coercivity_")
        signals, kind = _as_signals(X, self.grid_)
        many = signals if isinstance(signals, list) else [signals]
        out = [evo_apply(self.law, self.a_, s, self.workers) for s in many]
        return _restore(out if isinstance(signals, list) else out[0], kind)
