"""Randomised property suites for the block-operator inequalities and the law calculus.

Each suite draws its instances from a seeded generator, checks the stated
inequality independently of the assertions inside the library routines,
and returns a :class:`SuiteResult` with pass counts and the worst margin
(bound minus measured value; negative means a violation).
"""

import time
from dataclasses import asdict, dataclass

import numpy as np

from .linop import (
    Decomposition,
    block_split,
    hermitian_lower_bound,
    invert_accretive,
    op_norm,
    perturbed_block_inverse,
    random_accretive,
    random_complex,
    random_skew,
    schur_components,
    schur_positivity_inherit,
    schur_reconstruct,
    SchurQuadruple,
    skew_on,
)
from .matlaw import MaterialLaw

DEFAULT_CASES = 1000


@dataclass
class SuiteResult:
    name: str
    inequality: str
    n_cases: int
    n_failures: int
    worst_margin: float
    tolerance: float
    seconds: float

    @property
    def passed(self):
        return self.n_failures == 0

    def to_json(self):
        return {**asdict(self), "passed": self.passed}


class _Tally:
    def __init__(self, tol):
        self.tol = tol
        self.cases = 0
        self.failures = 0
        self.worst = np.inf

    def check(self, margin):
        """``margin >= -tol`` passes; margins are bound minus measured."""
        self.cases += 1
        self.worst = min(self.worst, float(margin))
        if not margin >= -self.tol:
            self.failures += 1


def _result(name, inequality, tally, started):
    return SuiteResult(name, inequality, tally.cases, tally.failures, tally.worst,
                       tally.tol, round(time.perf_counter() - started, 6))


def _random_split(rng, max_dim):
    n = int(rng.integers(2, max_dim + 1))
    d0 = int(rng.integers(1, n))
    return Decomposition.random(rng, d0, n - d0)


def suite_accretive_inverse(seed=0, n_cases=DEFAULT_CASES, max_dim=32, tol=1e-9):
    """``|T^-1| <= 1/c`` and ``Re T^-1 >= c/|T|^2`` for ``Re T >= c``."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    norm_tally, re_tally = _Tally(tol), _Tally(tol)
    for _ in range(n_cases):
        n = int(rng.integers(1, max_dim + 1))
        c = float(rng.uniform(0.1, 2.0))
        t = random_accretive(rng, n, c)
        c_meas = hermitian_lower_bound(t)
        inv = invert_accretive(t, min(c, c_meas))
        norm_tally.check(1.0 / c_meas - op_norm(inv))
        re_tally.check(hermitian_lower_bound(inv) - c_meas / op_norm(t) ** 2)
    return [
        _result("accretive_inverse_norm", "|T^-1| <= 1/c", norm_tally, started),
        _result("accretive_inverse_real_part", "Re T^-1 >= c/|T|^2", re_tally, started),
    ]


def suite_schur_inheritance(seed=1, n_cases=DEFAULT_CASES, max_dim=32, tol=1e-9):
    """``Re T11 >= d`` and ``Re(T00 - T01 T11^-1 T10) >= d`` for ``Re T >= d``."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    tally = _Tally(tol)
    for _ in range(n_cases):
        dec = _random_split(rng, max_dim)
        d = float(rng.uniform(0.1, 2.0))
        t = random_accretive(rng, dec.total_dim, d)
        d_meas = hermitian_lower_bound(t)
        low11, low_schur = schur_positivity_inherit(t, dec, min(d, d_meas))
        tally.check(min(low11, low_schur) - d_meas)
    return [_result("schur_inheritance", "Re T11 >= d, Re(T00 - T01 T11^-1 T10) >= d", tally, started)]


def suite_block_norm(seed=2, n_cases=DEFAULT_CASES, max_dim=32, tol=1e-10):
    """``max_ij |M_ij| <= |M| <= sum_ij |M_ij|``."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    lower, upper = _Tally(tol), _Tally(tol)
    for _ in range(n_cases):
        dec = _random_split(rng, max_dim)
        m = random_complex(rng, dec.total_dim)
        norms = [op_norm(b) for b in block_split(m, dec)]
        full = op_norm(m)
        lower.check(full - max(norms))
        upper.check(sum(norms) - full)
    return [
        _result("block_norm_lower", "max_ij |M_ij| <= |M|", lower, started),
        _result("block_norm_upper", "|M| <= sum_ij |M_ij|", upper, started),
    ]


def suite_schur_bijection(seed=3, n_cases=DEFAULT_CASES, max_dim=16, tol=1e-10):
    """Round trips operator -> quadruple -> operator and back, relative residuals."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    fwd, back = _Tally(tol), _Tally(tol)
    for _ in range(n_cases):
        dec = _random_split(rng, max_dim)
        m = random_accretive(rng, dec.total_dim, 1.0)
        q = schur_components(m, dec)
        fwd.check(-op_norm(schur_reconstruct(q, dec) - m) / op_norm(m))

        quad = SchurQuadruple(
            random_accretive(rng, dec.d0, 1.0),
            random_complex(rng, dec.d0, dec.d1),
            random_complex(rng, dec.d1, dec.d0),
            random_complex(rng, dec.d1),
        )
        again = schur_components(schur_reconstruct(quad, dec), dec)
        scale = max(op_norm(x) for x in quad.as_tuple())
        back.check(-quad.max_abs_diff(again) / scale)
    return [
        _result("schur_roundtrip_operator", "reconstruct(components(M)) = M", fwd, started),
        _result("schur_roundtrip_quadruple", "components(reconstruct(q)) = q", back, started),
    ]


def suite_perturbed_inverse(seed=4, n_cases=DEFAULT_CASES, max_dim=16, tol=1e-10, bound_tol=1e-9):
    """Blockwise ``(T + A)^-1`` against dense inversion, plus its two bounds."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    agree, res_bound, graph_bound = _Tally(tol), _Tally(bound_tol), _Tally(bound_tol)
    for _ in range(n_cases):
        dec = _random_split(rng, max_dim)
        t = random_accretive(rng, dec.total_dim, 0.5)
        a = skew_on(dec, random_skew(rng, dec.d1))
        blockwise = perturbed_block_inverse(t, a, dec)
        dense = np.linalg.inv(t + a)
        agree.check(-op_norm(blockwise - dense) / op_norm(dense))

        t00, t01, t10, t11 = block_split(t, dec)
        schur = t11 - t10 @ np.linalg.solve(t00, t01)
        a11 = dec.basis1.conj().T @ a @ dec.basis1
        c = hermitian_lower_bound(schur)
        ta_inv = np.linalg.inv(schur + a11)
        res_bound.check(1.0 / c - op_norm(ta_inv))
        graph_bound.check(1.0 + op_norm(schur) / c - op_norm(a11 @ ta_inv))
    return [
        _result("perturbed_inverse_agreement", "blockwise inverse = (T + A)^-1", agree, started),
        _result("perturbed_inverse_resolvent", "|T_A^-1| <= 1/c", res_bound, started),
        _result("perturbed_inverse_graph", "|A T_A^-1| <= 1 + |S|/c", graph_bound, started),
    ]


# ---------------------------------------------------------------------------
# holomorphic calculus
# ---------------------------------------------------------------------------

def _random_laurent(rng, n, nu0, powers=(-2, -1, 0)):
    terms = {k: random_complex(rng, n) / (1 + abs(k)) for k in powers}
    return MaterialLaw(terms, nu0=nu0)


def _accretive_law(rng, n, nu0):
    """``M0 + z^-1 M1`` with ``Re M0 >= 1`` and small ``M1``: invertible on the half-plane."""
    return MaterialLaw({0: random_accretive(rng, n, 1.0),
                        -1: 0.2 * nu0 * random_complex(rng, n) / np.sqrt(n)}, nu0=nu0)


def law_families(rng, n=4, nu0=0.5):
    """Named laws covering every combinator."""
    m = _random_laurent(rng, n, nu0)
    p = _random_laurent(rng, n, nu0, powers=(-1, 0))
    inv = _accretive_law(rng, n, nu0).inv()
    return {
        "laurent": m,
        "product": m @ p,
        "inverse": inv,
        "sum": m + inv,
        "times_z": (m @ inv).times_z(),
        "nested": (inv @ _accretive_law(rng, n, nu0)).inv(),
    }


def _half_plane_points(rng, nu0, count):
    return nu0 + rng.uniform(0.1, 10.0, count) + 1j * rng.uniform(-10.0, 10.0, count)


def suite_holomorphy(seed=5, n_points=100, h=1e-5, tol=1e-7):
    """Closed-form derivatives against central differences for each law family."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    results = []
    for name, law in law_families(rng).items():
        tally = _Tally(tol)
        for z in _half_plane_points(rng, law.nu0, n_points):
            fd = (law.eval(z + h) - law.eval(z - h)) / (2 * h)
            tally.check(-op_norm(law.derivative(z) - fd))
        results.append(_result(f"derivative_{name}", "M'(z) = central difference", tally, started))
    return results


def suite_product_inverse_rules(seed=6, n_points=100, tol=1e-10, inv_tol=1e-9):
    """``(MN)' = MN' + M'N`` and ``(M^-1)' = -M^-1 M' M^-1`` pointwise."""
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    prod_tally, inv_tally = _Tally(tol), _Tally(inv_tol)
    m = _random_laurent(rng, 4, 0.5)
    n = _random_laurent(rng, 4, 0.5, powers=(-1, 0, 1))
    a = _accretive_law(rng, 4, 0.5)
    prod, inv = m @ n, a.inv()
    for z in _half_plane_points(rng, 0.5, n_points):
        rule = m.eval(z) @ n.derivative(z) + m.derivative(z) @ n.eval(z)
        prod_tally.check(-op_norm(prod.derivative(z) - rule) / max(1.0, op_norm(rule)))
        a_inv = np.linalg.inv(a.eval(z))
        if op_norm(a_inv) <= 1e6:
            rule = -a_inv @ a.derivative(z) @ a_inv
            inv_tally.check(-op_norm(inv.derivative(z) - rule) / max(1.0, op_norm(rule)))
    return [
        _result("product_rule", "(MN)' = MN' + M'N", prod_tally, started),
        _result("inverse_rule", "(M^-1)' = -M^-1 M' M^-1", inv_tally, started),
    ]


PROPERTY_SUITES = {
    "accretive_inverse": suite_accretive_inverse,
    "schur_inheritance": suite_schur_inheritance,
    "block_norm": suite_block_norm,
    "schur_bijection": suite_schur_bijection,
    "perturbed_inverse": suite_perturbed_inverse,
    "holomorphy": suite_holomorphy,
    "product_inverse_rules": suite_product_inverse_rules,
}


def run_all(seed=0, n_cases=DEFAULT_CASES):
    """Every suite, seeded from ``seed``; list of :class:`SuiteResult`."""
    out = []
    for offset, (name, fn) in enumerate(PROPERTY_SUITES.items()):
        if name in ("holomorphy", "product_inverse_rules"):
            out.extend(fn(seed=seed + offset))
        else:
            out.extend(fn(seed=seed + offset, n_cases=n_cases))
    return out
