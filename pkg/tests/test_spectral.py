import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import erf
from sklearn.base import clone

from evoeq.errors import AliasingError, DomainError, ShapeError, WellPosednessError
from evoeq.linop import Decomposition
from evoeq.matlaw import MaterialLaw
from evoeq.models.picard import heat_model, maxwell_model, residual
from evoeq.spectral import (
    MaterialLawOperator,
    PicardSolver,
    SpectralSignal,
    TimeGrid,
    WeightedSignal,
    causal_pulse,
    causality_defect,
    check_band_limit,
    evo_apply,
    evo_solve,
    fourier_laplace,
    gaussian_bump,
    inverse_fourier_laplace,
    matlaw_apply,
    mollified_indicator,
    random_band_limited,
    td_apply,
    td_inverse,
)

GRID = TimeGrid()  # t0 = 0, dt = 1/32, 1024 steps, nu = 1
SKEW = np.array([[0.0, -1.0], [1.0, 0.0]])


def mollified_ramp(t, a, b, scale):
    """Closed-form antiderivative of :func:`mollified_indicator` from -inf."""
    s = np.sqrt(2) * scale

    def prim(x):
        return x * erf(x / s) + s / np.sqrt(np.pi) * np.exp(-(x / s) ** 2)

    return 0.5 * (prim(t - a) - prim(t - b) + (b - a))


def crank_nicolson(a, f, t0, t_end, h, m0=None):
    """``m0 u' + a u = f`` with ``u(t0) = 0``; returns samples every step ``h``."""
    dim = a.shape[0]
    m0 = np.eye(dim) if m0 is None else m0
    lhs = m0 / h + a / 2
    rhs_op = m0 / h - a / 2
    n = int(round((t_end - t0) / h))
    u = np.zeros(dim, dtype=complex)
    out = [u.copy()]
    for k in range(n):
        tk = t0 + k * h
        u = np.linalg.solve(lhs, rhs_op @ u + 0.5 * (f(tk) + f(tk + h)))
        out.append(u.copy())
    return np.array(out)


def rel(a, b):
    return (a - b).norm() / b.norm()


# grid and signals

def test_time_grid_invariants():
    with pytest.raises(ValueError):
        TimeGrid(n_steps=1000)
    with pytest.raises(ValueError):
        TimeGrid(n_steps=4, dt=8.0)
    with pytest.raises(ValueError):
        TimeGrid(dt=1 / 64, n_steps=512, nu=1.0)   # nu * window = 8
    TimeGrid(dt=1 / 64, n_steps=1024, nu=1.0)


def test_time_grid_frequencies():
    g = TimeGrid(0.0, 0.5, 8, 4.0)
    np.testing.assert_allclose(g.xi, 2 * np.pi * np.arange(-4, 4) / 4.0)
    assert g.dxi == pytest.approx(np.pi / 2)


def test_signal_shape_check():
    with pytest.raises(ShapeError):
        WeightedSignal(GRID, np.zeros((10, 2)))


def test_signal_json_roundtrip(rng):
    f = random_band_limited(GRID, 2, rng)
    back = WeightedSignal.from_json(f.to_json())
    np.testing.assert_array_equal(back.values, f.values)


def test_signal_csv_layout(rng):
    f = random_band_limited(TimeGrid(0.0, 0.5, 32, 1.0), 2, rng)
    lines = f.to_csv().splitlines()
    assert lines[0] == "t,re_0,im_0,re_1,im_1"
    assert len(lines) == 33
    cells = lines[5].split(",")
    assert float(cells[0]) == 2.0
    assert float(cells[3]) == f.values[4, 1].real


# transform

def test_zero_transform():
    assert fourier_laplace(WeightedSignal(GRID, np.zeros(GRID.n_steps))).norm() == 0


def test_plancherel_random(rng):
    for _ in range(100):
        f = WeightedSignal(GRID, rng.standard_normal((GRID.n_steps, 3))
                           + 1j * rng.standard_normal((GRID.n_steps, 3)))
        spec = fourier_laplace(f)
        assert isinstance(spec, SpectralSignal)
        assert abs(spec.norm() - f.norm()) <= 1e-9 * f.norm()


def test_roundtrip_weighted(rng):
    f = random_band_limited(GRID, 2, rng)
    back = inverse_fourier_laplace(fourier_laplace(f))
    assert rel(back, f) <= 1e-10


def test_laplace_of_decaying_exponential():
    # e^{-t} 1_{t >= 0} with the jump sample set to its midpoint value 1/2
    t = GRID.t
    vals = np.exp(-t)
    vals[0] = 0.5
    spec = fourier_laplace(WeightedSignal(GRID, vals))
    xi = GRID.xi
    exact = 1 / (np.sqrt(2 * np.pi) * (1j * xi + 2))
    band = np.abs(xi) <= np.pi / (4 * GRID.dt)
    assert np.max(np.abs(spec.values[band, 0] - exact[band])) < 1e-3


def test_band_limit_check(rng):
    noise = WeightedSignal(GRID, rng.standard_normal(GRID.n_steps))
    with pytest.raises(AliasingError) as exc:
        td_apply(noise)
    assert exc.value.details["fraction"] > 1e-6
    assert check_band_limit(random_band_limited(GRID, 1, rng)) < 1e-6


# time derivative and its inverse

def test_td_apply_zero():
    assert td_apply(WeightedSignal(GRID, np.zeros(GRID.n_steps))).norm() == 0


def test_td_apply_vs_finite_difference():
    t = GRID.t
    f = WeightedSignal(GRID, gaussian_bump(t, 6.0, 1.0))
    d = td_apply(f)
    fd = np.zeros_like(t)
    fd[1:-1] = (f.values[2:, 0].real - f.values[:-2, 0].real) / (2 * GRID.dt)
    assert (d - WeightedSignal(GRID, fd)).norm() < 1e-4
    # away from the window start the spectral derivative is exact to rounding
    late = WeightedSignal(GRID, gaussian_bump(t, 10.0, 1.0))
    exact = -(t - 10.0) * gaussian_bump(t, 10.0, 1.0)
    assert rel(td_apply(late), WeightedSignal(GRID, exact)) < 1e-9


@given(st.integers(0, 2**31))
def test_td_roundtrip(seed):
    f = random_band_limited(GRID, 2, np.random.default_rng(seed))
    assert rel(td_apply(td_inverse(f)), f) <= 1e-9


@given(st.integers(0, 2**31))
def test_td_inverse_matches_spectral_division(seed):
    f = random_band_limited(GRID, 2, np.random.default_rng(seed))
    spectral = matlaw_apply(MaterialLaw({-1: np.eye(2)}), f)
    assert rel(td_inverse(f), spectral) <= 1e-6


def test_td_inverse_zero():
    assert td_inverse(WeightedSignal(GRID, np.zeros(GRID.n_steps))).norm() == 0


def test_td_inverse_exact_indicator():
    grid = TimeGrid(-4.0, 1 / 32, 1024, 1.0)
    t = grid.t
    f = WeightedSignal(grid, ((t >= 0) & (t <= 1)).astype(float))
    ramp = np.clip(t, 0, 1)
    assert np.max(np.abs(td_inverse(f).values[:, 0] - ramp)) <= grid.dt


def test_td_inverse_mollified_indicator():
    grid = TimeGrid(-4.0, 1 / 32, 1024, 1.0)
    t = grid.t
    scale = 4 * grid.dt
    f = WeightedSignal(grid, mollified_indicator(t, 0.0, 1.0, scale))
    u = td_inverse(f)
    ramp = WeightedSignal(grid, mollified_ramp(t, 0.0, 1.0, scale))
    assert rel(u, ramp) < 1e-9
    # pointwise only where the weight has not amplified the wrap error
    early = t <= 8.0
    err = np.abs(u.values[:, 0] - np.clip(t, 0, 1))[early]
    assert err.max() < 0.06
    far = ((np.abs(t) > 4 * scale) & (np.abs(t - 1) > 4 * scale))[early]
    assert err[far].max() < 1e-6


def test_td_inverse_norm_bound(rng):
    worst = 0.0
    for _ in range(100):
        f = WeightedSignal(GRID, rng.standard_normal((GRID.n_steps, 2)))
        worst = max(worst, td_inverse(f).norm() / f.norm())
    assert worst <= 1 / GRID.nu + 1e-6


# material-law functional calculus

def test_matlaw_apply_identity_and_scalar(rng):
    f = random_band_limited(GRID, 2, rng)
    assert rel(matlaw_apply(MaterialLaw({0: np.eye(2)}), f), f) < 1e-13
    out = matlaw_apply(MaterialLaw({0: 3 * np.eye(2)}), f)
    assert rel(out, 3 * f) < 1e-13


def test_matlaw_apply_domain_error(rng):
    with pytest.raises(DomainError):
        matlaw_apply(MaterialLaw({0: np.eye(1)}, nu0=2.0), random_band_limited(GRID, 1, rng))


def test_matlaw_apply_dim_mismatch(rng):
    with pytest.raises(ShapeError):
        matlaw_apply(MaterialLaw({0: np.eye(3)}), random_band_limited(GRID, 2, rng))


# Picard solver

def test_solve_zero():
    law = MaterialLaw({0: np.eye(2)})
    u = evo_solve(law, np.zeros((2, 2)), None, WeightedSignal(GRID, np.zeros((GRID.n_steps, 2))))
    assert u.norm() == 0


def test_solve_identity_law_gives_ramp():
    grid = TimeGrid(-4.0, 1 / 32, 1024, 1.0)
    t = grid.t
    scale = 4 * grid.dt
    v = np.array([1.0, -2.0j])
    f = WeightedSignal(grid, mollified_indicator(t, 0.0, 1.0, scale)[:, None] * v)
    u = evo_solve(MaterialLaw({0: np.eye(2)}), np.zeros((2, 2)), None, f)
    expected = WeightedSignal(grid, mollified_ramp(t, 0.0, 1.0, scale)[:, None] * v)
    assert rel(u, expected) < 1e-4
    assert np.max(np.abs(u.values - expected.values)) < 1e-4


def test_solve_vs_crank_nicolson():
    grid = TimeGrid(0.0, 1 / 32, 1024, 1.0)
    centre, width = 5.0, 0.5
    v = np.array([1.0, 0.5])

    def src(tt):
        return gaussian_bump(tt, centre, width) * v

    f = WeightedSignal(grid, src(grid.t[:, None]))
    u = evo_solve(MaterialLaw({0: np.eye(2)}), SKEW, None, f)
    ref = crank_nicolson(SKEW, src, grid.t0, grid.t[-1], grid.dt / 8)[::8]
    assert rel(u, WeightedSignal(grid, ref)) < 1e-3


def test_solve_heat_vs_crank_nicolson():
    # u' + A u = f with M(z) = diag(1,0) + z^-1 diag(0,1) read as the DAE
    # d/dt (P0 u) + P1 u + A u = f; stepped as an index-1 system.
    model = heat_model(4)
    grid = TimeGrid(0.0, 1 / 32, 1024, 1.0)
    n_u = 5
    m0 = np.diag([1.0] * n_u + [0.0] * 4)
    m1 = np.diag([0.0] * n_u + [1.0] * 4)
    vec = np.linspace(1, 2, 9)

    def src(tt):
        return gaussian_bump(tt, 5.0, 0.5) * vec

    f = WeightedSignal(grid, src(grid.t[:, None]))
    u = evo_solve(model.law, model.a_skew, model.dec, f)
    ref = crank_nicolson(model.a_skew.real + m1, src, grid.t0, grid.t[-1], grid.dt / 8, m0)[::8]
    assert rel(u, WeightedSignal(grid, ref)) < 1e-3


def test_solve_method_schur_matches_lu(rng):
    model = heat_model(8)
    f = random_band_limited(GRID, model.dim, rng)
    u_lu = evo_solve(model.law, model.a_skew, model.dec, f)
    u_s = evo_solve(model.law, model.a_skew, model.dec, f, method="schur")
    assert rel(u_s, u_lu) < 1e-10


def test_solve_well_posedness_error(rng):
    law = MaterialLaw({0: np.zeros((2, 2)), -1: -np.eye(2)})
    with pytest.raises(WellPosednessError) as exc:
        evo_solve(law, np.zeros((2, 2)), None, random_band_limited(GRID, 2, rng))
    assert exc.value.details["c"] < 0


def test_solve_unknown_method(rng):
    with pytest.raises(ValueError):
        evo_solve(MaterialLaw({0: np.eye(1)}), np.zeros((1, 1)), None,
                  random_band_limited(GRID, 1, rng), method="qr")


@pytest.mark.parametrize("factory", [heat_model, maxwell_model])
def test_solver_properties(factory, rng):
    model = factory()
    grid = TimeGrid(-8.0, 1 / 32, 1024, 1.0)
    fs = [random_band_limited(grid, model.dim, rng, start=0.0) for _ in range(10)]
    us, c = evo_solve(model.law, model.a_skew, model.dec, fs, return_coercivity=True)
    for f, u in zip(fs, us):
        assert residual(model, u, f) <= 1e-6
        assert u.norm() <= f.norm() / c + 1e-6
        assert causality_defect(u, 0.0, f) <= 1e-6
        check_band_limit(td_apply(u))
        check_band_limit(u.apply(model.a_skew))


def test_evo_apply_inverts_solve(rng):
    model = maxwell_model()
    f = random_band_limited(GRID, 2, rng)
    u = evo_solve(model.law, model.a_skew, model.dec, f)
    assert rel(evo_apply(model.law, model.a_skew, u), f) < 1e-12


def test_solve_worker_independence(rng):
    model = heat_model(8)
    fs = [random_band_limited(GRID, model.dim, rng) for _ in range(3)]
    one = evo_solve(model.law, model.a_skew, model.dec, fs, workers=1)
    four = evo_solve(model.law, model.a_skew, model.dec, fs, workers=4)
    for a, b in zip(one, four):
        np.testing.assert_array_equal(a.values, b.values)


# causality

def test_causality_zero_signal():
    assert causality_defect(WeightedSignal(GRID, np.zeros(GRID.n_steps)), 3.0) == 0.0


def test_causality_rejects_early_input(rng):
    f = random_band_limited(GRID, 1, rng)
    with pytest.raises(ValueError):
        causality_defect(f, GRID.t[-1], f)


def test_causality_heat_pulse():
    model = heat_model(8)
    a = GRID.window / 2
    vals = np.zeros((GRID.n_steps, model.dim))
    vals[:, :9] = causal_pulse(GRID.t, a, 1.0, 4 * GRID.dt)[:, None]
    f = WeightedSignal(GRID, vals)
    u = evo_solve(model.law, model.a_skew, model.dec, f)
    assert causality_defect(u, a, f) <= 1e-6


def test_causality_maxwell_pulse():
    model = maxwell_model()
    grid = TimeGrid(-8.0, 1 / 32, 1024, 1.0)
    vals = np.zeros((grid.n_steps, 2))
    vals[:, 0] = causal_pulse(grid.t, 0.0, 1.0, 4 * grid.dt)
    f = WeightedSignal(grid, vals)
    u = evo_solve(model.law, model.a_skew, model.dec, f)
    assert causality_defect(u, 0.0, f) <= 1e-6


def test_causal_pulse_support():
    t = GRID.t
    p = causal_pulse(t, 2.0, 1.0, 0.1)
    assert np.all(p[t < 2.0] == 0)
    assert p.max() == pytest.approx(1.0, abs=1e-6)


# estimator API

def test_picard_solver_estimator(rng):
    model = maxwell_model()
    est = PicardSolver(law=model.law, a_skew=model.a_skew, dec=model.dec, time_grid=GRID)
    f = random_band_limited(GRID, 2, rng)
    u = est.fit().transform(f.values)
    assert est.coercivity_ == pytest.approx(1.0)
    assert u.shape == f.values.shape
    back = WeightedSignal(GRID, est.inverse_transform(u))
    assert rel(back, f) < 1e-12
    twin = clone(est)
    assert set(twin.get_params()) == {"law", "a_skew", "dec", "time_grid", "method", "workers"}
    assert not hasattr(twin, "coercivity_")


def test_picard_solver_batch(rng):
    model = maxwell_model()
    est = PicardSolver(law=model.law, a_skew=model.a_skew, time_grid=GRID).fit()
    batch = np.stack([random_band_limited(GRID, 2, rng).values for _ in range(3)])
    assert est.transform(batch).shape == batch.shape


def test_picard_solver_rejects_ill_posed():
    law = MaterialLaw({0: np.zeros((1, 1)), -1: -np.eye(1)})
    with pytest.raises(WellPosednessError):
        PicardSolver(law=law, time_grid=GRID).fit()


def test_material_law_operator(rng):
    f = random_band_limited(GRID, 2, rng)
    op = MaterialLawOperator(law=MaterialLaw({-1: np.eye(2)}), time_grid=GRID).fit()
    out = op.transform(f)
    assert rel(out, td_inverse(f)) < 1e-6


def test_schur_path_requires_decomposition(rng):
    model = maxwell_model()
    f = random_band_limited(GRID, 2, rng)
    u = evo_solve(model.law, model.a_skew, None, f, method="schur")
    u_ref = evo_solve(model.law, model.a_skew, Decomposition.from_kernel(model.a_skew), f,
                      method="schur")
    np.testing.assert_array_equal(u.values, u_ref.values)
