import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from evoeq.errors import DomainError, MembershipError, ShapeError, SingularBlockError
from evoeq.linop import Decomposition, op_norm, random_accretive, random_complex, schur_components
from evoeq.matlaw import (
    HalfPlaneGrid,
    Law,
    MaterialLaw,
    alt_boundedness_check,
    holomorphy_residual,
    law_from_json,
    picard_coercivity,
    schur_trajectory,
    sup_norm_estimate,
    trajectory_alpha,
)
from evoeq.models.piezo import piezo_blocks_to_laws, shipped_set
from evoeq.suites import law_families

HEAT = MaterialLaw({0: np.diag([1.0, 0.0]), -1: np.diag([0.0, 1.0])}, nu0=1.0, label="heat")
SPLIT11 = Decomposition.coordinate(1, 1)


class ConjLaw(Law):
    """``z -> conj(z) I``: not holomorphic, used to calibrate the residual."""

    def __init__(self, dim=2):
        self.dim = dim
        self.args = ()

    def _eval(self, z):
        return np.conj(z) * np.eye(self.dim)


# evaluation

def test_eval_constant():
    np.testing.assert_array_equal(MaterialLaw({0: np.eye(3)}).eval(2 + 1j), np.eye(3))


def test_eval_heat_type():
    np.testing.assert_allclose(HEAT.eval(2), np.diag([1.0, 0.5]))


def test_eval_piezo_sum():
    blocks, _ = shipped_set("baseline")
    m0, m1 = piezo_blocks_to_laws(blocks)
    law = MaterialLaw({0: m0, -1: m1}, nu0=0.5)
    np.testing.assert_allclose(law.eval(1.0), m0 + m1)


def test_eval_domain_error():
    with pytest.raises(DomainError) as exc:
        HEAT.eval(0.5 + 3j)
    assert exc.value.details["z"] == 0.5 + 3j


def test_law_shape_errors():
    with pytest.raises(ShapeError):
        MaterialLaw({0: np.eye(2), -1: np.eye(3)})
    with pytest.raises(ShapeError):
        MaterialLaw({0: np.eye(2)}) @ MaterialLaw({0: np.eye(3)})
    with pytest.raises(ValueError):
        MaterialLaw({})


def test_bounded_flag():
    assert HEAT.is_bounded
    assert not HEAT.times_z().is_bounded


# derivatives

def test_derivative_constant_is_zero():
    np.testing.assert_array_equal(MaterialLaw({0: np.eye(2)}).derivative(3.0), np.zeros((2, 2)))


def test_derivative_power_rule():
    np.testing.assert_allclose(MaterialLaw({-1: np.eye(2)}).derivative(2.0), -0.25 * np.eye(2))


def test_derivative_inverse_combinator():
    zlaw = MaterialLaw({1: np.eye(2)}, nu0=0.5)
    inv = zlaw.inv()
    h = 1e-5
    fd = (inv.eval(2 + h) - inv.eval(2 - h)) / (2 * h)
    np.testing.assert_allclose(inv.derivative(2.0), -0.25 * np.eye(2), atol=1e-15)
    assert op_norm(inv.derivative(2.0) - fd) < 1e-8


@given(st.integers(0, 2**31), st.floats(0.6, 8), st.floats(-20, 20))
def test_derivative_vs_finite_difference(seed, x, y):
    rng = np.random.default_rng(seed)
    z = complex(x, y)
    h = 1e-5
    for name, law in law_families(rng).items():
        fd = (law.eval(z + h) - law.eval(z - h)) / (2 * h)
        assert op_norm(law.derivative(z) - fd) <= 1e-7, name


@given(st.integers(0, 2**31), st.floats(0.6, 8), st.floats(-20, 20))
def test_product_rule(seed, x, y):
    rng = np.random.default_rng(seed)
    m = MaterialLaw({k: random_complex(rng, 3) for k in (-2, -1, 0)}, nu0=0.5)
    n = MaterialLaw({k: random_complex(rng, 3) for k in (-1, 0, 1)}, nu0=0.5)
    z = complex(x, y)
    rule = m.eval(z) @ n.derivative(z) + m.derivative(z) @ n.eval(z)
    assert op_norm((m @ n).derivative(z) - rule) <= 1e-10 * max(1, op_norm(rule))


def test_times_z_matches_product(rng):
    m = MaterialLaw({0: random_complex(rng, 3), -1: random_complex(rng, 3)}, nu0=0.5)
    z = 1.3 + 2j
    np.testing.assert_allclose(m.times_z().eval(z), z * m.eval(z))
    generic = Law.times_z(m)
    np.testing.assert_allclose(generic.derivative(z), m.times_z().derivative(z), atol=1e-12)


# coercivity and bounds

def test_picard_coercivity_examples():
    grid = HalfPlaneGrid(0.5, (1.0, 2.0, 5.0), (0.0, 1.0, -3.0))
    assert picard_coercivity(MaterialLaw({0: np.eye(2)}), grid) == pytest.approx(1.0)
    heat = MaterialLaw(HEAT.terms, nu0=0.5)
    assert picard_coercivity(heat, grid) == pytest.approx(1.0)
    neg = MaterialLaw({0: np.zeros((2, 2)), -1: -np.eye(2)}, nu0=0.5)
    assert picard_coercivity(neg, grid) < 0


def test_sup_norm_estimates():
    grid = HalfPlaneGrid.default(1.0)
    est = sup_norm_estimate(MaterialLaw({0: np.eye(2)}, nu0=1.0), grid)
    assert est.grid == pytest.approx(1.0) and est.analytic == pytest.approx(1.0)
    est = sup_norm_estimate(HEAT, grid)
    assert est.analytic == pytest.approx(2.0) and est.grid <= 2.0
    est = sup_norm_estimate(MaterialLaw({-1: 3 * np.eye(2)}, nu0=1.0), grid)
    assert est.analytic == pytest.approx(3.0) and est.grid <= 3.0


def test_alt_boundedness_examples():
    grid = HalfPlaneGrid.default(1.0)
    assert alt_boundedness_check(MaterialLaw({0: np.eye(2)}, nu0=1.0), 1.0, grid)
    assert not alt_boundedness_check(MaterialLaw({0: 2 * np.eye(2)}, nu0=1.0), 1.0, grid)
    assert alt_boundedness_check(MaterialLaw({0: np.diag([1.0, 1 / 3])}, nu0=1.0), 3.0, grid)


def test_alt_boundedness_singular():
    with pytest.raises(SingularBlockError):
        alt_boundedness_check(MaterialLaw({0: np.diag([1.0, 0.0])}, nu0=1.0), 1.0,
                              HalfPlaneGrid.default(1.0))


def test_default_grid_shape():
    grid = HalfPlaneGrid.default(0.5)
    assert len(grid) == 8 * 7
    assert min(grid.re_points) > 0.5
    assert max(grid.re_points) == pytest.approx(5.0)
    with pytest.raises(DomainError):
        HalfPlaneGrid(1.0, (1.0,), (0.0,))


# Schur trajectories

def test_schur_trajectory_examples():
    grid = HalfPlaneGrid(0.5, (1.0, 3.0), (0.0, 2.0))
    for _, q in schur_trajectory(MaterialLaw({0: np.eye(2)}), SPLIT11, grid):
        np.testing.assert_array_equal([x[0, 0] for x in q.as_tuple()], [1, 0, 0, 1])
    for _, q in schur_trajectory(MaterialLaw({0: [[2.0, 1.0], [1.0, 2.0]]}), SPLIT11, grid):
        np.testing.assert_allclose([x[0, 0] for x in q.as_tuple()], [0.5, 0.5, 0.5, 1.5])
    (_, q), = schur_trajectory(HEAT, SPLIT11, HalfPlaneGrid(1.0, (2.0,), (0.0,)),
                               premultiply_z=True)
    np.testing.assert_allclose([x[0, 0] for x in q.as_tuple()], [0.5, 0, 0, 1])


def test_schur_trajectory_pointwise_consistency(rng):
    dec = Decomposition.random(rng, 2, 2)
    law = MaterialLaw({0: random_accretive(rng, 4, 1.0), -1: random_complex(rng, 4)}, nu0=0.5)
    grid = HalfPlaneGrid.default(0.5)
    for z, q in schur_trajectory(law, dec, grid):
        assert q.max_abs_diff(schur_components(law.eval(z), dec)) == 0


def test_schur_trajectory_membership_error():
    law = MaterialLaw({0: np.diag([0.0, 1.0])}, nu0=1.0)
    with pytest.raises(MembershipError) as exc:
        schur_trajectory(law, SPLIT11, HalfPlaneGrid(1.0, (2.0,), (0.0,)))
    assert exc.value.details["z"] == 2


def test_converging_laws_converging_schur_components(rng):
    dec = Decomposition.random(rng, 2, 3)
    base = {0: random_accretive(rng, 5, 2.0), -1: 0.05 * random_complex(rng, 5)}
    r = random_complex(rng, 5)
    grid = HalfPlaneGrid.default(0.5)
    laws = [MaterialLaw({0: base[0] + (-1) ** n * r / (5 * n), -1: base[-1]}, nu0=0.5)
            for n in (1, 2, 4, 8, 16, 32)]
    limit = MaterialLaw(base, nu0=0.5)
    env = trajectory_alpha(laws[0], dec, grid)
    for law in laws[1:]:
        env = type(env).envelope([env, trajectory_alpha(law, dec, grid)])
    assert env.covers(trajectory_alpha(limit, dec, grid), slack=1e-8)
    gaps = [max(q.max_abs_diff(ql) for (_, q), (_, ql) in
                zip(schur_trajectory(law, dec, grid), schur_trajectory(limit, dec, grid)))
            for law in laws]
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


# holomorphy residual

def test_holomorphy_residual_examples():
    assert holomorphy_residual(MaterialLaw({0: np.eye(2)}), 2.0, 1e-4) == 0
    assert holomorphy_residual(MaterialLaw({-1: np.eye(2)}), 2.0, 1e-4) <= 1e-7
    assert holomorphy_residual(ConjLaw(), 2.0, 1e-4) == pytest.approx(1.0, rel=1e-6)


def test_holomorphy_residual_domain():
    with pytest.raises(DomainError):
        holomorphy_residual(MaterialLaw({0: np.eye(1)}, nu0=1.0), 1.05, 0.1)


# serialisation

def test_law_json_roundtrip(rng):
    for law in law_families(rng).values():
        back = law_from_json(json.loads(json.dumps(law.to_json())))
        z = 1.7 - 0.4j
        np.testing.assert_allclose(back.eval(z), law.eval(z), rtol=1e-14)


def test_law_json_unknown_combinator():
    with pytest.raises(ValueError):
        law_from_json({"op": "pow", "args": []})
