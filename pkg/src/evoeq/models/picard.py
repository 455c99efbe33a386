"""Small evolutionary systems for exercising the Picard solver.

``heat``: the staggered 1-D diffusion system with unit coefficient,
``M(z) = diag(I, 0) + z^-1 diag(0, I)``.

``maxwell``: a 2x2 skew ``A = [[0, -1], [1, 0]]`` with
``M(z) = diag(eps, mu) + z^-1 diag(sigma, 0)``.
"""

import time
from dataclasses import dataclass

import numpy as np

from ..errors import AliasingError
from ..linop import Decomposition
from ..matlaw import MaterialLaw
from ..spectral import (
    TimeGrid,
    WeightedSignal,
    causal_pulse,
    causality_defect,
    check_band_limit,
    evo_solve,
    matlaw_apply,
    random_band_limited,
    td_apply,
)
from .diffusion import assemble_diffusion
from .grid import DomainGrid

#: Solve grid: 1024 steps of 1/32 with nu = 1, starting 8/nu before ``t = 0``.
DEFAULT_TIME_GRID = TimeGrid(-8.0, 1 / 32, 1024, 1.0)
#: Inputs vanish for ``t < CAUSALITY_CUT``.
CAUSALITY_CUT = 0.0


@dataclass(frozen=True, eq=False)
class EvolutionModel:
    name: str
    law: MaterialLaw
    a_skew: np.ndarray
    dec: Decomposition

    @property
    def dim(self):
        return self.law.dim

    def to_json(self):
        return {"name": self.name, "dim": self.dim, "law": self.law.to_json()}


def heat_model(n_cells=8, nu0=0.5):
    asm = assemble_diffusion(DomainGrid.line(n_cells), 1.0, nu0=nu0)
    return EvolutionModel("heat", asm.law(label="heat"), asm.a_skew, asm.dec)


def maxwell_model(eps=1.0, mu=1.0, sigma=0.5):
    a = np.array([[0.0, -1.0], [1.0, 0.0]], dtype=complex)
    law = MaterialLaw({0: np.diag([eps, mu]), -1: np.diag([sigma, 0.0])}, nu0=0.0,
                      label="maxwell")
    return EvolutionModel("maxwell", law, a, Decomposition.coordinate(0, 2))


MODELS = {"heat": heat_model, "maxwell": maxwell_model}


def residual(model, u, f, workers=1):
    """``|(d/dt M(d/dt) + A) u - f|_nu / |f|_nu``, each operator applied separately."""
    lhs = td_apply(matlaw_apply(model.law, u, workers)) + u.apply(model.a_skew)
    return (lhs - f).norm() / f.norm()


def _band_ok(sig):
    try:
        check_band_limit(sig)
    except AliasingError:
        return False
    return True


def picard_experiment(model, n_inputs=100, seed=0, grid=DEFAULT_TIME_GRID,
                      cut=CAUSALITY_CUT, workers=1):
    """Solve for ``n_inputs`` random band-limited inputs supported in ``[cut, inf)``.

    Returns per-input residuals, norm ratios, causality defects and the
    regularity check (``d/dt U`` and ``A U`` band-limited) together with the
    measured coercivity constant.
    """
    started = time.perf_counter()
    rng = np.random.default_rng(seed)
    inputs = [random_band_limited(grid, model.dim, rng, start=cut) for _ in range(n_inputs)]
    sols, c = evo_solve(model.law, model.a_skew, model.dec, inputs, workers=workers,
                        return_coercivity=True)
    res, ratio, bound_margin, defect, regular = [], [], [], [], []
    for f, u in zip(inputs, sols):
        res.append(residual(model, u, f, workers))
        ratio.append(u.norm() / f.norm())
        bound_margin.append(f.norm() / c + 1e-6 - u.norm())
        defect.append(causality_defect(u, cut, f))
        regular.append(_band_ok(td_apply(u)) and _band_ok(u.apply(model.a_skew)))
    return {
        "model": model.name,
        "n_inputs": n_inputs,
        "seed": seed,
        "grid": grid.to_json(),
        "cut": cut,
        "c": c,
        "max_residual": float(max(res)),
        "max_norm_ratio": float(max(ratio)),
        "inverse_c": 1.0 / c,
        "min_bound_margin": float(min(bound_margin)),
        "max_causality_defect": float(max(defect)),
        "all_regular": bool(all(regular)),
        "seconds": round(time.perf_counter() - started, 3),
        "_solutions": sols,
        "_inputs": inputs,
    }


def picard_passed(result, tol=1e-6):
    return (result["max_residual"] <= tol and result["min_bound_margin"] >= 0
            and result["max_causality_defect"] <= tol and result["all_regular"])


def example_signal(grid, dim, length=1.0, start=CAUSALITY_CUT, scale=None):
    """Mollified ``1_[start, start + length]`` along the first coordinate."""
    scale = 4 * grid.dt if scale is None else scale
    vals = np.zeros((grid.n_steps, dim), dtype=complex)
    vals[:, 0] = causal_pulse(grid.t, start, length, scale)
    return WeightedSignal(grid, vals)
