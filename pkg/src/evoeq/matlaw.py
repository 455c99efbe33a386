"""Holomorphic operator-valued functions on right half-planes.

A law is either a finite Laurent family ``M(z) = sum_k z^k M_k``
(:class:`MaterialLaw`) or an expression built from laws with the product,
inverse and sum combinators. Derivatives are closed form throughout: the
power rule for Laurent terms, ``(MN)' = MN' + M'N`` for products and
``(M^-1)' = -M^-1 M' M^-1`` for inverses.

Half-plane conditions are certified on a finite :class:`HalfPlaneGrid`;
a grid minimum is an estimate of the infimum, not a proof of it.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ._validation import RCOND_THRESHOLD, check_operator, check_positive, rcond
from .errors import DomainError, MembershipError, ShapeError, SingularBlockError
from .linop import (
    AlphaBounds,
    alpha_fit,
    hermitian_lower_bound,
    op_norm,
    operator_from_json,
    operator_to_json,
    schur_components,
)


class Law:
    """Base class for holomorphic ``z -> L(H)`` families on ``Re z > nu0``."""

    nu0 = 0.0
    dim = 0
    label = ""

    def __call__(self, z):
        return self.eval(z)

    def eval(self, z):
        z = self._check_domain(z)
        return self._eval(z)

    def derivative(self, z):
        z = self._check_domain(z)
        return self._derivative(z)

    @property
    def is_real(self):
        """All coefficients real, so ``M(conj z) = conj M(z)`` entrywise."""
        return all(a.is_real for a in self.args)

    def _check_domain(self, z):
        z = complex(z)
        if not z.real > self.nu0:
            raise DomainError(
                f"{self.label or type(self).__name__}: Re z = {z.real:g} "
                f"must exceed nu0 = {self.nu0:g}",
                z=z,
            )
        return z

    def _eval(self, z):
        raise NotImplementedError

    def _derivative(self, z):
        raise NotImplementedError

    # combinators -----------------------------------------------------------
    def __matmul__(self, other):
        return ProductLaw(self, other)

    def __add__(self, other):
        return SumLaw([self, other])

    def inv(self):
        return InverseLaw(self)

    def times_z(self):
        """The law ``z -> z M(z)``."""
        return ProductLaw(MaterialLaw({1: np.eye(self.dim)}, nu0=self.nu0, label="z"), self)

    def to_json(self):
        raise NotImplementedError


class MaterialLaw(Law):
    """Finite Laurent family ``M(z) = sum_k z^k M_k``.

    Parameters
    ----------
    terms : dict or iterable of (int, array)
        Powers and square coefficient operators of a common size.
    nu0 : float
        Declared abscissa; evaluation requires ``Re z > nu0``.
    label : str
    """

    def __init__(self, terms, nu0=0.0, label=""):
        items = terms.items() if isinstance(terms, dict) else terms
        coeffs = {}
        for power, coeff in items:
            power = int(power)
            coeff = check_operator(coeff, square=True, name=f"coefficient z^{power}")
            coeffs[power] = coeffs.get(power, 0) + coeff
        if not coeffs:
            raise ValueError("a material law needs at least one term")
        dims = {c.shape[0] for c in coeffs.values()}
        if len(dims) != 1:
            raise ShapeError(f"coefficients have differing sizes {sorted(dims)}")
        self.terms = dict(sorted(coeffs.items()))
        self.nu0 = check_positive(nu0, "nu0", strict=False)
        self.dim = dims.pop()
        self.label = label

    @property
    def is_real(self):
        return all(not np.any(c.imag) for c in self.terms.values())

    @property
    def is_bounded(self):
        """No positive powers (a material law in the strict sense)."""
        return all(k <= 0 or not np.any(c) for k, c in self.terms.items())

    def _eval(self, z):
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for k, coeff in self.terms.items():
            out += z**k * coeff
        return out

    def _derivative(self, z):
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for k, coeff in self.terms.items():
            if k:
                out += k * z ** (k - 1) * coeff
        return out

    def times_z(self):
        return MaterialLaw(
            {k + 1: c for k, c in self.terms.items()}, nu0=self.nu0,
            label=f"z*{self.label}" if self.label else "",
        )

    def analytic_sup_bound(self):
        """``sum_k |M_k| nu0^k`` for nonpositive powers, else ``None``.

        Bounds ``sup_{Re z > nu0} |M(z)|`` because ``|z^k| <= nu0^k``.
        """
        if not self.is_bounded:
            return None
        total = 0.0
        for k, coeff in self.terms.items():
            norm = op_norm(coeff)
            if norm == 0:
                continue
            if k == 0:
                total += norm
            elif self.nu0 == 0:
                return np.inf
            else:
                total += norm * self.nu0**k
        return total

    def to_json(self):
        return {
            "nu0": self.nu0,
            "terms": [{"power": k, "coeff": operator_to_json(c)} for k, c in self.terms.items()],
            "label": self.label,
        }

    def __repr__(self):
        return f"MaterialLaw(powers={list(self.terms)}, dim={self.dim}, nu0={self.nu0}, label={self.label!r})"


class ProductLaw(Law):
    def __init__(self, left, right):
        if left.dim != right.dim:
            raise ShapeError(f"cannot multiply laws of size {left.dim} and {right.dim}")
        self.args = (left, right)
        self.nu0 = max(left.nu0, right.nu0)
        self.dim = left.dim
        self.label = f"({left.label})*({right.label})"

    def _eval(self, z):
        left, right = self.args
        return left._eval(z) @ right._eval(z)

    def _derivative(self, z):
        left, right = self.args
        return left._eval(z) @ right._derivative(z) + left._derivative(z) @ right._eval(z)

    def to_json(self):
        return {"op": "mul", "args": [a.to_json() for a in self.args]}


class InverseLaw(Law):
    def __init__(self, inner):
        self.args = (inner,)
        self.nu0 = inner.nu0
        self.dim = inner.dim
        self.label = f"({inner.label})^-1"

    def _inverse(self, z):
        value = self.args[0]._eval(z)
        rc = rcond(value)
        if rc < RCOND_THRESHOLD:
            raise SingularBlockError(
                f"{self.label}: value at z={z} is singular (rcond={rc:.2e})", rcond=rc, z=z
            )
        return np.linalg.inv(value)

    def _eval(self, z):
        return self._inverse(z)

    def _derivative(self, z):
        inv = self._inverse(z)
        return -inv @ self.args[0]._derivative(z) @ inv

    def to_json(self):
        return {"op": "inv", "args": [self.args[0].to_json()]}


class SumLaw(Law):
    def __init__(self, args):
        args = list(args)
        if len({a.dim for a in args}) != 1:
            raise ShapeError("summands have differing sizes")
        self.args = tuple(args)
        self.nu0 = max(a.nu0 for a in args)
        self.dim = args[0].dim
        self.label = " + ".join(a.label for a in args)

    def _eval(self, z):
        return sum(a._eval(z) for a in self.args)

    def _derivative(self, z):
        return sum(a._derivative(z) for a in self.args)

    def to_json(self):
        return {"op": "sum", "args": [a.to_json() for a in self.args]}


_COMBINATORS = {
    "mul": lambda args: ProductLaw(*args),
    "inv": lambda args: InverseLaw(*args),
    "sum": lambda args: SumLaw(args),
}


def law_from_json(obj):
    if "op" in obj:
        op = obj["op"]
        if op not in _COMBINATORS:
            raise ValueError(f"unknown combinator {op!r}")
        return _COMBINATORS[op]([law_from_json(a) for a in obj["args"]])
    terms = [(t["power"], operator_from_json(t["coeff"])) for t in obj["terms"]]
    return MaterialLaw(terms, nu0=obj.get("nu0", 0.0), label=obj.get("label", ""))


# ---------------------------------------------------------------------------
# grids on the half-plane
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HalfPlaneGrid:
    """Cartesian grid ``{x + i y : x in re_points, y in im_points}`` with ``x > nu``."""

    nu: float
    re_points: tuple
    im_points: tuple

    def __post_init__(self):
        re = tuple(float(x) for x in self.re_points)
        im = tuple(float(y) for y in self.im_points)
        if not re or not im:
            raise ValueError("grid must be nonempty")
        if not all(np.isfinite(re)) or not all(np.isfinite(im)):
            raise ValueError("grid points must be finite")
        if min(re) <= self.nu:
            raise DomainError(f"grid real parts must exceed nu = {self.nu}", z=min(re))
        object.__setattr__(self, "re_points", re)
        object.__setattr__(self, "im_points", im)

    @classmethod
    def default(cls, nu0):
        """Boundary-approach and high-frequency sampling of ``Re z > nu0``."""
        nu0 = check_positive(nu0, "nu0")
        re = [nu0 * (1 + 2.0**-j) for j in range(7)] + [10 * nu0]
        im = [s * nu0 for s in (0, 1, -1, 10, -10, 100, -100)]
        return cls(nu0, tuple(sorted(re)), tuple(im))

    @property
    def points(self):
        return np.array([complex(x, y) for x in self.re_points for y in self.im_points])

    def __len__(self):
        return len(self.re_points) * len(self.im_points)

    def to_json(self):
        return {"nu": self.nu, "re_points": list(self.re_points), "im_points": list(self.im_points)}


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

def picard_coercivity(law, grid):
    """Grid estimate of ``inf_z lambda_min Re (z M(z))``."""
    return min(hermitian_lower_bound(z * law.eval(z)) for z in grid.points)


class SupNormEstimate(NamedTuple):
    grid: float
    analytic: float | None


def sup_norm_estimate(law, grid):
    """Grid maximum of ``|M(z)|`` plus, for Laurent laws, an analytic upper bound."""
    grid_max = max(op_norm(law.eval(z)) for z in grid.points)
    analytic = law.analytic_sup_bound() if isinstance(law, MaterialLaw) else None
    return SupNormEstimate(grid_max, analytic)


def alt_boundedness_check(law, d, grid):
    """``Re M(z)^-1 >= 1/d`` at every grid point (alternative to ``|M(z)| <= d``)."""
    d = check_positive(d, "d")
    ok = True
    for z in grid.points:
        value = law.eval(z)
        rc = rcond(value)
        if rc < RCOND_THRESHOLD:
            raise SingularBlockError(f"M(z) singular at z = {z}", rcond=rc, z=z)
        if hermitian_lower_bound(np.linalg.inv(value)) < 1.0 / d:
            ok = False
    return ok


def _value(law, z, premultiply_z):
    value = law.eval(z)
    return z * value if premultiply_z else value


def schur_trajectory(law, dec, grid, premultiply_z=False):
    """Schur components of ``M(z)`` (or ``z M(z)``) at every grid point."""
    out = []
    for z in grid.points:
        value = _value(law, z, premultiply_z)
        try:
            quad = schur_components(value, dec)
            if rcond(quad.d) < RCOND_THRESHOLD:
                raise SingularBlockError("Schur complement singular", rcond=rcond(quad.d))
        except SingularBlockError as exc:
            raise MembershipError(
                f"value at z = {z} is not in M(H0,H1): {exc}",
                condition="M(z) in M(H0,H1)", z=z,
            ) from exc
        out.append((z, quad))
    return out


def trajectory_alpha(law, dec, grid, premultiply_z=False):
    """Weakest alpha with ``M(z)`` (or ``zM(z)``) in M(alpha) on the whole grid."""
    fits = []
    for z in grid.points:
        try:
            fits.append(alpha_fit(_value(law, z, premultiply_z), dec))
        except MembershipError as exc:
            exc.details["z"] = z
            raise
    return AlphaBounds.envelope(fits)


def holomorphy_residual(law, z, h):
    """Finite-difference estimate of the Wirtinger derivative ``d/d(conj z)``."""
    z = complex(z)
    h = check_positive(h, "h")
    if z.real - h <= law.nu0:
        raise DomainError(f"stencil of radius {h} at {z} leaves Re z > {law.nu0}", z=z)
    dx = (law.eval(z + h) - law.eval(z - h)) / (2 * h)
    dy = (law.eval(z + 1j * h) - law.eval(z - 1j * h)) / (2 * h)
    return 0.5 * op_norm(dx + 1j * dy)
