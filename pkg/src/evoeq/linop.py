"""Finite-dimensional Hilbert-space model: block operators and Schur algebra.

Operators are plain complex ``numpy`` arrays. A :class:`Decomposition`
carries explicit orthonormal bases for ``H = H0 (+) H1``, so every block
formula below is basis-explicit:

    M_ij = basis_i^H @ M @ basis_j

"Re T >= c" is always read in the quadratic-form sense, i.e. as
``lambda_min((T + T^H) / 2) >= c``.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import (
    RCOND_THRESHOLD,
    check_operator,
    check_positive,
    rcond,
)
from .errors import (
    AccretivityError,
    InternalConsistencyError,
    MembershipError,
    ShapeError,
    SingularBlockError,
    StructureError,
)

#: Tolerance used for the post-condition assertions (norm and real-part bounds).
CHECK_TOL = 1e-9
_ORTHO_TOL = 1e-12


# ---------------------------------------------------------------------------
# elementary quantities
# ---------------------------------------------------------------------------

def op_norm(t):
    """Operator 2-norm (largest singular value); 0 for empty operators."""
    t = np.asarray(t)
    if t.size == 0:
        return 0.0
    return float(np.linalg.norm(t, 2))


def hermitian_part(t):
    t = np.asarray(t)
    return 0.5 * (t + t.conj().T)


def hermitian_lower_bound(t):
    """Largest ``c`` with ``Re <T phi, phi> >= c |phi|^2`` for all ``phi``.

    Returns ``+inf`` for a 0x0 operator (the condition is vacuous).
    """
    t = check_operator(t, square=True)
    if t.size == 0:
        return np.inf
    return float(np.linalg.eigvalsh(hermitian_part(t))[0])


def _inv(t):
    if t.size == 0:
        return np.zeros_like(t)
    return np.linalg.inv(t)


def _checked_inv(t, what, threshold=RCOND_THRESHOLD, **where):
    rc = rcond(t)
    if rc < threshold:
        raise SingularBlockError(
            f"{what} is numerically singular (rcond={rc:.3e} < {threshold:.1e})",
            rcond=rc,
            inequality=f"rcond({what}) > {threshold:.0e}",
            **where,
        )
    return _inv(t)


def invert_accretive(t, c):
    """Invert ``T`` with ``Re T >= c > 0`` and certify the inverse bounds.

    The returned inverse satisfies ``|T^-1| <= 1/c`` and
    ``Re T^-1 >= c / |T|^2`` (both checked before returning).
    """
    t = check_operator(t, square=True)
    c = check_positive(c, "c")
    lb = hermitian_lower_bound(t)
    if lb < c - 1e-12 * max(1.0, c):
        raise AccretivityError(
            f"Re T >= {c} violated: lambda_min(Re T) = {lb:.6g}",
            lower_bound=lb,
            certificate="invert_accretive.precondition",
            inequality="Re T >= c",
        )
    inv = np.linalg.inv(t)
    norm_inv = op_norm(inv)
    if norm_inv > 1.0 / c + CHECK_TOL * max(1.0, 1.0 / c):
        raise InternalConsistencyError(
            f"|T^-1| = {norm_inv:.12g} exceeds 1/c = {1.0 / c:.12g}",
            certificate="invert_accretive.norm_bound",
            inequality="|T^-1| <= 1/c",
        )
    lb_inv = hermitian_lower_bound(inv)
    floor = c / op_norm(t) ** 2
    if lb_inv < floor - CHECK_TOL * max(1.0, floor):
        raise InternalConsistencyError(
            f"Re T^-1 = {lb_inv:.12g} below c/|T|^2 = {floor:.12g}",
            certificate="invert_accretive.real_part_bound",
            inequality="Re T^-1 >= c |T|^-2",
        )
    return inv


# ---------------------------------------------------------------------------
# decompositions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Decomposition:
    """Orthogonal split ``H = span(basis0) (+) span(basis1)``."""

    basis0: np.ndarray
    basis1: np.ndarray

    def __post_init__(self):
        b0 = np.asarray(self.basis0, dtype=complex)
        b1 = np.asarray(self.basis1, dtype=complex)
        if b0.ndim != 2 or b1.ndim != 2 or b0.shape[0] != b1.shape[0]:
            raise ShapeError(
                f"bases must be 2-D with equal row counts, got {b0.shape}, {b1.shape}"
            )
        n = b0.shape[0]
        if n == 0 or b0.shape[1] + b1.shape[1] != n:
            raise ShapeError(
                f"split is not exhaustive: {b0.shape[1]} + {b1.shape[1]} != {n}"
            )
        full = np.hstack([b0, b1])
        err = np.max(np.abs(full.conj().T @ full - np.eye(n)))
        if err > _ORTHO_TOL * max(1.0, np.sqrt(n)):
            raise ShapeError(f"bases are not orthonormal (defect {err:.3e})")
        object.__setattr__(self, "basis0", b0)
        object.__setattr__(self, "basis1", b1)

    @property
    def total_dim(self):
        return self.basis0.shape[0]

    @property
    def d0(self):
        return self.basis0.shape[1]

    @property
    def d1(self):
        return self.basis1.shape[1]

    @property
    def unitary(self):
        return np.hstack([self.basis0, self.basis1])

    def projector0(self):
        return self.basis0 @ self.basis0.conj().T

    def projector1(self):
        return self.basis1 @ self.basis1.conj().T

    @classmethod
    def coordinate(cls, d0, d1):
        """Split along the first ``d0`` and last ``d1`` coordinates."""
        eye = np.eye(d0 + d1, dtype=complex)
        return cls(eye[:, :d0], eye[:, d0:])

    @classmethod
    def from_basis0(cls, basis0):
        """Complete an orthonormal ``basis0`` with an orthonormal complement."""
        b0 = np.asarray(basis0, dtype=complex)
        k = b0.shape[1]
        q, _ = np.linalg.qr(b0, mode="complete")
        return cls(q[:, :k], q[:, k:])

    @classmethod
    def from_kernel(cls, a, tol=1e-10):
        """``H0 = ker A`` and ``H1 = ran A^H`` from an SVD of ``A``.

        For skew (or normal) ``A`` the second space is ``ran A``.
        """
        a = check_operator(a, square=True, name="A")
        u, s, vh = np.linalg.svd(a)
        scale = max(s[0], 1.0) if s.size else 1.0
        rank = int(np.sum(s > tol * scale))
        v = vh.conj().T
        return cls(v[:, rank:], v[:, :rank])

    @classmethod
    def random(cls, rng, d0, d1):
        n = d0 + d1
        z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        q, _ = np.linalg.qr(z)
        return cls(q[:, :d0], q[:, d0:])


# ---------------------------------------------------------------------------
# block algebra
# ---------------------------------------------------------------------------

def block_split(m, dec):
    """Return ``(M00, M01, M10, M11)`` relative to ``dec``."""
    m = check_operator(m, square=True, name="m")
    if m.shape[0] != dec.total_dim:
        raise ShapeError(f"operator of size {m.shape[0]} vs decomposition of {dec.total_dim}")
    b0, b1 = dec.basis0, dec.basis1
    b0h, b1h = b0.conj().T, b1.conj().T
    return b0h @ m @ b0, b0h @ m @ b1, b1h @ m @ b0, b1h @ m @ b1


def block_join(m00, m01, m10, m11, dec):
    """Inverse of :func:`block_split`."""
    b0, b1 = dec.basis0, dec.basis1
    return (
        b0 @ m00 @ b0.conj().T
        + b0 @ m01 @ b1.conj().T
        + b1 @ m10 @ b0.conj().T
        + b1 @ m11 @ b1.conj().T
    )


@dataclass(frozen=True, eq=False)
class SchurQuadruple:
    """The four Schur components ``(M00^-1, M00^-1 M01, M10 M00^-1, S)``.

    ``S = M11 - M10 M00^-1 M01``.
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def as_tuple(self):
        return self.a, self.b, self.c, self.d

    def max_abs_diff(self, other):
        return max(
            float(np.max(np.abs(x - y), initial=0.0))
            for x, y in zip(self.as_tuple(), other.as_tuple())
        )


def schur_components(m, dec, rcond_threshold=RCOND_THRESHOLD):
    """Evaluate the four maps defining the Schur (nonlocal H-) topology."""
    m00, m01, m10, m11 = block_split(m, dec)
    m00_inv = _checked_inv(m00, "M00", rcond_threshold)
    b = m00_inv @ m01
    c = m10 @ m00_inv
    return SchurQuadruple(m00_inv, b, c, m11 - m10 @ b)


def schur_reconstruct(q, dec, rcond_threshold=RCOND_THRESHOLD):
    """The unique ``M`` whose Schur components are ``q``."""
    d0, d1 = dec.d0, dec.d1
    shapes = {"a": (d0, d0), "b": (d0, d1), "c": (d1, d0), "d": (d1, d1)}
    for name, shape in shapes.items():
        if np.shape(getattr(q, name)) != shape:
            raise ShapeError(f"quadruple field {name} has shape "
                             f"{np.shape(getattr(q, name))}, expected {shape}")
    m00 = _checked_inv(np.asarray(q.a, dtype=complex), "a = M00^-1", rcond_threshold)
    m01 = m00 @ q.b
    m10 = q.c @ m00
    m11 = q.d + q.c @ m00 @ q.b
    return block_join(m00, m01, m10, m11, dec)


# ---------------------------------------------------------------------------
# M(alpha) certificates
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AlphaBounds:
    """Constants ``alpha = (a00, a01, a10, a11)`` of the class M(alpha)."""

    a00: float
    a01: float
    a10: float
    a11: float

    def __post_init__(self):
        vals = (self.a00, self.a01, self.a10, self.a11)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"alpha entries must be finite, got {vals}")
        if self.a00 <= 0 or self.a11 <= 0 or self.a01 < 0 or self.a10 < 0:
            raise ValueError(f"invalid alpha {vals}")

    def covers(self, other, slack=0.0):
        """True if every operator certified by ``other`` lies in ``self``."""
        return (
            other.a00 >= self.a00 - slack
            and 1.0 / other.a11 >= 1.0 / self.a11 - slack
            and other.a01 <= self.a01 + slack
            and other.a10 <= self.a10 + slack
        )

    @classmethod
    def envelope(cls, bounds):
        """Weakest single alpha covering all of ``bounds``."""
        bounds = list(bounds)
        return cls(
            a00=min(b.a00 for b in bounds),
            a01=max(b.a01 for b in bounds),
            a10=max(b.a10 for b in bounds),
            a11=max(b.a11 for b in bounds),
        )

    def to_dict(self):
        return {"a00": self.a00, "a01": self.a01, "a10": self.a10, "a11": self.a11}


def alpha_fit(m, dec, rcond_threshold=RCOND_THRESHOLD):
    """Tightest :class:`AlphaBounds` with ``m`` in M(alpha).

    Raises :class:`MembershipError` naming the first violated condition.
    """
    m00, m01, m10, m11 = block_split(m, dec)
    try:
        m00_inv = _checked_inv(m00, "M00", rcond_threshold)
    except SingularBlockError as exc:
        raise MembershipError(
            "M not in M(H0,H1): M00 is not invertible",
            condition="M00^-1 bounded", inequality="M00^-1 in L(H0)",
        ) from exc
    schur = m11 - m10 @ m00_inv @ m01
    try:
        schur_inv = _checked_inv(schur, "S", rcond_threshold)
    except SingularBlockError as exc:
        raise MembershipError(
            "M not in M(H0,H1): Schur complement is not invertible",
            condition="M^-1 bounded", inequality="M^-1 in L(H)",
        ) from exc

    checks = [
        ("Re M00", hermitian_lower_bound(m00), "Re M00 >= alpha00"),
        ("Re S", hermitian_lower_bound(schur), "Re (M11 - M10 M00^-1 M01) >= alpha00"),
        ("Re M00^-1", hermitian_lower_bound(m00_inv), "Re M00^-1 >= 1/alpha11"),
        ("Re S^-1", hermitian_lower_bound(schur_inv),
         "Re (M11 - M10 M00^-1 M01)^-1 >= 1/alpha11"),
    ]
    for name, value, label in checks:
        if value <= 0:
            raise MembershipError(
                f"{name} has lambda_min {value:.6g} <= 0",
                condition=name, inequality=label, lower_bound=value,
            )
    a00 = min(checks[0][1], checks[1][1])
    inv_a11 = min(checks[2][1], checks[3][1])
    return AlphaBounds(
        a00=float(a00),
        a01=op_norm(m00_inv @ m01),
        a10=op_norm(m10 @ m00_inv),
        a11=float(1.0 / inv_a11),
    )


def schur_positivity_inherit(t, dec, d):
    """Return ``(lambda_min Re T11, lambda_min Re (T00 - T01 T11^-1 T10))``.

    Both values are at least ``d`` whenever ``Re T >= d``.
    """
    t = check_operator(t, square=True)
    d = check_positive(d, "d")
    lb = hermitian_lower_bound(t)
    if lb < d - 1e-12 * max(1.0, d):
        raise AccretivityError(
            f"Re T >= {d} violated: lambda_min(Re T) = {lb:.6g}",
            lower_bound=lb, inequality="Re T >= d",
        )
    t00, t01, t10, t11 = block_split(t, dec)
    t11_inv = _inv(t11)
    return (
        hermitian_lower_bound(t11),
        hermitian_lower_bound(t00 - t01 @ t11_inv @ t10),
    )


def check_skew(a, tol=1e-12, name="a_skew"):
    """Raise :class:`StructureError` unless ``A^H = -A`` to ``tol`` (relative)."""
    a = check_operator(a, square=True, name=name)
    defect = op_norm(a + a.conj().T)
    if defect > tol * max(1.0, op_norm(a)):
        raise StructureError(
            f"{name} is not anti-hermitian: |A + A^H| = {defect:.3e}",
            certificate="skewness", inequality="A* = -A",
        )
    return a


def check_kernel_compatible(a, dec, tol=1e-12):
    """Raise unless ``A`` vanishes on ``H0`` from both sides."""
    scale = max(1.0, op_norm(a))
    right = op_norm(a @ dec.basis0)
    left = op_norm(dec.basis0.conj().T @ a)
    if max(right, left) > tol * scale:
        raise StructureError(
            f"A does not vanish on H0 (|A P0| = {right:.3e}, |P0 A| = {left:.3e})",
            certificate="kernel_compatibility", inequality="H0 = ker A",
        )


def perturbed_block_inverse(t, a_skew, dec):
    """``(T + A)^-1`` assembled blockwise from the Schur data of ``T``.

    ``A`` must be anti-hermitian and vanish on ``H0``; with
    ``T_A = T11 - T10 T00^-1 T01 + A11`` the inverse reads::

        [[T00^-1 + T00^-1 T01 T_A^-1 T10 T00^-1,  -T00^-1 T01 T_A^-1],
         [-T_A^-1 T10 T00^-1,                      T_A^-1          ]]
    """
    t = check_operator(t, square=True, name="t")
    a = check_skew(a_skew)
    if a.shape != t.shape:
        raise ShapeError(f"t {t.shape} and a_skew {a.shape} differ")
    check_kernel_compatible(a, dec)
    t00, t01, t10, t11 = block_split(t, dec)
    a11 = dec.basis1.conj().T @ a @ dec.basis1
    t00_inv = _checked_inv(t00, "T00")
    schur = t11 - t10 @ t00_inv @ t01
    c = hermitian_lower_bound(schur)
    if c <= 0:
        raise AccretivityError(
            f"Re (T11 - T10 T00^-1 T01) = {c:.6g} is not positive",
            lower_bound=c, inequality="Re (T11 - T10 T00^-1 T01) >= c > 0",
        )
    ta_inv = _inv(schur + a11)

    bound = 1.0 / c
    n_ta = op_norm(ta_inv)
    if n_ta > bound + CHECK_TOL * max(1.0, bound):
        raise InternalConsistencyError(
            f"|T_A^-1| = {n_ta:.12g} exceeds 1/c = {bound:.12g}",
            certificate="perturbed_block_inverse.resolvent_bound",
            inequality="|T_A^-1| <= 1/c",
        )
    graph_bound = 1.0 + op_norm(schur) / c
    n_ata = op_norm(a11 @ ta_inv)
    if n_ata > graph_bound + CHECK_TOL * max(1.0, graph_bound):
        raise InternalConsistencyError(
            f"|A T_A^-1| = {n_ata:.12g} exceeds {graph_bound:.12g}",
            certificate="perturbed_block_inverse.graph_bound",
            inequality="|A T_A^-1| <= 1 + |T11 - T10 T00^-1 T01| / c",
        )

    left = t00_inv @ t01 @ ta_inv          # T00^-1 T01 T_A^-1
    right = t10 @ t00_inv                  # T10 T00^-1
    inv00 = t00_inv + left @ right
    inv01 = -left
    inv10 = -ta_inv @ right
    return block_join(inv00, inv01, inv10, ta_inv, dec)


# ---------------------------------------------------------------------------
# random instances (tests, property suites, model surrogates)
# ---------------------------------------------------------------------------

def random_complex(rng, rows, cols=None):
    cols = rows if cols is None else cols
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def random_accretive(rng, n, c):
    """Random ``n x n`` matrix with ``lambda_min(Re T) = c`` exactly (up to rounding)."""
    t = random_complex(rng, n)
    shift = c - hermitian_lower_bound(t)
    return t + shift * np.eye(n)


def random_skew(rng, n):
    g = random_complex(rng, n)
    return 0.5 * (g - g.conj().T)


def skew_on(dec, inner):
    """Lift an anti-hermitian ``inner`` on ``H1`` to ``H``, vanishing on ``H0``."""
    b1 = dec.basis1
    a = b1 @ inner @ b1.conj().T
    return 0.5 * (a - a.conj().T)


# ---------------------------------------------------------------------------
# JSON wire format
# ---------------------------------------------------------------------------

def operator_to_json(t):
    t = np.asarray(t, dtype=complex)
    if t.ndim != 2:
        raise ShapeError(f"operator must be 2-D, got {t.shape}")
    flat = t.reshape(-1)
    return {
        "rows": int(t.shape[0]),
        "cols": int(t.shape[1]),
        "re": [float(x) for x in flat.real],
        "im": [float(x) for x in flat.imag],
    }


def operator_from_json(obj):
    rows, cols = int(obj["rows"]), int(obj["cols"])
    re = np.asarray(obj["re"], dtype=float)
    im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=float)
    if re.size != rows * cols or im.size != rows * cols:
        raise ShapeError(f"expected {rows * cols} entries, got {re.size}/{im.size}")
    return check_operator((re + 1j * im).reshape(rows, cols))


def decomposition_to_json(dec):
    return {"basis0": operator_to_json(dec.basis0), "basis1": operator_to_json(dec.basis1)}


def decomposition_from_json(obj):
    return Decomposition(operator_from_json(obj["basis0"]), operator_from_json(obj["basis1"]))
