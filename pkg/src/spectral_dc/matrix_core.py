"""Dense and structured matrix types plus the stable dense kernels.

Everything downstream relies on two error contracts: a matrix product with
normwise error ``c*u*poly(n)*|A||B|`` and a Householder QR whose factors are
backward stable.  Plain BLAS multiplication and the column-by-column
reflector QR below both satisfy them with small constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import flops
from .errors import InvalidInputError, PrecisionFloorError, ShapeMismatchError

UNIT_ROUNDOFF = np.finfo(np.float64).eps / 2
MACHINE_EPS = np.finfo(np.float64).eps

# Accuracy requests must satisfy eps >= PRECISION_FLOOR_FACTOR * n * MACHINE_EPS.
PRECISION_FLOOR_FACTOR = 1.0e3


def precision_floor(n):
    return PRECISION_FLOOR_FACTOR * max(int(n), 1) * MACHINE_EPS


def check_eps(eps, n, upper=1.0, name="eps"):
    """Validate an accuracy parameter against (0, upper) and the precision floor."""
    eps = float(eps)
    if not np.isfinite(eps) or eps <= 0.0 or eps >= upper:
        raise InvalidInputError(f"{name}={eps!r} must lie in (0, {upper})")
    floor = precision_floor(n)
    if eps < floor:
        raise PrecisionFloorError(
            f"{name}={eps:.3e} is below the precision floor {floor:.3e} for n={n}"
        )
    return eps


def power_of_two_at_least(x):
    """Smallest power of two >= x (1.0 for x == 0); scaling by it is exact."""
    x = float(x)
    if x <= 0.0:
        return 1.0
    m, e = np.frexp(x)
    return float(np.ldexp(1.0, int(e) - 1 if m == 0.5 else int(e)))


def _finite(a, what="matrix"):
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{what} has non-finite entries")


def _is_complex(*arrays):
    return any(a.dtype.kind == "c" for a in arrays)


# ---------------------------------------------------------------------------
# types


@dataclass(frozen=True)
class DenseHermitian:
    entries: np.ndarray
    tol: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ShapeMismatchError(f"expected a square matrix, got shape {a.shape}")
        _finite(a)
        scale = max(np.abs(a).max(initial=0.0), 1.0)
        if np.abs(a - a.conj().T).max(initial=0.0) > self.tol * scale:
            raise InvalidInputError("matrix is not Hermitian")
        # store exactly Hermitian data
        h = 0.5 * (a + a.conj().T)
        if not np.iscomplexobj(h):
            h = h.astype(np.float64)
        object.__setattr__(self, "entries", h)

    @property
    def n(self):
        return self.entries.shape[0]


def as_hermitian(a, tol=1e-12):
    """Return an exactly Hermitian ndarray copy of ``a`` (ndarray or DenseHermitian)."""
    if isinstance(a, DenseHermitian):
        return a.entries
    return DenseHermitian(np.asarray(a), tol=tol).entries


@dataclass(frozen=True)
class SymTridiagonal:
    diag: np.ndarray
    off: np.ndarray

    def __post_init__(self):
        d = np.array(self.diag, dtype=np.float64).reshape(-1)
        e = np.array(self.off, dtype=np.float64).reshape(-1)
        if d.size == 0:
            raise InvalidInputError("empty tridiagonal")
        if e.size != d.size - 1:
            raise ShapeMismatchError(f"off-diagonal has {e.size} entries, expected {d.size - 1}")
        _finite(d, "diagonal")
        _finite(e, "off-diagonal")
        d.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "off", e)

    @property
    def n(self):
        return self.diag.size

    @property
    def unreduced(self):
        return bool(np.all(self.off != 0.0))

    def to_dense(self):
        t = np.diag(self.diag)
        if self.n > 1:
            i = np.arange(self.n - 1)
            t[i, i + 1] = self.off
            t[i + 1, i] = self.off
        return t

    @classmethod
    def from_dense(cls, t):
        t = np.asarray(t)
        return cls(np.real(np.diag(t)).copy(), np.real(np.diag(t, 1)).copy())

    def scaled(self, s):
        return SymTridiagonal(self.diag * s, self.off * s)

    def norm_upper(self):
        return spectral_norm_upper(self)


@dataclass(frozen=True)
class Arrowhead:
    """Symmetric arrowhead [[alpha, z^T], [z, diag(d)]]."""

    alpha: float
    z: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        z = np.array(self.z, dtype=np.float64).reshape(-1)
        d = np.array(self.d, dtype=np.float64).reshape(-1)
        if z.size != d.size:
            raise ShapeMismatchError("shaft and diagonal lengths differ")
        _finite(z, "shaft")
        _finite(d, "diagonal")
        if not np.isfinite(self.alpha):
            raise InvalidInputError("corner entry is not finite")
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "d", d)

    @property
    def n(self):
        return self.d.size + 1

    def to_dense(self):
        n = self.n
        h = np.zeros((n, n))
        h[0, 0] = self.alpha
        h[0, 1:] = self.z
        h[1:, 0] = self.z
        h[np.arange(1, n), np.arange(1, n)] = self.d
        return h

    def norm_upper(self):
        # Frobenius norm without forming the matrix
        zz = float(self.z @ self.z)
        return float(np.sqrt(self.alpha ** 2 + 2.0 * zz + float(self.d @ self.d)))


@dataclass(frozen=True)
class QRResult:
    Q: np.ndarray
    R: np.ndarray


# ---------------------------------------------------------------------------
# orthogonal factors in composed form


@dataclass
class OrthogonalFactor:
    """An orthogonal n x n matrix G kept as a product of simple operations.

    ``ops`` is listed in the order the operations were applied to the
    original coordinates, so ``G^T x`` replays them front to back:

    * ``("perm", p)``: ``x <- x[p]``
    * ``("givens", i, j, c, s)``: ``(x_i, x_j) <- (c x_i + s x_j, -s x_i + c x_j)``

    Applying G or G^T to an n x r block costs O(n r) per operation group.
    """

    n: int
    ops: list = field(default_factory=list)

    def add_perm(self, p):
        p = np.asarray(p, dtype=np.intp)
        if not np.array_equal(p, np.arange(self.n)):
            self.ops.append(("perm", p))

    def add_givens(self, i, j, c, s):
        self.ops.append(("givens", int(i), int(j), float(c), float(s)))

    def apply_t(self, x):
        """Return G^T x for a vector or an n x r block."""
        y = np.array(x, copy=True)
        for op in self.ops:
            if op[0] == "perm":
                y = y[op[1]]
            else:
                _, i, j, c, s = op
                xi = y[i].copy()
                y[i] = c * xi + s * y[j]
                y[j] = -s * xi + c * y[j]
        flops.add(6 * _ncols(y) * sum(op[0] == "givens" for op in self.ops), "givens")
        return y

    def apply(self, x):
        """Return G x."""
        y = np.array(x, copy=True)
        for op in reversed(self.ops):
            if op[0] == "perm":
                z = np.empty_like(y)
                z[op[1]] = y
                y = z
            else:
                _, i, j, c, s = op
                xi = y[i].copy()
                y[i] = c * xi - s * y[j]
                y[j] = s * xi + c * y[j]
        flops.add(6 * _ncols(y) * sum(op[0] == "givens" for op in self.ops), "givens")
        return y

    def to_dense(self):
        return self.apply(np.eye(self.n))


def _ncols(y):
    return 1 if y.ndim == 1 else y.shape[1]


def givens(a, b):
    """Rotation (c, s, r) with c >= 0 and [[c, s], [-s, c]] @ [a, b] = [r, 0]."""
    r = float(np.hypot(a, b))
    if r == 0.0:
        return 1.0, 0.0, 0.0
    if a < 0:
        return -a / r, -b / r, -r
    return a / r, b / r, r


# ---------------------------------------------------------------------------
# dense kernels


def matmul(a, b, hermitian=False):
    """Classical product ``a @ b`` with operation accounting.

    With ``hermitian=True`` the caller asserts the exact product is Hermitian
    and the result is symmetrized so the stored matrix is exactly Hermitian.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatchError(f"cannot multiply shapes {a.shape} and {b.shape}")
    c = a @ b
    per = 8 if _is_complex(a, b) else 2
    flops.add(per * a.shape[0] * a.shape[1] * b.shape[1], "matmul")
    if hermitian:
        if c.shape[0] != c.shape[1]:
            raise ShapeMismatchError("a Hermitian product must be square")
        c = 0.5 * (c + c.conj().T)
    return c


def householder_qr(a):
    """Householder QR of an m x n matrix, m >= n.

    Reflector for column k maps x to alpha*e1 with
    ``alpha = -exp(i*arg(x_0)) * |x|``.  Columns already zero below the
    diagonal are left alone, so an upper-triangular input returns Q = I.
    """
    a = np.asarray(a)
    if a.ndim != 2:
        raise ShapeMismatchError("householder_qr expects a 2-D array")
    q, r = householder_qr_batch(a[None])
    return QRResult(q[0], r[0])


def householder_qr_batch(a):
    """:func:`householder_qr` applied to each matrix of a (K, m, n) stack.

    Returns ``(Q, R)`` stacks of shapes (K, m, m) and (K, m, n).
    """
    a = np.asarray(a)
    if a.ndim != 3:
        raise ShapeMismatchError("householder_qr_batch expects a 3-D array")
    nb, m, n = a.shape
    if m < n:
        raise ShapeMismatchError(f"householder_qr needs m >= n, got {a.shape[1:]}")
    _finite(a)
    cplx = np.iscomplexobj(a)
    dtype = np.complex128 if cplx else np.float64
    r = np.array(a, dtype=dtype, copy=True)
    refl = []
    count = 0
    for k in range(min(n, m - 1)):
        x = r[:, k:, k]
        tail = np.linalg.norm(x[:, 1:], axis=1)
        live = tail > 0.0
        if not live.any():
            continue
        x0 = x[:, 0]
        ax0 = np.abs(x0)
        normx = np.hypot(ax0, tail)
        phase = np.where(ax0 != 0.0, x0 / np.where(ax0 != 0.0, ax0, 1.0), 1.0)
        v = x.copy()
        v[:, 0] = phase * (ax0 + normx)
        vv = np.real(np.einsum("ki,ki->k", v.conj(), v))
        # a zero tail means no reflection: beta = 0 leaves the column untouched
        beta = np.where(live, 2.0 / np.where(live, vv, 1.0), 0.0)
        blk = r[:, k:, k + 1 :]
        if blk.shape[2]:
            blk -= (beta[:, None] * v)[:, :, None] * np.einsum("ki,kij->kj", v.conj(), blk)[:, None, :]
        r[:, k, k] = np.where(live, -phase * normx, r[:, k, k])
        r[:, k + 1 :, k] = 0.0
        refl.append((k, v, beta))
        count += 4 * (m - k) * (n - k)
    q = np.broadcast_to(np.eye(m, dtype=dtype), (nb, m, m)).copy()
    for k, v, beta in reversed(refl):
        blk = q[:, k:, k:]
        blk -= (beta[:, None] * v)[:, :, None] * np.einsum("ki,kij->kj", v.conj(), blk)[:, None, :]
        count += 4 * (m - k) * (m - k)
    flops.add((4 if cplx else 1) * count * nb, "qr")
    return q, r


def spectral_norm_upper(a):
    """Certified upper bound min(|A|_F, sqrt(|A|_1 |A|_inf)) on the 2-norm."""
    if isinstance(a, SymTridiagonal):
        d, e = np.abs(a.diag), np.abs(a.off)
        fro = np.sqrt(d @ d + 2.0 * (e @ e))
        rows = d.copy()
        rows[:-1] += e
        rows[1:] += e
        one = rows.max()  # symmetric, so |T|_1 = |T|_inf
        return float(min(fro, one))
    if isinstance(a, Arrowhead):
        a = a.to_dense()
    if isinstance(a, DenseHermitian):
        a = a.entries
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    _finite(a)
    fro = np.linalg.norm(a)
    one = np.abs(a).sum(axis=0).max()
    inf = np.abs(a).sum(axis=1).max()
    return float(min(fro, np.sqrt(one * inf)))
