"""Reduction of Hermitian matrices to real symmetric tridiagonal form.

The reduction repeatedly halves the bandwidth.  At level k the matrix is
viewed as block-pentadiagonal with blocks of size ``m = 2^k``.  One sweep
per block column clears the second block off-diagonal with a QR-based block
rotation, and the fill-in block it creates (the bulge) is chased off the
bottom edge two block rows at a time.  Each rotation also leaves the first
block off-diagonal upper triangular, so the result read at block size m/2
is block-pentadiagonal again.

Indices are 0-based: block rows run ``0 .. b-1``.  ``rotate_r(A, i)`` is
defined for ``1 <= i <= b-1``; at ``i = b-1`` there is no block row below, so
it only triangularizes ``A[b-1, b-2]``.

Sweeps are run as a wavefront.  Sweep ``i+1`` trails sweep ``i`` by seven
block rows, so all rotations issued in one step act on disjoint rows and
columns and are batched into single array operations.  Disjoint rotations
commute exactly, so the result is the one the plain sweep order produces.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import flops
from .errors import InvalidInputError, ShapeMismatchError, StructureError
from .matrix_core import UNIT_ROUNDOFF, SymTridiagonal, as_hermitian, householder_qr_batch, matmul

# surrogate constant in the reported backward-error and orthogonality bounds
BOUND_CONSTANT = 32.0
# zero block rows kept before and after the matrix so rotation windows never clip
_FRONT, _BACK = 2, 3
# delay between consecutive sweeps in the wavefront, in rotation steps
_LAG = 4


class BlockBanded:
    """Block-banded matrix with up to three block diagonals on each side.

    ``blocks[i, o]`` holds block ``(i, i + o - 3)``.  Offsets of two or less
    form the block-pentadiagonal band; offset three only ever holds the bulge
    ``(t, t - 3)`` and, in Hermitian storage, its adjoint.  ``s`` is the
    clearing frontier: blocks ``(i, i - 2)`` are zero for ``2 <= i <= s``.
    """

    def __init__(self, n, k, blocks=None, s=1, hermitian=True, dtype=np.float64):
        self.n = int(n)
        self.k = int(k)
        m = 1 << self.k
        if self.n % m:
            raise ShapeMismatchError(f"n={n} is not a multiple of the block size {m}")
        b = self.n // m
        dt = np.result_type(dtype, blocks.dtype) if blocks is not None else np.dtype(dtype)
        self._store = np.zeros((b + _FRONT + _BACK, 7, m, m), dtype=dt)
        if blocks is not None:
            if blocks.shape != (b, 7, m, m):
                raise ShapeMismatchError("block storage does not match n and k")
            self._store[_FRONT : _FRONT + b] = blocks
        self.s = s
        self.hermitian = hermitian

    @property
    def m(self):
        return 1 << self.k

    @property
    def b(self):
        return self.n // self.m

    @property
    def dtype(self):
        return self._store.dtype

    @property
    def blocks(self):
        return self._store[_FRONT : _FRONT + self.b]

    @property
    def t(self):
        """Block row of the bulge, 0 when there is none."""
        rows = np.nonzero(np.any(self.blocks[:, 0], axis=(1, 2)))[0]
        if rows.size > 1:
            raise StructureError("more than one bulge present")
        return int(rows[0]) if rows.size else 0

    @property
    def bulge(self):
        t = self.t
        return self.blocks[t, 0] if t else None

    @classmethod
    def identity(cls, n, k, dtype=np.float64):
        a = cls(n, k, hermitian=False, dtype=dtype)
        a.blocks[:, 3] = np.eye(a.m)
        return a

    @classmethod
    def from_dense(cls, a, k, hermitian=True):
        """Block the dense ``a``; raises unless it is block-pentadiagonal at size ``2^k``."""
        a = np.asarray(a)
        n = a.shape[0]
        out = cls(n, k, hermitian=hermitian, dtype=a.dtype)
        m, b = out.m, out.b
        tiles = a.reshape(b, m, b, m).transpose(0, 2, 1, 3)
        for o in range(1, 6):
            i = np.arange(max(0, 3 - o), min(b, b + 3 - o))
            out.blocks[i, o] = tiles[i, i + o - 3]
        dist = np.abs(np.subtract.outer(np.arange(b), np.arange(b)))
        if np.any(tiles[dist > 2]):
            raise StructureError(f"matrix is not block-pentadiagonal at block size {m}")
        return out

    def copy(self):
        return BlockBanded(self.n, self.k, self.blocks.copy(), self.s, self.hermitian)

    def block(self, i, j):
        o = j - i + 3
        if not 0 <= o < 7 or not (0 <= i < self.b and 0 <= j < self.b):
            return np.zeros((self.m, self.m), dtype=self.dtype)
        return self.blocks[i, o]

    def set_block(self, i, j, x):
        """Store block (i, j); Hermitian storage also stores the mirror block."""
        o = j - i + 3
        if not 0 <= o < 7:
            raise StructureError(f"block ({i}, {j}) is outside the storage band")
        if self.hermitian and i == j:
            x = 0.5 * (x + x.conj().T)
        self.blocks[i, o] = x
        if self.hermitian and i != j:
            self.blocks[j, 6 - o] = x.conj().T

    def to_dense(self):
        m, b = self.m, self.b
        tiles = np.zeros((b, b, m, m), dtype=self.dtype)
        for o in range(7):
            i = np.arange(max(0, 3 - o), min(b, b + 3 - o))
            tiles[i, i + o - 3] = self.blocks[i, o]
        return tiles.transpose(0, 2, 1, 3).reshape(self.n, self.n)

    def is_block_tridiagonal(self):
        return not np.any(self.blocks[:, [0, 1, 5, 6]])

    def check_structure(self):
        """Assert the exact zero pattern for the current frontier and bulge."""
        blk = self.blocks
        if self.b > 2 and np.any(blk[2 : min(self.s, self.b - 1) + 1, 1]):
            raise StructureError("a cleared second off-diagonal block is nonzero")
        t = self.t
        if t and not 3 <= t < self.b:
            raise StructureError(f"bulge index {t} out of range")
        if self.hermitian:
            d = self.to_dense()
            if not np.array_equal(d, d.conj().T):
                raise StructureError("storage lost exact Hermitian symmetry")

    def refine(self):
        """Re-block at half the size a block-tridiagonal matrix whose first
        off-diagonal blocks are upper triangular."""
        if self.k == 0:
            raise InvalidInputError("cannot refine below block size 1")
        if not self.is_block_tridiagonal():
            raise StructureError("second block off-diagonal is not cleared")
        h, b = self.m // 2, self.b
        out = BlockBanded(self.n, self.k - 1, hermitian=self.hermitian, dtype=self.dtype)
        # coarse row i over coarse columns i-1 .. i+1, as an (m x 3m) panel
        panel = self.blocks[:, 2:5].transpose(0, 2, 1, 3).reshape(b, self.m, 3 * self.m)
        for a in range(2):
            rows = panel[:, a * h : (a + 1) * h].reshape(b, h, 6, h).transpose(0, 2, 1, 3)
            # fine row 2i + a, fine column 2i - 2 + c, storage offset c + 1 - a
            out.blocks[a::2, 1 - a : 7 - a] = rows
        if np.any(out.blocks[:, [0, 6]]):
            raise StructureError("first block off-diagonal is not upper triangular")
        return out

    def coarsen(self):
        """Read a block-pentadiagonal matrix as block-tridiagonal at twice the block size."""
        if self.b % 2:
            raise ShapeMismatchError("coarsening needs an even block count")
        if np.any(self.blocks[:, [0, 6]]):
            raise StructureError("cannot coarsen with a bulge present")
        m, b2 = self.m, self.b // 2
        rows = 2 * np.arange(b2) + _FRONT
        # fine rows 2I and 2I+1 over fine columns 2I-2 .. 2I+3
        top = self._store[rows, 1:7].transpose(0, 2, 1, 3).reshape(b2, m, 6 * m)
        bot = self._store[rows + 1, 0:6].transpose(0, 2, 1, 3).reshape(b2, m, 6 * m)
        panel = np.concatenate([top, bot], axis=1).reshape(b2, 2 * m, 3, 2 * m).transpose(0, 2, 1, 3)
        out = BlockBanded(self.n, self.k + 1, hermitian=self.hermitian, dtype=self.dtype)
        out.blocks[:, 2:5] = panel
        return out


@dataclass
class ReductionResult:
    T: SymTridiagonal
    Q: np.ndarray | None
    backward_bound: float
    orth_defect: float


# ---------------------------------------------------------------------------
# block rotations


def _rotate_batch(a, ps, chase):
    """Apply the block rotations with top block rows ``ps`` in one batch.

    A plain rotation (``chase`` False) eliminates column block ``p - 1``; a
    chase rotation eliminates ``p - 2``, where the bulge sits.  Rotations
    must be pairwise at least six block rows apart.  A chase rotation whose
    bulge is already zero is skipped.  Returns the (K, 2m, 2m) local factors.
    """
    m = a.m
    st = a._store
    ps = np.asarray(ps, dtype=np.intp)
    chase = np.asarray(chase, dtype=bool)
    r0 = ps + _FRONT
    kk = ps.size
    # window: block columns p-2 .. p+3 for block rows p and p+1
    top = st[r0, 1:7].transpose(0, 2, 1, 3).reshape(kk, m, 6 * m)
    bot = st[r0 + 1, 0:6].transpose(0, 2, 1, 3).reshape(kk, m, 6 * m)
    w0 = np.concatenate([top, bot], axis=1)
    x = np.where(chase[:, None, None], w0[:, :, :m], w0[:, :, m : 2 * m])
    skip = chase & ~np.any(x[:, m:], axis=(1, 2))
    q, r = householder_qr_batch(x)
    q[skip] = np.eye(2 * m)
    qh = q.conj().transpose(0, 2, 1)
    w = np.matmul(qh, w0)
    d = np.matmul(w[:, :, 2 * m : 4 * m], q)
    per = 8 if q.dtype.kind == "c" else 2
    flops.add(kk * per * ((2 * m) ** 2 * 6 * m + (2 * m) ** 3), "rotate")
    if a.hermitian:
        d = 0.5 * (d + d.conj().transpose(0, 2, 1))
    w[:, :, 2 * m : 4 * m] = d
    # the eliminated column becomes exactly [R; 0], everything left of it exactly 0
    w[chase, :, :m] = r[chase]
    plain = ~chase
    w[plain, :, m : 2 * m] = r[plain]
    w[plain, :, :m] = 0.0
    w[skip] = w0[skip]
    tb = w[:, :m].reshape(kk, m, 6, m).transpose(0, 2, 1, 3)
    bb = w[:, m:].reshape(kk, m, 6, m).transpose(0, 2, 1, 3)
    st[r0, 1:7] = tb
    st[r0 + 1, 0:6] = bb
    if a.hermitian:
        js = r0[:, None] + np.arange(-2, 4)[None, :]
        st[js, (5 - np.arange(6))[None, :]] = tb.conj().transpose(0, 1, 3, 2)
        st[js, (6 - np.arange(6))[None, :]] = bb.conj().transpose(0, 1, 3, 2)
    return q


def rotate_r(a, i):
    """Clear block ``(i+1, i-1)`` and triangularize ``(i, i-1)``, in place.

    Needs no bulge.  Creates the bulge ``(i+3, i)`` when that block exists.
    Returns ``(Q_block, a)``; at ``i = b-1`` only the top-left m x m part of
    ``Q_block`` acts on the matrix.
    """
    if a.t:
        raise StructureError(f"rotate_r needs a bulge-free matrix (bulge at t={a.t})")
    if not 1 <= i <= a.b - 1:
        raise InvalidInputError(f"rotate_r index {i} outside [1, {a.b - 1}]")
    q = _rotate_batch(a, [i], [False])[0]
    a.s = max(a.s, i + 1)
    return q, a


def rotate_r_prime(a, j):
    """Chase the bulge from ``(j+1, j-2)`` to ``(j+3, j)``, or off the edge."""
    t = a.t
    if t != j + 1:
        raise StructureError(f"rotate_r_prime({j}) needs the bulge at t={j + 1}, found t={t}")
    q = _rotate_batch(a, [j], [True])[0]
    return q, a


# ---------------------------------------------------------------------------
# products of block-tridiagonal matrices


def block_tridiag_matmul(a, b):
    """Product of two block-tridiagonal matrices with equal block size.

    The result is block-pentadiagonal at the same block size and is stored
    in general (non-Hermitian) form.  Only the nine block pairs per block
    row that can be nonzero are multiplied.
    """
    if a.n != b.n or a.k != b.k:
        raise ShapeMismatchError("block_tridiag_matmul needs equal sizes and block sizes")
    if not (a.is_block_tridiagonal() and b.is_block_tridiagonal()):
        raise StructureError("block_tridiag_matmul needs block-tridiagonal factors")
    dtype = np.result_type(a.dtype, b.dtype)
    out = BlockBanded(a.n, a.k, hermitian=False, dtype=dtype)
    nb, m = a.b, a.m
    per = 8 if dtype.kind == "c" else 2
    count = 0
    # block (i, i+u) of A times block (i+u, i+u+v) of B, batched over i
    for u in (-1, 0, 1):
        for v in (-1, 0, 1):
            lo, hi = max(0, -u, -u - v), min(nb, nb - u, nb - u - v)
            if hi <= lo:
                continue
            i = np.arange(lo, hi)
            out.blocks[i, u + v + 3] += np.matmul(a.blocks[i, u + 3], b.blocks[i + u, v + 3])
            count += (hi - lo) * per * m ** 3
    flops.add(count, "block_matmul")
    return out


def _sweep_factor(n, k, ps, qs, dtype):
    """Product of one sweep's disjoint rotations as a block-tridiagonal
    matrix at block size 2m."""
    m = 1 << k
    out = BlockBanded.identity(n, k + 1, dtype)
    blk = out.blocks
    ps = np.asarray(ps)
    qs = np.asarray(qs)
    nb = out.b
    if ps[0] % 2 == 0:
        blk[ps // 2, 3] = qs
    else:
        c = (ps - 1) // 2
        blk[c, 3, m:, m:] = qs[:, :m, :m]
        # the truncated last rotation has no partner block row
        inside = c + 1 < nb
        ci, qi = c[inside], qs[inside]
        blk[ci, 4, m:, :m] = qi[:, :m, m:]
        blk[ci + 1, 2, :m, m:] = qi[:, m:, :m]
        blk[ci + 1, 3, :m, :m] = qi[:, m:, m:]
    return out


def _lift(x, level):
    while x.k < level:
        x = x.coarsen()
    return x


def _product(x, y):
    lev = max(x.k, y.k)
    c = block_tridiag_matmul(_lift(x, lev), _lift(y, lev))
    return c.coarsen() if c.b > 1 else c


def _tree_product(factors):
    """Ordered product F_1 F_2 ... by pairwise multiplication in a binary tree.

    Factors are consumed from an iterator and merged like a binary counter,
    so at most one partial product per tree level is alive.
    """
    stack = []
    for f in factors:
        stack.append((0, f))
        while len(stack) > 1 and stack[-1][0] == stack[-2][0]:
            (lev, x), (_, y) = stack[-2], stack[-1]
            stack[-2:] = [(lev + 1, _product(x, y))]
    acc = stack[-1][1]
    for _, x in reversed(stack[:-1]):
        acc = _product(x, acc)
    return acc.to_dense()


# ---------------------------------------------------------------------------
# bandwidth halving and the full reduction


def _schedule(b):
    """Wavefront steps, each a list of (sweep, top block row, is_chase)."""
    steps = []
    tau = 0
    while True:
        ops = []
        for i in range(1, b):
            s = tau - _LAG * (i - 1)
            if s < 0:
                break
            p = i + 2 * s
            # a chase needs the bulge row p + 1 inside the matrix
            if s == 0 or p + 1 <= b - 1:
                ops.append((i, p, s > 0))
        if ops:
            steps.append(ops)
        elif tau > _LAG * b:
            break
        tau += 1
    return steps


def _clear(a):
    """Clear the second block off-diagonal; returns (rows, factors) per sweep."""
    sweeps = {}
    for ops in _schedule(a.b):
        qs = _rotate_batch(a, [o[1] for o in ops], [o[2] for o in ops])
        for (i, p, _), q in zip(ops, qs):
            rows, fac = sweeps.setdefault(i, ([], []))
            rows.append(p)
            fac.append(q)
    a.s = a.b
    return [sweeps[i] for i in sorted(sweeps)]


def _accumulate(a, sweeps):
    if not sweeps:
        return np.eye(a.n, dtype=a.dtype)
    return _tree_product(_sweep_factor(a.n, a.k, ps, qs, a.dtype) for ps, qs in sweeps)


def halve(a, want_q=True):
    """Clear the second block off-diagonal of ``a`` (block size m) and return
    ``(Q_hat, a')`` with ``a'`` block-pentadiagonal at block size m/2.

    ``a`` is updated in place.  With ``want_q`` the unitary ``Q_hat``
    satisfying ``a' = Q_hat^* a Q_hat`` is returned, else ``None``.
    """
    if a.t:
        raise StructureError("halve needs a bulge-free matrix")
    if a.k < 1:
        raise InvalidInputError("halve needs block size at least 2")
    sweeps = _clear(a)
    q = _accumulate(a, sweeps) if want_q else None
    return q, a.refine()


def bandwidth(a):
    """Largest |i - j| with a nonzero entry."""
    r, c = np.nonzero(np.asarray(a))
    return int(np.max(np.abs(r - c), initial=0))


def _start_level(d):
    # block-pentadiagonal at block size m holds any band d <= m + 1
    if d <= 2:
        return 0
    return int(np.ceil(np.log2(d - 1)))


def _realify(diag, off):
    """Phases that make the off-diagonal real; real entries keep their sign."""
    n = diag.size
    ph = np.ones(n, dtype=np.complex128)
    for i in range(n - 1):
        e = off[i]
        ph[i + 1] = ph[i] * (e / abs(e) if e.imag != 0.0 else 1.0)
    e_real = np.where(off.imag != 0.0, np.abs(off), off.real)
    return diag.real.copy(), e_real, ph


def tridiagonalize(a, want_q=True):
    """Unitary similarity ``A = Q T Q^*`` with T real symmetric tridiagonal.

    Dense and banded Hermitian inputs are both accepted; the starting block
    size is the smallest that holds the detected bandwidth, so banded inputs
    cost in proportion to their bandwidth.
    """
    h = as_hermitian(a)
    n = h.shape[0]
    k0 = _start_level(bandwidth(h))
    npad = max(1 << int(np.ceil(np.log2(max(n, 1)))), 1 << k0)
    # identity padding never couples to the data: its off-diagonal blocks are zero
    work = np.eye(npad, dtype=h.dtype)
    work[:n, :n] = h
    bb = BlockBanded.from_dense(work, k0)
    del work
    q = None
    for _ in range(k0, 0, -1):
        qh, bb = halve(bb, want_q)
        if want_q:
            q = qh if q is None else matmul(q, qh)
    # last pass at block size one: pentadiagonal to tridiagonal
    sweeps = _clear(bb)
    if want_q and sweeps:
        qh = _accumulate(bb, sweeps)
        q = qh if q is None else matmul(q, qh)
    diag = bb.blocks[:, 3, 0, 0][:n].astype(np.complex128)
    off = bb.blocks[1:, 2, 0, 0][: n - 1].astype(np.complex128)
    dr, er, ph = _realify(diag, off)
    if want_q:
        q = np.eye(n, dtype=h.dtype) if q is None else q[:n, :n]
        if np.iscomplexobj(h):
            q = q * ph[None, :]
    bound = BOUND_CONSTANT * UNIT_ROUNDOFF * max(n, 1) * (k0 + 1)
    return ReductionResult(SymTridiagonal(dr, er), q, bound, bound)
