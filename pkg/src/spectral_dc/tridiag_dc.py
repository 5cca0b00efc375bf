"""Divide-and-conquer eigensolver for real symmetric tridiagonal matrices.

The matrix is cut at its middle row.  The children are solved recursively,
and the middle row plus the children's eigenbases form an arrowhead.  That
arrowhead is diagonalized with the tree-accelerated solver, and its
eigenbasis is pushed through the children's bases in one kernel-sum pass.

Two drivers:

* :func:`diagonalize` returns the full eigenbasis.
* :func:`eigenvalues_only` carries just the first and last rows of each
  child's eigenbasis up the recursion, which is all the arrowheads need.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .arrowhead import arrowhead_diagonalize_many, arrowhead_eigenvalues, arrowhead_solvers
from .errors import InvalidInputError
from .matrix_core import Arrowhead, SymTridiagonal, check_eps, power_of_two_at_least, spectral_norm_upper

# arrowhead cores at or below this size are summed directly
DIRECT_BELOW = 256
# per-level accuracy eps' = LEVEL_C * eps / n^3
LEVEL_C = 1.0 / 64.0
# columns pushed through one kernel-sum pass at a time (bounds peak memory)
COLUMN_BLOCK = 2048


@dataclass
class SplitPoint:
    k: int
    T1: SymTridiagonal
    T2: SymTridiagonal
    alpha_mid: float
    beta_left: float
    beta_right: float


@dataclass
class Diagonalization:
    """``T ~ U diag(lambdas) U^T``; ``eps`` and ``orth_bound`` are the certified targets."""

    U: np.ndarray
    lambdas: np.ndarray
    eps: float
    backward_bound: float
    orth_bound: float
    scale: float = 1.0

    def residuals(self, t):
        """Measured (backward error, orthogonality defect) in the 2-norm."""
        a = t.to_dense() if isinstance(t, SymTridiagonal) else np.asarray(t)
        u = self.U
        n = u.shape[0]
        back = np.linalg.norm(a - (u * self.lambdas) @ u.conj().T, 2)
        orth = np.linalg.norm(u.conj().T @ u - np.eye(n), 2)
        return float(back), float(orth)


def split(t):
    """Cut at row k = floor((n-1)/2); for even n the upper block is the smaller."""
    n = t.n
    if n < 3:
        raise InvalidInputError("split needs n >= 3")
    if not t.unreduced:
        raise InvalidInputError("split needs an unreduced tridiagonal; pre-split at zero couplings")
    k = (n - 1) // 2
    d, e = t.diag, t.off
    return SplitPoint(
        k,
        SymTridiagonal(d[:k], e[: k - 1]),
        SymTridiagonal(d[k + 1 :], e[k + 1 :]),
        float(d[k]),
        float(e[k - 1]),
        float(e[k]),
    )


def _two_by_two(a, b, c):
    """Eigen-decomposition of [[a, b], [b, c]] with ascending eigenvalues."""
    if b == 0.0:
        if a <= c:
            return np.array([a, c]), np.eye(2)
        return np.array([c, a]), np.array([[0.0, 1.0], [1.0, 0.0]])
    tau = (c - a) / (2.0 * b)
    t = 1.0 / (abs(tau) + np.hypot(1.0, tau))
    if tau < 0:
        t = -t
    cs = 1.0 / np.hypot(1.0, t)
    sn = t * cs
    l1 = a - t * b
    l2 = c + t * b
    u = np.array([[cs, sn], [-sn, cs]])
    if l1 <= l2:
        return np.array([l1, l2]), u
    return np.array([l2, l1]), u[:, ::-1].copy()


def _arrowhead_from(sp_alpha, bl, br, last1, first2, d1, d2):
    z = np.concatenate([bl * last1, br * first2])
    return Arrowhead(sp_alpha / 4.0, z / 4.0, np.concatenate([d1, d2]) / 4.0)


def assemble(t, u1, d1, u2, d2, eps, backend="fmm", direct_below=DIRECT_BELOW):
    """Merge child eigen-decompositions of the two halves into one for ``t``.

    The arrowhead ``[[alpha, (beta_l u1_last, beta_r u2_first)], [., diag(d1, d2)]]``
    is diagonalized at one quarter scale (so its norm is at most one) and
    its eigenbasis is applied to the rows of ``W = P blockdiag(1, U1, U2)``.
    """
    sp = split(t)
    h = _arrowhead_from(sp.alpha_mid, sp.beta_left, sp.beta_right, u1[-1], u2[0], d1, d2)
    sv = arrowhead_solvers([h], eps / 4.0, backend, direct_below, check_floor=False)[0]
    lam, u = _merge_apply(sv, u1, u2, sp.k, t.n)
    return u, lam


def _merge_b(u1, u2, k, n, c0=0, c1=None):
    """Columns c0:c1 of B = W^T, whose column i is row i of W.

    Scaling B by 1/4 to match the arrowhead is exact and omitted.
    """
    c1 = n if c1 is None else c1
    b = np.zeros((n, c1 - c0))
    if c0 <= k < c1:
        b[0, k - c0] = 1.0
    a0, a1 = max(c0, 0), min(c1, k)
    if a1 > a0:
        b[1 : k + 1, a0 - c0 : a1 - c0] = u1[a0:a1].T
    a0, a1 = max(c0, k + 1), min(c1, n)
    if a1 > a0:
        b[k + 1 :, a0 - c0 : a1 - c0] = u2[a0 - k - 1 : a1 - k - 1].T
    return b


def _merge_apply(sv, u1, u2, k, n):
    # QtB = Q^T W^T = U^T, computed one column block at a time
    u = np.empty((n, n))
    for c0 in range(0, n, COLUMN_BLOCK):
        c1 = min(n, c0 + COLUMN_BLOCK)
        u[c0:c1] = sv.apply_qt(_merge_b(u1, u2, k, n, c0, c1)).T
    return 4.0 * sv.lambdas, u


@dataclass
class _Node:
    lo: int
    hi: int
    height: int
    left: "_Node | None" = None
    right: "_Node | None" = None

    @property
    def size(self):
        return self.hi - self.lo

    @property
    def k(self):
        return (self.size - 1) // 2


def _tree(lo, hi):
    if hi - lo <= 2:
        return _Node(lo, hi, 0)
    k = (hi - lo - 1) // 2
    a = _tree(lo, lo + k)
    b = _tree(lo + k + 1, hi)
    return _Node(lo, hi, 1 + max(a.height, b.height), a, b)


def _by_height(root):
    levels = {}
    stack = [root]
    while stack:
        v = stack.pop()
        levels.setdefault(v.height, []).append(v)
        if v.left is not None:
            stack += [v.left, v.right]
    return [levels[h] for h in sorted(levels)]


def _leaf(d, e, v):
    s = v.lo
    if v.size == 1:
        return np.array([d[s]]), np.ones((1, 1))
    return _two_by_two(d[s], e[s], d[s + 1])


def _node_arrowhead(d, e, v, last1, first2, l1, l2):
    m = v.lo + v.k
    return _arrowhead_from(d[m], e[m - 1], e[m], last1, first2, l1, l2)


def _dc_full(d, e, eps, backend, direct_below):
    """Bottom-up divide and conquer; nodes of equal height are merged together."""
    root = _tree(0, d.size)
    done = {}
    for level in _by_height(root):
        inner = []
        for v in level:
            if v.left is None:
                done[id(v)] = _leaf(d, e, v)
            else:
                inner.append(v)
        hs = []
        for v in inner:
            l1, u1 = done[id(v.left)]
            l2, u2 = done[id(v.right)]
            hs.append(_node_arrowhead(d, e, v, u1[-1], u2[0], l1, l2))
        for v, sv in zip(inner, arrowhead_solvers(hs, eps / 4.0, backend, direct_below, check_floor=False)):
            _, u1 = done.pop(id(v.left))
            _, u2 = done.pop(id(v.right))
            done[id(v)] = _merge_apply(sv, u1, u2, v.k, v.size)
    return done[id(root)]


def _rows_b(f1, g2, k, n):
    b = np.zeros((n, 2))
    b[1 : k + 1, 0] = f1  # row 0 of W
    b[k + 1 :, 1] = g2  # row n-1 of W
    return b


def _dc_rows(d, e, eps, backend, direct_below):
    """Eigenvalues of both halves plus the first and last rows of their eigenbases.

    Returns the arrowhead of the root merge, ready for an eigenvalue solve.
    """
    root = _tree(0, d.size)
    done = {}
    for level in _by_height(root)[:-1]:
        inner = []
        for v in level:
            if v.left is None:
                lam, u = _leaf(d, e, v)
                done[id(v)] = (lam, u[0].copy(), u[-1].copy())
            else:
                inner.append(v)
        hs, bs = [], []
        for v in inner:
            l1, f1, g1 = done[id(v.left)]
            l2, f2, g2 = done[id(v.right)]
            hs.append(_node_arrowhead(d, e, v, g1, f2, l1, l2))
            bs.append(_rows_b(f1, g2, v.k, v.size))
        results = arrowhead_diagonalize_many(hs, bs, eps / 4.0, backend, direct_below, check_floor=False)
        for v, res in zip(inner, results):
            done[id(v)] = (4.0 * res.lambdas, res.QtB[:, 0].copy(), res.QtB[:, 1].copy())
    l1, _, g1 = done[id(root.left)]
    l2, f2, _ = done[id(root.right)]
    return _node_arrowhead(d, e, root, g1, f2, l1, l2)


def _blocks(t):
    """Index ranges of the unreduced diagonal blocks."""
    cuts = np.nonzero(t.off == 0.0)[0] + 1
    edges = np.concatenate(([0], cuts, [t.n]))
    return list(zip(edges[:-1], edges[1:]))


def _prepare(t, eps):
    if not isinstance(t, SymTridiagonal):
        t = SymTridiagonal.from_dense(t) if np.ndim(t) == 2 else t
    eps = check_eps(eps, t.n, upper=0.5)
    # power-of-two scale so that |T / scale| <= 1 exactly
    return t, eps, power_of_two_at_least(spectral_norm_upper(t))


def _level_eps(eps, n):
    return max(LEVEL_C * eps / float(n) ** 3, np.finfo(np.float64).tiny)


def diagonalize(t, eps, backend="fmm", direct_below=DIRECT_BELOW):
    """Full eigen-decomposition with ``|T - U L U^T| <= eps |T|`` and ``|U^T U - I| <= eps/n^2``."""
    t, eps, scale = _prepare(t, eps)
    n = t.n
    d = t.diag / scale
    e = t.off / scale
    u = np.zeros((n, n))
    lam = np.empty(n)
    level = _level_eps(eps, n)
    for s0, s1 in _blocks(t):
        lb, ub = _dc_full(d[s0:s1], e[s0 : s1 - 1], level, backend, direct_below)
        lam[s0:s1] = lb
        u[s0:s1, s0:s1] = ub
    order = np.argsort(lam, kind="stable")
    return Diagonalization(u[:, order], lam[order] * scale, eps, eps * scale, eps / n ** 2, scale)


def eigenvalues_only(t, eps, backend="fmm", direct_below=DIRECT_BELOW):
    """Eigenvalues (ascending) within ``eps * scale`` of the exact ones."""
    t, eps, scale = _prepare(t, eps)
    n = t.n
    d = t.diag / scale
    e = t.off / scale
    level = _level_eps(eps, n)
    out = []
    for s0, s1 in _blocks(t):
        dd, ee = d[s0:s1], e[s0 : s1 - 1]
        m = dd.size
        if m <= 2:
            out.append(_two_by_two(dd[0], ee[0], dd[1])[0] if m == 2 else dd.copy())
            continue
        h = _dc_rows(dd, ee, level, backend, direct_below)
        be = "exact" if m <= direct_below else backend
        out.append(4.0 * arrowhead_eigenvalues(h, eps / 4.0, backend=be, check_floor=False))
    lam = np.sort(np.concatenate(out))
    return lam * scale
