"""Slow trusted references: cyclic Jacobi and Sturm-count bisection.

These share no code with the fast solvers so that agreement between the two
families is real evidence.  Both are O(n^3) or worse and guarded at n = 1024.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, InvalidInputError
from .matrix_core import DenseHermitian, SymTridiagonal

MAX_ORACLE_N = 1024
MAX_SWEEPS = 100


@dataclass(frozen=True)
class OracleEig:
    values: np.ndarray
    vectors: np.ndarray


def _round_robin(n):
    """Tournament schedule: n - 1 rounds of n/2 disjoint pairs (n even)."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        p = np.array(players[:half])
        q = np.array(players[half:][::-1])
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_eig(a, tol=1e-15):
    """Cyclic Jacobi eigendecomposition of a (complex) Hermitian matrix.

    Sweeps follow a fixed round-robin ordering, so each step applies n/2
    disjoint rotations at once.  Every pair is first phase-rotated so its
    2 x 2 subproblem is real symmetric.  Stops when the off-diagonal
    Frobenius mass falls to ``tol * |A|_F``.
    """
    if isinstance(a, SymTridiagonal):
        a = a.to_dense()
    h = DenseHermitian(np.asarray(a), tol=1e-12).entries
    n = h.shape[0]
    if n > MAX_ORACLE_N:
        raise InvalidInputError(f"oracle limited to n <= {MAX_ORACLE_N}")
    cplx = np.iscomplexobj(h)
    m = n + (n % 2)
    a = np.zeros((m, m), dtype=np.complex128 if cplx else np.float64)
    a[:n, :n] = h
    v = np.eye(m, dtype=a.dtype)
    fro = np.linalg.norm(h)
    target = tol * fro
    rounds = _round_robin(m) if m > 1 else []
    for _ in range(MAX_SWEEPS):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= target:
            break
        for p, q in rounds:
            apq = a[p, q]
            b = np.abs(apq)
            live = b > 0.0
            if not live.any():
                continue
            p, q, apq, b = p[live], q[live], apq[live], b[live]
            app = a[p, p].real
            aqq = a[q, q].real
            tau = (aqq - app) / (2.0 * b)
            t = 1.0 / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            t = np.where(tau < 0, -t, t)
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            w = np.conj(apq) / b
            # J restricted to (p, q) is [[c, s], [-s w, c w]]
            ap = a[:, p]
            aq = a[:, q]
            a[:, p] = c * ap - (s * w) * aq
            a[:, q] = s * ap + (c * w) * aq
            rp = a[p, :]
            rq = a[q, :]
            wc = np.conj(w)[:, None]
            a[p, :] = c[:, None] * rp - (s[:, None] * wc) * rq
            a[q, :] = s[:, None] * rp + (c[:, None] * wc) * rq
            a[p, q] = 0.0
            a[q, p] = 0.0
            a[p, p] = a[p, p].real
            a[q, q] = a[q, q].real
            vp = v[:, p]
            vq = v[:, q]
            v[:, p] = c * vp - (s * w) * vq
            v[:, q] = s * vp + (c * w) * vq
    else:
        raise ConvergenceError(f"Jacobi did not converge in {MAX_SWEEPS} sweeps")
    vals = np.real(np.diag(a))[:n].copy()
    vecs = v[:n, :n]
    order = np.argsort(vals, kind="stable")
    return OracleEig(vals[order], vecs[:, order].copy())


def sturm_count(t, x):
    """Number of eigenvalues of ``t`` strictly below each point in ``x``."""
    d = t.diag
    e2 = t.off ** 2
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    pivmin = np.finfo(np.float64).tiny * max(1.0, e2.max(initial=0.0))
    q = d[0] - x
    q = np.where(np.abs(q) < pivmin, -pivmin, q)
    count = (q < 0).astype(np.int64)
    for i in range(1, d.size):
        q = (d[i] - x) - e2[i - 1] / q
        q = np.where(np.abs(q) < pivmin, -pivmin, q)
        count += q < 0
    return count


def sturm_bisect_eigenvalues(t, eps):
    """All eigenvalues of a symmetric tridiagonal by bisection on Sturm counts.

    Every eigenvalue is bracketed independently in the Gershgorin interval and
    all brackets are halved together until each is narrower than ``eps``.
    """
    if not isinstance(t, SymTridiagonal):
        t = SymTridiagonal.from_dense(t)
    eps = float(eps)
    if not eps > 0.0:
        raise InvalidInputError("eps must be positive")
    n = t.n
    if n > MAX_ORACLE_N:
        raise InvalidInputError(f"oracle limited to n <= {MAX_ORACLE_N}")
    e = np.abs(t.off)
    rad = np.zeros(n)
    rad[:-1] += e
    rad[1:] += e
    lo0 = float(np.min(t.diag - rad))
    hi0 = float(np.max(t.diag + rad))
    pad = 2.0 * np.finfo(np.float64).eps * max(abs(lo0), abs(hi0), 1.0) * n
    lo = np.full(n, lo0 - pad)
    hi = np.full(n, hi0 + pad)
    k = np.arange(n)
    while True:
        active = (hi - lo) > eps
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        stuck = active & ((mid <= lo) | (mid >= hi))
        active &= ~stuck
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        cnt = sturm_count(t, mid[idx])
        # eigenvalue k (0-based) lies below mid iff more than k eigenvalues are below mid
        below = cnt > k[idx]
        hi[idx[below]] = mid[idx[below]]
        lo[idx[~below]] = mid[idx[~below]]
    return 0.5 * (lo + hi)
