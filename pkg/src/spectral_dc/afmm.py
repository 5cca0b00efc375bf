"""Kernel sums f(x_i) = sum_j c_j k(x_i - y_j) in one dimension.

Two evaluators share one interface:

* :func:`eval_exact` sums every pair directly (the reference).
* :func:`eval_fmm` uses a binary tree over the sources with two-sided
  Chebyshev interpolation of the kernel for well-separated box pairs and
  direct sums for the rest.

Points may carry a low-order part (``*_lo``).  Differences between nearby
points are then formed as ``(x_hi - y_hi) + (x_lo - y_lo)``, which keeps full
relative accuracy when a target sits a tiny offset away from a source.  This
is how eigenvalue estimates stored as "pole + offset" are fed in.

Weights may be a vector or an ``n x r`` block; all columns share one tree.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import flops
from .errors import InvalidInputError, SeparationError


class Kernel(enum.Enum):
    LOG = "log"
    INVERSE = "inverse"
    INVERSE_SQUARE = "inverse_square"


# rough real-operation cost of one kernel evaluation (difference included)
_KCOST = {Kernel.LOG: 12, Kernel.INVERSE: 2, Kernel.INVERSE_SQUARE: 3}


def kernel_values(kernel, dx):
    if kernel is Kernel.INVERSE:
        return 1.0 / dx
    if kernel is Kernel.INVERSE_SQUARE:
        return 1.0 / (dx * dx)
    return np.log(np.abs(dx))


@dataclass(frozen=True)
class KernelSum:
    """Weighted sources for one kernel.  ``weights`` is (n,) or (n, r)."""

    kernel: Kernel
    sources: np.ndarray
    weights: np.ndarray
    bound: float = None
    sources_lo: np.ndarray = None

    def __post_init__(self):
        y = np.array(self.sources, dtype=np.float64).reshape(-1)
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim == 0 or w.ndim > 2 or w.shape[0] != y.size:
            raise InvalidInputError("weights must be (n,) or (n, r) matching the sources")
        lo = None
        if self.sources_lo is not None:
            lo = np.array(self.sources_lo, dtype=np.float64).reshape(-1)
            if lo.size != y.size:
                raise InvalidInputError("sources_lo has the wrong length")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(w))):
            raise InvalidInputError("non-finite source data")
        object.__setattr__(self, "kernel", Kernel(self.kernel))
        object.__setattr__(self, "sources", y)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "sources_lo", lo)
        if self.bound is None:
            full = y if lo is None else y + lo
            c = max(np.abs(full).max(initial=0.0), np.abs(w).max(initial=0.0))
            object.__setattr__(self, "bound", float(c) * (1.0 + 1e-12) + 1e-300)

    @property
    def n(self):
        return self.sources.size

    def values(self):
        return self.sources if self.sources_lo is None else self.sources + self.sources_lo


@dataclass(frozen=True)
class EvalRequest:
    """Targets plus the separation ``delta`` and accuracy ``eps`` of the request.

    ``exclude[i]`` (optional) names one source index skipped for target i;
    use -1 for none.  It exists for self-interaction-free sums where target i
    coincides with source ``exclude[i]``.
    """

    targets: np.ndarray
    delta: float = 0.0
    eps: float = 1e-10
    targets_lo: np.ndarray = None
    exclude: np.ndarray = None

    def __post_init__(self):
        x = np.array(self.targets, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(x)):
            raise InvalidInputError("non-finite targets")
        lo = None
        if self.targets_lo is not None:
            lo = np.array(self.targets_lo, dtype=np.float64).reshape(-1)
            if lo.size != x.size:
                raise InvalidInputError("targets_lo has the wrong length")
        ex = None
        if self.exclude is not None:
            ex = np.array(self.exclude, dtype=np.intp).reshape(-1)
            if ex.size != x.size:
                raise InvalidInputError("exclude has the wrong length")
        object.__setattr__(self, "targets", x)
        object.__setattr__(self, "targets_lo", lo)
        object.__setattr__(self, "exclude", ex)

    @property
    def m(self):
        return self.targets.size

    def values(self):
        return self.targets if self.targets_lo is None else self.targets + self.targets_lo


def _lo_or_zero(lo, n):
    return np.zeros(n) if lo is None else lo


def _diff(xh, xl, yh, yl):
    """Accurate x - y for split points; broadcasting is the caller's business."""
    return (xh - yh) + (xl - yl)


def check_separation(ks, req):
    """Raise SeparationError if some non-excluded pair is closer than delta (or equal)."""
    n, m = ks.n, req.m
    if n == 0 or m == 0:
        return
    yv = ks.values()
    order = np.argsort(yv, kind="stable")
    ys = yv[order]
    yh = ks.sources[order]
    yl = _lo_or_zero(ks.sources_lo, n)[order]
    xh = req.targets
    xl = _lo_or_zero(req.targets_lo, m)
    pos = np.searchsorted(ys, req.values())
    best = np.full(m, np.inf)
    # the nearest non-excluded source is among a few sorted neighbours
    for off in (-2, -1, 0, 1):
        j = np.clip(pos + off, 0, n - 1)
        dist = np.abs(_diff(xh, xl, yh[j], yl[j]))
        if req.exclude is not None:
            dist = np.where(order[j] == req.exclude, np.inf, dist)
        best = np.minimum(best, dist)
    bad = best < req.delta
    bad |= best == 0.0
    if bad.any():
        i = int(np.argmax(bad))
        raise SeparationError(
            f"target {i} lies {best[i]:.3e} from a source (required separation {req.delta:.3e})"
        )


def _check_eps(eps):
    if not (0.0 < eps < 1.0):
        raise InvalidInputError(f"eps={eps!r} must lie in (0, 1)")


def _as_2d(w):
    return (w[:, None], True) if w.ndim == 1 else (w, False)


def eval_exact(ks, req, check=True):
    """Direct O(n m) summation.  Returns shape (m,) or (m, r) like the weights."""
    if check:
        check_separation(ks, req)
    w, squeeze = _as_2d(ks.weights)
    m, n, r = req.m, ks.n, w.shape[1]
    out = np.zeros((m, r))
    if n == 0 or m == 0:
        return out[:, 0] if squeeze else out
    xh = req.targets
    xl = _lo_or_zero(req.targets_lo, m)
    yh = ks.sources
    yl = _lo_or_zero(ks.sources_lo, n)
    chunk = max(1, int(4_000_000 // max(n, 1)))
    for s in range(0, m, chunk):
        e = min(m, s + chunk)
        dx = _diff(xh[s:e, None], xl[s:e, None], yh[None, :], yl[None, :])
        if req.exclude is not None:
            mask = np.arange(n)[None, :] == req.exclude[s:e, None]
            dx = np.where(mask, 1.0, dx)
            k = kernel_values(ks.kernel, dx)
            k[mask] = 0.0
        else:
            k = kernel_values(ks.kernel, dx)
        out[s:e] = k @ w
    flops.add(m * n * (_KCOST[ks.kernel] + 2 * r), "kernel_direct")
    return out[:, 0] if squeeze else out


# ---------------------------------------------------------------------------
# Chebyshev machinery

# p = ceil(A * ln(n * C / eps) + B), clipped to [P_MIN, P_MAX]; calibrated
# against eval_exact on uniform, clustered and interleaved instances.
P_COEF_A = 0.62
P_COEF_B = 2.0
P_MIN = 6
P_MAX = 60
LEAF_SIZE = 32


def chebyshev_order(n, eps, bound=1.0):
    """Interpolation order used for an n-source sum at absolute accuracy eps."""
    x = max(float(n), 2.0) * max(float(bound), 1e-300) / float(eps)
    p = math.ceil(P_COEF_A * math.log(max(x, 2.0)) + P_COEF_B)
    return int(min(P_MAX, max(P_MIN, p)))


def _cheb_nodes(p):
    k = np.arange(p)
    theta = (2 * k + 1) * np.pi / (2 * p)
    return np.cos(theta), ((-1.0) ** k) * np.sin(theta)


def _lagrange(t, nodes, bw):
    """Matrix L[i, a] = a-th Lagrange basis polynomial at t[i] (barycentric)."""
    diff = t[:, None] - nodes[None, :]
    exact = diff == 0.0
    diff = np.where(exact, 1.0, diff)
    q = bw[None, :] / diff
    lag = q / q.sum(axis=1, keepdims=True)
    hit = exact.any(axis=1)
    if hit.any():
        lag[hit] = exact[hit].astype(np.float64)
    return lag


def _map(vals, center, half):
    return (vals - center) / half


def _intervals(v, starts, ends):
    """Tight [lo, hi] of sorted values over index ranges; empty ranges -> nan."""
    lo = np.full(starts.size, np.nan)
    hi = np.full(starts.size, np.nan)
    ok = ends > starts
    lo[ok] = v[starts[ok]]
    hi[ok] = v[ends[ok] - 1]
    return lo, hi


def _child_nodes_in_parent(cc, ch, pc, ph, nodes):
    """Child box Chebyshev nodes in the parent's [-1, 1] coordinate."""
    return ((cc - pc)[:, None] + ch[:, None] * nodes[None, :]) / ph[:, None]


def _center_half(lo, hi):
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    tiny = np.ldexp(1.0, -600)
    h = np.where(h > tiny * np.maximum(np.abs(c), 1.0), h, tiny * np.maximum(np.abs(c), 1.0))
    return c, h


class _Plan:
    """Tree, interaction lists and transfer operators for one (sources, targets) pair."""

    def __init__(self, ks, req, p, leaf_size):
        n, m = ks.n, req.m
        self.kernel = ks.kernel
        self.p = p
        yv = ks.values()
        self.sorder = np.argsort(yv, kind="stable")
        self.yv = yv[self.sorder]
        self.yh = ks.sources[self.sorder]
        self.yl = _lo_or_zero(ks.sources_lo, n)[self.sorder]
        xv = req.values()
        self.torder = np.argsort(xv, kind="stable")
        self.xv = xv[self.torder]
        self.xh = req.targets[self.torder]
        self.xl = _lo_or_zero(req.targets_lo, m)[self.torder]
        self.exclude = None
        if req.exclude is not None:
            # translate excluded source ids into sorted-source positions
            inv = np.empty(n, dtype=np.intp)
            inv[self.sorder] = np.arange(n)
            ex = req.exclude[self.torder]
            self.exclude = np.where(ex >= 0, inv[np.clip(ex, 0, n - 1)], -1)

        L = max(0, math.ceil(math.log2(max(n, 1) / leaf_size))) if n > leaf_size else 0
        self.L = L
        nleaf = 1 << L
        sstart = (np.arange(nleaf + 1) * n) // nleaf
        bounds = 0.5 * (self.yv[sstart[1:-1] - 1] + self.yv[sstart[1:-1]])
        leaf_of_t = np.searchsorted(bounds, self.xv, side="left")
        tstart = np.searchsorted(leaf_of_t, np.arange(nleaf + 1), side="left")
        self.sstart = []
        self.tstart = []
        self.sbox = []
        self.tbox = []
        for lev in range(L + 1):
            step = 1 << (L - lev)
            ss = sstart[::step]
            ts = tstart[::step]
            self.sstart.append(ss)
            self.tstart.append(ts)
            self.sbox.append(_intervals(self.yv, ss[:-1], ss[1:]))
            self.tbox.append(_intervals(self.xv, ts[:-1], ts[1:]))
        self._lists()
        self.nodes, self.bw = _cheb_nodes(p)

    def _lists(self):
        self.m2l = [None] * (self.L + 1)
        near_t = np.array([0], dtype=np.intp)
        near_s = np.array([0], dtype=np.intp)
        for lev in range(self.L + 1):
            tlo, thi = self.tbox[lev]
            slo, shi = self.sbox[lev]
            keep = ~np.isnan(tlo[near_t])
            near_t, near_s = near_t[keep], near_s[keep]
            a, b = near_t, near_s
            dist = np.maximum(slo[b] - thi[a], tlo[a] - shi[b])
            width = np.maximum(thi[a] - tlo[a], shi[b] - slo[b])
            adm = dist >= width
            adm &= dist > 0.0
            self.m2l[lev] = (a[adm], b[adm])
            near_t, near_s = a[~adm], b[~adm]
            if lev < self.L:
                near_t = np.repeat(2 * near_t, 4) + np.tile([0, 0, 1, 1], near_t.size)
                near_s = np.repeat(2 * near_s, 4) + np.tile([0, 1, 0, 1], near_s.size)
        self.p2p = (near_t, near_s)

    # upward pass ----------------------------------------------------------

    def upward(self, w):
        """Multipole coefficients per level: list of (boxes, p, r)."""
        p, L = self.p, self.L
        r = w.shape[1]
        lo, hi = self.sbox[L]
        c, h = _center_half(lo, hi)
        ss = self.sstart[L]
        nb = ss.size - 1
        leaf = np.repeat(np.arange(nb), np.diff(ss))
        t = _map(self.yv, c[leaf], h[leaf])
        lag = _lagrange(t, self.nodes, self.bw)  # (n, p)
        mult = [None] * (L + 1)
        if r <= 8:
            # group-sum lag^T w over each (non-empty, contiguous) leaf
            mL = np.add.reduceat(lag[:, :, None] * w[:, None, :], ss[:-1], axis=0)
        else:
            mL = np.empty((nb, p, r))
            for bi in range(nb):
                mL[bi] = lag[ss[bi] : ss[bi + 1]].T @ w[ss[bi] : ss[bi + 1]]
        mult[L] = mL
        cnt = self.yv.size * p * (2 * r + 8)
        for lev in range(L - 1, -1, -1):
            plo, phi = self.sbox[lev]
            pc, ph = _center_half(plo, phi)
            clo, chi = self.sbox[lev + 1]
            cc, chh = _center_half(clo, chi)
            par = np.arange(cc.size) // 2
            t = _child_nodes_in_parent(cc, chh, pc[par], ph[par], self.nodes)
            e = _lagrange(t.reshape(-1), self.nodes, self.bw).reshape(-1, p, p)  # [child, b, a]
            contrib = np.matmul(e.transpose(0, 2, 1), mult[lev + 1])  # (2B, p, r)
            mult[lev] = contrib[0::2] + contrib[1::2]
            cnt += cc.size * p * p * (2 * r + 8)
        flops.add(cnt, "fmm_up")
        return mult

    def m2l_ops(self):
        """Kernel matrices per level: list of (t_idx, s_idx, K[pair, a, b])."""
        ops = []
        cnt = 0
        for lev in range(self.L + 1):
            a, b = self.m2l[lev]
            if a.size == 0:
                ops.append(None)
                continue
            tc, th = _center_half(*self.tbox[lev])
            sc, sh = _center_half(*self.sbox[lev])
            # centre difference first: node offsets are small, so the node-pair
            # distances keep a relative error of a few ulps
            nodes = self.nodes
            dc = (tc[a] - sc[b])[:, None, None]
            off = (th[a][:, None] * nodes[None, :])[:, :, None] - (sh[b][:, None] * nodes[None, :])[:, None, :]
            k = kernel_values(self.kernel, dc + off)
            order = np.argsort(a, kind="stable")
            ops.append((a[order], b[order], k[order]))
            cnt += a.size * self.p * self.p * _KCOST[self.kernel]
        flops.add(cnt, "fmm_m2l_setup")
        return ops

    def downward(self, mult, ops, r):
        p, L = self.p, self.L
        local = None
        cnt = 0
        for lev in range(L + 1):
            nb = self.tstart[lev].size - 1
            if local is None:
                local = np.zeros((nb, p, r))
            else:
                # L2L from parents at lev-1
                plo, phi = self.tbox[lev - 1]
                pc, ph = _center_half(plo, phi)
                clo, chi = self.tbox[lev]
                cc, chh = _center_half(clo, chi)
                par = np.arange(nb) // 2
                t = _child_nodes_in_parent(cc, chh, pc[par], ph[par], self.nodes)
                t = np.where(np.isnan(t), 0.0, t)
                f = _lagrange(t.reshape(-1), self.nodes, self.bw).reshape(nb, p, p)
                local = np.matmul(f, local[par])
                cnt += nb * p * p * (2 * r + 8)
            op = ops[lev]
            if op is not None:
                a, b, k = op
                contrib = np.matmul(k, mult[lev][b])  # (pairs, p, r)
                ua, first = np.unique(a, return_index=True)
                local[ua] += np.add.reduceat(contrib, first, axis=0)
                cnt += a.size * p * p * 2 * r
        # L2P
        lo, hi = self.tbox[L]
        c, h = _center_half(lo, hi)
        ts = self.tstart[L]
        leaf = np.repeat(np.arange(ts.size - 1), np.diff(ts))
        t = _map(self.xv, c[leaf], h[leaf])
        lag = _lagrange(t, self.nodes, self.bw)
        out = np.einsum("ip,ipr->ir", lag, local[leaf]) if r <= 8 else None
        if out is None:
            out = np.empty((self.xv.size, r))
            for bi in range(ts.size - 1):
                s, e = ts[bi], ts[bi + 1]
                if e > s:
                    out[s:e] = lag[s:e] @ local[bi]
        cnt += self.xv.size * p * (2 * r + 8)
        flops.add(cnt, "fmm_down")
        return out

    def near(self, w, out):
        a, b = self.p2p
        ts, ss = self.tstart[self.L], self.sstart[self.L]
        r = w.shape[1]
        cnt = 0
        kc = _KCOST[self.kernel]
        for ti, si in zip(a.tolist(), b.tolist()):
            t0, t1 = ts[ti], ts[ti + 1]
            s0, s1 = ss[si], ss[si + 1]
            dx = _diff(self.xh[t0:t1, None], self.xl[t0:t1, None], self.yh[None, s0:s1], self.yl[None, s0:s1])
            if self.exclude is not None:
                mask = self.exclude[t0:t1, None] == np.arange(s0, s1)[None, :]
                if mask.any():
                    dx = np.where(mask, 1.0, dx)
                    k = kernel_values(self.kernel, dx)
                    k[mask] = 0.0
                else:
                    k = kernel_values(self.kernel, dx)
            else:
                k = kernel_values(self.kernel, dx)
            out[t0:t1] += k @ w[s0:s1]
            cnt += (t1 - t0) * (s1 - s0) * (kc + 2 * r)
        flops.add(cnt, "fmm_near")


def eval_fmm(ks, req, p=None, leaf_size=LEAF_SIZE, check=True, column_chunk=256):
    """Tree-accelerated evaluation with absolute accuracy ``req.eps``.

    Returns the same shape as :func:`eval_exact`.  ``p`` overrides the
    Chebyshev order chosen from (n, eps, bound).
    """
    _check_eps(req.eps)
    if check:
        check_separation(ks, req)
    w, squeeze = _as_2d(ks.weights)
    m, n, r = req.m, ks.n, w.shape[1]
    if n == 0 or m == 0:
        out = np.zeros((m, r))
        return out[:, 0] if squeeze else out
    if p is None:
        p = chebyshev_order(n, req.eps, ks.bound)
    plan = _Plan(ks, req, p, leaf_size)
    ws = w[plan.sorder]
    ops = plan.m2l_ops()
    out_sorted = np.empty((m, r))
    for c0 in range(0, r, column_chunk):
        c1 = min(r, c0 + column_chunk)
        wc = np.ascontiguousarray(ws[:, c0:c1])
        mult = plan.upward(wc)
        part = plan.downward(mult, ops, c1 - c0)
        plan.near(wc, part)
        out_sorted[:, c0:c1] = part
    out = np.empty_like(out_sorted)
    out[plan.torder] = out_sorted
    return out[:, 0] if squeeze else out


def evaluate(ks, req, backend="fmm", **kw):
    if backend == "exact":
        return eval_exact(ks, req, **{k: v for k, v in kw.items() if k == "check"})
    if backend == "fmm":
        return eval_fmm(ks, req, **kw)
    raise InvalidInputError(f"unknown backend {backend!r}")
