"""Eigen-decomposition of symmetric arrowhead matrices.

Pipeline: deflate -> bisect the secular equation -> rebuild the shaft so the
computed roots are exact eigenvalues of a nearby arrowhead -> form
eigenvector inner products through kernel sums.

Eigenvalue estimates are stored as ``pole + offset`` (an index into the sorted
diagonal plus a small signed offset).  Every difference ``lambda - d_j`` is
then formed as ``(d_anchor - d_j) + offset``, which keeps full relative
accuracy for roots hugging a pole.  That accuracy is what makes the rebuilt
eigenvectors orthogonal to working precision.

Backends: ``"exact"`` sums kernels directly, ``"fmm"`` uses the tree code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import flops
from .afmm import EvalRequest, Kernel, KernelSum, eval_exact, eval_fmm
from .errors import DesiderataError, InvalidInputError, ReconstructionError
from .matrix_core import (
    UNIT_ROUNDOFF,
    Arrowhead,
    OrthogonalFactor,
    check_eps,
    givens,
)

U = UNIT_ROUNDOFF
# deflation never uses a threshold below TAU_FLOOR_FACTOR * u * |H|
TAU_FLOOR_FACTOR = 8.0
# bisection stops once the bracket is this many ulps of the offset wide
ULP_STOP = 4.0
# claimed eigenvalue accuracy never below LAMBDA_FLOOR_FACTOR * u * (|H| + 1)
LAMBDA_FLOOR_FACTOR = 32.0
BACKENDS = ("exact", "fmm")


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class ArrowheadParams:
    """Accuracy parameters: the formal cascade and the values actually used.

    The formal cascade (tau = eps/2n, eps_lambda ~ eps^4/n^5, eps_z ~ eps^7/n^10)
    drops below double-precision resolution for any useful eps, so each
    quantity is clamped to a floor tied to the unit roundoff.
    """

    n: int
    eps: float
    tau: float
    eps_lambda: float
    eps_z: float
    tau_eff: float
    eps_lambda_eff: float
    eps_z_eff: float
    values_only: bool = False

    @classmethod
    def for_diagonalize(cls, n, eps, scale=1.0):
        tau = eps / (2 * n)
        eps_lambda = eps ** 4 / (64.0 * n ** 4 * (n + 1))
        eps_z = eps ** 7 / (147.0 * 64.0 * n ** 8 * (n + 1) ** 2)
        return cls(
            n, eps, tau, eps_lambda, eps_z,
            max(tau, TAU_FLOOR_FACTOR * U * scale),
            max(eps_lambda, LAMBDA_FLOOR_FACTOR * U * (scale + 1.0)),
            max(eps_z, 4.0 * U),
        )

    @classmethod
    def for_eigenvalues(cls, n, eps, scale=1.0):
        tau = eps / (2 * n)
        eps_lambda = eps / 2
        return cls(
            n, eps, tau, eps_lambda, eps_lambda,
            max(tau, TAU_FLOOR_FACTOR * U * scale),
            max(eps_lambda, LAMBDA_FLOOR_FACTOR * U * (scale + 1.0)),
            max(eps_lambda, 4.0 * U),
            values_only=True,
        )


def _kernel_eval(backend, ks, req):
    if backend == "exact":
        return eval_exact(ks, req, check=False)
    if backend == "fmm":
        return eval_fmm(ks, req, check=False)
    raise InvalidInputError(f"unknown backend {backend!r}; choose from {BACKENDS}")


def _fmm_eps(scale_weights):
    # absolute accuracy handed to the kernel evaluator: roundoff level of the weights
    return min(0.5, max(U * scale_weights, 1e-300))


# ---------------------------------------------------------------------------
# deflation


@dataclass
class DeflationOutcome:
    """``H = G (core (+) diag(deflated)) G^T`` up to a residual of at most n*tau.

    ``deflated`` lists (position, eigenvalue) with positions in G's frame;
    the core occupies positions 0..core.n-1.
    """

    G: OrthogonalFactor
    core: Arrowhead
    deflated: list
    tau: float
    dropped: float = 0.0  # sum of magnitudes discarded (shaft entries + rotation residue)

    @property
    def deflated_values(self):
        return np.array([v for _, v in self.deflated], dtype=np.float64)

    def reduced_dense(self):
        n = self.G.n
        h = np.zeros((n, n))
        k = self.core.n
        h[:k, :k] = self.core.to_dense()
        for pos, val in self.deflated:
            h[pos, pos] = val
        return h


def deflate(h, tau):
    """Sort, drop small shaft entries, and merge close diagonal pairs.

    Merging rotates the two shaft entries onto one, zeroing the other; the
    coupling ``c*s*(d_{j+1} - d_j)`` it leaves behind is at most tau/2 and
    is dropped.  Pairs are scanned from the top down so a merged entry is
    re-tested against its lower neighbour.
    """
    tau = float(tau)
    if not (0.0 < tau < 1.0):
        raise InvalidInputError(f"tau={tau!r} must lie in (0, 1)")
    n = h.n
    m = n - 1
    g = OrthogonalFactor(n)
    order = np.argsort(h.d, kind="mergesort")
    g.add_perm(np.concatenate(([0], order + 1)))
    d = h.d[order].copy()
    z = h.z[order].copy()

    small = np.abs(z) < tau
    dropped = float(np.abs(z[small]).sum())
    big_idx = np.nonzero(~small)[0]
    small_idx = np.nonzero(small)[0]
    g.add_perm(np.concatenate(([0], big_idx + 1, small_idx + 1)))
    deflated_vals = list(d[small_idx])
    d = d[big_idx]
    z = z[big_idx]
    k = d.size

    alive = np.ones(k, dtype=bool)
    merged_vals = []
    merged_pos = []
    for j in range(k - 2, -1, -1):
        if d[j + 1] - d[j] <= tau:
            c, s, r = givens(z[j], z[j + 1])
            dj, dk = d[j], d[j + 1]
            g.add_givens(1 + j, 2 + j, c, s)
            d[j] = c * c * dj + s * s * dk
            merged_vals.append(s * s * dj + c * c * dk)
            merged_pos.append(j + 1)
            dropped += abs(c * s * (dk - dj))
            z[j] = r
            z[j + 1] = 0.0
            alive[j + 1] = False
    flops.add(12 * len(merged_pos), "deflate")
    live = np.nonzero(alive)[0]
    dead = np.array(merged_pos[::-1], dtype=np.intp)
    g.add_perm(np.concatenate(([0], live + 1, dead + 1, np.arange(k + 1, m + 1))))
    core = Arrowhead(h.alpha, z[live], d[live])
    vals = merged_vals[::-1] + deflated_vals
    start = core.n
    deflated = [(start + i, float(v)) for i, v in enumerate(vals)]
    return DeflationOutcome(g, core, deflated, tau, dropped)


# ---------------------------------------------------------------------------
# secular equation


@dataclass
class SecularRoots:
    """Roots in split form ``lambdas = d[anchor] + offset`` (anchor -1: no pole)."""

    anchor: np.ndarray
    offset: np.ndarray
    base: np.ndarray  # d[anchor], or the root itself when there is no pole
    lo: np.ndarray  # final bracket, as offsets from base
    hi: np.ndarray
    rounds: int = 0

    @property
    def lambdas(self):
        return self.base + self.offset

    @property
    def intervals(self):
        return np.stack([self.base + self.lo, self.base + self.hi], axis=1)


def check_desiderata(core, tau=None):
    d, z = core.d, core.z
    if d.size > 1 and not np.all(np.diff(d) > 0.0):
        raise DesiderataError("core diagonal is not strictly increasing")
    if np.any(z == 0.0):
        raise DesiderataError("core shaft has a zero entry")
    if tau is not None:
        if d.size > 1 and np.min(np.diff(d)) < tau:
            raise DesiderataError("core diagonal gap below tau")
        if np.min(np.abs(z), initial=np.inf) < tau:
            raise DesiderataError("core shaft entry below tau")


class _PaddedCores:
    """Several cores stacked into padded (N, M) arrays for batched direct sums.

    Padding poles sit far above every bracket and carry zero weight, so they
    never change a sum and never cause a division by zero.
    """

    def __init__(self, cores):
        self.cores = cores
        sizes = np.array([c.d.size for c in cores], dtype=np.intp)
        self.sizes = sizes
        self.pstart = np.concatenate(([0], np.cumsum(sizes)))
        self.dg = np.concatenate([c.d for c in cores]) if cores else np.zeros(0)
        self.alpha = np.array([c.alpha for c in cores])
        m = int(sizes.max(initial=0))
        self.M = m
        self.D = np.empty((len(cores), m))
        self.ZZ = np.zeros((len(cores), m))
        for i, c in enumerate(cores):
            k = c.d.size
            self.D[i, :k] = c.d
            top = max(abs(c.alpha), np.abs(c.d).max(initial=0.0)) + float(np.linalg.norm(c.z))
            self.D[i, k:] = top + 2.0 + np.arange(m - k)
            self.ZZ[i, :k] = c.z ** 2

    def evaluate(self, nid, anchor, mu):
        base = self.dg[anchor]
        s = np.empty(nid.size)
        chunk = max(1, 4_000_000 // max(self.M, 1))
        for c0 in range(0, nid.size, chunk):
            c1 = min(nid.size, c0 + chunk)
            rows = nid[c0:c1]
            diff = (self.D[rows] - base[c0:c1, None]) - mu[c0:c1, None]
            s[c0:c1] = (self.ZZ[rows] / diff).sum(axis=1)
        lin = (base - self.alpha[nid]) + mu
        flops.add(nid.size * (4 * self.M + 4), "secular")
        scale = np.abs(lin) + np.abs(s) + np.abs(base) + np.abs(self.alpha[nid])
        return lin + s, scale, 0.0


class _TreeCore:
    """Kernel-sum evaluator of the secular function for one core."""

    def __init__(self, core, backend):
        self.core = core
        self.backend = backend
        self.dg = core.d
        zz = core.z ** 2
        self.ks = KernelSum(Kernel.INVERSE, core.d, -zz, bound=max(1.0, zz.max(initial=0.0)))
        self.eps = _fmm_eps(zz.sum() + 1e-300)

    def evaluate(self, nid, anchor, mu):
        base = self.dg[anchor]
        req = EvalRequest(base, eps=self.eps, targets_lo=mu)
        s = _kernel_eval(self.backend, self.ks, req)
        lin = (base - self.core.alpha) + mu
        flops.add(4 * anchor.size, "secular")
        scale = np.abs(lin) + np.abs(s) + np.abs(base) + abs(self.core.alpha)
        return lin + s, scale, self.eps


def _bisect(cores, evaluator, eps_lambda, max_rounds):
    """Bisection engine over the roots of several cores at once.

    Root k of a core with m poles lies in (d_{k-1}, d_k), with open ends at
    both extremes.  One evaluation per round serves every active root.
    Returns flattened (node id, anchor, offset, lo, hi) arrays and the round count.
    """
    sizes = np.array([c.d.size for c in cores], dtype=np.intp)
    pstart = np.concatenate(([0], np.cumsum(sizes)))
    dg = evaluator.dg
    nroots = sizes + 1
    nid = np.repeat(np.arange(len(cores)), nroots)
    k = np.arange(nid.size) - np.repeat(np.concatenate(([0], np.cumsum(nroots)[:-1])), nroots)
    m = sizes[nid]
    lower = np.empty(len(cores))
    upper = np.empty(len(cores))
    edge = np.empty(len(cores))
    for i, c in enumerate(cores):
        zn = float(np.linalg.norm(c.z))
        lower[i] = min(c.alpha, c.d[0]) - zn
        upper[i] = max(c.alpha, c.d[-1]) + zn
        # closest approach of a root to a pole allowed by the shaft/gap bounds
        tz = float(np.min(np.abs(c.z)))
        if c.d.size > 1:
            tz = min(tz, float(np.min(np.diff(c.d))))
        edge[i] = max(tz ** 3 / (c.d.size + 2), 1e-300)
    ed = edge[nid]
    anchor = np.empty(nid.size, dtype=np.intp)
    lo = np.empty(nid.size)
    hi = np.empty(nid.size)
    first = k == 0
    last = k == m
    inner = ~(first | last)
    p0 = pstart[nid]
    anchor[first] = p0[first]
    lo[first] = (lower[nid[first]] - dg[p0[first]]) * (1 + 4 * U) - ed[first]
    hi[first] = -ed[first]
    pl = p0[last] + m[last] - 1
    anchor[last] = pl
    lo[last] = ed[last]
    hi[last] = (upper[nid[last]] - dg[pl]) * (1 + 4 * U) + ed[last]
    rounds = 0
    if inner.any():
        left_pole = p0[inner] + k[inner] - 1
        gap = dg[left_pole + 1] - dg[left_pole]
        half = 0.5 * gap
        f, _, _ = evaluator.evaluate(nid[inner], left_pole, half)
        rounds += 1
        # f increases through its root, so f(mid) > 0 puts the root left of mid
        left = f > 0.0
        e_in = ed[inner]
        anchor[inner] = np.where(left, left_pole, left_pole + 1)
        lo[inner] = np.where(left, e_in, np.maximum(-(gap - half) * (1 + 4 * U), -(gap - e_in)))
        hi[inner] = np.where(left, np.minimum(half * (1 + 4 * U), gap - e_in), -e_in)

    active = np.ones(nid.size, dtype=bool)
    mid = 0.5 * (lo + hi)
    while active.any():
        if rounds >= max_rounds:
            raise ReconstructionError("secular bisection failed to converge")
        idx = np.nonzero(active)[0]
        a, b = lo[idx], hi[idx]
        # bisect the exponent while the bracket spans many binades on one side of its pole
        same = (a > 0) | (b < 0)
        wide = same & (np.maximum(np.abs(a), np.abs(b)) > 1024.0 * np.minimum(np.abs(a), np.abs(b)))
        geo = np.sign(a + b) * np.sqrt(np.abs(a)) * np.sqrt(np.abs(b))
        mm = np.where(wide, geo, 0.5 * (a + b))
        f, scale, fe = evaluator.evaluate(nid[idx], anchor[idx], mm)
        rounds += 1
        err = fe + 8.0 * U * scale
        pos = f > 0.0
        b = np.where(pos, mm, b)
        a = np.where(pos, a, mm)
        lo[idx], hi[idx] = a, b
        flat = np.abs(f) <= err
        mid[idx] = np.where(flat, mm, 0.5 * (a + b))
        done = flat | (b - a <= np.maximum(eps_lambda, ULP_STOP * U * np.maximum(np.abs(a), np.abs(b))))
        nxt = 0.5 * (a + b)
        done |= (nxt <= a) | (nxt >= b)
        active[idx[done]] = False
    return nid, anchor, mid, lo, hi, rounds, nroots


def _split_roots(cores, out, local_anchor=True):
    nid, anchor, mid, lo, hi, rounds, nroots = out
    res = []
    s = 0
    p = 0
    for c, r in zip(cores, nroots):
        sl = slice(s, s + r)
        a = anchor[sl] - p
        res.append(SecularRoots(a, mid[sl].copy(), c.d[a], lo[sl].copy(), hi[sl].copy(), rounds))
        s += r
        p += c.d.size
    return res


def _trivial_roots(core):
    one = np.array([core.alpha])
    zero = np.zeros(1)
    return SecularRoots(np.array([-1]), zero, one, zero.copy(), zero.copy(), 0)


def secular_eigenvalues(core, eps_lambda, backend="fmm", tau=None, max_rounds=4000):
    """All roots of the secular equation of a deflated core, by bisection.

    Every root is bracketed between consecutive poles; one kernel evaluation
    per round advances every active bracket.  A bracket stops when its width
    falls below ``max(eps_lambda, 4 u |offset|)`` or when the computed
    function value is within its own error estimate of zero.
    """
    eps_lambda = float(eps_lambda)
    if not (0.0 < eps_lambda < 1.0):
        raise InvalidInputError("eps_lambda must lie in (0, 1)")
    if backend not in BACKENDS:
        raise InvalidInputError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    check_desiderata(core, tau)
    if core.d.size == 0:
        return _trivial_roots(core)
    ev = _PaddedCores([core]) if backend == "exact" else _TreeCore(core, backend)
    return _split_roots([core], _bisect([core], ev, eps_lambda, max_rounds))[0]


def secular_eigenvalues_many(cores, eps_lambda, max_rounds=4000):
    """Direct-summation bisection for many small cores in one vectorized loop."""
    out = [None] * len(cores)
    live = [i for i, c in enumerate(cores) if c.d.size > 0]
    for i, c in enumerate(cores):
        check_desiderata(c)
        if c.d.size == 0:
            out[i] = _trivial_roots(c)
    if live:
        sub = [cores[i] for i in live]
        for i, r in zip(live, _split_roots(sub, _bisect(sub, _PaddedCores(sub), eps_lambda, max_rounds))):
            out[i] = r
    return out


# ---------------------------------------------------------------------------
# reconstruction


@dataclass
class ReconstructedArrowhead:
    alpha_hat: float
    z_hat: np.ndarray

    def arrowhead(self, d):
        return Arrowhead(self.alpha_hat, self.z_hat, d)


def _root_minus_pole(roots, d, j):
    """lambda_k - d_j for all roots k (rows) and poles j (columns), accurately."""
    return (roots.base[:, None] - d[None, j]) + roots.offset[:, None]


def _check_interlacing(roots, d):
    m = d.size
    if roots.offset.size != m + 1:
        raise ReconstructionError("need exactly one more root than poles")
    if m == 0:
        return
    k = np.arange(m)
    below = (roots.base[k] - d) + roots.offset[k]  # lambda_k - d_k < 0
    above = (roots.base[k + 1] - d) + roots.offset[k + 1]  # lambda_{k+1} - d_k > 0
    if np.any(below >= 0.0) or np.any(above <= 0.0):
        raise ReconstructionError("roots do not strictly interlace the poles")


def reconstruct(roots, d, z_signs, backend="exact", eps_z=None):
    """Corner and shaft of the arrowhead whose eigenvalues are exactly ``roots``.

    ``|zhat_j|^2 = prod_k |lambda_k - d_j| / prod_{k != j} |d_k - d_j|``.  The
    exact backend forms the product as ratios of paired factors; the tree
    backend sums logarithms with the log kernel.  Signs come from ``z_signs``.
    """
    d = np.asarray(d, dtype=np.float64)
    m = d.size
    _check_interlacing(roots, d)
    lam0 = roots.base[0] + roots.offset[0]
    if m == 0:
        return ReconstructedArrowhead(float(lam0), np.zeros(0))
    k = np.arange(m)
    alpha_hat = lam0 + np.sum((roots.base[k + 1] - d) + roots.offset[k + 1])
    if backend == "exact":
        mag = _shaft_products(roots, d)
    elif backend == "fmm":
        mag = _shaft_logsum(roots, d, eps_z)
    else:
        raise InvalidInputError(f"unknown backend {backend!r}")
    signs = np.where(np.asarray(z_signs) < 0, -1.0, 1.0)
    return ReconstructedArrowhead(float(alpha_hat), signs * mag)


def _shaft_products(roots, d):
    m = d.size
    out = np.empty(m)
    chunk = max(1, 2_000_000 // max(m, 1))
    for s in range(0, m, chunk):
        e = min(m, s + chunk)
        j = np.arange(s, e)
        lam_minus = _root_minus_pole(roots, d, j)  # (m+1, c)
        dd = d[:, None] - d[None, j]  # (m, c)  d_k - d_j
        kk = np.arange(m)[:, None]
        # pair lambda_k with d_k for k < j, lambda_{k+1} with d_k for k > j
        num = np.where(kk < j[None, :], lam_minus[:-1], lam_minus[1:])
        ratio = np.where(kk == j[None, :], 1.0, num / np.where(kk == j[None, :], 1.0, dd))
        lead = np.abs(lam_minus[j, np.arange(e - s)]) * np.abs(lam_minus[j + 1, np.arange(e - s)])
        out[s:e] = np.sqrt(lead * np.prod(np.abs(ratio), axis=0))
    flops.add(4 * m * (m + 1), "reconstruct")
    return out


def _shaft_logsum(roots, d, eps_z):
    m = d.size
    eps = min(0.5, max(float(eps_z or 0.0), 4.0 * U))
    # sources: the roots (+1) and the poles (-1); target j skips its own pole
    src_hi = np.concatenate([roots.base, d])
    src_lo = np.concatenate([roots.offset, np.zeros(m)])
    w = np.concatenate([np.ones(m + 1), -np.ones(m)])
    ks = KernelSum(Kernel.LOG, src_hi, w, bound=max(1.0, float(np.abs(src_hi).max())), sources_lo=src_lo)
    req = EvalRequest(d, eps=eps, exclude=(m + 1) + np.arange(m))
    logsq = eval_fmm(ks, req, check=False)
    return np.exp(0.5 * logsq)


# ---------------------------------------------------------------------------
# eigenvectors


def eigvec_inner_products(roots, z_hat, d, q, eps_z=None, backend="exact"):
    """``x_i = u_i^T q`` for the unit eigenvectors u_i of [[alpha_hat, zhat^T], [zhat, D]].

    ``u_i = [-1; zhat/(d - lambda_i)] / sqrt(1 + Psi(lambda_i))`` with
    ``Psi(l) = sum zhat^2/(d - l)^2``.  ``q`` is (n,) or (n, r).
    """
    d = np.asarray(d, dtype=np.float64)
    z_hat = np.asarray(z_hat, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    squeeze = q.ndim == 1
    q2 = q[:, None] if squeeze else q
    m = d.size
    if q2.shape[0] != m + 1:
        raise InvalidInputError("q must have one entry per arrowhead row")
    if m == 0:
        out = q2.copy()
        return out[:, 0] if squeeze else out
    eps = min(0.5, max(float(eps_z or 0.0), U))
    targets_hi, targets_lo = roots.base, roots.offset
    zz = z_hat ** 2
    ks_psi = KernelSum(Kernel.INVERSE_SQUARE, d, zz, bound=max(1.0, zz.max()))
    req = EvalRequest(targets_hi, eps=eps * max(zz.sum(), 1e-300), targets_lo=targets_lo)
    psi = _kernel_eval(backend, ks_psi, req)
    r = q2.shape[1]
    wphi = -(z_hat[:, None] * q2[1:])
    bound = max(1.0, float(np.abs(wphi).max(initial=0.0)))
    ks_phi = KernelSum(Kernel.INVERSE, d, wphi, bound=bound)
    req_phi = EvalRequest(targets_hi, eps=eps * max(1.0, float(np.abs(z_hat).sum())), targets_lo=targets_lo)
    phi = _kernel_eval(backend, ks_phi, req_phi)
    out = (phi - q2[0][None, :]) / np.sqrt(1.0 + psi)[:, None]
    flops.add(3 * (m + 1) * r, "inner_products")
    return out[:, 0] if squeeze else out


def eigenvectors_dense(roots, z_hat, d):
    """Explicit eigenvector matrix (columns) of the rebuilt core; for tests and small cores."""
    return eigvec_inner_products(roots, z_hat, d, np.eye(d.size + 1), backend="exact").T


# ---------------------------------------------------------------------------
# drivers


@dataclass
class ArrowheadDiagonalization:
    lambdas: np.ndarray  # ascending
    QtB: np.ndarray  # rows follow lambdas
    params: ArrowheadParams
    rounds: int = 0
    ncore: int = 0


def _validate(h, eps, backend, check_floor):
    if not isinstance(h, Arrowhead):
        raise InvalidInputError("expected an Arrowhead")
    if backend not in BACKENDS:
        raise InvalidInputError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    if check_floor:
        check_eps(eps, h.n)
    elif not (0.0 < eps < 1.0):
        raise InvalidInputError("eps must lie in (0, 1)")


class ArrowheadSolver:
    """Deflation, secular roots and reconstruction of one arrowhead, done once.

    :meth:`apply_qt` then maps any number of column blocks B to ``Q^T B``
    with rows in ascending eigenvalue order.
    """

    def __init__(self, h, eps, backend="fmm", check_floor=True, roots=None, defer=False):
        _validate(h, eps, backend, check_floor)
        self.h = h
        self.backend = backend
        scale = max(h.norm_upper(), 1e-300)
        self.params = ArrowheadParams.for_diagonalize(h.n, eps, scale=min(scale, 1.0))
        self.defl = deflate(h, self.params.tau_eff)
        self.roots = None
        self.z_hat = None
        if not defer:
            self.solve(roots)

    @property
    def core(self):
        return self.defl.core

    def solve(self, roots=None):
        core = self.core
        if core.n > 1:
            if roots is None:
                roots = secular_eigenvalues(core, _ulp_target(self.params), self.backend)
            self.roots = roots
            self.z_hat = reconstruct(roots, core.d, np.sign(core.z), backend=self.backend, eps_z=self.params.eps_z_eff).z_hat
            core_vals = roots.lambdas
        else:
            core_vals = np.array([core.alpha])
        vals = np.concatenate([core_vals, self.defl.deflated_values])
        self.order = np.argsort(vals, kind="stable")
        self.lambdas = vals[self.order]
        return self

    @property
    def rounds(self):
        return 0 if self.roots is None else self.roots.rounds

    def apply_qt(self, b):
        b = np.asarray(b, dtype=np.float64)
        squeeze = b.ndim == 1
        b2 = b[:, None] if squeeze else b
        if b2.shape[0] != self.h.n:
            raise InvalidInputError("B must have n rows")
        gb = self.defl.G.apply_t(b2)
        if self.roots is not None:
            kc = self.core.n
            gb[:kc] = eigvec_inner_products(
                self.roots, self.z_hat, self.core.d, gb[:kc], eps_z=self.params.eps_z_eff, backend=self.backend
            )
        out = gb[self.order]
        return out[:, 0] if squeeze else out

    def result(self, b):
        return ArrowheadDiagonalization(self.lambdas, self.apply_qt(b), self.params, self.rounds, self.core.n)


# the formal eps_lambda is far below one ulp, so bisection runs to working precision
def _ulp_target(params):
    return max(params.eps_lambda, np.finfo(np.float64).tiny)


def arrowhead_diagonalize(h, b, eps, backend="fmm", check_floor=True):
    """Eigenvalues of H and ``Q^T B`` for an (implicit) orthogonal eigenbasis Q.

    ``H = Q diag(lambdas) Q^T`` holds up to ``eps`` for the exactly
    orthogonal Q assembled from the deflation rotations and the rebuilt
    core's eigenvectors; ``QtB`` approximates ``Q^T B`` entrywise.
    """
    return ArrowheadSolver(h, eps, backend, check_floor).result(b)


def arrowhead_solvers(hs, eps, backend="fmm", direct_below=256, check_floor=True):
    """One :class:`ArrowheadSolver` per arrowhead.

    Cores with at most ``direct_below`` rows get direct sums and share one
    bisection loop, which removes the per-arrowhead round overhead.  Larger
    cores use ``backend`` one at a time.
    """
    out = []
    for h in hs:
        sv = ArrowheadSolver(h, eps, backend, check_floor, defer=True)
        if sv.core.n <= direct_below:
            sv.backend = "exact"
        out.append(sv)
    small = [sv for sv in out if 1 < sv.core.n <= direct_below]
    found = {}
    if small:
        target = min(_ulp_target(sv.params) for sv in small)
        for sv, r in zip(small, secular_eigenvalues_many([sv.core for sv in small], target)):
            found[id(sv)] = r
    for sv in out:
        sv.solve(found.get(id(sv)))
    return out


def arrowhead_diagonalize_many(hs, bs, eps, backend="fmm", direct_below=256, check_floor=True):
    """:func:`arrowhead_diagonalize` over a list of arrowheads (see :func:`arrowhead_solvers`)."""
    return [sv.result(b) for sv, b in zip(arrowhead_solvers(hs, eps, backend, direct_below, check_floor), bs)]


def _eig_begin(h, eps, backend, check_floor):
    _validate(h, eps, backend, check_floor)
    scale = max(h.norm_upper(), 1e-300)
    params = ArrowheadParams.for_eigenvalues(h.n, eps, scale=min(scale, 1.0))
    return params, deflate(h, params.tau_eff)


def arrowhead_eigenvalues(h, eps, backend="fmm", check_floor=True):
    """Eigenvalues only (ascending), each within eps of the exact one."""
    params, defl = _eig_begin(h, eps, backend, check_floor)
    core = defl.core
    if core.n == 1:
        core_vals = np.array([core.alpha])
    else:
        core_vals = secular_eigenvalues(core, params.eps_lambda_eff, backend).lambdas
    return np.sort(np.concatenate([core_vals, defl.deflated_values]))
