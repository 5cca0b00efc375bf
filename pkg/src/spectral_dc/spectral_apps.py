"""User-level spectral routines built on band reduction and divide and conquer.

Every routine reduces its input to one real symmetric tridiagonal matrix and
then asks the tridiagonal engine for eigenvalues at whatever accuracy the
task needs.  The accuracy-squaring loops (singular values, gaps) keep the
tridiagonal and only repeat the cheap eigenvalue pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .band_reduction import tridiagonalize
from .errors import (
    InvalidInputError,
    IterationCapError,
    PrecisionFloorError,
    RankDeficiencyError,
    ShapeMismatchError,
)
from .matrix_core import (
    as_hermitian,
    check_eps,
    matmul,
    power_of_two_at_least,
    precision_floor,
    spectral_norm_upper,
)
from .tridiag_dc import Diagonalization, diagonalize, eigenvalues_only

MAX_SQUARINGS = 64


@dataclass
class SvdResult:
    """``A ~ U diag(Sigma) V^*`` with Sigma descending.

    ``bounds`` holds the certified targets (orth_U, orth_V, residual).
    """

    U: np.ndarray
    Sigma: np.ndarray
    V: np.ndarray
    bounds: tuple

    def residuals(self, a):
        a = np.asarray(a)
        u, v = self.U, self.V
        res = np.linalg.norm(a - (u * self.Sigma) @ v.conj().T, 2)
        ou = np.linalg.norm(u.conj().T @ u - np.eye(u.shape[1]), 2)
        ov = np.linalg.norm(v.conj().T @ v - np.eye(v.shape[1]), 2)
        return float(ou), float(ov), float(res)


@dataclass(frozen=True)
class GapResult:
    mu_k: float
    gap_k: float
    iterations: int


class _Spectrum:
    """A Hermitian matrix reduced once to tridiagonal form.

    Eigenvalue requests are phrased as absolute accuracies in the units of
    the input and translated to the engine's relative accuracy.
    """

    def __init__(self, a, want_q=False, backend="fmm"):
        h = as_hermitian(a)
        self.n = h.shape[0]
        self.backend = backend
        self.s = power_of_two_at_least(spectral_norm_upper(h))
        red = tridiagonalize(h / self.s, want_q)
        self.T = red.T
        self.Q = red.Q
        self.unit = self.s * power_of_two_at_least(spectral_norm_upper(self.T))
        self.floor = precision_floor(self.n) * self.unit

    def _rel(self, target):
        rel = min(target / self.unit, 0.25)
        if rel < precision_floor(self.n):
            raise PrecisionFloorError(
                f"accuracy {target:.3e} is below the precision floor {self.floor:.3e} for n={self.n}"
            )
        return rel

    def values(self, target):
        """Ascending eigenvalues and their certified absolute error (<= target)."""
        rel = self._rel(target)
        return eigenvalues_only(self.T, rel, self.backend) * self.s, rel * self.unit

    def diagonalize(self, target):
        rel = self._rel(target)
        dg = diagonalize(self.T, rel, self.backend)
        q = matmul(self.Q, dg.U)
        return q, dg.lambdas * self.s, rel


def _squared(t):
    """(1/2)^(2^t), flushed to zero once it underflows."""
    e = 1 << t
    return float(np.ldexp(1.0, -e)) if e < 1100 else 0.0


def _square_loop(spectrum, accept, what):
    """Run eigenvalue passes at accuracy (1/2)^(2^t) until ``accept`` is satisfied.

    ``accept(values, err)`` returns a result or None.  Requests below the
    precision floor are clamped to it once; if that pass still fails the
    loop stops with an error rather than returning an unverified answer.
    """
    for t in range(MAX_SQUARINGS):
        e_t = _squared(t)
        clamped = e_t <= spectrum.floor
        vals, err = spectrum.values(max(e_t, spectrum.floor))
        out = accept(vals, err, t + 1)
        if out is not None:
            return out
        if clamped:
            raise IterationCapError(
                f"{what}: not resolved at the precision floor (accuracy {err:.3e}) after {t + 1} passes"
            )
    raise IterationCapError(f"{what}: {MAX_SQUARINGS} squaring passes exhausted")


def hermitian_diagonalize(a, eps, backend="fmm"):
    """``A ~ Q diag(lambdas) Q^*`` with backward error ``eps |A|`` and orthogonality ``eps / n^2``."""
    h = as_hermitian(a)
    n = h.shape[0]
    eps = check_eps(eps, n, upper=0.5)
    s = power_of_two_at_least(spectral_norm_upper(h))
    red = tridiagonalize(h / s, True)
    dg = diagonalize(red.T, eps / 2.0, backend)
    q = matmul(red.Q, dg.U)
    return Diagonalization(q, dg.lambdas * s, eps, eps * s, eps / n ** 2, s)


def hermitian_eigenvalues(a, eps, backend="fmm"):
    """Ascending eigenvalues within ``eps * |A|`` (up to a power-of-two rounding of |A|)."""
    spectrum = _Spectrum(a, backend=backend)
    eps = check_eps(eps, spectrum.n, upper=0.5)
    return spectrum.values(eps * spectrum.s)[0]


def _dilation(a):
    m, n = a.shape
    dt = np.complex128 if np.iscomplexobj(a) else np.float64
    d = np.zeros((m + n, m + n), dtype=dt)
    d[:m, m:] = a
    d[m:, :m] = a.conj().T
    return d


def _as_matrix(a):
    a = np.asarray(a)
    if a.ndim != 2 or a.size == 0:
        raise ShapeMismatchError(f"expected a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("matrix has non-finite entries")
    if a.dtype.kind not in "fc":
        a = a.astype(np.float64)
    return a


def singular_value(a, k, eps, backend="fmm"):
    """k-th largest singular value to relative accuracy ``eps``.

    The eigenvalues of the Hermitian dilation ``[[0, A], [A^*, 0]]`` are
    ``+-sigma_i`` (plus zeros), so sigma_k is read off directly without
    squaring the condition number.  The accuracy of each pass is the square
    of the previous one; the loop stops once the certified error is at most
    ``eps/2`` times the current estimate.
    """
    a = _as_matrix(a)
    p = min(a.shape)
    k = int(k)
    if not 1 <= k <= p:
        raise InvalidInputError(f"k={k} must lie in [1, {p}]")
    eps = float(eps)
    if not 0.0 < eps < 0.5:
        raise InvalidInputError(f"eps={eps!r} must lie in (0, 0.5)")
    return _singular_value(a, k, eps, backend)[0]


def _singular_value(a, k, eps, backend):
    """(sigma_k, certified absolute error) of ``a``."""
    s = power_of_two_at_least(2.0 * np.linalg.norm(a))
    spectrum = _Spectrum(_dilation(a / s), backend=backend)

    def accept(vals, err, _):
        sk = vals[-k]
        if sk > 0.0 and err <= 0.5 * eps * sk:
            return float(sk * s), float(err * s)
        return None

    return _square_loop(spectrum, accept, f"singular value {k}")


COND_EPS = 0.125


def condition_number(a, backend="fmm"):
    """Estimate kappa(A) with kappa <= result < 2.4 n kappa.

    A is scaled by the power of two M >= n |A|_max, which bounds sigma_max
    from above.  sigma_min(A / M) is found to relative accuracy 1/8 and the
    estimate divides by its certified lower end, so it can only
    overestimate.  The result depends only on the mantissas of A: scaling A
    by 2 leaves it unchanged.
    """
    a = _as_matrix(a)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ShapeMismatchError("condition_number needs a square matrix")
    amax = float(np.abs(a).max())
    if amax == 0.0:
        raise InvalidInputError("condition number of the zero matrix is undefined")
    m = power_of_two_at_least(n * amax)
    sigma, err = _singular_value(a / m, n, COND_EPS, backend)
    return 1.0 / (sigma - err)


def _cholesky(s):
    try:
        return np.linalg.cholesky(s)
    except np.linalg.LinAlgError as exc:
        raise InvalidInputError("S is not positive definite (Cholesky failed)") from exc


def _reduce_pencil(h, s):
    """``(L^{-1} H L^{-*}, L)`` for ``S = L L^*``."""
    h = as_hermitian(h)
    s = as_hermitian(s)
    if h.shape != s.shape:
        raise ShapeMismatchError(f"H {h.shape} and S {s.shape} differ in shape")
    low = _cholesky(s)
    x = solve_triangular(low, h, lower=True)
    x = solve_triangular(low, x.conj().T, lower=True).conj().T
    return 0.5 * (x + x.conj().T), low


def pencil_eigenvalues(h, s, eps, backend="fmm"):
    """Eigenvalues of the definite pencil (H, S) with absolute error ``eps``.

    Assumes the usual normalization |H|, |S^{-1}| <= 1; otherwise the error is
    ``eps`` times max(1, |L^{-1} H L^{-*}|).
    """
    ht, _ = _reduce_pencil(h, s)
    n = ht.shape[0]
    eps = check_eps(eps, n, upper=0.5)
    spectrum = _Spectrum(ht, backend=backend)
    return spectrum.values(0.5 * eps * max(1.0, spectrum.s))[0]


def _gap_input(a, s):
    if s is None:
        return as_hermitian(a), None
    return _reduce_pencil(a, s)


def spectral_gap(a, k, eps, s=None, backend="fmm"):
    """Midpoint and width of the gap between the k-th and (k+1)-th eigenvalues.

    Pass ``s`` to work with the pencil (a, s).  The accuracy is squared each
    pass and the loop ends when it is at most ``eps/2`` times the gap estimate.
    """
    h, _ = _gap_input(a, s)
    n = h.shape[0]
    k = int(k)
    if not 1 <= k <= n - 1:
        raise InvalidInputError(f"k={k} must lie in [1, {n - 1}]")
    eps = float(eps)
    if not 0.0 < eps < 0.5:
        raise InvalidInputError(f"eps={eps!r} must lie in (0, 0.5)")
    spectrum = _Spectrum(h, backend=backend)

    def accept(vals, err, passes):
        lo, hi = vals[k - 1], vals[k]
        gap = hi - lo
        if gap > 0.0 and err <= 0.5 * eps * gap:
            return GapResult(float(0.5 * (lo + hi)), float(gap), passes)
        return None

    return _square_loop(spectrum, accept, f"gap {k}")


def spectral_projector(a, k, eps, s=None, backend="fmm"):
    """Projector onto the invariant subspace of the k smallest eigenvalues.

    For a pencil the result is the S-orthogonal projector ``C_k C_k^* S``
    where the columns of C are S-orthonormal eigenvectors.
    """
    h, low = _gap_input(a, s)
    n = h.shape[0]
    k = int(k)
    if not 1 <= k <= n:
        raise InvalidInputError(f"k={k} must lie in [1, {n}]")
    eps = check_eps(eps, n, upper=0.5)
    if k == n:
        return np.eye(n, dtype=h.dtype)
    gap = spectral_gap(h, k, min(eps, 0.25), backend=backend).gap_k
    spectrum = _Spectrum(h, want_q=True, backend=backend)
    # subspace error is about (backward error) / gap, plus the orthogonality defect
    target = min(eps * gap / 8.0, 0.25 * spectrum.unit)
    q, _, _ = spectrum.diagonalize(target)
    uk = q[:, :k]
    if low is None:
        p = uk @ uk.conj().T
        return 0.5 * (p + p.conj().T)
    c = solve_triangular(low.conj().T, uk, lower=False)
    return c @ (c.conj().T @ as_hermitian(s))


def svd(a, eps, backend="fmm"):
    """Thin SVD through the Gramian ``A^* A``.

    A is scaled by a power of two at least |A|_F.  The smallest Gramian
    eigenvalue is located by halving the accuracy until it is resolved to a
    factor 4/3; that fixes the accuracy ``eps * lambda_min / n^2`` for the
    full diagonalization (clamped to the precision floor).  U is recovered as
    ``A V^{-*} Sigma^{-1}`` by one linear solve with V.
    """
    a = _as_matrix(a)
    m, n = a.shape
    if m < n:
        r = svd(a.conj().T, eps, backend)
        return SvdResult(r.V, r.Sigma, r.U, r.bounds)
    eps = check_eps(eps, n, upper=0.5)
    fro = float(np.linalg.norm(a))
    if fro == 0.0:
        raise RankDeficiencyError("A is zero")
    sf = power_of_two_at_least(fro)
    ah = a / sf
    spectrum = _Spectrum(matmul(ah.conj().T, ah, hermitian=True), want_q=True, backend=backend)
    target = 0.25
    while True:
        if target < spectrum.floor:
            raise RankDeficiencyError(
                f"smallest singular value not separated from zero at the precision floor {spectrum.floor:.3e}"
            )
        vals, err = spectrum.values(target)
        lmin = vals[0]
        if lmin > 0.0 and err <= 0.25 * lmin:
            break
        target *= 0.5
    # eps' = eps / (n kappa~)^2 with kappa~ = lambda_min^{-1/2}
    inner = max(eps * lmin / n ** 2, spectrum.floor)
    v, lam, rel = spectrum.diagonalize(inner)
    if lam[0] <= 0.0:
        raise RankDeficiencyError("Gramian has a non-positive eigenvalue")
    v = v[:, ::-1]
    sigma = np.sqrt(lam[::-1]) * sf
    x = np.linalg.solve(v, a.conj().T)
    u = x.conj().T / sigma[None, :]
    return SvdResult(u, sigma, v, (eps, rel / n ** 2, eps * sf))
