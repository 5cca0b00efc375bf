"""Acceptance criteria, one test per criterion.

Each test prints a single ``[criterion N] PASS|FAIL: ...`` line, collected
again in the pytest terminal summary.  Run this file directly to get the
lines without pytest:  python3 tests/test_acceptance.py
"""

import math
import time

import numpy as np
import pytest

from spectral_dc import flops
from spectral_dc.afmm import EvalRequest, Kernel, eval_exact, eval_fmm
from spectral_dc.arrowhead import arrowhead_diagonalize, arrowhead_eigenvalues
from spectral_dc.band_reduction import tridiagonalize
from spectral_dc.bench import (
    loglog_exponent,
    random_banded,
    random_hermitian,
    random_tridiagonal,
    separated_instance,
)
from spectral_dc.matrix_core import Arrowhead, SymTridiagonal
from spectral_dc.oracle import jacobi_eig, sturm_bisect_eigenvalues
from spectral_dc.spectral_apps import condition_number, spectral_gap, svd
from spectral_dc.tridiag_dc import diagonalize, eigenvalues_only

try:
    from .helpers import planted_hermitian, planted_singular
except ImportError:  # run as a script
    from helpers import planted_hermitian, planted_singular

SEED = 20240611
RESULTS = []


def report(number, ok, detail):
    line = f"[criterion {number}] {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    RESULTS.append(line)
    return ok


def norm2(a):
    return float(np.linalg.norm(a, 2))


def nearest_orthogonal(q):
    u, _, vt = np.linalg.svd(q)
    return u @ vt


# 1. tridiagonal divide and conquer bounds


def criterion_1():
    rng = np.random.default_rng(SEED + 1)
    eps = 1e-6
    worst_back = worst_orth = 0.0
    ok = True
    t0 = time.perf_counter()
    for n in (8, 32, 128, 512):
        for _ in range(100):
            t = random_tridiagonal(n, rng)
            assert np.all(t.off != 0.0)
            d = diagonalize(t, eps)
            back, orth = d.residuals(t)
            worst_back = max(worst_back, back / eps)
            worst_orth = max(worst_orth, orth * n ** 2 / eps)
            ok &= back <= eps and orth <= eps / n ** 2
    dt = time.perf_counter() - t0
    ok &= dt <= 300.0
    return report(
        1, ok,
        f"400 tridiagonals, max |T-ULU^T|/eps = {worst_back:.2e}, "
        f"max |U^TU-I| n^2/eps = {worst_orth:.2e}, {dt:.1f} s (limit 300 s)",
    )


# 2. arrowhead bounds and cross-backend agreement


def _random_arrowhead(rng, n):
    h = Arrowhead(rng.uniform(-1, 1), rng.uniform(-1, 1, n - 1), np.sort(rng.uniform(-1, 1, n - 1)))
    s = 1.0 / norm2(h.to_dense())
    return Arrowhead(h.alpha * s, h.z * s, h.d * s)


def criterion_2():
    rng = np.random.default_rng(SEED + 2)
    eps = 1e-8
    ok = True
    worst = {"res": 0.0, "ent": 0.0, "cross": 0.0, "vals": 0.0}
    for n in (16, 64, 256):
        h = _random_arrowhead(rng, n)
        hd = h.to_dense()
        vals = {}
        for backend in ("exact", "fmm"):
            r = arrowhead_diagonalize(h, np.eye(n), eps, backend)
            qt = r.QtB
            q = nearest_orthogonal(qt.T)
            res = norm2(hd - (q * r.lambdas) @ q.T)
            ent = float(np.abs(q.T - qt).max())
            ok &= res <= eps and ent <= eps / n ** 2
            worst["res"] = max(worst["res"], res / eps)
            worst["ent"] = max(worst["ent"], ent * n ** 2 / eps)
            vals[backend] = (r.lambdas, r.params.eps_lambda_eff)
            lam = arrowhead_eigenvalues(h, eps, backend)
            dv = float(np.abs(lam - np.linalg.eigvalsh(hd)).max())
            ok &= dv <= eps
            worst["vals"] = max(worst["vals"], dv / eps)
        e_lam = max(vals["exact"][1], vals["fmm"][1])
        cross = float(np.abs(vals["exact"][0] - vals["fmm"][0]).max())
        ok &= cross <= 2 * e_lam
        worst["cross"] = max(worst["cross"], cross / (2 * e_lam))
    return report(
        2, ok,
        f"n in {{16,64,256}} x {{exact,fmm}}: max |H-QLQ^T|/eps = {worst['res']:.2e}, "
        f"max |Q^T-QtB| n^2/eps = {worst['ent']:.2e}, values-only err/eps = {worst['vals']:.2e}, "
        f"cross-backend / (2 eps_lambda) = {worst['cross']:.2e}",
    )


# 3. kernel evaluation contract and flop scaling


def criterion_3():
    rng = np.random.default_rng(SEED + 3)
    ok = True
    worst = 0.0
    for kern in Kernel:
        for eps in (1e-6, 1e-10):
            for _ in range(50):
                ks, x = separated_instance(kern, 4096, 4096, rng)
                req = EvalRequest(x, delta=0.02, eps=eps)
                err = float(np.abs(eval_fmm(ks, req) - eval_exact(ks, req)).max())
                ok &= err <= eps
                worst = max(worst, err / eps)
    ratios = {}
    for name, fn in (("eval_fmm", eval_fmm), ("eval_exact", eval_exact)):
        counts = []
        for n in (4096, 8192):
            ks, x = separated_instance(Kernel.INVERSE, n, n, np.random.default_rng(SEED + n))
            req = EvalRequest(x, delta=0.02, eps=1e-10)
            with flops.counting() as c:
                fn(ks, req)
            counts.append(c.total)
        ratios[name] = counts[1] / counts[0]
    ok &= ratios["eval_fmm"] <= 2.8 and ratios["eval_exact"] >= 3.6
    return report(
        3, ok,
        f"300 instances, max err/eps = {worst:.2e}; flop ratio 8192/4096: "
        f"eval_fmm {ratios['eval_fmm']:.2f} (<= 2.8), eval_exact {ratios['eval_exact']:.2f} (>= 3.6)",
    )


# 4. tridiagonal reduction


def criterion_4():
    rng = np.random.default_rng(SEED + 4)
    ok = True
    worst = [0.0, 0.0, 0.0]
    for n in (16, 64, 256):
        a = random_hermitian(n, rng)
        na = norm2(a)
        r = tridiagonalize(a)
        q = r.Q
        back = norm2(a - q @ r.T.to_dense() @ q.conj().T) / na
        orth = norm2(q @ q.conj().T - np.eye(n))
        dv = float(np.abs(np.linalg.eigvalsh(r.T.to_dense()) - jacobi_eig(a).values).max()) / na
        ok &= back <= 1e-10 and orth <= 1e-10 and dv <= 1e-10
        worst = [max(w, v) for w, v in zip(worst, (back, orth, dv))]
    counts = []
    for d in (4, 8, 16):
        a = random_banded(512, d, rng)
        with flops.counting() as c:
            tridiagonalize(a, want_q=False)
        counts.append(c.total)
    ratios = [counts[1] / counts[0], counts[2] / counts[1]]
    ok &= all(1.6 <= x <= 2.6 for x in ratios)
    return report(
        4, ok,
        f"n in {{16,64,256}}: max backward {worst[0]:.2e}, orth {worst[1]:.2e}, "
        f"eigenvalue drift {worst[2]:.2e} (all <= 1e-10); banded n=512 flop ratios "
        f"d 4->8 {ratios[0]:.2f}, 8->16 {ratios[1]:.2f} (in [1.6, 2.6])",
    )


# 5. SVD


def criterion_5():
    rng = np.random.default_rng(SEED + 5)
    eps = 1e-6
    ok = True
    parts = []
    for shape in ((64, 32), (128, 128)):
        a = rng.standard_normal(shape)
        a /= np.linalg.norm(a)
        r = svd(a, eps)
        ou, ov, res = r.residuals(a)
        ref = np.linalg.svd(a, compute_uv=False)
        kappa = ref[0] / ref[-1]
        rel = float(np.abs(r.Sigma - ref).max() / ref.min())
        ok &= res <= eps and ou <= eps and ov <= eps and rel <= eps * kappa
        parts.append(
            f"{shape[0]}x{shape[1]} res {res:.1e} orthU {ou:.1e} orthV {ov:.1e} "
            f"sigma rel {rel:.1e} (eps kappa {eps * kappa:.1e})"
        )
    return report(5, ok, "; ".join(parts))


# 6. condition number bracket


def criterion_6():
    rng = np.random.default_rng(SEED + 6)
    n = 32
    ok = True
    lo, hi = math.inf, 0.0
    trials = 0
    for kappa in (10.0, 1e3, 1e6):
        for _ in range(10):
            sigma = np.geomspace(1.0, 1.0 / kappa, n)
            a = planted_singular(sigma, rng)
            k_ref = float(np.linalg.cond(a))
            got = condition_number(a)
            ok &= k_ref <= got <= 3 * n * k_ref
            lo, hi = min(lo, got / k_ref), max(hi, got / k_ref)
            trials += 1
    return report(6, ok, f"{trials} trials, kappa~/kappa in [{lo:.2f}, {hi:.2f}] (bracket [1, {3 * n}])")


# 7. spectral gap


def criterion_7():
    rng = np.random.default_rng(SEED + 7)
    n, k, eps = 32, 12, 1e-2
    ok = True
    parts = []
    for gap in (0.5, 1e-3, 1e-6):
        lo = np.linspace(-0.9, -0.2, k - 1)
        hi = np.linspace(gap, 0.9, n - k - 1)
        vals = np.sort(np.concatenate([lo, [-0.1, -0.1 + gap], hi]))
        a = planted_hermitian(vals, rng)
        ref = jacobi_eig(a).values
        g_ref = ref[k] - ref[k - 1]
        mu_ref = 0.5 * (ref[k] + ref[k - 1])
        g = spectral_gap(a, k, eps)
        limit = math.ceil(math.log2(math.log2(1.0 / (eps * g_ref)))) + 2
        this = (
            abs(g.mu_k - mu_ref) <= eps * g_ref
            and abs(g.gap_k - g_ref) <= eps * g_ref
            and g.iterations <= limit
        )
        ok &= this
        parts.append(f"gap {gap:g}: rel gap err {abs(g.gap_k - g_ref) / g_ref:.1e}, iterations {g.iterations}/{limit}")
    return report(7, ok, "; ".join(parts))


# 8. flop scaling of the tridiagonal solver


def criterion_8():
    rng = np.random.default_rng(SEED + 8)
    ns = [1024, 2048, 4096, 8192]
    vo, full = [], []
    t0 = time.perf_counter()
    for n in ns:
        t = random_tridiagonal(n, rng)
        with flops.counting() as c:
            eigenvalues_only(t, 1e-6)
        vo.append(c.total)
        with flops.counting() as c:
            diagonalize(t, 1e-6)
        full.append(c.total)
    dt = time.perf_counter() - t0
    e_vo = loglog_exponent(ns, vo)
    e_full = loglog_exponent(ns, full)
    ok = e_vo <= 2.4 and e_full <= 2.6 and dt <= 900.0
    return report(
        8, ok,
        f"exponent eigenvalues_only {e_vo:.2f} (<= 2.4), diagonalize {e_full:.2f} (<= 2.6), {dt:.1f} s (limit 900 s)",
    )


# 9. oracle consistency


def criterion_9():
    rng = np.random.default_rng(SEED + 9)
    worst = 0.0
    for i in range(50):
        n = int(rng.integers(2, 257)) if i % 5 else 256
        t = SymTridiagonal(rng.standard_normal(n), rng.standard_normal(n - 1))
        t = t.scaled(1.0 / t.norm_upper())
        diff = float(np.abs(jacobi_eig(t).values - sturm_bisect_eigenvalues(t, 1e-13)).max())
        worst = max(worst, diff)
    return report(9, worst <= 2e-12, f"50 tridiagonals n <= 256, max disagreement {worst:.2e} (<= 2e-12)")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i}" for i in range(1, 10)])
def test_acceptance(criterion):
    assert criterion()


if __name__ == "__main__":
    passed = sum(bool(c()) for c in CRITERIA)
    print(f"{passed}/{len(CRITERIA)} criteria passed")
