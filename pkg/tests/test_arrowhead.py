import numpy as np
import pytest

from spectral_dc.arrowhead import (
    arrowhead_diagonalize,
    arrowhead_eigenvalues,
    deflate,
    eigvec_inner_products,
    reconstruct,
    secular_eigenvalues,
)
from spectral_dc.errors import DesiderataError, InvalidInputError, PrecisionFloorError, ReconstructionError
from spectral_dc.matrix_core import Arrowhead
from spectral_dc.oracle import jacobi_eig


def random_arrowhead(rng, n, spread=1.0):
    h = Arrowhead(rng.uniform(-1, 1), rng.uniform(-1, 1, n - 1), np.sort(rng.uniform(-spread, spread, n - 1)))
    s = 1.0 / np.linalg.norm(h.to_dense(), 2)
    return Arrowhead(h.alpha * s, h.z * s, h.d * s)


def exact_roots(values):
    """SecularRoots-like object from plain eigenvalues, for reconstruction tests."""
    from spectral_dc.arrowhead import SecularRoots

    v = np.asarray(values, dtype=float)
    z = np.zeros_like(v)
    return SecularRoots(np.full(v.size, -1), z, v, z.copy(), z.copy())


# deflation ---------------------------------------------------------------


def test_deflate_zero_shaft():
    h = Arrowhead(0.0, np.array([0.5, 0.0]), np.array([-0.3, 0.4]))
    out = deflate(h, 1e-6)
    assert out.core.n == 2
    assert out.deflated_values.tolist() == [0.4]


def test_deflate_close_pair():
    h = Arrowhead(0.0, np.array([0.5, 0.5]), np.array([0.2, 0.2 + 1e-9]))
    tau = 1e-6
    out = deflate(h, tau)
    assert out.core.n == 2
    assert abs(abs(out.core.z[0]) - np.sqrt(0.5)) <= 1e-15
    g = out.G.to_dense()
    res = np.linalg.norm(h.to_dense() - g @ out.reduced_dense() @ g.T, 2)
    assert res <= 3 * tau


def test_deflate_invariants_random(rng):
    tau = 1e-8
    for _ in range(200):
        n = 32
        d = np.round(rng.uniform(-0.5, 0.5, n - 1), 3)  # forces ties
        z = rng.uniform(-0.2, 0.2, n - 1) * (rng.random(n - 1) > 0.2)
        h = Arrowhead(0.1, z, d)
        out = deflate(h, tau)
        c = out.core
        assert np.all(np.diff(c.d) >= tau)
        assert np.all(np.abs(c.z) >= tau)
        g = out.G.to_dense()
        assert np.linalg.norm(h.to_dense() - g @ out.reduced_dense() @ g.T, 2) <= n * tau


def test_deflate_tau_range():
    h = Arrowhead(0.0, np.array([1.0]), np.array([0.0]))
    with pytest.raises(InvalidInputError):
        deflate(h, 0.0)
    with pytest.raises(InvalidInputError):
        deflate(h, 1.0)


# secular equation ---------------------------------------------------------


@pytest.mark.parametrize("backend", ["exact", "fmm"])
def test_secular_two_by_two(backend):
    r = secular_eigenvalues(Arrowhead(0.0, np.array([1.0]), np.array([0.0])), 1e-12, backend)
    assert np.allclose(r.lambdas, [-1.0, 1.0], atol=1e-12)


@pytest.mark.parametrize("backend", ["exact", "fmm"])
def test_secular_three_by_three(backend):
    core = Arrowhead(0.0, np.array([0.5, 0.5]), np.array([-0.5, 0.5]))
    r = secular_eigenvalues(core, 1e-12, backend)
    assert np.allclose(r.lambdas, [-np.sqrt(0.75), 0.0, np.sqrt(0.75)], atol=1e-12)


def test_secular_backends_agree_and_interlace(rng):
    core = deflate(random_arrowhead(rng, 64), 1e-8).core
    eps = 1e-12
    a = secular_eigenvalues(core, eps, "exact")
    b = secular_eigenvalues(core, eps, "fmm")
    assert np.abs(a.lambdas - b.lambdas).max() <= 2 * eps
    lam = a.lambdas
    assert np.all(lam[:-1] < core.d) and np.all(core.d < lam[1:])
    ref = np.linalg.eigvalsh(core.to_dense())
    assert np.abs(lam - ref).max() <= eps


def test_secular_rejects_bad_core():
    with pytest.raises(DesiderataError):
        secular_eigenvalues(Arrowhead(0.0, np.array([1.0, 1.0]), np.array([0.5, 0.1])), 1e-10)
    with pytest.raises(DesiderataError):
        secular_eigenvalues(Arrowhead(0.0, np.array([1.0, 1e-12]), np.array([0.1, 0.5])), 1e-10, tau=1e-8)


# reconstruction -----------------------------------------------------------


def test_reconstruct_two_by_two():
    r = reconstruct(exact_roots([-1.0, 1.0]), np.array([0.0]), np.array([1.0]))
    assert abs(r.alpha_hat) <= 1e-15
    assert abs(r.z_hat[0] - 1.0) <= 1e-15


@pytest.mark.parametrize("backend", ["exact", "fmm"])
def test_reconstruct_round_trip(rng, backend):
    core = deflate(random_arrowhead(rng, 16), 1e-6).core
    roots = secular_eigenvalues(core, 1e-14, "exact")
    r = reconstruct(roots, core.d, np.sign(core.z), backend=backend, eps_z=1e-12)
    assert np.abs(r.z_hat - core.z).max() <= 1e-10
    lam = np.linalg.eigvalsh(r.arrowhead(core.d).to_dense())
    assert np.abs(lam - roots.lambdas).max() <= 1e-10


def test_reconstruct_fmm_shaft_relative(rng):
    core = deflate(random_arrowhead(rng, 128), 1e-6).core
    roots = secular_eigenvalues(core, 1e-14, "exact")
    a = reconstruct(roots, core.d, np.sign(core.z), backend="exact").z_hat
    b = reconstruct(roots, core.d, np.sign(core.z), backend="fmm", eps_z=1e-9).z_hat
    assert np.max(np.abs(a - b) / np.abs(a)) <= 1e-9


def test_reconstruct_perturbed_shaft_bound(rng):
    n = 24
    core = deflate(random_arrowhead(rng, n), 1e-3).core
    m = core.n
    tau = min(np.diff(core.d).min(), np.abs(core.z).min())
    eps = 1e-6
    lam = np.linalg.eigvalsh(core.to_dense())
    step = eps * tau ** 3 / (2 * (m + 1))
    pert = lam + step * rng.uniform(-1, 1, lam.size)
    r = reconstruct(exact_roots(pert), core.d, np.sign(core.z))
    assert np.linalg.norm(core.z - r.z_hat) <= m * eps / (1 - m * eps)


def test_reconstruct_interlacing_violation():
    with pytest.raises(ReconstructionError):
        reconstruct(exact_roots([0.5, 1.0]), np.array([0.0]), np.array([1.0]))


# inner products -----------------------------------------------------------


def test_inner_products_two_by_two():
    roots = exact_roots([-1.0, 1.0])
    x = eigvec_inner_products(roots, np.array([1.0]), np.array([0.0]), np.array([1.0, 0.0]))
    # each eigenvector is fixed only up to sign
    assert np.allclose(np.abs(x), [1 / np.sqrt(2), 1 / np.sqrt(2)], atol=1e-15)


def test_inner_products_zero_vector(rng):
    core = deflate(random_arrowhead(rng, 8), 1e-6).core
    roots = secular_eigenvalues(core, 1e-14, "exact")
    x = eigvec_inner_products(roots, core.z, core.d, np.zeros(core.n))
    assert np.array_equal(x, np.zeros(core.n))


@pytest.mark.parametrize("backend", ["exact", "fmm"])
def test_inner_products_random(rng, backend):
    core = deflate(random_arrowhead(rng, 32), 1e-6).core
    roots = secular_eigenvalues(core, 1e-15, "exact")
    zh = reconstruct(roots, core.d, np.sign(core.z)).z_hat
    q = rng.standard_normal(core.n)
    q /= np.linalg.norm(q)
    x = eigvec_inner_products(roots, zh, core.d, q, eps_z=1e-14, backend=backend)
    w, v = np.linalg.eigh(Arrowhead(core.alpha, zh, core.d).to_dense())
    ref = v.T @ q
    # eigenvectors are defined up to sign
    assert np.max(np.abs(np.abs(x) - np.abs(ref))) <= 1e-10


# drivers ------------------------------------------------------------------


@pytest.mark.parametrize("backend", ["exact", "fmm"])
def test_diagonalize_two_by_two(backend):
    h = Arrowhead(0.0, np.array([1.0]), np.array([0.0]))
    r = arrowhead_diagonalize(h, np.eye(2), 1e-10, backend)
    assert np.allclose(r.lambdas, [-1, 1], atol=1e-12)
    q = r.QtB.T
    assert np.allclose(np.abs(q), 1 / np.sqrt(2), atol=1e-12)
    assert np.allclose(h.to_dense(), (q * r.lambdas) @ q.T, atol=1e-12)


def test_diagonalize_fully_deflated(rng):
    h = Arrowhead(0.2, np.zeros(3), np.array([0.5, -0.4, 0.1]))
    b = rng.standard_normal((4, 2))
    r = arrowhead_diagonalize(h, b, 1e-10, "exact")
    assert np.array_equal(r.lambdas, [-0.4, 0.1, 0.2, 0.5])
    assert np.array_equal(r.QtB, b[[2, 3, 0, 1]])


@pytest.mark.parametrize("backend", ["exact", "fmm"])
@pytest.mark.parametrize("n", [16, 64])
def test_diagonalize_bounds(rng, n, backend):
    eps = 1e-8
    h = random_arrowhead(rng, n)
    r = arrowhead_diagonalize(h, np.eye(n), eps, backend)
    q = r.QtB.T
    assert np.linalg.norm(h.to_dense() - (q * r.lambdas) @ q.T, 2) <= eps
    assert np.linalg.norm(q.T @ q - np.eye(n), 2) <= 3 * eps / n ** 2


@pytest.mark.parametrize("backend", ["exact", "fmm"])
def test_eigenvalues_only(rng, backend):
    for h in [Arrowhead(0.0, np.array([1.0]), np.array([0.0])), random_arrowhead(rng, 40)]:
        lam = arrowhead_eigenvalues(h, 1e-10, backend)
        ref = jacobi_eig(h.to_dense()).values
        assert np.abs(lam - ref).max() <= 1e-10


def test_precision_floor_enforced():
    h = Arrowhead(0.0, np.array([1.0]), np.array([0.0]))
    with pytest.raises(PrecisionFloorError):
        arrowhead_diagonalize(h, np.eye(2), 1e-18)
