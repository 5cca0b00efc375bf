import time

import numpy as np
import pytest

from spectral_dc.bench import random_tridiagonal
from spectral_dc.errors import InvalidInputError, PrecisionFloorError
from spectral_dc.matrix_core import SymTridiagonal
from spectral_dc.oracle import jacobi_eig
from spectral_dc.tridiag_dc import assemble, diagonalize, eigenvalues_only, split

SQRT2 = np.sqrt(2.0)


def zero_diag(n):
    return SymTridiagonal(np.zeros(n), np.ones(n - 1))


def test_split_n3():
    sp = split(zero_diag(3))
    assert sp.k == 1
    assert sp.T1.diag.tolist() == [0.0] and sp.T2.diag.tolist() == [0.0]
    assert (sp.alpha_mid, sp.beta_left, sp.beta_right) == (0.0, 1.0, 1.0)


def test_split_sizes():
    sp = split(SymTridiagonal(np.ones(5), np.ones(4)))
    assert (sp.T1.n, sp.T2.n) == (2, 2)
    sp = split(SymTridiagonal(np.ones(4), np.ones(3)))
    assert (sp.T1.n, sp.T2.n) == (1, 2)


def test_split_preconditions():
    with pytest.raises(InvalidInputError):
        split(zero_diag(2))
    with pytest.raises(InvalidInputError):
        split(SymTridiagonal(np.zeros(4), np.array([1.0, 0.0, 1.0])))


def _exact_children(t):
    sp = split(t)
    d1, u1 = np.linalg.eigh(sp.T1.to_dense())
    d2, u2 = np.linalg.eigh(sp.T2.to_dense())
    return u1, d1, u2, d2


def test_assemble_n3():
    t = zero_diag(3)
    u, lam = assemble(t, *_exact_children(t), 1e-10)
    assert np.allclose(lam, [-SQRT2, 0.0, SQRT2], atol=1e-10)


def test_assemble_random_n8(rng):
    eps = 1e-8
    t = random_tridiagonal(8, rng)
    u, lam = assemble(t, *_exact_children(t), eps)
    assert np.linalg.norm(t.to_dense() - (u * lam) @ u.T, 2) <= 7 * eps


def test_assemble_perturbed_children(rng):
    eps, eps1 = 1e-10, 1e-8
    t = random_tridiagonal(9, rng)
    u1, d1, u2, d2 = _exact_children(t)
    d1 = d1 + eps1 * 0.5 * rng.uniform(-1, 1, d1.size)
    d2 = d2 + eps1 * 0.5 * rng.uniform(-1, 1, d2.size)
    u, lam = assemble(t, u1, d1, u2, d2, eps)
    assert np.linalg.norm(t.to_dense() - (u * lam) @ u.T, 2) <= 2 * eps1 + 7 * eps
    assert np.linalg.norm(u.T @ u - np.eye(9), 2) <= 3 * (eps1 + eps) / 9


@pytest.mark.parametrize("fn", ["diagonalize", "eigenvalues_only"])
def test_closed_form_n3(fn):
    t = zero_diag(3)
    lam = diagonalize(t, 1e-10).lambdas if fn == "diagonalize" else eigenvalues_only(t, 1e-10)
    assert np.allclose(lam, [-1.41421356, 0.0, 1.41421356], atol=1e-8)


def test_reducible_diagonal():
    t = SymTridiagonal(np.array([0.3, -0.2, 0.9]), np.zeros(2))
    d = diagonalize(t, 1e-10)
    assert d.lambdas.tolist() == [-0.2, 0.3, 0.9]
    assert np.array_equal(np.abs(d.U), np.eye(3)[:, [1, 0, 2]])
    assert eigenvalues_only(t, 1e-10).tolist() == [-0.2, 0.3, 0.9]


def test_closed_form_chain():
    n = 40
    lam = eigenvalues_only(zero_diag(n), 1e-10)
    ref = np.sort(2 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1)))
    assert np.abs(lam - ref).max() <= 2e-10


@pytest.mark.parametrize("backend", ["exact", "fmm"])
def test_random_256(rng, backend):
    eps = 1e-6
    t = random_tridiagonal(256, rng)
    d = diagonalize(t, eps, backend)
    back, orth = d.residuals(t)
    assert back <= eps
    assert orth <= eps / 256 ** 2
    ref = jacobi_eig(t).values
    assert np.abs(d.lambdas - ref).max() <= eps
    assert np.abs(eigenvalues_only(t, eps, backend) - ref).max() <= eps


def test_values_only_agrees_with_full(rng):
    eps = 1e-8
    for n in (5, 64, 300):
        t = random_tridiagonal(n, rng)
        assert np.abs(eigenvalues_only(t, eps) - diagonalize(t, eps).lambdas).max() <= 2 * eps


def test_scaling_of_unnormalized_input(rng):
    t = random_tridiagonal(50, rng).scaled(37.0)
    d = diagonalize(t, 1e-8)
    back, _ = d.residuals(t)
    assert back <= 1e-8 * d.scale
    assert np.abs(d.lambdas - np.linalg.eigvalsh(t.to_dense())).max() <= 1e-8 * d.scale


def test_deterministic(rng):
    t = random_tridiagonal(200, rng)
    a, b = diagonalize(t, 1e-8), diagonalize(t, 1e-8)
    assert np.array_equal(a.U, b.U) and np.array_equal(a.lambdas, b.lambdas)


def test_precision_floor():
    with pytest.raises(PrecisionFloorError):
        diagonalize(zero_diag(10), 1e-16)
    with pytest.raises(InvalidInputError):
        eigenvalues_only(zero_diag(10), 0.7)


def test_values_only_speedup_at_4096(rng):
    # eigenvalues_only should be at least 20x faster than the full solve
    t = random_tridiagonal(4096, rng)
    t0 = time.perf_counter()
    diagonalize(t, 1e-6)
    full = time.perf_counter() - t0
    t0 = time.perf_counter()
    eigenvalues_only(t, 1e-6)
    fast = time.perf_counter() - t0
    print(f"diagonalize {full:.2f} s, eigenvalues_only {fast:.2f} s, ratio {full / fast:.1f}")
    assert full / fast >= 20.0
