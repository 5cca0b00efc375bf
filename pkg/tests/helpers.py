"""Shared instance generators for the test suite."""

import numpy as np


def random_unitary(n, rng, complex_=True):
    z = rng.standard_normal((n, n))
    if complex_:
        z = z + 1j * rng.standard_normal((n, n))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def planted_hermitian(values, rng, complex_=True):
    q = random_unitary(len(values), rng, complex_)
    a = (q * np.asarray(values)) @ q.conj().T
    return 0.5 * (a + a.conj().T)


def planted_singular(sigma, rng, m=None, complex_=False):
    n = len(sigma)
    m = n if m is None else m
    u = random_unitary(m, rng, complex_)[:, :n]
    v = random_unitary(n, rng, complex_)
    return (u * np.asarray(sigma)) @ v.conj().T


def spd(n, rng):
    """Random SPD matrix with |S^{-1}| <= 1 and |S| modest."""
    b = rng.standard_normal((n, n)) / np.sqrt(n)
    return b @ b.T + np.eye(n)
