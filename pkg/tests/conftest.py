"""Shared numerical helpers for the test suite."""

import numpy as np


def random_hermitian(n, rng, scale=1.0):
    """Random dense Hermitian matrix with Gaussian entries."""
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return scale * (g + g.conj().T) / 2.0


def random_unitary(n, rng):
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(g)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_density_matrix(n, rng, min_eig=0.02):
    """Random full-rank density matrix with eigenvalues bounded away from 0."""
    w = rng.random(n)
    w = w / w.sum()
    w = (w + min_eig) / (1.0 + n * min_eig)
    u = random_unitary(n, rng)
    rho = (u * w) @ u.conj().T
    return (rho + rho.conj().T) / 2.0


def rk4_matrix(f, y0, t_span, steps):
    """Fixed-step classical Runge-Kutta on a matrix ODE; independent oracle."""
    h = t_span / steps
    y = np.array(y0, dtype=complex)
    for _ in range(steps):
        k1 = f(y)
        k2 = f(y + h / 2 * k1)
        k3 = f(y + h / 2 * k2)
        k4 = f(y + h * k3)
        y = y + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        y = (y + y.conj().T) / 2
    return y
