"""Closed-form references used as independent oracles by the tests."""

import numpy as np


def free_gaussian_psi(x, t, sigma, x0, k0, mass=1.0, hbar=1.0):
    """Free evolution of (sigma sqrt(pi))^-1/2 exp(-(x-x0)^2/2 sigma^2) e^{i k0 x}."""
    tau = hbar * t / (mass * sigma ** 2)
    v0 = hbar * k0 / mass
    xc = x0 + v0 * t
    pref = (sigma * np.sqrt(np.pi)) ** -0.5 / np.sqrt(1 + 1j * tau)
    phase = k0 * (x - 0.5 * v0 * t)
    return pref * np.exp(-((x - xc) ** 2) / (2 * sigma ** 2 * (1 + 1j * tau))
                         + 1j * phase)


def free_density_std(t, sigma, mass=1.0, hbar=1.0):
    """Position-density standard deviation of the free packet at time t."""
    tau = hbar * t / (mass * sigma ** 2)
    return sigma / np.sqrt(2.0) * np.sqrt(1 + tau ** 2)


def free_bohm_velocity(x, t, sigma, x0, k0, mass=1.0, hbar=1.0):
    """v(x, t) = v0 + (x - xc) d(ln sigma_rho)/dt for the free packet."""
    tau = hbar * t / (mass * sigma ** 2)
    v0 = hbar * k0 / mass
    xc = x0 + v0 * t
    rate = (hbar / (mass * sigma ** 2)) * tau / (1 + tau ** 2)
    return v0 + (x - xc) * rate


def free_scaling_trajectory(x_start, t, sigma, x0, k0, mass=1.0, hbar=1.0):
    """Trajectory through the free packet: rides its quantile outward."""
    v0 = hbar * k0 / mass
    xc0 = x0
    xc = x0 + v0 * t
    ratio = free_density_std(t, sigma, mass, hbar) / free_density_std(0.0, sigma, mass, hbar)
    return xc + (x_start - xc0) * ratio


def brute_force_permanent(a):
    """Factorial-cost sum over permutations."""
    from itertools import permutations
    a = np.asarray(a)
    n = a.shape[0]
    rows = np.arange(n)
    total = 0.0 + 0.0j
    for perm in permutations(range(n)):
        total += np.prod(a[rows, list(perm)])
    return total


def naive_subset_permanent(a):
    """Ryser sum with every subset row-sum recomputed from scratch."""
    a = np.asarray(a, dtype=complex)
    n = a.shape[0]
    total = 0.0 + 0.0j
    for mask in range(1, 1 << n):
        cols = [j for j in range(n) if mask >> j & 1]
        rowsums = a[:, cols].sum(axis=1)
        sign = -1.0 if (n - len(cols)) % 2 else 1.0
        total += sign * np.prod(rowsums)
    return total
