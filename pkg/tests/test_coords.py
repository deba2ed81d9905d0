import math
from fractions import Fraction

import numpy as np
import pytest

from pilotwave_com import (PotentialSpec, build_coord_change,
                           cancellation_factors, laplacian_identity_residual,
                           v_cm_reduction)
from pilotwave_com.coords import _condition_residuals


def explicit_residuals(change):
    """Row conditions recomputed from explicit rows with exact accumulation."""
    worst = 0.0
    rows = [2, 3, change.n] if change.n > 3 else list(range(2, change.n + 1))
    for j in rows:
        alpha = change.row(j)
        worst = max(worst, abs(math.fsum(alpha)))
        worst = max(worst, abs(math.fsum(a * a for a in alpha) - 1.0))
    for j, k in [(rows[0], rows[-1])] if len(rows) > 1 else []:
        a, b = change.row(j), change.row(k)
        worst = max(worst, abs(math.fsum(x * y for x, y in zip(a, b))))
    return worst


@pytest.mark.parametrize("n", [2, 3, 10, 64, 1024])
def test_conditions_hold(n):
    change = build_coord_change(n)
    assert explicit_residuals(change) < 1e-12
    closed = max(map(abs, _condition_residuals(n, change.a, change.b, change.c)))
    assert closed < 1e-12


def test_small_system_matches_direct_solve():
    change = build_coord_change(2)
    assert np.allclose(change.row(2), [-1 / np.sqrt(2), 1 / np.sqrt(2)],
                       atol=1e-15)


def test_gram_matrix_is_identity():
    n = 32
    change = build_coord_change(n)
    com_row = np.full(n, 1.0 / math.sqrt(n))
    full = np.vstack([com_row, change.matrix()])
    gram = full @ full.T
    assert np.max(np.abs(gram - np.eye(n))) < 1e-12


def test_forward_inverse_round_trip():
    rng = np.random.default_rng(0)
    for n in (2, 5, 17):
        change = build_coord_change(n)
        x = rng.normal(size=(40, n))
        x_cm, y = change.forward(x)
        back = change.inverse(x_cm, y)
        assert np.max(np.abs(back - x)) < 1e-12


def test_com_row_orthogonal_to_alpha_rows():
    change = build_coord_change(12)
    com_row = np.full(12, 1.0 / math.sqrt(12))
    for j in range(2, 13):
        assert abs(np.dot(com_row, change.row(j))) < 1e-12


def test_needs_two_particles():
    with pytest.raises(ValueError):
        build_coord_change(1)


def test_laplacian_identity_gaussian():
    assert laplacian_identity_residual(2, n_points=100, rng=1) < 1e-6


def test_laplacian_identity_anisotropic():
    assert laplacian_identity_residual(4, n_points=100, rng=2,
                                       anisotropic=True) < 1e-5


def test_laplacian_identity_constant_function():
    assert laplacian_identity_residual(3, n_points=20, rng=3,
                                       constant=True) < 1e-12


def test_laplacian_identity_range_guard():
    with pytest.raises(ValueError):
        laplacian_identity_residual(9)


def test_cancellation_n1_exact_zero():
    beta, gamma = cancellation_factors(1)
    assert beta == 0.0 and gamma == 0.0


def test_cancellation_floats_tiny():
    for n in (100, 7, 1000):
        beta, gamma = cancellation_factors(n)
        assert abs(beta) < 1e-14 and abs(gamma) < 1e-14


def test_cancellation_huge_n():
    beta, gamma = cancellation_factors(6_000_000)
    assert abs(beta) < 1e-10 and abs(gamma) < 1e-10


@pytest.mark.parametrize("n", [1, 4, 9, 16])
def test_cancellation_exact_rational(n):
    beta, gamma = cancellation_factors(n, exact=True)
    assert beta == Fraction(0) and gamma == Fraction(0)


def test_cancellation_exact_needs_square():
    with pytest.raises(ValueError):
        cancellation_factors(12, exact=True)


def test_reduction_linear():
    report = v_cm_reduction(PotentialSpec(kind="linear", slope=2.0), 10, rng=4)
    assert report.max_residual < 1e-10


def test_reduction_constant():
    report = v_cm_reduction(PotentialSpec(kind="constant", v0=3.0), 6, rng=5)
    assert report.max_residual < 1e-12


def test_reduction_quadratic():
    report = v_cm_reduction(PotentialSpec(kind="harmonic", k=2.0), 20, rng=6)
    assert report.max_residual < 1e-9


def test_reduction_offset_harmonic():
    pot = PotentialSpec(kind="harmonic", k=1.5, x_center=0.7)
    report = v_cm_reduction(pot, 8, rng=7)
    assert report.max_residual < 1e-9
