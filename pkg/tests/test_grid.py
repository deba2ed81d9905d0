import numpy as np
import pytest
from scipy.stats import norm

from pilotwave_com import (GaussianPacketSpec, Grid1D, WaveFunction1D,
                           make_gaussian, make_two_packet, quantile_positions,
                           quantum_potential, sample_positions)
from pilotwave_com.bohm import ks_statistic
from pilotwave_com.errors import GridTooNarrow, ZeroNorm
from pilotwave_com.grid import density_cdf_at


@pytest.fixture
def fig1_packet():
    grid = Grid1D(-40, 40, 2048)
    return make_gaussian(GaussianPacketSpec(sigma=1, x0=-15, k0=10), grid)


def test_gaussian_normalized(fig1_packet):
    assert abs(fig1_packet.norm_squared() - 1.0) < 1e-12


def test_gaussian_mean_position(fig1_packet):
    assert abs(fig1_packet.mean_position() - (-15.0)) < 1e-6


def test_gaussian_mean_velocity(fig1_packet):
    total = np.trapezoid(fig1_packet.current(), fig1_packet.grid.x)
    assert abs(total - 10.0) < 1e-6


@pytest.mark.parametrize("k0", [-5.0, 0.0, 10.0])
def test_current_integral_matches_momentum(k0):
    grid = Grid1D(-35, 35, 3000)
    wf = make_gaussian(GaussianPacketSpec(sigma=1.2, x0=2.0, k0=k0), grid)
    total = np.trapezoid(wf.current(), grid.x)
    assert abs(total - k0) < 1e-8


def test_grid_too_narrow():
    grid = Grid1D(-3, 3, 64)
    with pytest.raises(GridTooNarrow):
        make_gaussian(GaussianPacketSpec(sigma=1, x0=0, k0=0), grid)


def test_norm_quadratic_scaling(fig1_packet):
    doubled = fig1_packet.with_amplitudes(2.0 * fig1_packet.amplitudes)
    assert abs(doubled.norm_squared() - 4.0) < 1e-10
    assert abs(doubled.normalize().norm_squared() - 1.0) < 1e-12


def test_normalize_idempotent_exactly(fig1_packet):
    scaled = fig1_packet.with_amplitudes(1.7 * fig1_packet.amplitudes)
    once = scaled.normalize()
    twice = once.normalize()
    assert np.array_equal(once.amplitudes, twice.amplitudes)


def test_zero_norm_raises():
    grid = Grid1D(-5, 5, 64)
    wf = WaveFunction1D(grid, np.zeros(64, dtype=complex))
    with pytest.raises(ZeroNorm):
        wf.norm()


def test_two_packet_norm():
    grid = Grid1D(-60, 60, 4096)
    wf = make_two_packet(grid, sigma=1.0, x_left=-20, x_right=20,
                         k_left=3.0, k_right=-3.0)
    assert abs(wf.norm_squared() - 1.0) < 1e-10


def test_quantum_potential_gaussian_closed_form():
    grid = Grid1D(-12, 12, 3000)
    wf = make_gaussian(GaussianPacketSpec(sigma=1, x0=0.5, k0=0), grid)
    q = quantum_potential(wf)
    x = grid.x
    exact = 0.5 * (1.0 - (x - 0.5) ** 2)
    core = np.abs(x - 0.5) < 4.0
    assert np.max(np.abs(q[core] - exact[core])) < 1e-3
    i0 = np.argmin(np.abs(x - 0.5))
    assert abs(q[i0] - 0.5) < 1e-3
    i_plus = np.argmin(np.abs(x - 1.5))
    assert abs(q[i_plus]) < 1e-3


def test_quantum_potential_flat_state():
    grid = Grid1D(-5, 5, 512)
    wf = WaveFunction1D(grid, np.ones(512, dtype=complex)).normalize()
    q = quantum_potential(wf)
    assert np.max(np.abs(q[1:-1])) < 1e-10


def test_quantum_potential_node_regularized():
    grid = Grid1D(-10, 10, 1024)
    psi = np.sin(np.pi * grid.x / 5.0) * np.exp(-grid.x ** 2 / 8.0)
    wf = WaveFunction1D(grid, psi.astype(complex)).normalize()
    q = quantum_potential(wf)
    assert np.all(np.isfinite(q))


def test_sampling_ks_against_normal_cdf():
    grid = Grid1D(-10, 10, 2048)
    wf = make_gaussian(GaussianPacketSpec(sigma=1, x0=0, k0=0), grid)
    pos = sample_positions(wf, 5000, rng=42)
    ks = ks_statistic(pos, norm.cdf(pos, scale=1 / np.sqrt(2)))
    assert ks < 0.03


def test_sampling_deterministic():
    grid = Grid1D(-10, 10, 1024)
    wf = make_gaussian(GaussianPacketSpec(sigma=1, x0=1, k0=0), grid)
    a = sample_positions(wf, 500, rng=7)
    b = sample_positions(wf, 500, rng=7)
    assert np.array_equal(a, b)


def test_sampling_two_packet_balance():
    grid = Grid1D(-60, 60, 4096)
    wf = make_two_packet(grid, sigma=1.0, x_left=-20, x_right=20)
    pos = sample_positions(wf, 5000, rng=3)
    left = np.mean(pos < 0)
    assert abs(left - 0.5) < 0.03


def test_sampling_support_containment():
    grid = Grid1D(-2, 8, 4096)
    sigma = 4 * grid.dx
    wf = make_gaussian(GaussianPacketSpec(sigma=sigma, x0=3.0, k0=0), grid)
    pos = sample_positions(wf, 2000, rng=5)
    assert np.all(np.abs(pos - 3.0) < 6 * sigma)


def test_sampling_stable_under_refinement():
    spec = GaussianPacketSpec(sigma=1, x0=0, k0=0)
    ks = []
    for n in (2048, 4096):
        wf = make_gaussian(spec, Grid1D(-10, 10, n))
        pos = sample_positions(wf, 4000, rng=11)
        ks.append(ks_statistic(pos, norm.cdf(pos, scale=1 / np.sqrt(2))))
    assert abs(ks[0] - ks[1]) < 1.5 / np.sqrt(4000)


def test_quantile_positions_monotone():
    grid = Grid1D(-10, 10, 1024)
    wf = make_gaussian(GaussianPacketSpec(sigma=1, x0=0, k0=0), grid)
    pos = quantile_positions(wf, 200)
    assert np.all(np.diff(pos) > 0)
    assert abs(np.median(pos)) < 0.05


def test_density_cdf_monotone(fig1_packet):
    xs = np.linspace(-30, 10, 500)
    cdf = density_cdf_at(fig1_packet, xs)
    assert np.all(np.diff(cdf) >= 0)
    assert cdf[0] < 1e-6 and cdf[-1] > 1 - 1e-6
