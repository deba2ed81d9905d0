import math
import time

import numpy as np
import pytest

from pilotwave_com import (GaussianPacketSpec, Grid1D, PotentialSpec,
                           PropagatorCN, SingleParticleBasis, TwoPacketSpec,
                           bosonic_velocities, distinguishable_velocities,
                           make_gaussian, permanent,
                           symmetrized_value_and_gradient, velocity_field)
from pilotwave_com.errors import TooLarge
from pilotwave_com.manybody import basis_splines

from oracles import brute_force_permanent, naive_subset_permanent


def random_complex(rng, n):
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_permanent_identity(n):
    assert abs(permanent(np.eye(n)) - 1.0) < 1e-12


def test_permanent_all_ones_3x3():
    assert abs(permanent(np.ones((3, 3))) - 6.0) < 1e-12


def test_permanent_against_brute_force():
    rng = np.random.default_rng(1)
    a = random_complex(rng, 5)
    want = brute_force_permanent(a)
    got = permanent(a)
    assert abs(got - want) / abs(want) < 1e-12


@pytest.mark.parametrize("n", [2, 4, 6, 8])
def test_permanent_permutation_invariance(n):
    rng = np.random.default_rng(n)
    a = random_complex(rng, n)
    p = np.eye(n)[rng.permutation(n)]
    b = p @ a @ p.T
    pa, pb = permanent(a), permanent(b)
    assert abs(pa - pb) / abs(pa) < 1e-12


def test_permanent_row_multilinearity():
    rng = np.random.default_rng(3)
    a = random_complex(rng, 6)
    scaled = a.copy()
    scaled[2] *= 2.5 - 0.5j
    assert abs(permanent(scaled) - (2.5 - 0.5j) * permanent(a)) \
        / abs(permanent(scaled)) < 1e-12


def test_permanent_zero_row():
    a = np.ones((4, 4), dtype=complex)
    a[1] = 0.0
    assert permanent(a) == 0.0


def test_permanent_factorial_mid_size():
    n = 12
    p = permanent(np.ones((n, n)))
    assert abs(p - math.factorial(n)) / math.factorial(n) < 1e-10


def test_permanent_order_guard():
    with pytest.raises(TooLarge):
        permanent(np.ones((25, 25)))


def test_fast_path_agrees_with_precise():
    rng = np.random.default_rng(9)
    a = random_complex(rng, 10)
    assert abs(permanent(a, precise=False) - permanent(a, precise=True)) \
        / abs(permanent(a)) < 1e-10


def test_gray_code_beats_naive_recomputation():
    rng = np.random.default_rng(4)
    a = random_complex(rng, 14)
    permanent(a, precise=False)  # warm the jit
    t0 = time.perf_counter()
    fast = permanent(a, precise=False)
    t_fast = time.perf_counter() - t0
    t0 = time.perf_counter()
    slow = naive_subset_permanent(a)
    t_slow = time.perf_counter() - t0
    assert abs(fast - slow) / abs(slow) < 1e-9
    assert t_slow / t_fast >= 10.0


@pytest.fixture
def packet_basis():
    grid = Grid1D(-60, 60, 3000)
    states = tuple(
        make_gaussian(GaussianPacketSpec(sigma=1, x0=x0, k0=k0), grid)
        for x0, k0 in [(-36, 1.0), (-12, -0.4), (12, 0.7), (36, -1.2)])
    return SingleParticleBasis(states)


def test_symmetrized_value_single_state():
    grid = Grid1D(-10, 10, 1024)
    wf = make_gaussian(GaussianPacketSpec(sigma=1, x0=0, k0=2), grid)
    basis = SingleParticleBasis((wf,))
    val, grad = symmetrized_value_and_gradient(basis, [0.4])
    spl = basis_splines(basis)
    a, d = spl.matrices(np.array([0.4]))
    assert abs(val - a[0, 0]) < 1e-12 * abs(val)
    assert abs(grad[0] - d[0, 0]) < 1e-12 * abs(grad[0])


def test_symmetrized_value_two_states(packet_basis):
    basis = SingleParticleBasis(packet_basis.states[:2])
    pos = np.array([-35.0, -11.0])
    val, _ = symmetrized_value_and_gradient(basis, pos)
    spl = basis_splines(basis)
    a, _ = spl.matrices(pos)
    direct = a[0, 0] * a[1, 1] + a[1, 0] * a[0, 1]
    assert abs(val - direct) / abs(direct) < 1e-12


def test_symmetrized_identical_states_factorial():
    grid = Grid1D(-10, 10, 1024)
    wf = make_gaussian(GaussianPacketSpec(sigma=1, x0=0, k0=0), grid)
    n = 5
    basis = SingleParticleBasis((wf,) * n)
    pos = np.linspace(-0.8, 0.8, n)
    val, _ = symmetrized_value_and_gradient(basis, pos)
    spl = basis_splines(basis)
    a, _ = spl.matrices(pos)
    product = math.factorial(n) * np.prod([a[i, 0] for i in range(n)])
    assert abs(val - product) / abs(product) < 1e-10


def test_gradient_matches_finite_differences(packet_basis):
    pos = np.array([-35.2, -12.5, 11.4, 36.6])
    val, grad = symmetrized_value_and_gradient(packet_basis, pos)
    h = 1e-5
    for i in range(4):
        plus = pos.copy()
        plus[i] += h
        minus = pos.copy()
        minus[i] -= h
        vp, _ = symmetrized_value_and_gradient(packet_basis, plus)
        vm, _ = symmetrized_value_and_gradient(packet_basis, minus)
        fd = (vp - vm) / (2 * h)
        assert abs(fd - grad[i]) / abs(fd) < 1e-5


def test_exchange_symmetry_swap(packet_basis):
    pos = np.array([-35.0, -12.0, 11.0, 37.0])
    swapped = pos.copy()
    swapped[[1, 2]] = swapped[[2, 1]]
    val_a, _ = symmetrized_value_and_gradient(packet_basis, pos)
    val_b, _ = symmetrized_value_and_gradient(packet_basis, swapped)
    assert abs(val_a - val_b) / abs(val_a) < 1e-10
    va = bosonic_velocities(packet_basis, pos)
    vb = bosonic_velocities(packet_basis, swapped)
    assert abs(va[1] - vb[2]) < 1e-8
    assert abs(va[2] - vb[1]) < 1e-8


def test_identical_states_reduce_to_single_particle():
    grid = Grid1D(-12, 12, 2048)
    wf = make_gaussian(GaussianPacketSpec(sigma=1, x0=0, k0=1.5), grid)
    basis = SingleParticleBasis((wf,) * 4)
    pos = np.array([-1.2, -0.3, 0.4, 1.1])
    vb = bosonic_velocities(basis, pos)
    single = velocity_field(wf, pos)
    assert np.max(np.abs(vb - single)) < 1e-8
    vd = distinguishable_velocities(basis, pos)
    assert np.max(np.abs(vb - vd)) < 1e-8


def test_zero_overlap_reduces_to_own_packet(packet_basis):
    pos = np.array([-36.4, -11.6, 12.3, 35.5])
    vb = bosonic_velocities(packet_basis, pos)
    vd = distinguishable_velocities(packet_basis, pos)
    assert np.max(np.abs(vb - vd)) < 1e-6


def _propagate_basis(states, potential, dt, n_steps):
    grid = states[0].grid
    prop = PropagatorCN(grid, dt, potential)
    stack = np.stack([s.amplitudes for s in states], axis=1)
    out = [stack.copy()]
    for _ in range(n_steps):
        stack = prop._apply(stack)
        out.append(stack.copy())
    return out


def _integrate(states, pos, dt, n_steps, velocity_fn):
    from pilotwave_com.manybody import ModeSplines
    grid = states[0].grid
    snapshots = _propagate_basis(states, PotentialSpec(kind="constant"), dt,
                                 n_steps)
    history = [pos.copy()]
    for s in range(n_steps):
        def spl(stack):
            return ModeSplines([stack[:, j] for j in range(len(states))],
                               grid, 1.0, 1.0)
        s0, s1 = spl(snapshots[s]), spl(snapshots[s + 1])
        sm = spl(0.5 * (snapshots[s] + snapshots[s + 1]))
        k1 = velocity_fn(s0, pos)
        k2 = velocity_fn(sm, pos + 0.5 * dt * k1)
        k3 = velocity_fn(sm, pos + 0.5 * dt * k2)
        k4 = velocity_fn(s1, pos + dt * k3)
        pos = pos + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        history.append(pos.copy())
    return np.asarray(history)


def test_exchange_forbids_crossing_but_product_allows_it():
    grid = Grid1D(-30, 30, 2400)
    left = make_gaussian(GaussianPacketSpec(sigma=1, x0=-6, k0=4.0), grid)
    right = make_gaussian(GaussianPacketSpec(sigma=1, x0=6, k0=-4.0), grid)
    states = (left, right)
    pos = np.array([-6.0, 6.0])
    dt, n_steps = 0.01, 300  # packets meet at t = 1.5

    hist_d = _integrate(states, pos, dt, n_steps, distinguishable_velocities)
    hist_b = _integrate(states, pos, dt, n_steps, bosonic_velocities)

    sep_d = hist_d[:, 0] - hist_d[:, 1]
    sep_b = hist_b[:, 0] - hist_b[:, 1]
    assert sep_d[0] < 0 and sep_d[-1] > 0          # they pass through
    assert np.all(sep_b < 0)                       # they never swap


def test_two_packet_spec_validation():
    with pytest.raises(ValueError):
        TwoPacketSpec(x_left=-3, x_right=3, k_left=1, k_right=-1, sigma=1.0)
