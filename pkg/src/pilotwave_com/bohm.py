"""Bohmian velocity fields, trajectory ensembles and conditional sampling."""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import OutOfDomain, TooFewSamples, UnsupportedState, ZeroNorm
from .grid import (GaussianPacketSpec, NODE_EPSILON, WaveFunction1D,
                   density_cdf_at, sample_positions)
from .tdse import PropagatorCN


def complex_spline(wf: WaveFunction1D) -> CubicSpline:
    """Cubic interpolant of the complex amplitudes (not of density/phase)."""
    return CubicSpline(wf.grid.x, wf.amplitudes)


def _spline_velocity(spline, positions, hbar, mass, peak_density, v_max=None):
    val = spline(positions)
    der = spline(positions, 1)
    dens = np.abs(val) ** 2
    num = np.imag(der * np.conj(val))
    v = (hbar / mass) * num / np.maximum(dens, 1e-300)
    if v_max is not None:
        low = dens < NODE_EPSILON * peak_density
        v = np.where(low, np.clip(v, -v_max, v_max), v)
        # numerical overshoot guard everywhere
        v = np.clip(v, -v_max, v_max)
    return v


def velocity_field(wf: WaveFunction1D, positions, v_max: float | None = None):
    """Bohmian velocity v = (hbar/m) Im(psi'/psi) at the given positions.

    Amplitudes are interpolated with a cubic spline; where the local density
    falls below the node threshold the velocity is clamped to +-v_max.
    Accepts a scalar or an array of positions.
    """
    scalar = np.isscalar(positions)
    p = np.atleast_1d(np.asarray(positions, dtype=float))
    if np.any(p < wf.grid.x_min) or np.any(p > wf.grid.x_max):
        raise OutOfDomain("position outside grid")
    spline = complex_spline(wf)
    v = _spline_velocity(spline, p, wf.hbar, wf.mass, wf.density.max(), v_max)
    return float(v[0]) if scalar else v


@dataclass
class TrajectoryEnsemble:
    """Trajectories indexed [experiment, particle, time]."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    labels: tuple = ()
    escaped: np.ndarray | None = None

    def __post_init__(self):
        if self.positions.shape != self.velocities.shape:
            raise ValueError("positions and velocities shapes differ")
        if self.positions.shape[-1] != len(self.times):
            raise ValueError("time axis mismatch")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    @property
    def n_experiments(self):
        return self.positions.shape[0]

    @property
    def n_particles(self):
        return self.positions.shape[1]


def integrate_trajectories(prop: PropagatorCN, wf0: WaveFunction1D,
                           initial_positions, n_steps: int,
                           dt: float | None = None,
                           record_stride: int = 1) -> TrajectoryEnsemble:
    """RK4 integration of dx/dt = v(x, t) in lockstep with the wavefunction.

    One trajectory per initial position (single-particle experiments). The
    trajectory step equals the solver step; the wavefunction is interpolated
    linearly in time for the RK4 midpoints. Escaping trajectories are clamped
    to the walls and flagged.
    """
    if dt is not None and not np.isclose(dt, prop.dt):
        raise ValueError("trajectory dt must equal the solver dt")
    h = prop.dt
    pos = np.asarray(initial_positions, dtype=float).copy()
    if np.any(~wf0.grid.contains(pos)):
        raise OutOfDomain("initial position outside grid")
    wf0 = wf0.normalize()
    psi = wf0.amplitudes.copy()
    x_lo, x_hi = wf0.grid.x_min, wf0.grid.x_max
    v_max = wf0.grid.dx / h if h > 0 else None
    hbar, mass = wf0.hbar, wf0.mass
    escaped = np.zeros(pos.shape, dtype=bool)

    spline = complex_spline(wf0)
    peak = wf0.density.max()
    times = [0.0]
    rec_pos = [pos.copy()]
    rec_vel = [_spline_velocity(spline, pos, hbar, mass, peak, v_max)]

    x = wf0.grid.x
    for s in range(1, n_steps + 1):
        psi_new = prop._apply(psi)
        spline_new = CubicSpline(x, psi_new)
        spline_mid = CubicSpline(x, 0.5 * (psi + psi_new))
        peak = max(np.max(np.abs(psi) ** 2), 1e-300)
        k1 = _spline_velocity(spline, pos, hbar, mass, peak, v_max)
        k2 = _spline_velocity(spline_mid, np.clip(pos + 0.5 * h * k1, x_lo, x_hi),
                              hbar, mass, peak, v_max)
        k3 = _spline_velocity(spline_mid, np.clip(pos + 0.5 * h * k2, x_lo, x_hi),
                              hbar, mass, peak, v_max)
        k4 = _spline_velocity(spline_new, np.clip(pos + h * k3, x_lo, x_hi),
                              hbar, mass, peak, v_max)
        pos = pos + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out = (pos < x_lo) | (pos > x_hi)
        escaped |= out
        pos = np.clip(pos, x_lo, x_hi)
        psi, spline = psi_new, spline_new
        if s % record_stride == 0 or s == n_steps:
            times.append(s * h)
            rec_pos.append(pos.copy())
            rec_vel.append(_spline_velocity(spline, pos, hbar, mass, peak, v_max))

    positions = np.asarray(rec_pos).T[:, None, :]
    velocities = np.asarray(rec_vel).T[:, None, :]
    return TrajectoryEnsemble(times=np.asarray(times), positions=positions,
                              velocities=velocities,
                              escaped=escaped[:, None])


def ks_statistic(positions, cdf_values) -> float:
    """One-sample Kolmogorov-Smirnov statistic from precomputed CDF values."""
    f = np.sort(np.asarray(cdf_values, dtype=float))
    n = len(f)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def equivariance_check(positions, wf: WaveFunction1D,
                       min_samples: int = 500) -> float:
    """KS distance between empirical positions and the |psi|^2 law."""
    p = np.asarray(positions, dtype=float).ravel()
    if p.size < min_samples:
        raise TooFewSamples(f"need >= {min_samples} trajectories, got {p.size}")
    return ks_statistic(p, density_cdf_at(wf, p))


# --- state families for conditional sampling ---------------------------------

@dataclass(frozen=True)
class ProductStateSpec:
    """N independent particles sharing one single-particle wavefunction."""

    psi: WaveFunction1D
    n_particles: int

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")


@dataclass(frozen=True)
class SymmetrizedModesSpec:
    """Permutation-symmetric state over modes with negligible mutual overlap.

    Under the zero-overlap premise the sequential conditionals reduce to a
    uniform mixture over the modes not yet used, i.e. exactly one draw per
    mode in random order.
    """

    states: tuple

    def __post_init__(self):
        if len(self.states) < 1:
            raise ValueError("need at least one mode")
        g = self.states[0].grid
        if any(s.grid != g for s in self.states):
            raise ValueError("modes must share a grid")


@dataclass(frozen=True)
class CatStateSpec:
    """Equal superposition of all particles left and all particles right."""

    packet: GaussianPacketSpec
    x_left: float
    x_right: float
    n_particles: int

    def __post_init__(self):
        if abs(self.x_right - self.x_left) <= 10 * self.packet.sigma:
            raise ValueError("packet supports must be disjoint "
                             "(|x_right - x_left| > 10 sigma)")
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")


def sequential_conditional_sample(state, rng) -> np.ndarray:
    """Positions of one experiment, drawn particle by particle.

    Each particle is drawn from its conditional distribution given the
    previously selected positions. For a product state this reduces to
    independent draws; for a zero-overlap symmetrized state to one draw per
    mode; for the cat state the first draw selects the side and pins all
    subsequent particles there.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    if isinstance(state, ProductStateSpec):
        return sample_positions(state.psi, state.n_particles, rng)
    if isinstance(state, SymmetrizedModesSpec):
        order = rng.permutation(len(state.states))
        out = np.empty(len(state.states))
        for slot, mode in enumerate(order):
            out[slot] = sample_positions(state.states[mode], 1, rng)[0]
        return out
    if isinstance(state, CatStateSpec):
        sd = state.packet.density_std
        midpoint = 0.5 * (state.x_left + state.x_right)
        first_center = state.x_left if rng.random() < 0.5 else state.x_right
        first = rng.normal(first_center, sd)
        side = state.x_left if first < midpoint else state.x_right
        rest = rng.normal(side, sd, size=state.n_particles - 1)
        return np.concatenate([[first], rest])
    raise UnsupportedState(f"no conditional sampler for {type(state).__name__}")


def marginal_cdf_at(state, positions) -> np.ndarray:
    """Single-particle marginal distribution function of the state."""
    p = np.asarray(positions, dtype=float)
    if isinstance(state, ProductStateSpec):
        return density_cdf_at(state.psi, p)
    if isinstance(state, SymmetrizedModesSpec):
        return np.mean([density_cdf_at(s, p) for s in state.states], axis=0)
    if isinstance(state, CatStateSpec):
        from scipy.special import ndtr
        sd = state.packet.density_std
        return 0.5 * (ndtr((p - state.x_left) / sd) + ndtr((p - state.x_right) / sd))
    raise UnsupportedState(f"no marginal for {type(state).__name__}")


@dataclass
class MarginalComparison:
    ks: np.ndarray
    overlap_deficit: np.ndarray | None = None


def marginal_vs_experiment_distance(state, n_experiments: int,
                                    rng) -> MarginalComparison:
    """KS distance between one experiment's empirical distribution and the
    marginal, per experiment. For the cat state also reports the fraction of
    marginal mass on the side the experiment left empty."""
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    ks = np.empty(n_experiments)
    deficits = [] if isinstance(state, CatStateSpec) else None
    for j in range(n_experiments):
        pos = sequential_conditional_sample(state, rng)
        ks[j] = ks_statistic(pos, marginal_cdf_at(state, pos))
        if deficits is not None:
            midpoint = 0.5 * (state.x_left + state.x_right)
            left = np.all(pos < midpoint)
            # marginal mass in the unoccupied side
            deficits.append(0.5 if left or np.all(pos >= midpoint) else 0.0)
    return MarginalComparison(
        ks=ks,
        overlap_deficit=None if deficits is None else np.asarray(deficits))
