"""Nonlinear dispersionless propagation for the center-of-mass conditional
state: the standard equation with the quantum potential of the current
modulus subtracted from the potential."""

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.linalg import lapack

from .bohm import TrajectoryEnsemble, _spline_velocity
from .errors import BoundaryLeak, Nonconvergence, OutOfDomain
from .grid import Grid1D, PotentialSpec, WaveFunction1D


class ClassicalPropagator:
    """Strang-split stepper for i hbar dpsi/dt = (T + V - Q[|psi|]) psi.

    Each step is: half kinetic step (Crank-Nicolson), full phase rotation by
    (V - Q) dt with Q taken from the modulus at the midpoint, half kinetic
    step, renormalization (the conditional-state norm convention). A second
    midpoint estimate built from the endpoint moduli serves as the one
    fixed-point refinement; if it shifts the applied phase by more than
    ``tolerance`` radians the step raises Nonconvergence (dt too large).

    Stability: the nonlinearity feeds modulus ripples back into the phase at
    a rate (hbar k^2 / 2m) per mode k; the split map stays elliptic only while
    hbar dt / (2 m dx^2) < 0.5 (see stable_dt). ``filter_cutoff`` restricts
    the feedback to modes below a wavenumber cutoff instead, which decouples
    the stability bound from dx for smooth transport problems.
    """

    def __init__(self, grid: Grid1D, dt: float | None, potential: PotentialSpec,
                 mass: float = 1.0, hbar: float = 1.0,
                 node_floor: float = 1e-12, tolerance: float = 1e-3,
                 filter_cutoff: float | None = None,
                 check_level: float = 1e-2):
        self.grid = grid
        self.potential = potential
        self.mass = mass
        self.hbar = hbar
        self.node_floor = node_floor
        self.tolerance = tolerance
        self.filter_cutoff = filter_cutoff
        self.check_level = check_level
        self.last_renorm = 1.0
        self._v = potential.evaluate(grid.x)
        self._lu = {}
        if filter_cutoff is not None:
            k = np.fft.rfftfreq(grid.n_points, grid.dx) * 2 * np.pi
            self._filter = np.exp(-((k / filter_cutoff) ** 8))
        else:
            self._filter = None
        if dt is None:
            dt = self.stable_dt()
        elif dt > 1.05 * self.stable_dt(1.0):
            raise ValueError(
                f"dt={dt:g} exceeds the nonlinear stability bound "
                f"{self.stable_dt(1.0):g}; reduce dt or set filter_cutoff")
        self.dt = dt

    def stable_dt(self, safety: float = 0.35) -> float:
        """Largest dt keeping the nonlinear feedback elliptic."""
        if self.filter_cutoff is None:
            lam = 4.0 / self.grid.dx ** 2
        else:
            lam = self.filter_cutoff ** 2
        return 2.0 * 1.7 * safety * self.mass / (self.hbar * lam)

    def _kinetic_half(self, psi: np.ndarray, dt: float) -> np.ndarray:
        tau = dt / 2.0
        if tau not in self._lu:
            n = self.grid.n_points - 2
            r = 1j * self.hbar * tau / (4.0 * self.mass * self.grid.dx ** 2)
            dl = np.full(n - 1, -r)
            dlf, d, duf, du2, ipiv, info = lapack.zgttrf(dl, np.full(n, 1 + 2 * r), dl)
            if len(self._lu) > 64:
                self._lu.clear()
            self._lu[tau] = (dlf, d, duf, du2, ipiv, r)
        dlf, d, duf, du2, ipiv, r = self._lu[tau]
        u = psi[1:-1]
        rhs = (1 - 2 * r) * u
        rhs[1:] += r * u[:-1]
        rhs[:-1] += r * u[1:]
        sol, info = lapack.zgttrs(dlf, d, duf, du2, ipiv, rhs)
        out = np.zeros_like(psi)
        out[1:-1] = sol
        return out

    def quantum_term(self, modulus: np.ndarray) -> np.ndarray:
        """-(hbar^2/2m) R''/R with the floor regularization, plus the
        spectral restriction and tail taper in filtered mode."""
        r = modulus
        if self._filter is not None:
            r = np.fft.irfft(np.fft.rfft(r) * self._filter, n=len(r))
        rmax = r.max()
        if rmax <= 0:
            return np.zeros_like(r)
        rf = np.maximum(r, self.node_floor * rmax)
        d2 = np.zeros_like(rf)
        d2[1:-1] = (r[2:] - 2 * r[1:-1] + r[:-2]) / self.grid.dx ** 2
        q = -(self.hbar ** 2) / (2.0 * self.mass) * d2 / rf
        if self._filter is not None:
            # fade the nonlinearity out through the far tails, where the
            # filtered modulus carries ringing rather than signal
            u = np.clip((np.log(rf / rmax) - np.log(1e-6)) / np.log(1e2), 0, 1)
            q = q * (u * u * (3 - 2 * u))
        return q

    def step(self, wf: WaveFunction1D, dt: float | None = None) -> WaveFunction1D:
        out, _ = self.step_with_delta(wf, dt)
        return out

    def step_with_delta(self, wf: WaveFunction1D, dt: float | None = None,
                        enforce: bool = True):
        """One Strang step; returns (new wavefunction, refinement delta)."""
        if wf.grid != self.grid:
            raise OutOfDomain("wavefunction grid differs from propagator grid")
        h = self.dt if dt is None else dt
        psi = wf.amplitudes
        a = self._kinetic_half(psi, h)
        ra = np.abs(a)
        q_mid = self.quantum_term(ra)
        b = a * np.exp(-1j * (self._v - q_mid) * h / self.hbar)
        c = self._kinetic_half(b, h)
        # one fixed-point refinement of the midpoint modulus, used as the
        # convergence diagnostic (applying it would couple the phase to the
        # trial end state and destabilize the high-k modes)
        q_ref = self.quantum_term(0.5 * (np.abs(psi) + np.abs(c)))
        live = ra > self.check_level * ra.max()
        delta = float(np.max(np.abs((q_ref - q_mid)[live])) * h / self.hbar)
        if enforce and delta > self.tolerance:
            raise Nonconvergence(
                f"midpoint refinement moved the phase by {delta:.2e} rad; "
                "reduce dt")
        norm = np.sqrt(np.trapezoid(np.abs(c) ** 2, self.grid.x))
        self.last_renorm = float(norm)
        return wf.with_amplitudes(c / norm), delta


def classical_step(prop: ClassicalPropagator, wf: WaveFunction1D) -> WaveFunction1D:
    return prop.step(wf)


@dataclass
class ClassicalRecord:
    times: np.ndarray
    mean_x: np.ndarray
    width: np.ndarray
    norm: np.ndarray
    max_delta: float


def classical_evolve(prop: ClassicalPropagator, wf: WaveFunction1D,
                     n_steps: int, record_stride: int = 1,
                     strict: bool = True):
    """Fixed-step evolution with observable recording.

    strict=False records refinement violations in max_delta instead of
    raising, so diagnostic runs can complete.
    """
    psi = wf.normalize()
    times, mean_x, width, norms = [0.0], [psi.mean_position()], [psi.width()], [1.0]
    max_delta = 0.0
    for s in range(1, n_steps + 1):
        psi, delta = prop.step_with_delta(psi, enforce=strict)
        max_delta = max(max_delta, delta)
        if s % record_stride == 0 or s == n_steps:
            times.append(s * prop.dt)
            mean_x.append(psi.mean_position())
            width.append(psi.width())
            norms.append(psi.norm_squared())
    rec = ClassicalRecord(np.asarray(times), np.asarray(mean_x),
                          np.asarray(width), np.asarray(norms), max_delta)
    return psi, rec


def classical_trajectories(prop: ClassicalPropagator, wf0: WaveFunction1D,
                           initial_positions, n_steps: int,
                           stride: int = 1, record_stride: int = 1,
                           strict: bool = True, return_record: bool = False):
    """Trajectories in the classical velocity field, RK4 in lockstep with the
    propagation. ``stride`` solver steps form one trajectory step (the state
    is interpolated linearly in time across the stride).

    With return_record=True also returns the packet observable series."""
    pos = np.asarray(initial_positions, dtype=float).copy()
    if np.any(~wf0.grid.contains(pos)):
        raise OutOfDomain("initial position outside grid")
    wf = wf0.normalize()
    x = wf.grid.x
    x_lo, x_hi = wf.grid.x_min, wf.grid.x_max
    v_max = wf.grid.dx / prop.dt
    hbar, mass = prop.hbar, prop.mass
    if n_steps % stride:
        raise ValueError("n_steps must be a multiple of stride")
    n_traj = n_steps // stride
    h = stride * prop.dt

    spline = CubicSpline(x, wf.amplitudes)
    peak = wf.density.max()
    times = [0.0]
    rec_pos = [pos.copy()]
    rec_vel = [_spline_velocity(spline, pos, hbar, mass, peak, v_max)]
    rec_mean = [wf.mean_position()]
    rec_width = [wf.width()]
    rec_norm = [wf.norm_squared()]
    max_delta = 0.0
    escaped = np.zeros(pos.shape, dtype=bool)

    for s in range(1, n_traj + 1):
        mid = wf
        for k in range(stride):
            wf, delta = prop.step_with_delta(wf, enforce=strict)
            max_delta = max(max_delta, delta)
            if k == (stride - 1) // 2:
                mid = wf
        if stride == 1:
            spline_mid = CubicSpline(x, 0.5 * (spline(x) + wf.amplitudes))
        else:
            spline_mid = CubicSpline(x, mid.amplitudes)
        spline_new = CubicSpline(x, wf.amplitudes)
        peak = wf.density.max()
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
        spline = spline_new
        if s % record_stride == 0 or s == n_traj:
            times.append(s * h)
            rec_pos.append(pos.copy())
            rec_vel.append(_spline_velocity(spline, pos, hbar, mass, peak, v_max))
            rec_mean.append(wf.mean_position())
            rec_width.append(wf.width())
            rec_norm.append(wf.norm_squared())

    positions = np.asarray(rec_pos).T[:, None, :]
    velocities = np.asarray(rec_vel).T[:, None, :]
    ens = TrajectoryEnsemble(times=np.asarray(times), positions=positions,
                             velocities=velocities, escaped=escaped[:, None])
    if return_record:
        rec = ClassicalRecord(np.asarray(times), np.asarray(rec_mean),
                              np.asarray(rec_width), np.asarray(rec_norm),
                              max_delta)
        return ens, rec
    return ens


@dataclass(frozen=True)
class IdentityResidual:
    residual: float
    scale: float

    @property
    def relative(self) -> float:
        return self.residual / self.scale if self.scale > 0 else self.residual


def quantum_potential_gradient_identity(r: np.ndarray, x: np.ndarray,
                                        y: np.ndarray, mass_cm: float = 1.0,
                                        mass_y: float = 1.0,
                                        hbar: float = 1.0) -> IdentityResidual:
    """Quadrature of integral R^2 d(Q_cm + Q_y)/dx over a 2D test modulus.

    Vanishes by parts for any modulus decaying at the boundary; the returned
    scale integrates the absolute integrand for relative comparisons.
    Raises BoundaryLeak when the boundary amplitude exceeds 1e-6 of the max.
    """
    r = np.asarray(r, dtype=float)
    if r.shape != (len(x), len(y)):
        raise ValueError("R must have shape (len(x), len(y))")
    rmax = r.max()
    edge = max(np.abs(r[0]).max(), np.abs(r[-1]).max(),
               np.abs(r[:, 0]).max(), np.abs(r[:, -1]).max())
    if edge > 1e-6 * rmax:
        raise BoundaryLeak(f"boundary amplitude {edge / rmax:.2e} of max")
    dx = x[1] - x[0]
    dy = y[1] - y[0]
    rf = np.maximum(r, 1e-12 * rmax)

    def second(arr, step, axis):
        out = np.zeros_like(arr)
        sl = [slice(None)] * arr.ndim
        lo, mid, hi = sl.copy(), sl.copy(), sl.copy()
        lo[axis], mid[axis], hi[axis] = slice(0, -2), slice(1, -1), slice(2, None)
        out[tuple(mid)] = (arr[tuple(hi)] - 2 * arr[tuple(mid)] + arr[tuple(lo)]) / step ** 2
        return out

    q = (-(hbar ** 2) / (2 * mass_cm) * second(r, dx, 0) / rf
         - (hbar ** 2) / (2 * mass_y) * second(r, dy, 1) / rf)
    dq_dx = np.zeros_like(q)
    dq_dx[1:-1, :] = (q[2:, :] - q[:-2, :]) / (2 * dx)
    integrand = r * r * dq_dx
    residual = abs(float(np.trapezoid(np.trapezoid(integrand, y, axis=1), x)))
    scale = float(np.trapezoid(np.trapezoid(np.abs(integrand), y, axis=1), x))
    return IdentityResidual(residual=residual, scale=scale)
