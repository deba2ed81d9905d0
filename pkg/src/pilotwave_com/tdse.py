"""Crank-Nicolson propagation of a single 1D wavefunction."""

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal, lapack

from .errors import GridMismatch
from .grid import Grid1D, PotentialSpec, WaveFunction1D

BOUNDARY_WARN_LEVEL = 1e-6


class BoundaryLeakWarning(UserWarning):
    """State has noticeable amplitude at the Dirichlet walls."""


class PropagatorCN:
    """Crank-Nicolson stepper for i hbar dpsi/dt = (-hbar^2/2m d2/dx2 + V) psi.

    Dirichlet walls (psi = 0 at both ends). The tridiagonal system is LU
    factorized once; each step is a matrix multiply plus a back-substitution,
    so the step is unitary up to roundoff. Instances hold no mutable state
    besides the cached factorization and can be shared across runs that use
    the same grid and dt; use one instance per thread during evolve().
    """

    def __init__(self, grid: Grid1D, dt: float, potential: PotentialSpec,
                 mass: float = 1.0, hbar: float = 1.0):
        if dt == 0:
            raise ValueError("dt must be nonzero")
        self.grid = grid
        self.dt = dt
        self.potential = potential
        self.mass = mass
        self.hbar = hbar
        v = potential.evaluate(grid.x)
        if v.shape != grid.x.shape:
            raise GridMismatch("tabulated potential does not match grid")
        self._v = v
        n = grid.n_points - 2
        kin = hbar * hbar / (2.0 * mass * grid.dx ** 2)
        h_diag = 2.0 * kin + v[1:-1]
        h_off = np.full(n - 1, -kin)
        c = 1j * dt / (2.0 * hbar)
        dlf, d, duf, du2, ipiv, info = lapack.zgttrf(
            c * h_off, 1.0 + c * h_diag, c * h_off)
        if info != 0:
            raise RuntimeError(f"tridiagonal factorization failed (info={info})")
        self._factor = (dlf, d, duf, du2, ipiv)
        self._b_diag = 1.0 - c * h_diag
        self._b_off = -c * h_off[0] if n > 1 else 0.0

    def _check(self, wf: WaveFunction1D):
        if wf.grid != self.grid:
            raise GridMismatch("wavefunction grid differs from propagator grid")
        amp = np.abs(wf.amplitudes)
        peak = amp.max()
        if peak > 0 and max(amp[0], amp[-1]) > BOUNDARY_WARN_LEVEL * peak:
            warnings.warn("amplitude at the Dirichlet wall exceeds 1e-6 of peak",
                          BoundaryLeakWarning, stacklevel=3)

    def step(self, wf: WaveFunction1D) -> WaveFunction1D:
        """One Crank-Nicolson step of duration dt."""
        self._check(wf)
        return wf.with_amplitudes(self._apply(wf.amplitudes))

    def _apply(self, psi: np.ndarray) -> np.ndarray:
        """Advance amplitudes one step; accepts (n,) or (n, n_states)."""
        u = psi[1:-1]
        diag = self._b_diag if u.ndim == 1 else self._b_diag[:, None]
        rhs = diag * u
        rhs[1:] += self._b_off * u[:-1]
        rhs[:-1] += self._b_off * u[1:]
        sol, info = lapack.zgttrs(*self._factor, rhs)
        out = np.zeros_like(psi)
        out[1:-1] = sol
        return out

    def run(self, psi: np.ndarray, n_steps: int) -> np.ndarray:
        """Advance raw amplitudes without per-step validation (hot loop)."""
        for _ in range(n_steps):
            psi = self._apply(psi)
        return psi


@dataclass
class EvolutionRecord:
    """Observables recorded by evolve() at every stride."""

    times: np.ndarray
    mean_x: np.ndarray
    width: np.ndarray
    norm: np.ndarray
    current_integral: np.ndarray
    snapshots: list = field(default_factory=list)
    snapshot_times: list = field(default_factory=list)
    boundary_flagged: bool = False


def evolve(prop: PropagatorCN, wf: WaveFunction1D, n_steps: int,
           record_stride: int = 1, snapshot_stride: int | None = None,
           t0: float = 0.0) -> tuple[WaveFunction1D, EvolutionRecord]:
    """Propagate n_steps, recording observables every record_stride steps.

    Returns the final wavefunction and the recorded series (which include
    the initial time). snapshot_stride, when given, stores full amplitude
    copies at that stride.
    """
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    prop._check(wf)
    psi = wf.amplitudes.copy()
    times, mean_x, width, norms, cur = [], [], [], [], []
    snaps, snap_t = [], []
    flagged = False

    def record(t, psi):
        w = wf.with_amplitudes(psi)
        times.append(t)
        mean_x.append(w.mean_position())
        width.append(w.width())
        norms.append(w.norm_squared())
        cur.append(float(np.trapezoid(w.current(), w.grid.x)))

    record(t0, psi)
    if snapshot_stride:
        snaps.append(psi.copy())
        snap_t.append(t0)
    for s in range(1, n_steps + 1):
        psi = prop._apply(psi)
        t = t0 + s * prop.dt
        if s % record_stride == 0 or s == n_steps:
            record(t, psi)
            amp = np.abs(psi)
            if max(amp[0], amp[-1]) > BOUNDARY_WARN_LEVEL * amp.max():
                flagged = True
        if snapshot_stride and (s % snapshot_stride == 0 or s == n_steps):
            snaps.append(psi.copy())
            snap_t.append(t)
    rec = EvolutionRecord(
        times=np.asarray(times), mean_x=np.asarray(mean_x),
        width=np.asarray(width), norm=np.asarray(norms),
        current_integral=np.asarray(cur), snapshots=snaps,
        snapshot_times=snap_t, boundary_flagged=flagged)
    return wf.with_amplitudes(psi), rec


def stationary_state(grid: Grid1D, potential: PotentialSpec, index: int = 0,
                     mass: float = 1.0, hbar: float = 1.0) -> WaveFunction1D:
    """Eigenstate of the discrete Hamiltonian (Dirichlet walls).

    The analytic ground state of a confining potential deviates from the
    discrete one at O(dx^2), which is visible as spurious dynamics; static
    runs should start from the discrete eigenvector.
    """
    v = potential.evaluate(grid.x)
    kin = hbar * hbar / (2.0 * mass * grid.dx ** 2)
    w, vecs = eigh_tridiagonal(
        2.0 * kin + v[1:-1], np.full(grid.n_points - 3, -kin),
        select="i", select_range=(index, index))
    psi = np.zeros(grid.n_points, dtype=complex)
    psi[1:-1] = vecs[:, 0]
    if psi[np.argmax(np.abs(psi))].real < 0:
        psi = -psi
    return WaveFunction1D(grid, psi, mass, hbar).normalize()
