"""Symmetrized many-boson states: permanents, exchange velocities, and the
center-of-mass convergence experiment."""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.interpolate import CubicSpline

from .com_analysis import newton_reference
from .errors import OutOfDomain, TooLarge
from .grid import Grid1D, PotentialSpec, WaveFunction1D, sample_positions
from .tdse import PropagatorCN

MAX_PERMANENT_ORDER = 24

ELECTRON_MASS_KG = 9.1093837015e-31
ELEMENTARY_CHARGE_C = 1.602176634e-19
HBAR_SI = 1.054571817e-34


@dataclass(frozen=True)
class TwoPacketSpec:
    """Two separated Gaussian packets with opposite momenta (one mode)."""

    x_left: float
    x_right: float
    k_left: float
    k_right: float
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.x_right - self.x_left <= 8 * self.sigma:
            raise ValueError("packets must be separated by more than 8 sigma")


@dataclass(frozen=True)
class SingleParticleBasis:
    """N single-particle states on one shared grid, each unit norm."""

    states: tuple

    def __post_init__(self):
        if not self.states:
            raise ValueError("basis must hold at least one state")
        g = self.states[0].grid
        for s in self.states:
            if s.grid != g:
                raise ValueError("basis states must share a grid")
            if abs(s.norm_squared() - 1.0) > 1e-8:
                raise ValueError("basis states must be normalized")

    @property
    def grid(self) -> Grid1D:
        return self.states[0].grid

    @property
    def n(self) -> int:
        return len(self.states)


# --- permanents ---------------------------------------------------------------

@njit(cache=True)
def _ryser_value_grad(a, d):  # pragma: no cover - compiled
    """Gray-code Ryser permanent of ``a`` plus the N row-replacement
    permanents (row i of ``a`` swapped for row i of ``d``) in one pass.

    Prefix/suffix products give all row-gradient permanents at O(2^N N).
    The value sum is Kahan-compensated against the alternating-sign loss.
    """
    n = a.shape[0]
    total = 0.0 + 0.0j
    comp = 0.0 + 0.0j
    grad = np.zeros(n, dtype=np.complex128)
    rs = np.zeros(n, dtype=np.complex128)
    rsd = np.zeros(n, dtype=np.complex128)
    pref = np.empty(n + 1, dtype=np.complex128)
    suff = np.empty(n + 1, dtype=np.complex128)
    pref[0] = 1.0 + 0.0j
    suff[n] = 1.0 + 0.0j
    sign = 1.0
    for g in range(1, 1 << n):
        gray = g ^ (g >> 1)
        bit = gray ^ ((g - 1) ^ ((g - 1) >> 1))
        j = 0
        b = bit
        while b > 1:
            b >>= 1
            j += 1
        if gray & bit:
            for k in range(n):
                rs[k] += a[k, j]
                rsd[k] += d[k, j]
        else:
            for k in range(n):
                rs[k] -= a[k, j]
                rsd[k] -= d[k, j]
        sign = -sign
        for k in range(n):
            pref[k + 1] = pref[k] * rs[k]
        for k in range(n - 1, -1, -1):
            suff[k] = suff[k + 1] * rs[k]
        y = sign * pref[n] - comp
        t = total + y
        comp = (t - total) - y
        total = t
        for k in range(n):
            grad[k] += sign * (pref[k] * suff[k + 1] * rsd[k])
    par = -1.0 if n % 2 else 1.0
    return par * total, par * grad


@njit(cache=True)
def _ryser_value(a):  # pragma: no cover - compiled
    n = a.shape[0]
    total = 0.0 + 0.0j
    comp = 0.0 + 0.0j
    rs = np.zeros(n, dtype=np.complex128)
    sign = 1.0
    for g in range(1, 1 << n):
        gray = g ^ (g >> 1)
        bit = gray ^ ((g - 1) ^ ((g - 1) >> 1))
        j = 0
        b = bit
        while b > 1:
            b >>= 1
            j += 1
        if gray & bit:
            for k in range(n):
                rs[k] += a[k, j]
        else:
            for k in range(n):
                rs[k] -= a[k, j]
        sign = -sign
        prod = 1.0 + 0.0j
        for k in range(n):
            prod *= rs[k]
        y = sign * prod - comp
        t = total + y
        comp = (t - total) - y
        total = t
    par = -1.0 if n % 2 else 1.0
    return par * total


def _gray_table(cols: np.ndarray, m: int, dtype):
    """Row sums over all 2^m column subsets, built by Gray-code updates."""
    n = cols.shape[0]
    table = np.zeros((1 << m, n), dtype=dtype)
    signs = np.ones(1 << m)
    cur = np.zeros(n, dtype=dtype)
    for g in range(1, 1 << m):
        gray = g ^ (g >> 1)
        bit = gray ^ ((g - 1) ^ ((g - 1) >> 1))
        j = bit.bit_length() - 1
        if gray & bit:
            cur = cur + cols[:, j]
        else:
            cur = cur - cols[:, j]
        table[gray] = cur
        signs[gray] = -1.0 if bin(gray).count("1") % 2 else 1.0
    return table, signs


def _permanent_extended(a: np.ndarray) -> complex:
    """Ryser over Gray-coded half tables with extended-precision accumulation."""
    a = np.asarray(a, dtype=np.clongdouble)
    n = a.shape[0]
    n2 = min(n, 10)
    n1 = n - n2
    t2, s2 = _gray_table(a[:, n1:], n2, np.clongdouble)
    total = np.clongdouble(0.0)
    rs1 = np.zeros(n, dtype=np.clongdouble)
    for g in range(1 << n1):
        if g:
            gray = g ^ (g >> 1)
            bit = gray ^ ((g - 1) ^ ((g - 1) >> 1))
            j = bit.bit_length() - 1
            if gray & bit:
                rs1 += a[:, j]
            else:
                rs1 -= a[:, j]
            s1 = -1.0 if bin(gray).count("1") % 2 else 1.0
        else:
            s1 = 1.0
        vals = np.prod(t2 + rs1, axis=1)
        total = total + s1 * np.dot(s2, vals)
    return complex(total if n % 2 == 0 else -total)


def _row_scales(a: np.ndarray) -> np.ndarray:
    s = np.max(np.abs(a), axis=1)
    return np.where(s > 0, s, 1.0)


def permanent(a, precise: bool = True) -> complex:
    """Permanent of a square complex matrix by Ryser's formula with
    Gray-code subset updates, O(2^N N).

    Rows are scaled to unit max modulus and the scale factor reapplied.
    ``precise`` accumulates in extended precision (the alternating Ryser sum
    loses roughly N bits in double precision); the fast path is double.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    n = a.shape[0]
    if n > MAX_PERMANENT_ORDER:
        raise TooLarge(f"permanent order {n} exceeds {MAX_PERMANENT_ORDER}")
    if n == 0:
        return 1.0 + 0.0j
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix entries must be finite")
    if np.any(np.all(a == 0, axis=1)):
        return 0.0 + 0.0j
    scale = _row_scales(a)
    scaled = a / scale[:, None]
    if precise:
        value = _permanent_extended(scaled)
    else:
        value = complex(_ryser_value(np.ascontiguousarray(scaled)))
    return value * complex(np.prod(scale))


class ModeSplines:
    """Cubic interpolants of a basis, for repeated matrix evaluations."""

    def __init__(self, states, grid: Grid1D, mass: float, hbar: float):
        self.grid = grid
        self.mass = mass
        self.hbar = hbar
        self._splines = [CubicSpline(grid.x, np.asarray(s, dtype=complex))
                         for s in states]

    @property
    def n(self):
        return len(self._splines)

    def head(self, n: int) -> "ModeSplines":
        """View on the first n modes (splines shared, not copied)."""
        if n == self.n:
            return self
        sub = ModeSplines.__new__(ModeSplines)
        sub.grid, sub.mass, sub.hbar = self.grid, self.mass, self.hbar
        sub._splines = self._splines[:n]
        return sub

    def matrices(self, positions: np.ndarray):
        """A[k, j] = psi_j(x_k) and D[k, j] = psi_j'(x_k)."""
        pos = np.asarray(positions, dtype=float)
        a = np.empty((len(pos), self.n), dtype=complex)
        d = np.empty_like(a)
        for j, spl in enumerate(self._splines):
            a[:, j] = spl(pos)
            d[:, j] = spl(pos, 1)
        return a, d

    def single_mode_velocity(self, positions: np.ndarray,
                             v_max: float | None = None) -> np.ndarray:
        """v_i from particle i's own mode (no exchange)."""
        pos = np.asarray(positions, dtype=float)
        out = np.empty(len(pos))
        for i, spl in enumerate(self._splines):
            val = spl(pos[i])
            der = spl(pos[i], 1)
            dens = abs(val) ** 2
            out[i] = (self.hbar / self.mass) * (der * np.conj(val)).imag \
                / max(dens, 1e-300)
        if v_max is not None:
            out = np.clip(out, -v_max, v_max)
        return out


def basis_splines(basis: SingleParticleBasis) -> ModeSplines:
    s0 = basis.states[0]
    return ModeSplines([s.amplitudes for s in basis.states], basis.grid,
                       s0.mass, s0.hbar)


def _check_positions(grid: Grid1D, positions):
    pos = np.asarray(positions, dtype=float)
    if np.any(pos < grid.x_min) or np.any(pos > grid.x_max):
        raise OutOfDomain("particle position outside grid")
    return pos


def symmetrized_value_and_gradient(basis, positions):
    """Value Psi = perm(A) with A[k, j] = psi_j(x_k), and the derivatives
    dPsi/dx_i = perm(A with row i replaced by psi_j'(x_i))."""
    splines = basis if isinstance(basis, ModeSplines) else basis_splines(basis)
    pos = _check_positions(splines.grid, positions)
    n = len(pos)
    if n != splines.n:
        raise ValueError("need exactly one position per basis state")
    if n > MAX_PERMANENT_ORDER:
        raise TooLarge(f"order {n} exceeds {MAX_PERMANENT_ORDER}")
    a, d = splines.matrices(pos)
    scale = _row_scales(a)
    val, grad = _ryser_value_grad(np.ascontiguousarray(a / scale[:, None]),
                                  np.ascontiguousarray(d / scale[:, None]))
    factor = complex(np.prod(scale))
    return val * factor, grad * factor


def _exchange_velocities_scaled(splines: ModeSplines, pos: np.ndarray,
                                v_max: float | None) -> np.ndarray:
    a, d = splines.matrices(pos)
    scale = _row_scales(a)
    val, grad = _ryser_value_grad(np.ascontiguousarray(a / scale[:, None]),
                                  np.ascontiguousarray(d / scale[:, None]))
    if val == 0:
        v = np.zeros(len(pos))
    else:
        v = (splines.hbar / splines.mass) * np.imag(grad / val)
    if v_max is not None:
        v = np.clip(np.nan_to_num(v, nan=0.0), -v_max, v_max)
    return v


def bosonic_velocities(basis, positions, v_max: float | None = None):
    """Exchange-symmetric Bohmian velocities v_i = (hbar/m) Im[(dPsi/dx_i)/Psi].

    Row scaling cancels between the gradient and the value, so velocities are
    computed from the scaled permanents directly.
    """
    splines = basis if isinstance(basis, ModeSplines) else basis_splines(basis)
    pos = _check_positions(splines.grid, positions)
    if len(pos) != splines.n:
        raise ValueError("need exactly one position per basis state")
    if len(pos) > MAX_PERMANENT_ORDER:
        raise TooLarge(f"order {len(pos)} exceeds {MAX_PERMANENT_ORDER}")
    return _exchange_velocities_scaled(splines, pos, v_max)


def distinguishable_velocities(basis, positions, v_max: float | None = None):
    """Each particle guided by its own single-particle state."""
    splines = basis if isinstance(basis, ModeSplines) else basis_splines(basis)
    pos = _check_positions(splines.grid, positions)
    if len(pos) != splines.n:
        raise ValueError("need exactly one position per basis state")
    return splines.single_mode_velocity(pos, v_max)


# --- center-of-mass convergence experiment ------------------------------------

@dataclass(frozen=True)
class ComConvergenceConfig:
    """Configuration for the bosonic center-of-mass convergence runs.

    Physical inputs are SI; the simulation is carried out in units of the
    packet width and converted back on output. A uniform external field is
    handled exactly in the uniformly accelerated frame, where each mode
    evolves freely; lab-frame positions and velocities add the common drift.
    """

    n_values: tuple = (4, 8, 12, 16, 20)
    seeds: tuple = tuple(range(10))
    mode: str = "both"  # exchange | distinguishable | both
    sigma: float = 15e-9
    x_left_range: tuple = (200e-9, 400e-9)
    x_right_range: tuple = (800e-9, 1000e-9)
    k_left_range: tuple = (0.05e9, 0.15e9)
    k_right_range: tuple = (-0.15e9, -0.05e9)
    field_strength: float = 3.3e5
    charge: float = ELEMENTARY_CHARGE_C
    mass: float = ELECTRON_MASS_KG
    hbar: float = HBAR_SI
    t_max: float | None = None  # defaults to 12 natural time units
    n_record: int = 120
    points_per_sigma: float = 20.0
    max_exchange_n: int = 20

    def __post_init__(self):
        if self.mode not in ("exchange", "distinguishable", "both"):
            raise ValueError("mode must be exchange, distinguishable or both")
        if max(self.n_values) > MAX_PERMANENT_ORDER:
            raise TooLarge("n_values exceed the permanent order guard")
        if self.mode != "distinguishable" and \
                max(self.n_values) > self.max_exchange_n:
            raise TooLarge("exchange runs capped at max_exchange_n")

    @property
    def time_unit(self) -> float:
        return self.mass * self.sigma ** 2 / self.hbar

    @property
    def t_max_natural(self) -> float:
        return 12.0 if self.t_max is None else self.t_max / self.time_unit


@dataclass
class ComConvergenceResult:
    times: np.ndarray                    # SI seconds, recorded instants
    errors: dict                         # mode -> {N: (n_seeds, T) rel. error}
    com_quantum: dict                    # mode -> {N: (n_seeds, T) SI meters}
    com_newton: dict                     # mode -> {N: (n_seeds, T) SI meters}
    config: ComConvergenceConfig = None

    def final_errors(self, mode: str) -> dict:
        return {n: series[:, -1] for n, series in self.errors[mode].items()}

    def mean_final_errors(self, mode: str) -> dict:
        return {n: float(series[:, -1].mean())
                for n, series in self.errors[mode].items()}


def _draw_modes(rng, cfg: ComConvergenceConfig, n_modes: int):
    """Two-packet mode parameters in natural units (lengths over sigma)."""
    l0 = cfg.sigma
    specs = []
    for _ in range(n_modes):
        xl = rng.uniform(*cfg.x_left_range) / l0
        xr = rng.uniform(*cfg.x_right_range) / l0
        kl = rng.uniform(*cfg.k_left_range) * l0
        kr = rng.uniform(*cfg.k_right_range) * l0
        specs.append(TwoPacketSpec(x_left=xl, x_right=xr, k_left=kl,
                                   k_right=kr, sigma=1.0))
    return specs


def _natural_grid(cfg: ComConvergenceConfig, specs) -> Grid1D:
    t = cfg.t_max_natural
    spread = 4.0 * math.sqrt(0.5 * (1.0 + t * t))  # dispersed packet tails
    k_max = max(max(abs(s.k_left), abs(s.k_right)) for s in specs)
    drift = k_max * t
    lo = min(s.x_left for s in specs) - drift - spread - 8.0
    hi = max(s.x_right for s in specs) + drift + spread + 8.0
    dx = 1.0 / cfg.points_per_sigma
    n_points = int(math.ceil((hi - lo) / dx)) + 1
    return Grid1D(lo, lo + (n_points - 1) * dx, n_points)


def _mode_wavefunction(spec: TwoPacketSpec, grid: Grid1D) -> WaveFunction1D:
    x = grid.x
    psi = (np.exp(-((x - spec.x_left) ** 2) / 2.0) * np.exp(1j * spec.k_left * x)
           + np.exp(-((x - spec.x_right) ** 2) / 2.0) * np.exp(1j * spec.k_right * x))
    return WaveFunction1D(grid, psi).normalize()


def _rk4_positions(splines_t0, splines_mid, splines_t1, pos, h, vfun, v_max):
    lo, hi = splines_t0.grid.x_min, splines_t0.grid.x_max
    k1 = vfun(splines_t0, pos, v_max)
    k2 = vfun(splines_mid, np.clip(pos + 0.5 * h * k1, lo, hi), v_max)
    k3 = vfun(splines_mid, np.clip(pos + 0.5 * h * k2, lo, hi), v_max)
    k4 = vfun(splines_t1, np.clip(pos + h * k3, lo, hi), v_max)
    return np.clip(pos + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), lo, hi)


def _simulate_seed(cfg: ComConvergenceConfig, seed: int, want_exchange: bool,
                   want_disting: bool):
    """One experiment: shared initial draws, free propagation in the
    accelerated frame, exchange and no-exchange trajectory integration."""
    rng = np.random.default_rng(seed)
    n_max = max(cfg.n_values)
    specs = _draw_modes(rng, cfg, n_max)
    grid = _natural_grid(cfg, specs)
    modes0 = [_mode_wavefunction(s, grid) for s in specs]

    # one Born draw per mode (exact sequential sampling at zero overlap),
    # nested so every N uses the same leading particles
    pos0 = np.array([sample_positions(m, 1, rng)[0] for m in modes0])

    t_nat = cfg.t_max_natural
    dx = grid.dx
    dt_cap = min(dx * dx, 5e-3)  # accuracy criterion hbar dt / (2 m dx^2) < 0.5
    steps_per_record = max(1, int(math.ceil(t_nat / (cfg.n_record * dt_cap))))
    dt = t_nat / (cfg.n_record * steps_per_record)
    prop = PropagatorCN(grid, dt, PotentialSpec(kind="constant", v0=0.0))
    v_max = dx / dt

    accel = cfg.charge * cfg.field_strength / cfg.mass \
        * cfg.time_unit ** 2 / cfg.sigma  # natural units

    stack = np.stack([m.amplitudes for m in modes0], axis=1)

    def make_splines(arr):
        return ModeSplines([arr[:, j] for j in range(n_max)], grid, 1.0, 1.0)

    spl = make_splines(stack)
    exchange_ns = list(cfg.n_values) if want_exchange else []
    disting = want_disting

    # trajectory state per N (exchange) and one max-N set (no exchange)
    ex_pos = {n: pos0[:n].copy() for n in exchange_ns}
    di_pos = pos0.copy()

    n_rec = cfg.n_record
    rec_t = np.empty(n_rec + 1)
    rec_ex = {n: np.empty((n_rec + 1, n)) for n in exchange_ns}
    rec_di = np.empty((n_rec + 1, n_max)) if disting else None

    rec_t[0] = 0.0
    for n in exchange_ns:
        rec_ex[n][0] = ex_pos[n]
    if disting:
        rec_di[0] = di_pos

    # initial center-of-mass velocities per variant (from the t=0 splines)
    v0_ex = {n: float(np.mean(_exchange_velocities_scaled(
        spl.head(n), ex_pos[n], v_max))) for n in exchange_ns}
    v0_di_each = spl.single_mode_velocity(di_pos, v_max) if disting else None

    half = steps_per_record // 2
    for r in range(1, n_rec + 1):
        stack_mid = prop.run(stack, half) if half else stack
        stack_new = prop.run(stack_mid, steps_per_record - half)
        spl_mid = make_splines(0.5 * (stack + stack_new)) if half == 0 \
            else make_splines(stack_mid)
        spl_new = make_splines(stack_new)
        h = steps_per_record * dt
        for n in exchange_ns:
            ex_pos[n] = _rk4_positions(
                spl.head(n), spl_mid.head(n), spl_new.head(n), ex_pos[n], h,
                _exchange_velocities_scaled, v_max)
            rec_ex[n][r] = ex_pos[n]
        if disting:
            di_pos = _rk4_positions(
                spl, spl_mid, spl_new, di_pos, h,
                lambda s, p, vm: s.single_mode_velocity(p, vm), v_max)
            rec_di[r] = di_pos
        stack, spl = stack_new, spl_new
        rec_t[r] = r * steps_per_record * dt

    drift = 0.5 * accel * rec_t ** 2
    field_nat = PotentialSpec(kind="uniform_field", field_strength=accel,
                              charge=1.0)
    record_dt = rec_t[1] - rec_t[0]

    def package(rec, v0):
        out_q = {}
        out_n = {}
        out_e = {}
        for n, series in rec.items():
            com_frame = series.mean(axis=1)
            com_lab = com_frame + drift
            ref = newton_reference(field_nat, 1.0, com_lab[0], v0[n],
                                   record_dt, n_rec)
            l_ref = max(abs(com_lab[0]), 1e-12)
            out_q[n] = com_lab
            out_n[n] = ref.x_cm
            out_e[n] = np.abs(com_lab - ref.x_cm) / l_ref
        return out_q, out_n, out_e

    results = {}
    if want_exchange:
        results["exchange"] = package(rec_ex, v0_ex)
    if disting:
        di_rec = {n: rec_di[:, :n] for n in cfg.n_values}
        di_v0 = {n: float(np.mean(v0_di_each[:n])) for n in cfg.n_values}
        results["distinguishable"] = package(di_rec, di_v0)
    return rec_t, results


def _seed_job(args):
    cfg, seed = args
    want_ex = cfg.mode in ("exchange", "both")
    want_di = cfg.mode in ("distinguishable", "both")
    return _simulate_seed(cfg, seed, want_ex, want_di)


def run_com_convergence(cfg: ComConvergenceConfig,
                        pool_map=None) -> ComConvergenceResult:
    """Per-N relative error between the quantum center of mass of one
    experiment and a Newton trajectory launched from the same initial
    center-of-mass position and velocity.

    ``pool_map``: optional map function (e.g. an executor's) applied over
    seeds; experiments are independent and merge deterministically.
    """
    want_ex = cfg.mode in ("exchange", "both")
    want_di = cfg.mode in ("distinguishable", "both")
    modes = [m for m, w in (("exchange", want_ex), ("distinguishable", want_di)) if w]
    errors = {m: {n: [] for n in cfg.n_values} for m in modes}
    com_q = {m: {n: [] for n in cfg.n_values} for m in modes}
    com_n = {m: {n: [] for n in cfg.n_values} for m in modes}
    times = None
    mapper = pool_map if pool_map is not None else map
    for rec_t, per_seed in mapper(_seed_job, [(cfg, s) for s in cfg.seeds]):
        times = rec_t
        for m in modes:
            out_q, out_ref, out_e = per_seed[m]
            for n in cfg.n_values:
                errors[m][n].append(out_e[n])
                com_q[m][n].append(out_q[n])
                com_n[m][n].append(out_ref[n])
    unit_t = cfg.time_unit
    unit_x = cfg.sigma
    return ComConvergenceResult(
        times=times * unit_t,
        errors={m: {n: np.asarray(v) for n, v in errors[m].items()} for m in modes},
        com_quantum={m: {n: np.asarray(v) * unit_x for n, v in com_q[m].items()}
                     for m in modes},
        com_newton={m: {n: np.asarray(v) * unit_x for n, v in com_n[m].items()}
                    for m in modes},
        config=cfg)
