"""Spatial mesh, wavefunctions, derived fields and Born-rule sampling."""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import GridTooNarrow, OutOfDomain, ZeroNorm


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1D mesh with n_points nodes spanning [x_min, x_max]."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 8:
            raise ValueError("n_points must be >= 8")
        if not self.x_min < self.x_max:
            raise ValueError("x_min must be < x_max")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @cached_property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_points)

    def contains(self, positions) -> np.ndarray:
        p = np.asarray(positions)
        return (p >= self.x_min) & (p <= self.x_max)


@dataclass(frozen=True)
class GaussianPacketSpec:
    """Gaussian packet exp(-(x-x0)^2 / 2 sigma^2) * exp(i k0 x).

    ``sigma`` is the amplitude width; the position density then has
    standard deviation sigma / sqrt(2).
    """

    sigma: float
    x0: float = 0.0
    k0: float = 0.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")

    @property
    def density_std(self) -> float:
        return self.sigma / np.sqrt(2.0)


@dataclass(frozen=True)
class PotentialSpec:
    """External one-body potential, one of a few analytic shapes or a table.

    kind: "constant" | "linear" | "harmonic" | "uniform_field" | "tabulated"
    The optional ``pair_potential`` tag describes an interparticle term for
    bookkeeping only; no dynamical code consumes it.
    """

    kind: str
    v0: float = 0.0
    slope: float = 0.0
    k: float = 0.0
    x_center: float = 0.0
    field_strength: float = 0.0
    charge: float = 0.0
    values: np.ndarray | None = None
    pair_potential: str | None = None

    _KINDS = ("constant", "linear", "harmonic", "uniform_field", "tabulated")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.kind == "harmonic" and self.k < 0:
            raise ValueError("harmonic k must be >= 0")
        if self.kind == "tabulated":
            if self.values is None:
                raise ValueError("tabulated potential needs values")
            if not np.all(np.isfinite(self.values)):
                raise ValueError("tabulated values must be finite")

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.v0)
        if self.kind == "linear":
            return self.slope * x
        if self.kind == "harmonic":
            return 0.5 * self.k * (x - self.x_center) ** 2
        if self.kind == "uniform_field":
            # force on the particle is +charge*field_strength
            return -self.charge * self.field_strength * x
        return np.asarray(self.values, dtype=float)

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.zeros_like(x)
        if self.kind == "linear":
            return np.full_like(x, self.slope)
        if self.kind == "harmonic":
            return self.k * (x - self.x_center)
        if self.kind == "uniform_field":
            return np.full_like(x, -self.charge * self.field_strength)
        raise ValueError("gradient of a tabulated potential needs its grid; "
                         "use numpy.gradient on evaluate() output")

    def scaled(self, factor: float) -> "PotentialSpec":
        """Potential multiplied by a constant (e.g. N V_ext for the center of mass)."""
        if self.kind == "tabulated":
            return PotentialSpec(kind="tabulated", values=factor * np.asarray(self.values))
        return PotentialSpec(
            kind=self.kind,
            v0=factor * self.v0,
            slope=factor * self.slope,
            k=factor * self.k,
            x_center=self.x_center,
            field_strength=factor * self.field_strength,
            charge=self.charge,
        )


@dataclass(frozen=True)
class WaveFunction1D:
    """Complex amplitudes on a Grid1D. Treated as immutable once built."""

    grid: Grid1D
    amplitudes: np.ndarray
    mass: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if self.mass <= 0 or self.hbar <= 0:
            raise ValueError("mass and hbar must be positive")
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (self.grid.n_points,):
            raise ValueError("amplitudes shape does not match grid")
        object.__setattr__(self, "amplitudes", amps)

    def with_amplitudes(self, amps) -> "WaveFunction1D":
        return WaveFunction1D(self.grid, amps, self.mass, self.hbar)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm_squared(self) -> float:
        return float(np.trapezoid(self.density, self.grid.x))

    def norm(self) -> float:
        n2 = self.norm_squared()
        if n2 < 1e-300:
            raise ZeroNorm("norm below representable threshold")
        return n2

    def normalize(self) -> "WaveFunction1D":
        n2 = self.norm()
        # already-normalized short circuit keeps normalize o normalize exact
        if abs(n2 - 1.0) < 1e-14:
            return self
        return self.with_amplitudes(self.amplitudes / np.sqrt(n2))

    def mean_position(self) -> float:
        rho = self.density
        z = np.trapezoid(rho, self.grid.x)
        return float(np.trapezoid(self.grid.x * rho, self.grid.x) / z)

    def width(self) -> float:
        """Standard deviation of the position density."""
        rho = self.density
        x = self.grid.x
        z = np.trapezoid(rho, x)
        mu = np.trapezoid(x * rho, x) / z
        var = np.trapezoid((x - mu) ** 2 * rho, x) / z
        return float(np.sqrt(max(var, 0.0)))

    def current(self) -> np.ndarray:
        """Probability current J = (hbar/m) Im(psi* dpsi/dx).

        The derivative is spectral; states are required to decay at the
        walls, so the periodic wrap contributes below the boundary threshold.
        """
        psi = self.amplitudes
        k = 2.0 * np.pi * np.fft.fftfreq(self.grid.n_points, self.grid.dx)
        dpsi = np.fft.ifft(1j * k * np.fft.fft(psi))
        return (self.hbar / self.mass) * np.imag(np.conj(psi) * dpsi)


def make_gaussian(spec: GaussianPacketSpec, grid: Grid1D,
                  mass: float = 1.0, hbar: float = 1.0) -> WaveFunction1D:
    """Normalized Gaussian packet on the grid.

    Raises GridTooNarrow when the boundary amplitude exceeds 1e-10 of the peak.
    """
    x = grid.x
    envelope = np.exp(-((x - spec.x0) ** 2) / (2.0 * spec.sigma ** 2))
    edge = max(envelope[0], envelope[-1])
    if edge > 1e-10:
        raise GridTooNarrow(
            f"boundary amplitude {edge:.2e} of peak; widen the grid")
    psi = envelope * np.exp(1j * spec.k0 * x)
    wf = WaveFunction1D(grid, psi, mass, hbar)
    return wf.normalize()


def make_two_packet(grid: Grid1D, sigma: float, x_left: float, x_right: float,
                    k_left: float = 0.0, k_right: float = 0.0,
                    mass: float = 1.0, hbar: float = 1.0) -> WaveFunction1D:
    """Normalized equal-weight sum of two separated Gaussian packets."""
    x = grid.x
    psi = (np.exp(-((x - x_left) ** 2) / (2 * sigma ** 2)) * np.exp(1j * k_left * x)
           + np.exp(-((x - x_right) ** 2) / (2 * sigma ** 2)) * np.exp(1j * k_right * x))
    return WaveFunction1D(grid, psi, mass, hbar).normalize()


NODE_EPSILON = 1e-8


def quantum_potential(wf: WaveFunction1D, regularization: str = "hold",
                      floor: float = 1e-12) -> np.ndarray:
    """Q(x) = -(hbar^2 / 2m) R''(x)/R(x) with R = |psi|, central differences.

    regularization:
      "hold"  - where R < 1e-8 * max(R), hold Q at the nearest valid value
      "floor" - divide by max(R, floor * max(R)) instead
    """
    R = np.abs(wf.amplitudes)
    rmax = R.max()
    if rmax < 1e-300:
        raise ZeroNorm("cannot form quantum potential of a null field")
    dx = wf.grid.dx
    d2 = np.zeros_like(R)
    d2[1:-1] = (R[2:] - 2 * R[1:-1] + R[:-2]) / dx ** 2
    pref = -(wf.hbar ** 2) / (2.0 * wf.mass)
    if regularization == "floor":
        return pref * d2 / np.maximum(R, floor * rmax)
    q = pref * d2 / np.maximum(R, 1e-300)
    bad = R < NODE_EPSILON * rmax
    if bad.any():
        idx = np.arange(len(R))
        good_idx = idx[~bad]
        if good_idx.size == 0:
            raise ZeroNorm("no valid points for quantum potential")
        # nearest valid neighbor fill
        pos = np.searchsorted(good_idx, idx[bad]).clip(0, good_idx.size - 1)
        left = np.clip(pos - 1, 0, good_idx.size - 1)
        pick = np.where(np.abs(good_idx[pos] - idx[bad])
                        < np.abs(idx[bad] - good_idx[left]), pos, left)
        q[bad] = q[good_idx[pick]]
    return q


def _trapezoid_cdf(wf: WaveFunction1D):
    rho = wf.density
    dx = wf.grid.dx
    cdf = np.concatenate([[0.0], np.cumsum((rho[1:] + rho[:-1]) * dx / 2.0)])
    total = cdf[-1]
    if total < 1e-300:
        raise ZeroNorm("cannot sample from a null density")
    return cdf / total


def _invert_cdf(wf: WaveFunction1D, u: np.ndarray) -> np.ndarray:
    """Linear interpolation of the inverse trapezoid CDF inside cells."""
    cdf = _trapezoid_cdf(wf)
    x = wf.grid.x
    idx = np.searchsorted(cdf, u, side="right").clip(1, len(cdf) - 1)
    c_lo = cdf[idx - 1]
    span = cdf[idx] - c_lo
    frac = np.where(span > 0, (u - c_lo) / np.where(span > 0, span, 1.0), 0.0)
    return x[idx - 1] + frac * wf.grid.dx


def sample_positions(wf: WaveFunction1D, count: int, rng) -> np.ndarray:
    """``count`` i.i.d. draws from |psi|^2 by inverse-CDF sampling.

    ``rng`` is a numpy Generator or an integer seed; results are
    deterministic for a given seed.
    """
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    u = rng.random(count)
    return _invert_cdf(wf, u)


def quantile_positions(wf: WaveFunction1D, count: int) -> np.ndarray:
    """Deterministic stratified start: the (i+1/2)/M quantiles of |psi|^2.

    Useful for low-variance trajectory ensembles and for plotting; the
    i.i.d. Born sampler is ``sample_positions``.
    """
    u = (np.arange(count) + 0.5) / count
    return _invert_cdf(wf, u)


def density_cdf_at(wf: WaveFunction1D, positions) -> np.ndarray:
    """Trapezoid CDF of |psi|^2 evaluated at arbitrary positions."""
    p = np.asarray(positions, dtype=float)
    if np.any(p < wf.grid.x_min) or np.any(p > wf.grid.x_max):
        raise OutOfDomain("position outside grid")
    cdf = _trapezoid_cdf(wf)
    return np.interp(p, wf.grid.x, cdf)
