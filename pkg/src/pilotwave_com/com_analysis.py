"""Center-of-mass series, Newton references and error-budget statistics."""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, EmptyEnsemble
from .grid import PotentialSpec

JULIAN_YEAR_S = 3.1557600e7
HBAR_SI = 1.054571817e-34


@dataclass(frozen=True)
class ComSeries:
    """Center-of-mass position/velocity series with a provenance tag."""

    times: np.ndarray
    x_cm: np.ndarray
    v_cm: np.ndarray
    provenance: str = "single-experiment"

    def __post_init__(self):
        if not (len(self.times) == len(self.x_cm) == len(self.v_cm)):
            raise ValueError("series lengths differ")


@dataclass(frozen=True)
class ErrorBudget:
    """Finite-N center-of-mass error budget."""

    n_particles: float
    n_experiments: float
    sigma: float
    err: float
    probability: float

    def __post_init__(self):
        if not 0 < self.probability < 1:
            raise ValueError("probability must be in (0, 1)")
        if self.n_particles < 1:
            raise ValueError("n_particles must be >= 1")


def com_of_experiment(ensemble, experiment: int) -> ComSeries:
    """Per-experiment center of mass: the particle average at each time."""
    if ensemble.n_experiments == 0:
        raise EmptyEnsemble("ensemble holds no experiments")
    x = ensemble.positions[experiment].mean(axis=0)
    v = ensemble.velocities[experiment].mean(axis=0)
    return ComSeries(ensemble.times, x, v, provenance="single-experiment")


def com_of_ensemble(ensemble) -> ComSeries:
    """Average over experiments and particles (Ehrenfest-style mean)."""
    if ensemble.n_experiments == 0:
        raise EmptyEnsemble("ensemble holds no experiments")
    x = ensemble.positions.mean(axis=(0, 1))
    v = ensemble.velocities.mean(axis=(0, 1))
    return ComSeries(ensemble.times, x, v, provenance="quantum-ensemble")


def newton_reference(potential: PotentialSpec, mass_total: float, x0: float,
                     v0: float, dt: float, n_steps: int) -> ComSeries:
    """Velocity-Verlet integration of M x'' = -dV/dx."""
    times = np.arange(n_steps + 1) * dt
    xs = np.empty(n_steps + 1)
    vs = np.empty(n_steps + 1)
    x, v = float(x0), float(v0)
    xs[0], vs[0] = x, v
    a = -float(potential.gradient(x)) / mass_total
    for i in range(1, n_steps + 1):
        v_half = v + 0.5 * dt * a
        x = x + dt * v_half
        a = -float(potential.gradient(x)) / mass_total
        v = v_half + 0.5 * dt * a
        xs[i], vs[i] = x, v
    return ComSeries(times, xs, vs, provenance="newton")


def phi_normal(x: float) -> float:
    """Standard normal distribution function, via erfc (tail-accurate)."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _phi_upper(x: float) -> float:
    """P(Z > x), accurate for large positive x."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


# Acklam's rational approximation for the normal quantile.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
               ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)
    if p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
               (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0)
    q = math.sqrt(-2.0 * math.log(1.0 - p))
    return -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
        ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0)


def phi_normal_inv(p: float) -> float:
    """Inverse of phi_normal: rational approximation plus one Newton step.

    The Newton residual is evaluated in the nearer tail, which keeps the
    round-trip error below 1e-10 across p in [1e-300, 1 - 1e-16].
    """
    if not 0.0 < p < 1.0:
        raise DomainError("p must lie strictly inside (0, 1)")
    if p > 0.5:
        return -phi_normal_inv(1.0 - p)
    z = _acklam(p)
    # Newton polish on the lower tail: Phi(z) - p with Phi via erfc.
    resid = _phi_upper(-z) - p
    dens = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    if dens > 0.0:
        z -= resid / dens
    return z


def required_particles(err_over_sigma: float, probability: float) -> int:
    """Smallest particle number keeping the CoM within err with the given
    probability: ceil(Phi^-1((1+p)/2)^2 / (err/sigma)^2)."""
    if err_over_sigma <= 0:
        raise DomainError("err_over_sigma must be positive")
    if not 0.0 < probability < 1.0:
        raise DomainError("probability must be in (0, 1)")
    z = phi_normal_inv(0.5 * (1.0 + probability))
    return max(1, math.ceil((z / err_over_sigma) ** 2))


def required_error(n_particles: float, n_experiments: float) -> float:
    """err/sigma exceeded only once per n_experiments runs:
    Phi^-1(1 - 1/M) / sqrt(N)."""
    if n_particles < 1:
        raise DomainError("n_particles must be >= 1")
    if n_experiments < 2:
        raise DomainError("n_experiments must be >= 2")
    return phi_normal_inv(1.0 - 1.0 / n_experiments) / math.sqrt(n_particles)


def free_packet_sigma(sigma0: float, mass: float, hbar: float, t: float) -> float:
    """Free-packet position spread sigma0 sqrt(1 + (hbar t / 2 m sigma0^2)^2)."""
    if sigma0 <= 0:
        raise DomainError("sigma0 must be positive")
    return sigma0 * math.sqrt(1.0 + (hbar * t / (2.0 * mass * sigma0 ** 2)) ** 2)


def worked_example() -> ErrorBudget:
    """Macroscopic budget: a mole of carbon-like particles followed for a year.

    sigma0 = 100 nm, m = 2e-26 kg, t = 1 Julian year, N = 6e23, M = 2e12.
    """
    n_f = 6e23
    m_f = 2e12
    sigma_t = free_packet_sigma(1e-7, 2e-26, HBAR_SI, JULIAN_YEAR_S)
    ratio = required_error(n_f, m_f)
    return ErrorBudget(n_particles=n_f, n_experiments=m_f, sigma=sigma_t,
                       err=ratio * sigma_t, probability=1.0 - 1.0 / m_f)
