"""Center-of-mass coordinate change and its defining identities.

The change maps (x_1 .. x_N) to (x_cm, y_2 .. y_N) with
y_j = x_j - (sqrt(N) x_cm + x_1) / (sqrt(N) + 1), chosen so the Laplacian
splits into (1/N) d2/dx_cm^2 plus the plain y Laplacian with no cross terms.
"""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConditionViolation
from .grid import PotentialSpec

_TOL = 1e-12


@dataclass(frozen=True)
class CoordChange:
    n: int
    a: float
    b: float
    c: float

    def row(self, j: int) -> np.ndarray:
        """Coefficients alpha^(j)_i of y_j = sum_i alpha^(j)_i x_i, j in 2..N."""
        if not 2 <= j <= self.n:
            raise ValueError("row index must lie in 2..N")
        alpha = np.full(self.n, self.b / self.n)
        alpha[0] += self.c
        alpha[j - 1] += self.a
        return alpha

    def matrix(self) -> np.ndarray:
        return np.stack([self.row(j) for j in range(2, self.n + 1)])

    def forward(self, x: np.ndarray):
        """(x_1..x_N) -> (x_cm, y_2..y_N); x may carry leading batch axes."""
        x = np.asarray(x, dtype=float)
        x_cm = x.mean(axis=-1)
        root = math.sqrt(self.n)
        shift = (root * x_cm + x[..., 0]) / (root + 1.0)
        y = x[..., 1:] - shift[..., None]
        return x_cm, y

    def inverse(self, x_cm, y: np.ndarray) -> np.ndarray:
        """(x_cm, y_2..y_N) -> (x_1..x_N)."""
        y = np.asarray(y, dtype=float)
        x_cm = np.asarray(x_cm, dtype=float)
        root = math.sqrt(self.n)
        s = y.sum(axis=-1)
        x = np.empty(y.shape[:-1] + (self.n,))
        x[..., 0] = x_cm - s / root
        x[..., 1:] = x_cm[..., None] + y - (s / (root + self.n))[..., None]
        return x


def _condition_residuals(n: int, a: float, b: float, c: float):
    """The three defining conditions, evaluated in closed form."""
    bn = b / n
    sum_row = a + b + c
    sum_sq = (c + bn) ** 2 + (a + bn) ** 2 + (n - 2) * bn * bn
    cross = (c + bn) ** 2 + 2.0 * bn * (a + bn) + (n - 3) * bn * bn
    return sum_row, sum_sq - 1.0, cross


def build_coord_change(n: int) -> CoordChange:
    """Coefficients a=1, b=-sqrt(N)/(sqrt(N)+1), c=-1/(sqrt(N)+1), verified
    against the no-cross-terms conditions before returning."""
    if n < 2:
        raise ValueError("need at least two particles")
    root = math.sqrt(n)
    change = CoordChange(n=n, a=1.0, b=-root / (root + 1.0), c=-1.0 / (root + 1.0))
    resids = _condition_residuals(n, change.a, change.b, change.c)
    # spot-check one explicit row with compensated summation
    row = change.row(2)
    explicit = (math.fsum(row), math.fsum(v * v for v in row) - 1.0)
    worst = max(map(abs, (*resids, *explicit)))
    if worst > _TOL:
        raise ConditionViolation(f"coordinate conditions violated: {worst:.3e}")
    return change


def _gaussian_family(n: int, rng, anisotropic: bool):
    centers = rng.uniform(-0.5, 0.5, size=n)
    if anisotropic:
        curv = rng.uniform(0.5, 1.5, size=n)
    else:
        curv = np.full(n, 0.5)

    def f(x):
        return np.exp(-np.sum(curv * (x - centers) ** 2, axis=-1))

    return f


def laplacian_identity_residual(n: int, n_points: int = 100, h: float = 1e-4,
                                rng=0, anisotropic: bool = False,
                                constant: bool = False) -> float:
    """Max discrepancy between the x-coordinate Laplacian and
    (1/N) d2/dx_cm^2 + sum_j d2/dy_j^2, by central differences at random points.

    h = 1e-4 balances truncation against roundoff for O(1)-scaled functions.
    """
    if not 2 <= n <= 8:
        raise ValueError("Laplacian check supported for N in [2, 8]")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    if constant:
        f = lambda x: np.ones(x.shape[:-1])
    else:
        f = _gaussian_family(n, rng, anisotropic)
    change = build_coord_change(n)
    worst = 0.0
    eye = np.eye(n)
    for _ in range(n_points):
        x0 = rng.uniform(-1.0, 1.0, size=n)
        f0 = f(x0)
        lhs = sum((f(x0 + h * eye[i]) - 2.0 * f0 + f(x0 - h * eye[i])) / h ** 2
                  for i in range(n))
        x_cm0, y0 = change.forward(x0)

        def g(x_cm, y):
            return f(change.inverse(np.asarray(x_cm), y))

        rhs = (g(x_cm0 + h, y0) - 2.0 * f0 + g(x_cm0 - h, y0)) / h ** 2 / n
        eye_y = np.eye(n - 1)
        for j in range(n - 1):
            rhs += (g(x_cm0, y0 + h * eye_y[j]) - 2.0 * f0
                    + g(x_cm0, y0 - h * eye_y[j])) / h ** 2
        worst = max(worst, abs(float(lhs - rhs)))
    return worst


def cancellation_factors(n: int, exact: bool = False):
    """The linear and quadratic Taylor factors that vanish identically:
    1 - 1/sqrt(N) - (N-1)/(sqrt(N)+N)  and
    1/N + (N-1)/(sqrt(N)+N)^2 - 2/(sqrt(N)+N).

    With exact=True, N must be a perfect square and the values are computed
    in rational arithmetic (they are exactly zero).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if exact:
        root = math.isqrt(n)
        if root * root != n:
            raise ValueError("exact mode needs a perfect-square N")
        root = Fraction(root)
        one = Fraction(1)
        beta = one - one / root - Fraction(n - 1) / (root + n)
        gamma = one / n + Fraction(n - 1) / (root + n) ** 2 - 2 / (root + n)
        return beta, gamma
    root = math.sqrt(n)
    beta = 1.0 - 1.0 / root - (n - 1) / (root + n)
    gamma = 1.0 / n + (n - 1) / (root + n) ** 2 - 2.0 / (root + n)
    return beta, gamma


@dataclass(frozen=True)
class ReductionReport:
    max_residual: float
    n_points: int


def _quadratic_coefficients(potential: PotentialSpec):
    if potential.kind == "constant":
        return potential.v0, 0.0, 0.0
    if potential.kind == "linear":
        return 0.0, potential.slope, 0.0
    if potential.kind == "uniform_field":
        return 0.0, -potential.charge * potential.field_strength, 0.0
    if potential.kind == "harmonic":
        k, xc = potential.k, potential.x_center
        return 0.5 * k * xc * xc, -k * xc, 0.5 * k
    raise ValueError("reduction check needs an analytic quadratic potential")


def v_cm_reduction(potential: PotentialSpec, n: int, n_points: int = 200,
                   rng=0) -> ReductionReport:
    """Residual of sum_j V(x_j) = N V(x_cm) + gamma sum_i y_i^2 at random
    configurations; vanishes identically for quadratic V."""
    if n < 2:
        raise ValueError("need at least two particles")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    _, _, gamma = _quadratic_coefficients(potential)
    change = build_coord_change(n)
    xs = rng.uniform(-2.0, 2.0, size=(n_points, n))
    lhs = potential.evaluate(xs).sum(axis=-1)
    x_cm, y = change.forward(xs)
    rhs = n * potential.evaluate(x_cm) + gamma * (y ** 2).sum(axis=-1)
    return ReductionReport(max_residual=float(np.max(np.abs(lhs - rhs))),
                           n_points=n_points)
