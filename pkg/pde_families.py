#!/usr/bin/env python3
"""
Transmutation Toolkit - Planar Solution Families
Complete solution systems of (Laplacian - q(x)) u = 0, boundary least squares and the transmuted MFS
"""

import math
import time
import logging
from dataclasses import dataclass, field
from math import comb
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from formal_powers import FormalPowersTable
from kernel_legendre import LegendreKernel
from numerics import Grid, LstsqResult, interpolate, legendre_q_table, lstsq, lstsq_pivoted
from transmutation_errors import BasisDegenerate, DomainError, OrderError, RankDeficient

logger = logging.getLogger(__name__)

BoundaryData = Union[Callable[[np.ndarray, np.ndarray], np.ndarray], Sequence[complex], np.ndarray]

SOURCE_RADIUS_FACTOR = 1.5
DEFAULT_SOURCES = 40
POINTS_PER_MEMBER = 4


# =============================================================================
# domains
# =============================================================================

@dataclass(frozen=True)
class PlanarDomain:
    """Rectangle [x0, x1] x [y0, y1] or disk (center, radius)"""
    shape: str
    x0: float = -1.0
    x1: float = 1.0
    y0: float = -1.0
    y1: float = 1.0
    center: complex = 0j
    radius: float = 1.0

    def __post_init__(self):
        if self.shape not in ("rectangle", "disk"):
            raise DomainError(f"unknown domain shape {self.shape!r}; expected 'rectangle' or 'disk'")
        if self.shape == "rectangle" and not (self.x1 > self.x0 and self.y1 > self.y0):
            raise DomainError(f"empty rectangle [{self.x0}, {self.x1}] x [{self.y0}, {self.y1}]")
        if self.shape == "disk" and not self.radius > 0:
            raise DomainError(f"disk radius must be positive, got {self.radius}")

    @classmethod
    def rectangle(cls, x0: float, x1: float, y0: float, y1: float) -> "PlanarDomain":
        return cls("rectangle", x0=x0, x1=x1, y0=y0, y1=y1)

    @classmethod
    def disk(cls, center: complex, radius: float) -> "PlanarDomain":
        return cls("disk", center=complex(center), radius=radius)

    @property
    def x_extent(self) -> Tuple[float, float]:
        if self.shape == "rectangle":
            return self.x0, self.x1
        return self.center.real - self.radius, self.center.real + self.radius

    @property
    def centroid(self) -> complex:
        if self.shape == "rectangle":
            return complex(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))
        return self.center

    @property
    def circumradius(self) -> float:
        if self.shape == "rectangle":
            return 0.5 * math.hypot(self.x1 - self.x0, self.y1 - self.y0)
        return self.radius

    def check_inside(self, grid: Grid) -> None:
        lo, hi = self.x_extent
        if not grid.contains([lo, hi]):
            raise DomainError(
                f"domain x-extent [{lo}, {hi}] leaves the tabulated interval [{grid.a_left}, {grid.a_right}]"
            )

    def boundary_points(self, P: int) -> Tuple[np.ndarray, np.ndarray]:
        """P points spaced uniformly in arc length, counterclockwise"""
        if P < 4:
            raise DomainError(f"need at least 4 boundary points, got {P}")
        if self.shape == "disk":
            theta = 2 * np.pi * (np.arange(P) + 0.5) / P
            z = self.center + self.radius * np.exp(1j * theta)
            return z.real, z.imag
        w, h = self.x1 - self.x0, self.y1 - self.y0
        s = (np.arange(P) + 0.5) * 2 * (w + h) / P
        x = np.empty(P)
        y = np.empty(P)
        for lo, hi, fx, fy in (
            (0.0, w, lambda t: self.x0 + t, lambda t: self.y0 + 0 * t),
            (w, w + h, lambda t: self.x1 + 0 * t, lambda t: self.y0 + t),
            (w + h, 2 * w + h, lambda t: self.x1 - t, lambda t: self.y1 + 0 * t),
            (2 * w + h, 2 * (w + h), lambda t: self.x0 + 0 * t, lambda t: self.y1 - t),
        ):
            mask = (s >= lo) & (s < hi)
            x[mask] = fx(s[mask] - lo)
            y[mask] = fy(s[mask] - lo)
        return x, y

    def interior_points(self, per_side: int = 11) -> Tuple[np.ndarray, np.ndarray]:
        """Tensor or polar sample of interior points for error checks"""
        if self.shape == "rectangle":
            gx = np.linspace(self.x0, self.x1, per_side + 2)[1:-1]
            gy = np.linspace(self.y0, self.y1, per_side + 2)[1:-1]
            X, Y = np.meshgrid(gx, gy, indexing="ij")
            return X.ravel(), Y.ravel()
        r = self.radius * np.linspace(0.0, 0.9, per_side)
        theta = np.linspace(0.0, 2 * np.pi, per_side, endpoint=False)
        R, T = np.meshgrid(r, theta, indexing="ij")
        z = self.center + R * np.exp(1j * T)
        return z.real.ravel(), z.imag.ravel()


def _sample_data(data: BoundaryData, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    if callable(data):
        values = np.asarray(data(x, y), dtype=complex)
        return np.broadcast_to(values, x.shape).copy()
    values = np.asarray(data, dtype=complex)
    if values.shape != x.shape:
        raise DomainError(f"boundary data has {values.size} values for {x.size} boundary points")
    return values


# =============================================================================
# solution family
# =============================================================================

def _member_order(m: int) -> int:
    """Highest formal power member m uses"""
    if m == 0:
        return 0
    return (m + 1) // 2 if m % 2 else m // 2


def _member_terms(m: int) -> List[Tuple[float, int, int]]:
    """(coefficient, formal power index, power of y) terms of member m"""
    if m == 0:
        return [(1.0, 0, 0)]
    if m % 2:
        j = (m - 1) // 2 + 1
        return [((-1) ** (k // 2) * comb(j, k), j - k, k) for k in range(0, j + 1, 2)]
    j = m // 2
    return [((-1) ** ((k + 1) // 2) * comb(j, k), j - k, k) for k in range(1, j + 1, 2)]


class SolutionFamily:
    """Members u_0 = f, u_(2j+1), u_(2j) built from formal powers and powers of y

    For q = 0 the members are the harmonic polynomials 1, Re z^j and -Im z^j.
    """

    def __init__(self, powers: FormalPowersTable, M: int):
        if M < 1:
            raise DomainError(f"family needs at least one member, got M={M}")
        top = max(_member_order(m) for m in range(M))
        if top > powers.K_max:
            raise OrderError(f"{M} members need formal powers up to {top}, table holds {powers.K_max}")
        self.powers = powers
        self.M = M
        self.top = top
        self.terms = [_member_terms(m) for m in range(M)]

    def _phi_at(self, x: np.ndarray) -> np.ndarray:
        return interpolate(self.powers.phi[:self.top + 1], self.powers.grid, x)

    def matrix(self, x, y) -> np.ndarray:
        """Columns u_0..u_(M-1) evaluated at the points (x, y)"""
        xs = np.asarray(x, dtype=float).ravel()
        ys = np.asarray(y, dtype=float).ravel()
        phi = self._phi_at(xs)
        y_pow = ys[None, :] ** np.arange(self.top + 1)[:, None]
        A = np.zeros((xs.size, self.M), dtype=complex)
        for m, terms in enumerate(self.terms):
            for c, k_phi, k_y in terms:
                A[:, m] += c * phi[k_phi] * y_pow[k_y]
        return A

    def member(self, m: int, x, y) -> Union[complex, np.ndarray]:
        if not 0 <= m < self.M:
            raise OrderError(f"member {m} requested, family holds 0..{self.M - 1}")
        xs = np.asarray(x, dtype=float)
        ys = np.broadcast_to(np.asarray(y, dtype=float), xs.shape)
        phi = self._phi_at(xs)
        value = sum(c * phi[k_phi] * ys ** k_y for c, k_phi, k_y in self.terms[m])
        value = np.broadcast_to(value, xs.shape)
        return complex(value) if value.ndim == 0 else np.array(value)


def family_member(powers: FormalPowersTable, m: int, x, y) -> Union[complex, np.ndarray]:
    """u_m(x, y) for the table's potential"""
    return SolutionFamily(powers, m + 1).member(m, x, y)


# =============================================================================
# boundary least squares
# =============================================================================

def _scaled_solve(A: np.ndarray, data: np.ndarray, pivoting: bool) -> Tuple[np.ndarray, LstsqResult]:
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms == 0):
        raise BasisDegenerate(f"basis column {int(np.argmin(norms))} vanishes on the boundary")
    try:
        result = lstsq(A / norms, data)
    except RankDeficient as err:
        if not pivoting:
            raise BasisDegenerate(f"{err} (column {err.column}); lower the number of basis functions") from err
        logger.warning(f"⚠️ Basis degenerate at column {err.column}, retrying with column pivoting")
        result = lstsq_pivoted(A / norms, data)
    return result.x / norms, result


@dataclass
class DirichletSolution:
    """Coefficients of sum c_m u_m with boundary diagnostics"""
    family: SolutionFamily
    coefficients: np.ndarray
    boundary_residual: float
    boundary_rms: float
    condition_estimate: float
    pivoted: bool = False

    def __call__(self, x, y) -> np.ndarray:
        xs = np.asarray(x, dtype=float)
        ys = np.broadcast_to(np.asarray(y, dtype=float), xs.shape)
        return (self.family.matrix(xs, ys) @ self.coefficients).reshape(xs.shape)


def solve_dirichlet(
    powers: FormalPowersTable,
    domain: PlanarDomain,
    boundary_data: BoundaryData,
    M: int,
    P: Optional[int] = None,
    pivoting: bool = False,
) -> DirichletSolution:
    """Fit sum c_m u_m to boundary data at P >= 4M arc-length uniform points"""
    started = time.perf_counter()
    domain.check_inside(powers.grid)
    P = POINTS_PER_MEMBER * M if P is None else P
    if P < POINTS_PER_MEMBER * M:
        raise DomainError(f"{M} members need at least {POINTS_PER_MEMBER * M} boundary points, got {P}")

    family = SolutionFamily(powers, M)
    x, y = domain.boundary_points(P)
    data = _sample_data(boundary_data, x, y)
    A = family.matrix(x, y)
    coefficients, result = _scaled_solve(A, data, pivoting)
    misfit = np.abs(A @ coefficients - data)

    solution = DirichletSolution(
        family=family,
        coefficients=coefficients,
        boundary_residual=float(misfit.max()),
        boundary_rms=float(np.sqrt(np.mean(misfit ** 2))),
        condition_estimate=result.condition_estimate,
        pivoted=result.pivoted,
    )
    logger.info(f"✅ Dirichlet fit: M={M}, P={P}, boundary residual {solution.boundary_residual:.2e}, "
                f"cond ~ {solution.condition_estimate:.1e}, {time.perf_counter() - started:.2f}s")
    return solution


# =============================================================================
# transmuted fundamental solutions
# =============================================================================

def mfs_image(kern: LegendreKernel, Z: complex, x, y) -> Union[complex, np.ndarray]:
    """T applied to log|x + iy - Z| in the x variable

    With Z' = Z - iy and w = Z'/x the image is
    log|x - Z'| + beta_0 (log|Z'^2 - x^2| + 2 Re(w Q_0(w)) - 2)
    + 2 sum_(n>=1) beta_n/(2n+1) Re(Q_(n+1)(w) - Q_(n-1)(w)); at x = 0 it is the plain log.
    """
    xs = np.asarray(x, dtype=float)
    shape = xs.shape
    xs = xs.ravel()
    ys = np.broadcast_to(np.asarray(y, dtype=float), shape).ravel()
    Zp = complex(Z) - 1j * ys
    out = np.log(np.abs(xs - Zp)).astype(complex)

    off_axis = xs != 0
    if np.any(off_axis):
        xm = xs[off_axis]
        Zm = Zp[off_axis]
        w = Zm / xm
        beta = kern.coefficients_at(xm)
        Q = legendre_q_table(kern.N + 1, w)
        series = beta[0] * (np.log(np.abs(Zm * Zm - xm * xm)) + 2.0 * np.real(w * Q[0]) - 2.0)
        for n in range(1, kern.N + 1):
            series = series + 2.0 * beta[n] / (2 * n + 1) * (Q[n + 1] - Q[n - 1]).real
        out[off_axis] += series
        kern.record_evaluations(xm.size)
    out = out.reshape(shape)
    return complex(out) if out.ndim == 0 else out


def default_sources(domain: PlanarDomain, count: int = DEFAULT_SOURCES,
                    radius_factor: float = SOURCE_RADIUS_FACTOR) -> np.ndarray:
    """Uniform angles on a circle of radius_factor times the circumradius"""
    theta = 2 * np.pi * (np.arange(count) + 0.25) / count
    return domain.centroid + radius_factor * domain.circumradius * np.exp(1j * theta)


@dataclass
class MfsSolution:
    """Weights of f plus sum w_j T[log|. - Z_j|]"""
    kern: LegendreKernel
    sources: np.ndarray
    constant: complex
    weights: np.ndarray
    boundary_residual: float
    condition_estimate: float
    interior_checks: List[Tuple[float, float, complex]] = field(default_factory=list)

    def __call__(self, x, y) -> np.ndarray:
        xs = np.asarray(x, dtype=float)
        ys = np.broadcast_to(np.asarray(y, dtype=float), xs.shape)
        return (_mfs_matrix(self.kern, self.sources, xs.ravel(), ys.ravel()) @
                np.concatenate([[self.constant], self.weights])).reshape(xs.shape)


def _mfs_matrix(kern: LegendreKernel, sources: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    columns = [interpolate(kern.f, kern.grid, x)] if kern.f is not None else [np.ones(x.size)]
    columns += [mfs_image(kern, Z, x, y) for Z in sources]
    return np.column_stack(columns).astype(complex)


def mfs_solve(
    kern: LegendreKernel,
    domain: PlanarDomain,
    boundary_data: BoundaryData,
    sources: Optional[Sequence[complex]] = None,
    P: Optional[int] = None,
    interior_data: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None,
    pivoting: bool = False,
) -> MfsSolution:
    """Collocate f and transmuted point sources against boundary data"""
    started = time.perf_counter()
    domain.check_inside(kern.grid)
    sources = default_sources(domain) if sources is None else np.asarray(sources, dtype=complex)
    P = POINTS_PER_MEMBER * (sources.size + 1) if P is None else P

    x, y = domain.boundary_points(P)
    data = _sample_data(boundary_data, x, y)
    A = _mfs_matrix(kern, sources, x, y)
    coefficients, result = _scaled_solve(A, data, pivoting)
    misfit = np.abs(A @ coefficients - data)

    solution = MfsSolution(
        kern=kern,
        sources=sources,
        constant=complex(coefficients[0]),
        weights=coefficients[1:],
        boundary_residual=float(misfit.max()),
        condition_estimate=result.condition_estimate,
    )
    if interior_data is not None:
        xi, yi = domain.interior_points(5)
        computed = solution(xi, yi)
        expected = np.asarray(interior_data(xi, yi), dtype=complex)
        solution.interior_checks = [(float(a), float(b), complex(c - e))
                                    for a, b, c, e in zip(xi, yi, computed, expected)]

    logger.info(f"✅ MFS fit: {sources.size} sources, P={P}, boundary residual {solution.boundary_residual:.2e}, "
                f"cond ~ {solution.condition_estimate:.1e}, {time.perf_counter() - started:.2f}s")
    return solution
