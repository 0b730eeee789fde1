#!/usr/bin/env python3
"""
Transmutation Toolkit - Numerics
Grids, potentials, special functions, grid quadrature, least squares and the ODE oracle
"""

import math
import logging
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import hermite as np_hermite
from numpy.polynomial import legendre as np_legendre
from scipy import linalg as sp_linalg
from scipy.interpolate import CubicSpline

from transmutation_errors import (
    DomainError,
    OrderError,
    RankDeficient,
    SingularPotential,
    StepUnderflow,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, complex, np.ndarray, Sequence[float]]

MIN_INTERVALS = 16
MAX_COEFF_ORDER = 200
CUT_GUARD = 1e-8
MIN_ORACLE_TOL = 1e-13
MIN_STEP = 1e-12


def _lagrange_basis(nodes: np.ndarray) -> List[Polynomial]:
    basis = []
    for k, node in enumerate(nodes):
        others = np.delete(nodes, k)
        poly = Polynomial.fromroots(others)
        basis.append(poly / poly(node))
    return basis


_BASIS5 = _lagrange_basis(np.arange(5.0))
# row p: integral of each basis polynomial over [p, p+1]
_INTEGRATION_WEIGHTS = np.array([
    [b.integ()(p + 1) - b.integ()(p) for b in _BASIS5] for p in range(4)
])
# row p: derivative of each basis polynomial at node p
_DERIVATIVE_WEIGHTS = np.array([
    [b.deriv()(p) for b in _BASIS5] for p in range(5)
])


# =============================================================================
# Grid
# =============================================================================

@dataclass(frozen=True)
class Grid:
    """Uniform grid with 0 as a node; nodes are h*i for i_left <= i <= i_right"""
    h: float
    i_left: int
    i_right: int
    breaks: Tuple[int, ...] = ()

    def __post_init__(self):
        if not (math.isfinite(self.h) and self.h > 0):
            raise DomainError(f"grid step must be positive and finite, got {self.h}")
        if self.i_left > 0 or self.i_right < 0:
            raise DomainError("grid must contain x = 0 as a node")
        if self.M < MIN_INTERVALS:
            raise DomainError(f"grid needs at least {MIN_INTERVALS} intervals, got {self.M}")
        for lo, hi in self.pieces():
            if hi - lo < 4:
                raise DomainError(f"jump nodes {self.breaks} leave a piece shorter than 4 intervals")

    @classmethod
    def symmetric(cls, b: float, M: int) -> "Grid":
        """[-b, b] with M intervals (M even)"""
        if M % 2:
            raise DomainError(f"symmetric grid needs an even number of intervals, got {M}")
        if not b > 0:
            raise DomainError(f"interval half-length must be positive, got {b}")
        return cls(h=2.0 * b / M, i_left=-(M // 2), i_right=M // 2)

    @classmethod
    def half(cls, b: float, M: int) -> "Grid":
        """[0, b] with M intervals"""
        if not b > 0:
            raise DomainError(f"interval length must be positive, got {b}")
        return cls(h=b / M, i_left=0, i_right=M)

    @property
    def M(self) -> int:
        return self.i_right - self.i_left

    @property
    def a_left(self) -> float:
        return self.i_left * self.h

    @property
    def a_right(self) -> float:
        return self.i_right * self.h

    @property
    def zero_index(self) -> int:
        return -self.i_left

    @cached_property
    def points(self) -> np.ndarray:
        return self.h * np.arange(self.i_left, self.i_right + 1, dtype=float)

    def __len__(self) -> int:
        return self.M + 1

    def pieces(self) -> List[Tuple[int, int]]:
        """Node-index ranges [lo, hi] between jump nodes"""
        bounds = [0] + sorted(set(self.breaks)) + [self.M]
        return [(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]

    def index_of(self, x: float) -> Optional[int]:
        """Array index of the node at x, or None if x is not a node"""
        s = x / self.h
        i = int(round(s))
        if abs(s - i) > 1e-9 or i < self.i_left or i > self.i_right:
            return None
        return i - self.i_left

    def contains(self, x: ArrayLike) -> bool:
        xs = np.asarray(x, dtype=float)
        slack = 1e-9 * self.h
        return bool(np.all((xs >= self.a_left - slack) & (xs <= self.a_right + slack)))

    def with_breaks(self, positions: Iterable[float]) -> "Grid":
        """Snap jump positions onto the nearest interior nodes"""
        snapped = set(self.breaks)
        for x in positions:
            i = int(round(x / self.h)) - self.i_left
            if 0 < i < self.M:
                if abs(self.points[i] - x) > 1e-12 * max(1.0, abs(x)):
                    logger.debug(f"Snapped jump at x={x} to node {self.points[i]}")
                snapped.add(i)
        return replace(self, breaks=tuple(sorted(snapped)))

    def restrict(self, lo: float, hi: float) -> "Grid":
        """Sub-grid of the nodes inside [lo, hi]; must still contain 0"""
        i_lo = max(self.i_left, int(math.ceil(lo / self.h - 1e-9)))
        i_hi = min(self.i_right, int(math.floor(hi / self.h + 1e-9)))
        offset = i_lo - self.i_left
        breaks = tuple(b - offset for b in self.breaks if 0 < b - offset < i_hi - i_lo)
        return Grid(h=self.h, i_left=i_lo, i_right=i_hi, breaks=breaks)

    def offset_in(self, parent: "Grid") -> int:
        """Array offset of this grid's first node inside a parent grid of the same step"""
        return self.i_left - parent.i_left


# =============================================================================
# Potential
# =============================================================================

class PotentialSpec:
    """Coefficient q(x): a vectorized callable with optional jump positions"""

    def __init__(
        self,
        func: Callable[[np.ndarray], ArrayLike],
        label: str = "q",
        breakpoints: Sequence[float] = (),
        principal_value_ok: bool = False,
        guard_step: float = 1e-6,
        constant: Optional[complex] = None,
    ):
        self.func = func
        self.label = label
        self.breakpoints = tuple(sorted(float(x) for x in breakpoints))
        self.principal_value_ok = principal_value_ok
        self.guard_step = guard_step
        self._constant = constant

    @classmethod
    def constant(cls, c: complex) -> "PotentialSpec":
        value = complex(c) if isinstance(c, complex) else float(c)
        return cls(lambda x: np.full(np.shape(x), value), label=f"{c}", constant=value)

    @classmethod
    def from_samples(cls, grid: Grid, values: ArrayLike, label: str = "samples") -> "PotentialSpec":
        """Piecewise cubic spline through grid samples, broken at the grid's jump nodes"""
        values = np.asarray(values)
        if values.shape != (len(grid),):
            raise DomainError(f"expected {len(grid)} samples, got shape {values.shape}")
        pts = grid.points
        pieces = grid.pieces()
        splines = [CubicSpline(pts[lo:hi + 1], values[lo:hi + 1]) for lo, hi in pieces]
        edges = np.array([pts[hi] for _, hi in pieces[:-1]])

        def evaluate(x):
            xs = np.asarray(x, dtype=float)
            if not grid.contains(xs):
                raise DomainError(f"sampled potential {label} evaluated outside [{grid.a_left}, {grid.a_right}]")
            which = np.searchsorted(edges, xs, side="right")
            out = np.empty(xs.shape, dtype=values.dtype)
            for k, spline in enumerate(splines):
                mask = which == k
                if np.any(mask):
                    out[mask] = spline(xs[mask])
            return out

        return cls(evaluate, label=label, breakpoints=[pts[b] for b in grid.breaks], guard_step=grid.h)

    def with_guard_step(self, h: float) -> "PotentialSpec":
        return PotentialSpec(self.func, self.label, self.breakpoints,
                             self.principal_value_ok, h, self._constant)

    @property
    def is_constant(self) -> bool:
        return self._constant is not None

    def __call__(self, x: ArrayLike) -> np.ndarray:
        xs = np.asarray(x, dtype=float)
        values = np.array(np.broadcast_to(self.func(xs), xs.shape))
        bad = ~np.isfinite(values)
        if np.any(bad):
            where = float(xs[bad].flat[0])
            if not self.principal_value_ok:
                raise SingularPotential(f"potential {self.label} is not finite at x = {where}")
            xb = xs[bad]
            values = values.astype(np.result_type(values, float))
            values[bad] = 0.5 * (np.asarray(self.func(xb - self.guard_step)) +
                                 np.asarray(self.func(xb + self.guard_step)))
            logger.debug(f"Principal-value fill for {self.label} at {xb.size} point(s) near x = {where}")
        return values

    def scalar(self, x: float) -> complex:
        if self._constant is not None:
            return self._constant
        return complex(self(x))

    def sample(self, grid: Grid) -> np.ndarray:
        return self.with_guard_step(grid.h)(grid.points)

    def is_real_on(self, grid: Grid) -> bool:
        values = self.sample(grid)
        return not np.iscomplexobj(values) or bool(np.all(values.imag == 0))

    def __repr__(self) -> str:
        return f"PotentialSpec({self.label!r})"


# =============================================================================
# Orthogonal polynomials
# =============================================================================

@dataclass(frozen=True)
class PolynomialCoeffs:
    """Power-basis coefficients; coeffs[k] multiplies x**k"""
    degree: int
    coeffs: Tuple[float, ...]

    def __post_init__(self):
        if len(self.coeffs) != self.degree + 1:
            raise ValueError(f"degree {self.degree} needs {self.degree + 1} coefficients")
        if self.degree >= 1 and self.coeffs[-1] == 0:
            raise ValueError("leading coefficient must be nonzero")

    def as_array(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=float)

    def __call__(self, x: ArrayLike) -> np.ndarray:
        return np.polynomial.polynomial.polyval(x, self.as_array())


def _check_order(n: int) -> None:
    if n < 0:
        raise OrderError(f"order must be nonnegative, got {n}")
    if n > MAX_COEFF_ORDER:
        raise OrderError(f"power-basis coefficients for order {n} exceed double range (limit {MAX_COEFF_ORDER})")


def _to_power_basis(converter, n: int) -> PolynomialCoeffs:
    unit = np.zeros(n + 1)
    unit[n] = 1.0
    coeffs = np.zeros(n + 1)
    raw = converter(unit)
    coeffs[:len(raw)] = raw[:n + 1]
    return PolynomialCoeffs(n, tuple(float(c) for c in coeffs))


def legendre_coeffs(n: int) -> PolynomialCoeffs:
    """Power-basis coefficients of the Legendre polynomial P_n"""
    _check_order(n)
    return _to_power_basis(np_legendre.leg2poly, n)


def hermite_coeffs(n: int) -> PolynomialCoeffs:
    """Power-basis coefficients of the physicists' Hermite polynomial H_n"""
    _check_order(n)
    return _to_power_basis(np_hermite.herm2poly, n)


def legendre_table(n_max: int, s: ArrayLike) -> np.ndarray:
    """P_0..P_n_max at s, shape (n_max+1, *s.shape)"""
    s = np.asarray(s)
    table = np.empty((n_max + 1,) + s.shape, dtype=np.result_type(s, float))
    table[0] = 1.0
    if n_max >= 1:
        table[1] = s
    for n in range(1, n_max):
        table[n + 1] = ((2 * n + 1) * s * table[n] - n * table[n - 1]) / (n + 1)
    return table


def laguerre_table(n_max: int, t: ArrayLike) -> np.ndarray:
    """L_0..L_n_max at t by the three-term recurrence"""
    t = np.asarray(t)
    table = np.empty((n_max + 1,) + t.shape, dtype=np.result_type(t, float))
    table[0] = 1.0
    if n_max >= 1:
        table[1] = 1.0 - t
    for n in range(1, n_max):
        table[n + 1] = ((2 * n + 1 - t) * table[n] - n * table[n - 1]) / (n + 1)
    return table


def laguerre_eval(n: int, t: ArrayLike) -> Union[float, np.ndarray]:
    if n < 0:
        raise OrderError(f"order must be nonnegative, got {n}")
    value = laguerre_table(n, t)[n]
    return float(value) if np.ndim(value) == 0 else value


def hermite_normalized_table(n_max: int, t: ArrayLike) -> np.ndarray:
    """H_n(t)/sqrt(2^n n!) for n = 0..n_max, without the Gaussian weight"""
    t = np.asarray(t)
    table = np.empty((n_max + 1,) + t.shape, dtype=np.result_type(t, float))
    table[0] = 1.0
    if n_max >= 1:
        table[1] = math.sqrt(2.0) * t
    for n in range(1, n_max):
        table[n + 1] = math.sqrt(2.0 / (n + 1)) * t * table[n] - math.sqrt(n / (n + 1)) * table[n - 1]
    return table


# =============================================================================
# Spherical Bessel functions
# =============================================================================

def _spherical_series(n: int, z: np.ndarray, terms: int = 14) -> np.ndarray:
    """Ascending series z^n/(2n+1)!! * sum (-z^2/2)^k / (k! (2n+3)...(2n+2k+1))"""
    lead = np.ones_like(z)
    for k in range(1, n + 1):
        lead = lead * z / (2 * k + 1)
    term = np.ones_like(z)
    total = np.ones_like(z)
    half_z2 = -0.5 * z * z
    for k in range(1, terms):
        term = term * half_z2 / (k * (2 * n + 2 * k + 1))
        total = total + term
    return lead * total


def spherical_bessel_table(n_max: int, z: ArrayLike) -> np.ndarray:
    """j_0..j_n_max at complex z, shape (n_max+1, *z.shape)

    Entries with |z| > n_max use upward recurrence; the rest use backward
    ratios normalized by j_0 (or j_1 where |j_0| is the smaller one).
    """
    if n_max < 0:
        raise OrderError(f"order must be nonnegative, got {n_max}")
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    zf = z.ravel()
    az = np.abs(zf)
    out = np.zeros((n_max + 1, zf.size), dtype=complex)

    small = az < 0.5
    safe = np.where(small, 1.0, zf)
    j0 = np.where(small, _spherical_series(0, zf), np.sin(zf) / safe)
    j1 = np.where(small, _spherical_series(1, zf), (j0 - np.cos(zf)) / safe)
    out[0] = j0
    if n_max == 0:
        return out.reshape((1,) + shape)

    upward = az > n_max
    if np.any(upward):
        zu = zf[upward]
        prev, cur = j0[upward], j1[upward]
        out[1, upward] = cur
        for n in range(1, n_max):
            prev, cur = cur, (2 * n + 1) / zu * cur - prev
            out[n + 1, upward] = cur

    downward = ~upward
    if np.any(downward):
        zd = zf[downward]
        n_start = n_max + 30 + int(math.ceil(az[downward].max()))
        ratios = np.empty((n_max + 1, zd.size), dtype=complex)
        r = np.zeros_like(zd)
        for n in range(n_start, 0, -1):
            r = zd / ((2 * n + 1) - zd * r)
            if n <= n_max:
                ratios[n] = r
        j0d, j1d = j0[downward], j1[downward]
        use_j1 = np.abs(j0d) < np.abs(j1d)
        cur = np.where(use_j1, j1d, j0d * ratios[1])
        out[1, downward] = cur
        for n in range(2, n_max + 1):
            cur = cur * ratios[n]
            out[n, downward] = cur

    return out.reshape((n_max + 1,) + shape)


def spherical_bessel_j(n: int, z: ArrayLike) -> Union[complex, np.ndarray]:
    value = spherical_bessel_table(n, z)[n]
    return complex(value) if np.ndim(value) == 0 else value


def spherical_bessel_derivative_table(n_max: int, z: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """(j_n, j_n') for n = 0..n_max"""
    table = spherical_bessel_table(n_max + 1, z)
    deriv = np.empty_like(table[:n_max + 1])
    deriv[0] = -table[1]
    for n in range(1, n_max + 1):
        deriv[n] = (n * table[n - 1] - (n + 1) * table[n + 1]) / (2 * n + 1)
    return table[:n_max + 1], deriv


# =============================================================================
# Legendre functions of the second kind
# =============================================================================

def legendre_q_table(n_max: int, z: ArrayLike) -> np.ndarray:
    """Q_0..Q_n_max at complex z off the cut [-1, 1]

    Backward ratio recurrence where the decay rate rho = 1/|z + sqrt(z^2-1)|
    is below 0.995; forward recurrence closer to the cut, where forward is
    the only option and accuracy degrades with n.
    """
    if n_max < 0:
        raise OrderError(f"order must be nonnegative, got {n_max}")
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    zf = z.ravel()
    gap = np.abs(zf.imag) + np.maximum(np.abs(zf.real) - 1.0, 0.0)
    if np.any(gap <= CUT_GUARD):
        bad = complex(zf[gap <= CUT_GUARD][0])
        raise DomainError(f"Legendre Q evaluated on the cut [-1, 1] at z = {bad}")

    q0 = np.arctanh(1.0 / zf)
    out = np.empty((n_max + 1, zf.size), dtype=complex)
    out[0] = q0
    if n_max == 0:
        return out.reshape((1,) + shape)

    rho = 1.0 / np.abs(zf + np.sqrt(zf - 1.0) * np.sqrt(zf + 1.0))
    backward = rho <= 0.995

    forward = ~backward
    if np.any(forward):
        zw = zf[forward]
        prev, cur = q0[forward], zw * q0[forward] - 1.0
        out[1, forward] = cur
        for n in range(1, n_max):
            prev, cur = cur, ((2 * n + 1) * zw * cur - n * prev) / (n + 1)
            out[n + 1, forward] = cur

    if np.any(backward):
        zb = zf[backward]
        worst = float(rho[backward].max())
        extra = 0 if worst < 1e-12 else int(math.ceil(math.log(1e-17) / (2.0 * math.log(worst))))
        n_start = n_max + 20 + min(extra, 4000)
        ratios = np.empty((n_max + 1, zb.size), dtype=complex)
        r = np.zeros_like(zb)
        for n in range(n_start, 0, -1):
            r = n / ((2 * n + 1) * zb - (n + 1) * r)
            if n <= n_max:
                ratios[n] = r
        cur = q0[backward]
        for n in range(1, n_max + 1):
            cur = cur * ratios[n]
            out[n, backward] = cur

    return out.reshape((n_max + 1,) + shape)


def legendre_q(n: int, z: ArrayLike) -> Union[complex, np.ndarray]:
    value = legendre_q_table(n, z)[n]
    return complex(value) if np.ndim(value) == 0 else value


# =============================================================================
# Grid calculus
# =============================================================================

def antiderivative(values: ArrayLike, grid: Grid) -> np.ndarray:
    """F with F(0) = 0 and F' = values, accumulated outward from 0

    Each interval uses a 5-node Lagrange stencil inside its piece, so the
    rule is exact for quartics. Leading axes of ``values`` are batched.
    """
    v = np.asarray(values)
    if v.shape[-1] != len(grid):
        raise DomainError(f"expected {len(grid)} samples on the last axis, got {v.shape[-1]}")
    v = v.astype(np.result_type(v, float), copy=False)
    increments = np.empty(v.shape[:-1] + (grid.M,), dtype=v.dtype)
    for lo, hi in grid.pieces():
        intervals = np.arange(lo, hi)
        start = np.clip(intervals - 2, lo, hi - 4)
        stencil = start[:, None] + np.arange(5)
        weights = _INTEGRATION_WEIGHTS[intervals - start]
        increments[..., lo:hi] = grid.h * np.einsum("ik,...ik->...i", weights, v[..., stencil])

    z = grid.zero_index
    result = np.zeros_like(v)
    result[..., z + 1:] = np.cumsum(increments[..., z:], axis=-1)
    if z > 0:
        result[..., :z] = -np.cumsum(increments[..., :z][..., ::-1], axis=-1)[..., ::-1]
    return result


def differentiate(values: ArrayLike, grid: Grid) -> np.ndarray:
    """Five-point finite-difference derivative, one-sided near piece ends"""
    v = np.asarray(values)
    v = v.astype(np.result_type(v, float), copy=False)
    out = np.empty_like(v)
    for lo, hi in grid.pieces():
        nodes = np.arange(lo, hi + 1)
        start = np.clip(nodes - 2, lo, hi - 4)
        stencil = start[:, None] + np.arange(5)
        weights = _DERIVATIVE_WEIGHTS[nodes - start]
        out[..., lo:hi + 1] = np.einsum("ik,...ik->...i", weights, v[..., stencil]) / grid.h
    return out


def interpolate(values: ArrayLike, grid: Grid, x: ArrayLike) -> np.ndarray:
    """Local cubic (4-node Lagrange) interpolation of grid samples at x

    ``values`` may carry leading batch axes; the result has shape
    values.shape[:-1] + x.shape.
    """
    v = np.asarray(values)
    xs = np.asarray(x, dtype=float)
    if not grid.contains(xs):
        raise DomainError(f"interpolation point outside [{grid.a_left}, {grid.a_right}]")
    s = (xs.ravel() - grid.a_left) / grid.h
    pieces = grid.pieces()
    edges = np.array([hi for _, hi in pieces[:-1]], dtype=float)
    which = np.searchsorted(edges, s, side="right")
    lo = np.array([p[0] for p in pieces])[which]
    hi = np.array([p[1] for p in pieces])[which]
    cell = np.clip(np.floor(s).astype(int), lo, hi - 1)
    start = np.clip(cell - 1, lo, hi - 3)
    t = s - start
    weights = np.ones((s.size, 4))
    for k in range(4):
        for j in range(4):
            if j != k:
                weights[:, k] *= (t - j) / (k - j)
    stencil = start[:, None] + np.arange(4)
    out = np.einsum("ik,...ik->...i", weights, v[..., stencil])
    return out.reshape(v.shape[:-1] + xs.shape)


def compensated_sum(terms: Iterable[np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    """Neumaier summation over arrays, real and imaginary parts separately

    Returns (sum, largest running-sum magnitude seen) for cancellation checks.
    """
    total_re = total_im = comp_re = comp_im = peak = None

    def step(s, c, t):
        new = s + t
        c = c + np.where(np.abs(s) >= np.abs(t), (s - new) + t, (t - new) + s)
        return new, c

    for term in terms:
        t = np.asarray(term, dtype=complex)
        if total_re is None:
            total_re, total_im = t.real.copy(), t.imag.copy()
            comp_re, comp_im = np.zeros_like(total_re), np.zeros_like(total_im)
            peak = np.abs(t)
            continue
        total_re, comp_re = step(total_re, comp_re, t.real)
        total_im, comp_im = step(total_im, comp_im, t.imag)
        peak = np.maximum(peak, np.maximum(np.abs(t), np.hypot(total_re, total_im)))

    if total_re is None:
        raise ValueError("compensated_sum needs at least one term")
    return (total_re + comp_re) + 1j * (total_im + comp_im), peak


# =============================================================================
# Least squares
# =============================================================================

@dataclass
class LstsqResult:
    """Least-squares solution with diagnostics"""
    x: np.ndarray
    residual_norm: float
    r_diagonal: np.ndarray
    pivoted: bool = False
    rank: int = -1

    @property
    def condition_estimate(self) -> float:
        d = np.abs(self.r_diagonal)
        d = d[d > 0]
        return float(d.max() / d.min()) if d.size else math.inf


def lstsq(A: np.ndarray, b: np.ndarray, rank_tol: float = 1e-13) -> LstsqResult:
    """Minimize ||Ax - b|| by Householder QR (LAPACK geqrf through numpy)"""
    A = np.asarray(A)
    b = np.asarray(b)
    m, k = A.shape
    if m < k:
        raise DomainError(f"least squares needs at least as many rows as columns, got {m}x{k}")
    q, r = np.linalg.qr(A, mode="reduced")
    diag = np.diag(r)
    scale = np.linalg.norm(A, 2)
    weakest = int(np.argmin(np.abs(diag)))
    if scale == 0 or abs(diag[weakest]) < rank_tol * scale:
        raise RankDeficient(
            f"R[{weakest},{weakest}] = {abs(diag[weakest]):.3e} is below {rank_tol:g} * ||A|| = {rank_tol * scale:.3e}",
            column=weakest,
        )
    x = sp_linalg.solve_triangular(r, q.conj().T @ b)
    residual = float(np.linalg.norm(b - A @ x))
    return LstsqResult(x=x, residual_norm=residual, r_diagonal=diag, rank=k)


def lstsq_pivoted(A: np.ndarray, b: np.ndarray, rank_tol: float = 1e-13) -> LstsqResult:
    """Basic solution from column-pivoted QR, dropping columns below rank_tol"""
    A = np.asarray(A)
    b = np.asarray(b)
    q, r, perm = sp_linalg.qr(A, mode="economic", pivoting=True)
    diag = np.diag(r)
    rank = int(np.sum(np.abs(diag) >= rank_tol * abs(diag[0]))) if diag.size and diag[0] != 0 else 0
    x = np.zeros(A.shape[1], dtype=np.result_type(A, b))
    if rank:
        x[perm[:rank]] = sp_linalg.solve_triangular(r[:rank, :rank], (q.conj().T @ b)[:rank])
    residual = float(np.linalg.norm(b - A @ x))
    logger.debug(f"Pivoted QR kept {rank} of {A.shape[1]} columns")
    return LstsqResult(x=x, residual_norm=residual, r_diagonal=diag, pivoted=True, rank=rank)


# =============================================================================
# ODE oracle (Dormand-Prince 5(4))
# =============================================================================

_DP_C = (0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0)
_DP_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_DP_B = _DP_A[6]
_DP_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


@dataclass(frozen=True)
class OracleResult:
    """Solution value and derivative at x_end"""
    u: complex
    du: complex
    steps: int
    rejected: int


@dataclass
class _DormandPrince:
    """Adaptive stepper for y'' = (q - omega^2) y with error per unit length below tol"""
    q: Callable[[float], complex]
    omega2: complex
    tol: float
    span: float
    h_max: float
    p_scale: float = 1.0
    steps: int = 0
    rejected: int = 0

    def advance(self, x0: float, x1: float, y: complex, p: complex, h: float) -> Tuple[complex, complex, float]:
        direction = 1.0 if x1 >= x0 else -1.0
        x = x0
        remaining = abs(x1 - x0)
        ky = [0j] * 7
        kp = [0j] * 7
        while remaining > 1e-15 * max(1.0, abs(x1)):
            h = min(h, self.h_max)
            last = h >= remaining
            if last:
                h = remaining
            elif h < MIN_STEP:
                raise StepUnderflow(f"step {h:.3e} below {MIN_STEP:g} at x = {x:.6g}")
            hs = direction * h
            for i in range(7):
                yi, pi = y, p
                for j, a in enumerate(_DP_A[i]):
                    yi += hs * a * ky[j]
                    pi += hs * a * kp[j]
                ky[i] = pi
                kp[i] = (self.q(x + _DP_C[i] * hs) - self.omega2) * yi
            y_new = y + hs * sum(b * k for b, k in zip(_DP_B, ky))
            p_new = p + hs * sum(b * k for b, k in zip(_DP_B, kp))
            err_y = hs * sum(e * k for e, k in zip(_DP_E, ky))
            err_p = hs * sum(e * k for e, k in zip(_DP_E, kp))
            allowed = self.tol * h / self.span
            err = max(abs(err_y) / (1.0 + max(abs(y), abs(y_new))),
                      abs(err_p) / (self.p_scale + max(abs(p), abs(p_new)))) / allowed
            if err <= 1.0:
                y, p = y_new, p_new
                x = x1 if last else x + hs
                remaining = abs(x1 - x)
                self.steps += 1
            else:
                self.rejected += 1
                if last and h <= MIN_STEP:
                    raise StepUnderflow(f"step {h:.3e} below {MIN_STEP:g} at x = {x:.6g}")
            factor = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
            h = h * factor
        return y, p, h


def _segment_potential(potential: PotentialSpec, a: float, b: float) -> Callable[[float], complex]:
    """Scalar q on [a, b]; when an end is a jump, evaluate strictly inside"""
    touches = any(abs(a - c) < 1e-12 * max(1.0, abs(c)) or abs(b - c) < 1e-12 * max(1.0, abs(c))
                  for c in potential.breakpoints)
    if not touches:
        return potential.scalar
    lo, hi = min(a, b), max(a, b)
    nudge = 1e-10 * (hi - lo)
    return lambda x: potential.scalar(min(max(x, lo + nudge), hi - nudge))


def _segments(potential: PotentialSpec, x0: float, x1: float) -> List[Tuple[float, float]]:
    lo, hi = min(x0, x1), max(x0, x1)
    cuts = [c for c in potential.breakpoints if lo < c < hi]
    if x1 < x0:
        cuts = cuts[::-1]
    bounds = [x0] + cuts + [x1]
    return list(zip(bounds[:-1], bounds[1:]))


def _advance_piecewise(stepper: "_DormandPrince", q: PotentialSpec, x0: float, x1: float,
                       y: complex, p: complex, h: float) -> Tuple[complex, complex, float]:
    """Advance from x0 to x1, restarting at every jump of q strictly between them"""
    pieces = _segments(q, x0, x1)
    for a, b in pieces:
        stepper.q = _segment_potential(q, a, b)
        y, p, h_next = stepper.advance(a, b, y, p, h)
        # a sliver next to a jump must not shrink the step for the next piece
        h = max(h_next, h) if len(pieces) > 1 else h_next
    return y, p, h


def ode_oracle(q: PotentialSpec, omega: complex, x_end: float, tol: float = 1e-12) -> OracleResult:
    """Integrate y'' = (q - omega^2) y, y(0) = 1, y'(0) = i omega, up to x_end"""
    if tol < MIN_ORACLE_TOL:
        raise DomainError(f"oracle tolerance must be at least {MIN_ORACLE_TOL:g}, got {tol:g}")
    omega = complex(omega)
    y, p = 1.0 + 0j, 1j * omega
    span = abs(x_end)
    if span == 0:
        return OracleResult(u=y, du=p, steps=0, rejected=0)
    w = abs(omega)
    h_max = 0.1 / w if w > 0 else span
    stepper = _DormandPrince(q=q.scalar, omega2=omega * omega, tol=tol, span=span,
                             h_max=h_max, p_scale=max(1.0, w))
    h = min(h_max, span / 16, 0.01)
    y, p, h = _advance_piecewise(stepper, q, 0.0, x_end, y, p, h)
    return OracleResult(u=y, du=p, steps=stepper.steps, rejected=stepper.rejected)


def integrate_on_grid(
    q: PotentialSpec,
    grid: Grid,
    omega: complex = 0.0,
    initial: Tuple[complex, complex] = (1.0, 0.0),
    tol: float = 1e-11,
) -> Tuple[np.ndarray, np.ndarray]:
    """(y, y') at every grid node, integrating node to node outward from 0"""
    omega = complex(omega)
    w = abs(omega)
    span = max(abs(grid.a_left), abs(grid.a_right))
    h_max = min(grid.h, 0.1 / w) if w > 0 else grid.h
    stepper = _DormandPrince(q=q.scalar, omega2=omega * omega, tol=tol, span=span,
                             h_max=h_max, p_scale=max(1.0, w))
    pts = grid.points
    z = grid.zero_index
    y_out = np.empty(len(grid), dtype=complex)
    p_out = np.empty(len(grid), dtype=complex)
    y_out[z], p_out[z] = initial
    for direction in (1, -1):
        y, p = complex(initial[0]), complex(initial[1])
        h = h_max
        i = z
        while 0 <= i + direction <= grid.M:
            a, b = pts[i], pts[i + direction]
            y, p, h = _advance_piecewise(stepper, q, a, b, y, p, h)
            i += direction
            y_out[i], p_out[i] = y, p
    logger.debug(f"Grid integration took {stepper.steps} steps ({stepper.rejected} rejected)")
    return y_out, p_out
