#!/usr/bin/env python3
"""
Transmutation Kernel - Fourier-Legendre Representation
Coefficients beta_n(x), kernel evaluation and the Neumann series of Bessel functions
"""

import math
import time
import logging
from typing import Dict, Sequence, Union

import numpy as np
import pandas as pd

from formal_powers import FormalPowersTable
from kernel_base import TAIL_MARGIN, KernelCoefficients, Representation
from numerics import (
    Grid,
    antiderivative,
    compensated_sum,
    legendre_coeffs,
    legendre_table,
    spherical_bessel_derivative_table,
    spherical_bessel_table,
)
from transmutation_errors import DomainError, OrderError

logger = logging.getLogger(__name__)

DEFAULT_N = 32
METHODS = ("recursive", "direct")
UNDERFLOW = 1e-280


class LegendreKernel(KernelCoefficients):
    """beta_n(x) of K(x, t) = sum beta_n(x)/x P_n(t/x)"""

    representation = Representation.LEGENDRE

    @property
    def beta(self) -> np.ndarray:
        return self.coefficients

    def tail_weights(self, x: np.ndarray, orders: np.ndarray) -> np.ndarray:
        ax = np.abs(np.asarray(x, dtype=float))
        with np.errstate(divide="ignore"):
            scale = np.where(ax > 0, 2.0 / ax, 0.0)
        return scale[None, ...] / (2 * orders + 1).reshape((-1,) + (1,) * ax.ndim)

    def error_bounds(self, x: float, strip: float = 0.0) -> Dict[str, float]:
        """Real-axis bound eps*sqrt(2|x|) and strip bound eps*sinh(C|x|)/C"""
        eps = float(self.tail_estimate(x))
        ax = abs(x)
        strip_bound = eps * (math.sinh(strip * ax) / strip if strip > 0 else ax)
        return {"tail": eps, "real": eps * math.sqrt(2.0 * ax), "strip": strip_bound}

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, N: int) -> "LegendreKernel":
        grid, table = cls.table_from_frame(frame)
        return cls(grid, N, table, method="restored")


def _zone_radius(n: int, grid: Grid) -> int:
    """Nodes within this many steps of 0 have unreliable ratios for order n"""
    radius = max(4, 2 * n)
    if n > 0:
        underflow_steps = int(math.ceil(UNDERFLOW ** (1.0 / n) / grid.h))
        radius = max(radius, underflow_steps + 1)
    return radius


def _fill_near_zero(row: np.ndarray, n: int, grid: Grid) -> None:
    """Replace values near x = 0 by value(x_r)*(x/x_r)^2 from the nearest trusted node"""
    z = grid.zero_index
    radius = _zone_radius(n, grid)
    row[z] = 0.0
    for side in (1, -1):
        limit = grid.M - z if side > 0 else z
        if limit == 0:
            continue
        ref = min(radius, limit)
        reference = row[z + side * ref]
        steps = np.arange(1, ref)
        row[z + side * steps] = reference * (steps / ref) ** 2


def _beta_recursive(grid: Grid, f: np.ndarray, n_top: int) -> np.ndarray:
    """beta_n for n = 0..n_top from the paired deviations of f and 1/f images

    delta_n = sigma_n/x^n - 1 and eps_n = gamma_n/x^n - 1, where sigma_n and
    gamma_n are the images of x^n built from f and from 1/f. Each step only
    integrates s^(n-1) times differences of lower deviations, so nothing
    cancels; beta_n = (2n+1)/2 * delta_n.
    """
    x = grid.points
    inv_f = 1.0 / f
    size = len(grid)
    delta = np.empty((n_top + 1, size), dtype=complex)
    eps = np.empty((n_top + 1, size), dtype=complex)
    delta[0] = f - 1.0
    eps[0] = inv_f - 1.0

    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        if n_top >= 1:
            delta[1] = f * antiderivative(inv_f ** 2 - 1.0, grid) / x + delta[0]
            eps[1] = inv_f * antiderivative(f ** 2 - 1.0, grid) / x + eps[0]
            _fill_near_zero(delta[1], 1, grid)
            _fill_near_zero(eps[1], 1, grid)
        for n in range(2, n_top + 1):
            x_prev = x ** (n - 1)
            x_n = x ** n
            trusted = np.abs(x_n) > UNDERFLOW
            gd = antiderivative(x_prev * (eps[n - 1] - delta[n - 2]) * inv_f, grid)
            ge = antiderivative(x_prev * (delta[n - 1] - eps[n - 2]) * f, grid)
            delta[n] = delta[n - 2] + (2 * n - 1) * f * np.where(trusted, gd / x_n, 0.0)
            eps[n] = eps[n - 2] + (2 * n - 1) * inv_f * np.where(trusted, ge / x_n, 0.0)
            _fill_near_zero(delta[n], n, grid)
            _fill_near_zero(eps[n], n, grid)

    orders = np.arange(n_top + 1)[:, None]
    return (2 * orders + 1) / 2.0 * delta


def _beta_direct(powers: FormalPowersTable, n_top: int) -> np.ndarray:
    """Literal sum (2n+1)/2 * sum_k l_{k,n} (phi_k/x^k - 1), compensated"""
    grid = powers.grid
    x = grid.points
    size = len(grid)
    ratios = np.empty((n_top + 1, size), dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
        for k in range(n_top + 1):
            x_k = x ** k
            ratios[k] = np.where(np.abs(x_k) > UNDERFLOW, (powers.phi[k] - x_k) / x_k, 0.0)

    beta = np.empty((n_top + 1, size), dtype=complex)
    for n in range(n_top + 1):
        coeffs = legendre_coeffs(n).coeffs
        total, _ = compensated_sum(coeffs[k] * ratios[k] for k in range(n + 1) if coeffs[k] != 0)
        beta[n] = (2 * n + 1) / 2.0 * total
        if n >= 1:
            _fill_near_zero(beta[n], n, grid)
    beta[:, grid.zero_index] = 0.0
    return beta


def build_beta(
    powers: FormalPowersTable,
    N: int = DEFAULT_N,
    method: str = "recursive",
    margin: int = TAIL_MARGIN,
) -> LegendreKernel:
    """Tabulate beta_n for n = 0..N (+ margin for the tail window)"""
    if N < 0:
        raise OrderError(f"truncation order must be nonnegative, got {N}")
    if N > powers.K_max:
        raise OrderError(f"truncation order {N} exceeds formal powers K_max={powers.K_max}")
    if method not in METHODS:
        raise DomainError(f"unknown beta method {method!r}; expected one of {METHODS}")

    started = time.perf_counter()
    if method == "recursive":
        table = _beta_recursive(powers.grid, powers.f, N + margin)
    else:
        top = min(N + margin, powers.K_max)
        if top < N + margin:
            logger.warning(f"⚠️ Direct beta limited to order {top} by K_max; tail window shrinks to {top - N}")
        table = _beta_direct(powers, top)

    kernel = LegendreKernel(powers.grid, N, table, method=method, f=powers.f)
    kernel.state["build_seconds"] = time.perf_counter() - started
    return kernel


def kernel_eval(kern: LegendreKernel, x: float, t) -> Union[complex, np.ndarray]:
    """K_N(x, t) = sum beta_n(x)/x P_n(t/x) for |t| <= |x|"""
    if x == 0:
        raise DomainError("kernel is evaluated at x != 0")
    ts = np.asarray(t, dtype=float)
    if np.any(np.abs(ts) > abs(x) * (1 + 1e-12)):
        raise DomainError(f"kernel needs |t| <= |x| = {abs(x)}")
    beta = kern.coefficients_at(x)
    P = legendre_table(kern.N, np.clip(ts / x, -1.0, 1.0))
    value = np.tensordot(beta / x, P, axes=(0, 0))
    kern.record_evaluations(ts.size)
    return complex(value) if np.ndim(value) == 0 else value


def _imaginary_powers(N: int) -> np.ndarray:
    return np.array([1, 1j, -1, -1j])[np.arange(N + 1) % 4]


def solve_u_nsbf(kern: LegendreKernel, omega, x) -> Union[complex, np.ndarray]:
    """u_N(omega, x) = e^{i omega x} + 2 sum i^n beta_n(x) j_n(omega x)

    omega and x broadcast against each other.
    """
    om, xs = np.broadcast_arrays(np.asarray(omega, dtype=complex), np.asarray(x, dtype=float))
    beta = kern.coefficients_at(xs)
    j = spherical_bessel_table(kern.N, om * xs)
    weights = _imaginary_powers(kern.N).reshape((-1,) + (1,) * xs.ndim)
    series = np.sum(weights * beta * j, axis=0)
    u = np.exp(1j * om * xs) + 2.0 * series
    kern.record_evaluations(u.size)
    return complex(u) if u.ndim == 0 else u


def solve_du_nsbf(kern: LegendreKernel, omega, x) -> Union[complex, np.ndarray]:
    """x-derivative of u_N: differentiated beta_n plus analytic j_n'"""
    om, xs = np.broadcast_arrays(np.asarray(omega, dtype=complex), np.asarray(x, dtype=float))
    beta = kern.coefficients_at(xs)
    beta_prime = kern.values_at(kern.derivative_table(), xs)
    j, j_prime = spherical_bessel_derivative_table(kern.N, om * xs)
    weights = _imaginary_powers(kern.N).reshape((-1,) + (1,) * xs.ndim)
    series = np.sum(weights * (beta_prime * j + om * beta * j_prime), axis=0)
    du = 1j * om * np.exp(1j * om * xs) + 2.0 * series
    return complex(du) if du.ndim == 0 else du


def tail_estimate(kern: LegendreKernel, x) -> Union[float, np.ndarray]:
    return kern.tail_estimate(x)


def solution_frame(kern: LegendreKernel, omegas: Sequence[complex], xs: Sequence[float]) -> pd.DataFrame:
    """Rows (omega, x, u, tail) for a batch; real-axis bound eps*sqrt(2|x|)"""
    om = np.asarray(omegas, dtype=complex)
    x = np.asarray(xs, dtype=float)
    u = solve_u_nsbf(kern, om[:, None], x[None, :])
    tail = np.broadcast_to(kern.tail_estimate(x), u.shape)
    return pd.DataFrame({
        "re_omega": np.repeat(om.real, x.size),
        "im_omega": np.repeat(om.imag, x.size),
        "x": np.tile(x, om.size),
        "re_u": u.real.ravel(),
        "im_u": u.imag.ravel(),
        "tail": tail.ravel(),
        "bound": (tail * np.sqrt(2.0 * np.abs(x))[None, :]).ravel(),
    })
