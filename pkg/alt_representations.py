#!/usr/bin/env python3
"""
Transmutation Kernel - Laguerre and Hermite Representations
Coefficients a_n(x), c_n(x) and their solution series with the omega strips they cover
"""

import math
import logging
import warnings
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd

from formal_powers import FormalPowersTable
from kernel_base import TAIL_MARGIN, KernelCoefficients, Representation, log_prefactor
from kernel_legendre import LegendreKernel, build_beta
from numerics import (
    compensated_sum,
    hermite_coeffs,
    hermite_normalized_table,
    laguerre_table,
    legendre_table,
)
from transmutation_errors import CancellationWarning, DomainError, MagnitudeWarning, OrderError

logger = logging.getLogger(__name__)

DEFAULT_N_LAGUERRE = 40
DEFAULT_N_HERMITE = 40
LAGUERRE_CAP = 120
HERMITE_CAP = 100
CANCELLATION_RATIO = 1e-12
METHODS = ("projection", "direct")
_CHUNK = 2048


class LaguerreKernel(KernelCoefficients):
    """a_n(x) of K~(x, y) = sum a_n(x) L_n(x - y) e^{-(x - y)}"""

    representation = Representation.LAGUERRE

    @property
    def a(self) -> np.ndarray:
        return self.coefficients

    def tail_weights(self, x: np.ndarray, orders: np.ndarray) -> np.ndarray:
        return np.ones((orders.size,) + np.shape(x))

    def error_bound(self, x: float, omega: complex) -> float:
        """eps e^{-Im(omega) x}/sqrt(1 - 2 Im(omega)), valid for Im(omega) < 1/2"""
        _check_laguerre_omega(omega)
        eps = float(self.tail_estimate(x))
        im = complex(omega).imag
        return eps * math.exp(-im * x) / math.sqrt(1.0 - 2.0 * im)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, N: int) -> "LaguerreKernel":
        grid, table = cls.table_from_frame(frame)
        return cls(grid, N, table, method="restored")


class HermiteKernel(KernelCoefficients):
    """c_n(x) of K~(x, y) = sum c_n(x) H_n(y) e^{-y^2}"""

    representation = Representation.HERMITE

    @property
    def c(self) -> np.ndarray:
        return self.coefficients

    def tail_weights(self, x: np.ndarray, orders: np.ndarray) -> np.ndarray:
        weights = np.exp([log_prefactor(int(n)) for n in orders])
        return np.broadcast_to(weights.reshape((-1,) + (1,) * np.ndim(x)), (orders.size,) + np.shape(x))

    def error_bound(self, x: float, omega: complex) -> float:
        """pi^{1/4} e^{Im(omega)^2 / 2} eps"""
        eps = float(self.tail_estimate(x))
        return math.pi ** 0.25 * math.exp(0.5 * complex(omega).imag ** 2) * eps

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, N: int) -> "HermiteKernel":
        grid, table = cls.table_from_frame(frame)
        return cls(grid, N, table, method="restored")


# =============================================================================
# coefficient builders
# =============================================================================

def _beta_source(powers: FormalPowersTable, n_top: int, beta_kernel: Optional[LegendreKernel]) -> np.ndarray:
    if beta_kernel is not None and beta_kernel.full_table.shape[0] > n_top:
        return beta_kernel.full_table[:n_top + 1]
    kernel = build_beta(powers, N=min(n_top, powers.K_max), margin=n_top - min(n_top, powers.K_max))
    return kernel.full_table[:n_top + 1]


def _project(beta: np.ndarray, x: np.ndarray, n_top: int, family) -> np.ndarray:
    """sum_g w_g (sum_m beta_m P_m(s_g)) B_n(x, s_g) over Gauss-Legendre nodes, chunked in x"""
    nodes, weights = np.polynomial.legendre.leggauss(n_top + 2)
    P = legendre_table(n_top, nodes)
    out = np.empty((n_top + 1, x.size), dtype=complex)
    for start in range(0, x.size, _CHUNK):
        chunk = slice(start, start + _CHUNK)
        kernel_at_nodes = np.einsum("mb,mg->bg", beta[:, chunk], P) * weights[None, :]
        basis = family(n_top, x[chunk, None], nodes[None, :])
        out[:, chunk] = np.einsum("bg,nbg->nb", kernel_at_nodes, basis)
    return out


def _laguerre_family(n_top: int, x: np.ndarray, s: np.ndarray) -> np.ndarray:
    return laguerre_table(n_top, x * (1.0 - s))


def _hermite_family(n_top: int, x: np.ndarray, s: np.ndarray) -> np.ndarray:
    return hermite_normalized_table(n_top, x * s)


def _warn_cancellation(flagged: int, total: int, name: str) -> None:
    if flagged:
        warnings.warn(
            f"{name}: {flagged} of {total} coefficient values lost more than 12 digits to cancellation",
            CancellationWarning, stacklevel=3,
        )


def _laguerre_direct(powers: FormalPowersTable, n_top: int) -> np.ndarray:
    """a_n = sum_j (-1)^j (phi_j - x^j) sum_k (-1)^k C(n,k) C(k,j)/k! x^(k-j)"""
    x = powers.grid.points
    diffs = np.array([powers.phi[j] - x ** j for j in range(n_top + 1)])
    out = np.empty((n_top + 1, x.size), dtype=complex)
    flagged = 0
    for n in range(n_top + 1):
        outer = []
        for j in range(n + 1):
            inner_terms = []
            for k in range(j, n + 1):
                log_c = (math.lgamma(n + 1) - math.lgamma(n - k + 1) - math.lgamma(j + 1)
                         - math.lgamma(k - j + 1) - math.lgamma(k + 1))
                sign = -1.0 if (j + k) % 2 else 1.0
                inner_terms.append(sign * math.exp(log_c) * x ** (k - j))
            inner, _ = compensated_sum(inner_terms)
            outer.append(diffs[j] * inner)
        total, peak = compensated_sum(outer)
        lost = (np.abs(total) < CANCELLATION_RATIO * peak) & (peak > 1e-300)
        flagged += int(np.count_nonzero(lost))
        out[n] = total
    _warn_cancellation(flagged, out.size, "Laguerre coefficients")
    return out


def _hermite_direct(powers: FormalPowersTable, n_top: int) -> np.ndarray:
    """c_n = (sqrt(pi) n! 2^n)^{-1} sum_k h_{k,n} (phi_k - x^k)"""
    x = powers.grid.points
    diffs = np.array([powers.phi[k] - x ** k for k in range(n_top + 1)])
    out = np.empty((n_top + 1, x.size), dtype=complex)
    flagged = 0
    for n in range(n_top + 1):
        h = hermite_coeffs(n).coeffs
        scale = math.exp(-log_prefactor(n))
        total, peak = compensated_sum(h[k] * scale * diffs[k] for k in range(n + 1) if h[k] != 0)
        lost = (np.abs(total) < CANCELLATION_RATIO * peak) & (peak > 1e-300)
        flagged += int(np.count_nonzero(lost))
        out[n] = total
    _warn_cancellation(flagged, out.size, "Hermite coefficients")
    return out


def _check_build(powers: FormalPowersTable, N: int, cap: int, method: str) -> None:
    if N < 0:
        raise OrderError(f"truncation order must be nonnegative, got {N}")
    if N > powers.K_max:
        raise OrderError(f"truncation order {N} exceeds formal powers K_max={powers.K_max}")
    if N > cap:
        raise OrderError(f"truncation order {N} exceeds the cap {cap} for this representation")
    if method not in METHODS:
        raise DomainError(f"unknown method {method!r}; expected one of {METHODS}")


def build_a(
    powers: FormalPowersTable,
    N: int = DEFAULT_N_LAGUERRE,
    method: str = "projection",
    margin: int = TAIL_MARGIN,
    beta_kernel: Optional[LegendreKernel] = None,
) -> LaguerreKernel:
    """Tabulate a_n for n = 0..N (+ margin)"""
    _check_build(powers, N, LAGUERRE_CAP, method)
    if method == "projection":
        n_top = N + margin
        beta = _beta_source(powers, n_top, beta_kernel)
        table = _project(beta, powers.grid.points, n_top, _laguerre_family)
    else:
        n_top = min(N + margin, powers.K_max)
        table = _laguerre_direct(powers, n_top)
    table[:, powers.grid.zero_index] = 0.0
    return LaguerreKernel(powers.grid, N, table, method=method, f=powers.f)


def build_c(
    powers: FormalPowersTable,
    N: int = DEFAULT_N_HERMITE,
    method: str = "projection",
    margin: int = TAIL_MARGIN,
    beta_kernel: Optional[LegendreKernel] = None,
) -> HermiteKernel:
    """Tabulate c_n for n = 0..N (+ margin)"""
    _check_build(powers, N, HERMITE_CAP, method)
    if method == "projection":
        n_top = N + margin
        beta = _beta_source(powers, n_top, beta_kernel)
        table = _project(beta, powers.grid.points, n_top, _hermite_family)
        # H_n = sqrt(2^n n!) H~_n, so 1/(sqrt(pi) 2^n n!) becomes 1/(sqrt(pi) sqrt(2^n n!))
        scale = np.exp([-(0.5 * math.log(math.pi) + 0.5 * (n * math.log(2.0) + math.lgamma(n + 1)))
                        for n in range(n_top + 1)])
        table = table * scale[:, None]
    else:
        n_top = min(N + margin, powers.K_max)
        table = _hermite_direct(powers, n_top)
    table[:, powers.grid.zero_index] = 0.0
    return HermiteKernel(powers.grid, N, table, method=method, f=powers.f)


# =============================================================================
# solution series and kernel evaluation
# =============================================================================

def _check_laguerre_omega(omega: complex) -> None:
    omega = complex(omega)
    if omega.imag >= 0.5:
        raise DomainError(f"Laguerre series needs Im(omega) < 1/2, got {omega}")
    if abs(1.0 + 1j * omega) == 0.0:
        raise DomainError("Laguerre series has a pole at omega = i")


def _check_positive_x(xs: np.ndarray) -> None:
    if np.any(xs < 0):
        raise DomainError("Laguerre representation is defined for x >= 0")


def solve_u_laguerre(kern: LaguerreKernel, omega: complex, x) -> Union[complex, np.ndarray]:
    """e^{i omega x}(1 + sum a_n r^n/(1 + i omega)), r = i omega/(1 + i omega)"""
    _check_laguerre_omega(omega)
    omega = complex(omega)
    xs = np.asarray(x, dtype=float)
    _check_positive_x(xs)
    a = kern.coefficients_at(xs)
    denom = 1.0 + 1j * omega
    r = 1j * omega / denom
    acc = a[kern.N].copy()
    for n in range(kern.N - 1, -1, -1):
        acc = acc * r + a[n]
    u = np.exp(1j * omega * xs) * (1.0 + acc / denom)
    kern.record_evaluations(np.size(u))
    return complex(u) if np.ndim(u) == 0 else u


def solve_u_hermite(kern: HermiteKernel, omega: complex, x) -> Union[complex, np.ndarray]:
    """e^{i omega x} + sqrt(pi) e^{-omega^2/4} sum c_n (i omega)^n"""
    omega = complex(omega)
    if abs(omega) > 2.0 * math.sqrt(max(kern.N, 1)):
        warnings.warn(
            f"|omega| = {abs(omega):.3g} exceeds 2*sqrt(N) = {2 * math.sqrt(kern.N):.3g}; "
            f"Hermite series is not resolved",
            MagnitudeWarning, stacklevel=2,
        )
    xs = np.asarray(x, dtype=float)
    c = kern.coefficients_at(xs)
    z = 1j * omega
    acc = c[kern.N].copy()
    for n in range(kern.N - 1, -1, -1):
        acc = acc * z + c[n]
    u = np.exp(1j * omega * xs) + math.sqrt(math.pi) * np.exp(-omega * omega / 4.0) * acc
    kern.record_evaluations(np.size(u))
    return complex(u) if np.ndim(u) == 0 else u


def kernel_eval_laguerre(kern: LaguerreKernel, x: float, y) -> Union[complex, np.ndarray]:
    """K~_N(x, y) = sum a_n(x) L_n(x - y) e^{-(x - y)} on 0 < x, |y| <= x"""
    ys = np.asarray(y, dtype=float)
    if x <= 0 or np.any(np.abs(ys) > x * (1 + 1e-12)):
        raise DomainError(f"Laguerre kernel needs x > 0 and |y| <= x, got x={x}")
    a = kern.coefficients_at(x)
    t = x - ys
    value = np.tensordot(a, laguerre_table(kern.N, t), axes=(0, 0)) * np.exp(-t)
    return complex(value) if np.ndim(value) == 0 else value


def kernel_eval_hermite(kern: HermiteKernel, x: float, y) -> Union[complex, np.ndarray]:
    """K~_N(x, y) = sum c_n(x) H_n(y) e^{-y^2}"""
    ys = np.asarray(y, dtype=float)
    c = kern.coefficients_at(x)
    scale = np.exp([0.5 * (n * math.log(2.0) + math.lgamma(n + 1)) for n in range(kern.N + 1)])
    value = np.tensordot(c * scale, hermite_normalized_table(kern.N, ys), axes=(0, 0)) * np.exp(-ys * ys)
    return complex(value) if np.ndim(value) == 0 else value


def error_bounds(kern: KernelCoefficients, x: float, omega: complex) -> Dict[str, float]:
    return {"tail": float(kern.tail_estimate(x)), "bound": kern.error_bound(x, omega)}
