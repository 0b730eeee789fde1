#!/usr/bin/env python3
"""
Transmutation Kernel - Goursat Oracle
Independent kernel values by successive approximations on characteristic coordinates
"""

import cmath
import logging

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import iv

from numerics import PotentialSpec
from transmutation_errors import DomainError

logger = logging.getLogger(__name__)


def _picard(q: PotentialSpec, u: float, v: float, cells: int, tol: float, max_iter: int) -> complex:
    alpha = np.linspace(0.0, u, cells + 1)
    beta = np.linspace(0.0, v, cells + 1)
    half_integral = 0.5 * cumulative_trapezoid(q(alpha), alpha, initial=0.0)
    source = np.repeat(half_integral[:, None], cells + 1, axis=1)
    q_sum = q(alpha[:, None] + beta[None, :])

    H = source.astype(complex)
    for iteration in range(max_iter):
        inner = cumulative_trapezoid(q_sum * H, beta, axis=1, initial=0.0)
        update = source + cumulative_trapezoid(inner, alpha, axis=0, initial=0.0)
        change = np.max(np.abs(update - H))
        H = update
        if change <= tol * max(1.0, np.max(np.abs(H))):
            logger.debug(f"Goursat iteration converged after {iteration + 1} sweeps")
            break
    return complex(H[-1, -1])


def goursat_kernel(
    q: PotentialSpec,
    x: float,
    t: float,
    cells: int = 200,
    tol: float = 1e-13,
    max_iter: int = 200,
) -> complex:
    """K(x, t) for 0 < x, |t| <= x from H(u, v) = 1/2 int_0^u q + int_0^u int_0^v q(a+b) H

    Trapezoidal sweeps at two resolutions combined by Richardson extrapolation.
    """
    if x <= 0 or abs(t) > x * (1 + 1e-12):
        raise DomainError(f"Goursat oracle needs 0 < x and |t| <= x, got x={x}, t={t}")
    u = 0.5 * (x + t)
    v = 0.5 * (x - t)
    if u <= 0:
        return 0j
    if v <= 0:
        coarse = _picard(q, u, 0.0, cells, tol, 1)
        fine = _picard(q, u, 0.0, 2 * cells, tol, 1)
    else:
        coarse = _picard(q, u, v, cells, tol, max_iter)
        fine = _picard(q, u, v, 2 * cells, tol, max_iter)
    return (4.0 * fine - coarse) / 3.0


def constant_potential_kernel(c: complex, x: float, t: float) -> complex:
    """Closed form (c/2)(x+t) I_1(z)/z, z = sqrt(c (x^2 - t^2)), for q = c"""
    z = cmath.sqrt(c * (x * x - t * t))
    ratio = 0.5 if abs(z) < 1e-8 else complex(iv(1, z)) / z
    return 0.5 * c * (x + t) * ratio


def constant_potential_solution(c: complex, omega: complex, x: float) -> complex:
    """u(omega, x) for q = c: cos(W x) + i omega sin(W x)/W, W = sqrt(omega^2 - c)"""
    W = cmath.sqrt(omega * omega - c)
    sinc = x if abs(W) < 1e-12 else cmath.sin(W * x) / W
    return cmath.cos(W * x) + 1j * omega * sinc
